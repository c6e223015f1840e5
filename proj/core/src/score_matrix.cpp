// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/score_matrix.hpp"

#include <fstream>
#include <sstream>

#include "tailor/errors.hpp"

namespace tailor {

namespace {

// Ids are digests and "<model>#<n>shot" labels; CSV metacharacters inside
// them are a config mistake, not something worth an escaping scheme.
void check_csv_safe(const std::string& id) {
    if (id.find_first_of(",\"\n\r") != std::string::npos) {
        throw PreconditionViolation("id not CSV-safe: " + id);
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void ScoreMatrix::validate() const {
    if (cells.size() != rows() * cols()) {
        throw DimensionMismatch("matrix has " + std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(rows() * cols()));
    }
    for (std::uint8_t v : cells) {
        if (v > 1) throw DimensionMismatch("matrix cells must be 0 or 1");
    }
}

std::string matrix_to_csv(const ScoreMatrix& m) {
    m.validate();
    std::string out = "row_id";
    for (const auto& id : m.item_ids) {
        check_csv_safe(id);
        out += ',';
        out += id;
    }
    out += '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        check_csv_safe(m.row_ids[r]);
        out += m.row_ids[r];
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out += ',';
            out += m.at(r, c) ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

ScoreMatrix matrix_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw IoError("matrix CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "row_id") {
        throw IoError("matrix header must start with 'row_id'");
    }

    ScoreMatrix m;
    m.item_ids.assign(header.begin() + 1, header.end());

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DimensionMismatch("matrix row '" + (fields.empty() ? "" : fields[0]) + "' has " +
                                    std::to_string(fields.size() - 1) + " cells, expected " +
                                    std::to_string(header.size() - 1));
        }
        m.row_ids.push_back(fields[0]);
        for (std::size_t c = 1; c < fields.size(); ++c) {
            if (fields[c] == "0") {
                m.cells.push_back(0);
            } else if (fields[c] == "1") {
                m.cells.push_back(1);
            } else {
                throw IoError("matrix cell must be 0 or 1, got '" + fields[c] + "'");
            }
        }
    }
    m.validate();
    return m;
}

void write_matrix_csv(const ScoreMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write matrix: " + path.string());
    out << matrix_to_csv(m);
    if (!out) throw IoError("write failed: " + path.string());
}

ScoreMatrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read matrix: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return matrix_from_csv(ss.str());
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

}  // namespace tailor
