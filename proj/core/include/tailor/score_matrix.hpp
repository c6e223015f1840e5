// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tailor {

// Dense 0/1 response matrix: rows are (model, shot-count) subjects, columns
// are validation items.
struct ScoreMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> item_ids;
    std::vector<std::uint8_t> cells;  // row-major, values 0 or 1

    std::size_t rows() const { return row_ids.size(); }
    std::size_t cols() const { return item_ids.size(); }

    std::uint8_t at(std::size_t r, std::size_t c) const { return cells[r * cols() + c]; }
    void set(std::size_t r, std::size_t c, std::uint8_t v) { cells[r * cols() + c] = v; }

    // Throws DimensionMismatch unless cells.size() == rows() * cols().
    void validate() const;
};

// CSV layout: header "row_id,<item_id>,..." then one line per row.
std::string matrix_to_csv(const ScoreMatrix& m);
ScoreMatrix matrix_from_csv(const std::string& csv);
void write_matrix_csv(const ScoreMatrix& m, const std::filesystem::path& path);
ScoreMatrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace tailor
