// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

#include "tailor/errors.hpp"

namespace tailor {

namespace {

std::string to_hex(const unsigned char* bytes, std::size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (std::size_t i = 0; i < len; ++i) {
        out[2 * i] = digits[bytes[i] >> 4];
        out[2 * i + 1] = digits[bytes[i] & 0xF];
    }
    return out;
}

struct CtxFree {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

std::array<unsigned char, 32> sha256_bytes(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, CtxFree> ctx(EVP_MD_CTX_new());
    std::array<unsigned char, 32> md{};
    unsigned int md_len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &md_len) != 1 || md_len != 32) {
        throw Error("sha256 digest failed");
    }
    return md;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    auto md = sha256_bytes(bytes);
    return to_hex(md.data(), md.size());
}

std::string sha256_hex_file(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.string().c_str(), "rb"),
                                                      &std::fclose);
    if (!f) throw IoError("cannot open for digest: " + path.string());

    std::unique_ptr<EVP_MD_CTX, CtxFree> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    std::array<char, 1 << 16> buf;
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), f.get())) > 0) {
        if (EVP_DigestUpdate(ctx.get(), buf.data(), n) != 1) throw Error("sha256 digest failed");
    }
    if (std::ferror(f.get())) throw IoError("read failed during digest: " + path.string());

    std::array<unsigned char, 32> md{};
    unsigned int md_len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md.data(), &md_len) != 1 || md_len != 32) {
        throw Error("sha256 digest failed");
    }
    return to_hex(md.data(), md.size());
}

std::string digest16(std::string_view bytes) { return sha256_hex(bytes).substr(0, 16); }

std::uint64_t digest_u64(std::string_view bytes) {
    auto md = sha256_bytes(bytes);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | md[static_cast<std::size_t>(i)];
    return v;
}

}  // namespace tailor
