#include "srd/rng.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace srd {

namespace {

std::array<unsigned char, 32> sha256_raw(std::string_view data) {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
        throw std::runtime_error("sha256: digest failed");
    }
    return out;
}

void put_le64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::string_view label) {
    std::string buf;
    buf.reserve(16 + label.size());
    put_le64(buf, master);
    put_le64(buf, index);
    buf.append(label);
    const auto digest = sha256_raw(buf);
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed |= static_cast<std::uint64_t>(digest[i]) << (8 * i);
    return seed;
}

std::string sha256_hex(std::string_view data) {
    static const char* hex = "0123456789abcdef";
    const auto digest = sha256_raw(data);
    std::string s;
    s.reserve(64);
    for (unsigned char c : digest) {
        s.push_back(hex[c >> 4]);
        s.push_back(hex[c & 0xf]);
    }
    return s;
}

}  // namespace srd
