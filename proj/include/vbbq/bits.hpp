#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vbbq {

// One bit per element, values 0/1. Bit 0 is the least significant bit of an
// integer and the LSB of byte 0 when packing.
using Bits = std::vector<std::uint8_t>;
using Bytes = std::vector<std::uint8_t>;

inline Bits bits_from_uint(std::uint64_t v, std::size_t n) {
    Bits b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = (i < 64) ? ((v >> i) & 1u) : 0;
    return b;
}

inline std::uint64_t bits_to_uint(const Bits& b) {
    if (b.size() > 64) throw std::invalid_argument("bits_to_uint: more than 64 bits");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < b.size(); ++i) v |= std::uint64_t(b[i] & 1u) << i;
    return v;
}

inline Bits bits_from_bytes(const Bytes& bytes) {
    Bits b(bytes.size() * 8);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        for (int k = 0; k < 8; ++k) b[8 * i + k] = (bytes[i] >> k) & 1u;
    return b;
}

// Packs bits LSB-first; a trailing partial byte is zero-filled.
inline Bytes bytes_from_bits(const Bits& b) {
    Bytes out((b.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b[i]) out[i / 8] |= std::uint8_t(1u << (i % 8));
    return out;
}

// "0110" -> {0,1,1,0}; index 0 is the first character.
inline Bits bits_from_string(std::string_view s) {
    Bits b;
    b.reserve(s.size());
    for (char c : s) {
        if (c == '0') b.push_back(0);
        else if (c == '1') b.push_back(1);
        else throw std::invalid_argument("bits_from_string: not a bit string");
    }
    return b;
}

inline std::string bits_to_string(const Bits& b) {
    std::string s;
    s.reserve(b.size());
    for (auto v : b) s.push_back(v ? '1' : '0');
    return s;
}

inline Bits bits_xor(const Bits& a, const Bits& b) {
    if (a.size() != b.size()) throw std::invalid_argument("bits_xor: length mismatch");
    Bits r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] ^ b[i];
    return r;
}

inline bool bits_all_zero(const Bits& b) {
    for (auto v : b)
        if (v) return false;
    return true;
}

inline std::string to_hex(const Bytes& b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (auto v : b) {
        s.push_back(digits[v >> 4]);
        s.push_back(digits[v & 15]);
    }
    return s;
}

// little-endian helpers for the wire formats
inline void put_le(Bytes& out, std::uint64_t v, int nbytes) {
    for (int i = 0; i < nbytes; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

inline std::uint64_t get_le(const Bytes& in, std::size_t off, int nbytes) {
    if (off + nbytes > in.size()) throw std::out_of_range("get_le: truncated input");
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) v |= std::uint64_t(in[off + i]) << (8 * i);
    return v;
}

}  // namespace vbbq
