#pragma once

// SIMON32/64 (Beaulieu et al., NSA 2013): 16-bit words, 4-word key, 32 rounds.
// The native version is the fast path; the templated version runs the same
// rounds over any "bit algebra" and is used to emit the KeyGen circuit.

#include <array>
#include <cstdint>

namespace vbbq::simon {

inline constexpr int kRounds = 32;
// z0 constant sequence, bit j = z0[j]
inline constexpr std::uint64_t kZ0 = 0b01100111000011010100100010111110110011100001101010010001011111ULL;

inline constexpr int z0_bit(int j) { return int((kZ0 >> j) & 1u); }

inline std::uint16_t rotl(std::uint16_t x, int r) {
    return std::uint16_t((x << r) | (x >> (16 - r)));
}
inline std::uint16_t rotr(std::uint16_t x, int r) {
    return std::uint16_t((x >> r) | (x << (16 - r)));
}

using Schedule = std::array<std::uint16_t, kRounds>;

// key word 0 is the low 16 bits of `key`.
inline Schedule expand(std::uint64_t key) {
    Schedule k{};
    for (int i = 0; i < 4; ++i) k[i] = std::uint16_t(key >> (16 * i));
    for (int i = 4; i < kRounds; ++i) {
        std::uint16_t tmp = rotr(k[i - 1], 3);
        tmp ^= k[i - 3];
        tmp ^= rotr(tmp, 1);
        k[i] = std::uint16_t(~k[i - 4] ^ tmp ^ z0_bit(i - 4) ^ 3);
    }
    return k;
}

// Block: x = high word, y = low word.
inline std::uint32_t encrypt(const Schedule& k, std::uint32_t block) {
    std::uint16_t x = std::uint16_t(block >> 16), y = std::uint16_t(block);
    for (int i = 0; i < kRounds; ++i) {
        std::uint16_t t = x;
        x = std::uint16_t(y ^ (rotl(x, 1) & rotl(x, 8)) ^ rotl(x, 2) ^ k[i]);
        y = t;
    }
    return (std::uint32_t(x) << 16) | y;
}

inline std::uint32_t encrypt(std::uint64_t key, std::uint32_t block) {
    return encrypt(expand(key), block);
}

// ---------------------------------------------------------------------------
// Generic form. Alg must provide: Bit type, XOR, AND, NOT, lit(bool).

template <class Bit>
using Word = std::array<Bit, 16>;  // index 0 = LSB

template <class Alg>
struct Generic {
    using Bit = typename Alg::Bit;
    using W = Word<Bit>;
    Alg& a;

    W rotl(const W& x, int r) const {
        W o;
        for (int i = 0; i < 16; ++i) o[(i + r) % 16] = x[i];
        return o;
    }
    W rotr(const W& x, int r) const { return rotl(x, 16 - r); }
    W wxor(const W& x, const W& y) const {
        W o;
        for (int i = 0; i < 16; ++i) o[i] = a.XOR(x[i], y[i]);
        return o;
    }
    W wand(const W& x, const W& y) const {
        W o;
        for (int i = 0; i < 16; ++i) o[i] = a.AND(x[i], y[i]);
        return o;
    }
    W wconst(std::uint16_t v) const {
        W o;
        for (int i = 0; i < 16; ++i) o[i] = a.lit((v >> i) & 1u);
        return o;
    }

    // key: 64 bits, LSB first
    std::array<W, kRounds> expand(const std::array<Bit, 64>& key) const {
        std::array<W, kRounds> k;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 16; ++j) k[i][j] = key[16 * i + j];
        for (int i = 4; i < kRounds; ++i) {
            W tmp = rotr(k[i - 1], 3);
            tmp = wxor(tmp, k[i - 3]);
            tmp = wxor(tmp, rotr(tmp, 1));
            W nk;
            for (int j = 0; j < 16; ++j) nk[j] = a.NOT(k[i - 4][j]);
            std::uint16_t c = std::uint16_t(z0_bit(i - 4) ^ 3);
            k[i] = wxor(wxor(nk, tmp), wconst(c));
        }
        return k;
    }

    // block: 32 bits, LSB first (low 16 = y, high 16 = x)
    std::array<Bit, 32> encrypt(const std::array<W, kRounds>& k,
                                const std::array<Bit, 32>& block) const {
        W x, y;
        for (int j = 0; j < 16; ++j) {
            y[j] = block[j];
            x[j] = block[16 + j];
        }
        for (int i = 0; i < kRounds; ++i) {
            W t = x;
            W f = wxor(wand(rotl(x, 1), rotl(x, 8)), rotl(x, 2));
            x = wxor(wxor(y, f), k[i]);
            y = t;
        }
        std::array<Bit, 32> out;
        for (int j = 0; j < 16; ++j) {
            out[j] = y[j];
            out[16 + j] = x[j];
        }
        return out;
    }
};

}  // namespace vbbq::simon
