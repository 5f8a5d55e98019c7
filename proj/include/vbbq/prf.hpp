#pragma once

// Keyed BLAKE2b (libsodium crypto_generichash) in counter mode.
//
//   block(key, domain, ctr, data) = BLAKE2b-512(key = key || 0-pad to 32 bytes,
//                                   msg = domain || 0x00 || len(key) || ctr(8, LE) || data)
//
// Everything that needs derived randomness (seeds, per-trial streams, garbling
// labels, CC locks) goes through this one function with a distinct domain.

#include <sodium.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string_view>

#include "bits.hpp"

namespace vbbq {

namespace detail {
inline void sodium_once() {
    static const bool ok = [] { return sodium_init() >= 0; }();
    if (!ok) throw std::runtime_error("libsodium initialisation failed");
}
}  // namespace detail

using Digest = std::array<std::uint8_t, 64>;

inline void prf_into(const std::uint8_t* key, std::size_t keylen, std::string_view domain,
                     std::uint64_t ctr, const std::uint8_t* data, std::size_t datalen,
                     std::uint8_t* out, std::size_t outlen) {
    detail::sodium_once();
    if (keylen > 32) throw std::invalid_argument("prf: key longer than 32 bytes");
    if (outlen < crypto_generichash_BYTES_MIN || outlen > crypto_generichash_BYTES_MAX)
        throw std::invalid_argument("prf: bad output length");
    std::uint8_t k[32] = {0};
    if (keylen) std::memcpy(k, key, keylen);
    crypto_generichash_state st;
    crypto_generichash_init(&st, k, sizeof k, outlen);
    crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(domain.data()),
                              domain.size());
    std::uint8_t hdr[10];
    hdr[0] = 0;
    hdr[1] = std::uint8_t(keylen);
    for (int i = 0; i < 8; ++i) hdr[2 + i] = std::uint8_t(ctr >> (8 * i));
    crypto_generichash_update(&st, hdr, sizeof hdr);
    if (datalen) crypto_generichash_update(&st, data, datalen);
    crypto_generichash_final(&st, out, outlen);
}

inline Digest prf(const Bytes& key, std::string_view domain, std::uint64_t ctr,
                  const Bytes& data = {}) {
    Digest d;
    prf_into(key.data(), key.size(), domain, ctr, data.data(), data.size(), d.data(), d.size());
    return d;
}

// Unkeyed hash used for fingerprints and for hashing large inputs down to a key.
inline std::array<std::uint8_t, 32> hash32(std::string_view domain, const Bytes& data) {
    std::array<std::uint8_t, 32> out;
    prf_into(nullptr, 0, domain, 0, data.data(), data.size(), out.data(), out.size());
    return out;
}

inline Bytes seed_bytes(std::uint64_t seed) {
    Bytes b;
    put_le(b, seed, 8);
    return b;
}

// Deterministic random stream. Not a std::UniformRandomBitGenerator on purpose:
// the helpers below are portable, std distributions are not.
class Rng {
public:
    Rng(Bytes key, std::string_view domain) : key_(std::move(key)), domain_(domain) {
        if (key_.size() > 32) {
            auto h = hash32("vbbq/rng-key", key_);
            key_.assign(h.begin(), h.end());
        }
    }
    explicit Rng(std::uint64_t seed, std::string_view domain = "vbbq/rng")
        : Rng(seed_bytes(seed), domain) {}

    // Independent sub-stream; (label, index) pairs never collide with the parent.
    Rng derive(std::string_view label, std::uint64_t index = 0) const {
        Bytes data(label.begin(), label.end());
        put_le(data, index, 8);
        auto d = prf(key_, std::string(domain_) + "/derive", 0, data);
        return Rng(Bytes(d.begin(), d.begin() + 32), domain_);
    }

    std::uint8_t byte() {
        if (pos_ == buf_.size()) refill();
        return buf_[pos_++];
    }

    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(byte()) << (8 * i);
        return v;
    }

    std::uint32_t u32() { return std::uint32_t(u64()); }

    bool bit() {
        if (bitpos_ == 64) {
            bitbuf_ = u64();
            bitpos_ = 0;
        }
        return (bitbuf_ >> bitpos_++) & 1u;
    }

    // Uniform in [0, n), rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below(0)");
        if ((n & (n - 1)) == 0) return u64() & (n - 1);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        for (;;) {
            std::uint64_t v = u64();
            if (v < limit) return v % n;
        }
    }

    double uniform01() { return double(u64() >> 11) * (1.0 / 9007199254740992.0); }

    Bits bits(std::size_t n) {
        Bits b(n);
        for (auto& v : b) v = bit();
        return b;
    }

    Bytes bytes(std::size_t n) {
        Bytes b(n);
        for (auto& v : b) v = byte();
        return b;
    }

private:
    void refill() {
        auto d = prf(key_, domain_, ctr_++);
        std::memcpy(buf_.data(), d.data(), d.size());
        pos_ = 0;
    }

    Bytes key_;
    std::string domain_;
    std::uint64_t ctr_ = 0;
    std::array<std::uint8_t, 64> buf_{};
    std::size_t pos_ = 64;
    std::uint64_t bitbuf_ = 0;
    int bitpos_ = 64;
};

// Per-trial stream: trials are independent of scheduling order.
inline Rng trial_rng(std::uint64_t seed, std::string_view experiment, std::uint64_t trial) {
    return Rng(seed, "vbbq/experiment").derive(experiment, trial);
}

}  // namespace vbbq
