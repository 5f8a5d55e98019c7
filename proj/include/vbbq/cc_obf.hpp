#pragma once

// Compute-and-compare obfuscation stand-in.
//
// Layout: salt (16) || lock (32) || pad_bits (2) || pad || capability id (8) ||
// params (12). lock = H(salt, y); for multi-bit outputs pad = z xor KDF(salt, y).
// The function f sits behind a capability registered in a process-wide table;
// the bytes only carry its id. Target y is never stored.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>

#include "bits.hpp"
#include "fhe_core.hpp"
#include "prf.hpp"

namespace vbbq::cc {

struct Params {
    std::uint32_t in_len = 0, out_len = 0, lambda = 0;
    bool operator==(const Params&) const = default;
    void serialize_into(Bytes& b) const {
        put_le(b, in_len, 4);
        put_le(b, out_len, 4);
        put_le(b, lambda, 4);
    }
};

// Sealed evaluator: may throw, which counts as "no match".
using Evaluator = std::function<Bits(const Bits&)>;

class Registry {
public:
    static Registry& instance() {
        static Registry r;
        return r;
    }
    void put(std::uint64_t id, Evaluator f) {
        std::lock_guard<std::mutex> lk(mu_);
        table_[id] = std::make_shared<Evaluator>(std::move(f));
    }
    std::shared_ptr<const Evaluator> get(std::uint64_t id) const {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = table_.find(id);
        return it == table_.end() ? nullptr : it->second;
    }
    std::size_t size() const {
        std::lock_guard<std::mutex> lk(mu_);
        return table_.size();
    }

private:
    mutable std::mutex mu_;
    std::map<std::uint64_t, std::shared_ptr<const Evaluator>> table_;
};

// A capability: evaluator plus an id derived from its key material.
struct Capability {
    Evaluator f;
    Bytes material;  // hashed into the id, never serialized
};

inline constexpr std::size_t kSaltBytes = 16, kLockBytes = 32;

struct Obfuscation {
    Bytes salt, lock;
    std::uint16_t pad_bits = 0;  // 0: single-bit CC
    Bytes pad;
    std::uint64_t cap_id = 0;
    Params params;

    bool operator==(const Obfuscation&) const = default;

    Bytes serialize() const {
        Bytes b = salt;
        b.insert(b.end(), lock.begin(), lock.end());
        put_le(b, pad_bits, 2);
        b.insert(b.end(), pad.begin(), pad.end());
        put_le(b, cap_id, 8);
        params.serialize_into(b);
        return b;
    }
    static Obfuscation parse(const Bytes& b) {
        const std::size_t fixed = kSaltBytes + kLockBytes + 2 + 8 + 12;
        if (b.size() < fixed) throw fhe::FormatError("cc obfuscation: truncated");
        Obfuscation o;
        o.salt.assign(b.begin(), b.begin() + kSaltBytes);
        o.lock.assign(b.begin() + kSaltBytes, b.begin() + kSaltBytes + kLockBytes);
        std::size_t p = kSaltBytes + kLockBytes;
        o.pad_bits = std::uint16_t(get_le(b, p, 2));
        p += 2;
        const std::size_t pb = (o.pad_bits + 7) / 8;
        if (b.size() != fixed + pb) throw fhe::FormatError("cc obfuscation: bad length");
        o.pad.assign(b.begin() + p, b.begin() + p + pb);
        p += pb;
        o.cap_id = get_le(b, p, 8);
        p += 8;
        o.params.in_len = std::uint32_t(get_le(b, p, 4));
        o.params.out_len = std::uint32_t(get_le(b, p + 4, 4));
        o.params.lambda = std::uint32_t(get_le(b, p + 8, 4));
        return o;
    }
    std::size_t out_width() const { return pad_bits ? pad_bits : 1; }
};

namespace detail {
inline Bytes lock_of(const Bytes& salt, const Bits& y) {
    Bytes d = salt;
    put_le(d, y.size(), 4);
    Bytes yb = bytes_from_bits(y);
    d.insert(d.end(), yb.begin(), yb.end());
    auto h = hash32("vbbq/cc/lock", d);
    return Bytes(h.begin(), h.end());
}
inline Bits kdf(const Bytes& salt, const Bits& y, std::size_t n) {
    Bytes yb = bytes_from_bits(y);
    put_le(yb, y.size(), 4);
    Bits out;
    for (std::uint64_t ctr = 0; out.size() < n; ++ctr) {
        auto d = prf(salt, "vbbq/cc/kdf", ctr, yb);
        auto bits = bits_from_bytes(Bytes(d.begin(), d.end()));
        out.insert(out.end(), bits.begin(), bits.end());
    }
    out.resize(n);
    return out;
}
inline std::uint64_t cap_id(const Bytes& material, const Bytes& salt) {
    Bytes d = material;
    d.insert(d.end(), salt.begin(), salt.end());
    auto h = hash32("vbbq/cc/capability", d);
    return get_le(Bytes(h.begin(), h.begin() + 8), 0, 8);
}
}  // namespace detail

// f(x) = x, for tests.
inline Capability identity_capability(std::size_t n) {
    Bytes m{'i', 'd'};
    put_le(m, n, 4);
    return {[n](const Bits& x) {
                if (x.size() != n) throw std::invalid_argument("identity: width");
                return x;
            },
            m};
}

// f = Dec_sk on `count` serialized ciphertexts (count * 17 * 8 input bits).
// Opens inside the seal: not counted as a public dec call.
inline Capability dec_capability(const fhe::SecretKey& sk, std::size_t count) {
    Bytes m = sk.serialize();
    put_le(m, count, 4);
    return {[sk, count](const Bits& x) {
                if (fhe::ref::pub_of(sk.material) != sk.key_id) throw fhe::DecryptionFailure("sealed key mismatch");
                auto cts = fhe::parse_ciphertexts(bytes_from_bits(x));
                if (cts.size() != count) throw fhe::FormatError("dec capability: ciphertext count");
                fhe::ref::SealKey k(sk.key_id);
                Bits out;
                for (const auto& c : cts) out.push_back(std::uint8_t(fhe::ref::open_bit(k, c)));
                return out;
            },
            m};
}

inline std::size_t dec_input_bits(std::size_t count) { return count * fhe::kCiphertextBytes * 8; }

// CC[f, y] (z empty) or MBCC[f, y, z].
inline Obfuscation obf_cc(const Capability& cap, const Params& params, const Bits& y, const Bits& z, Rng& rng) {
    if (y.size() != params.out_len) throw std::invalid_argument("obf_cc: |y| != output length");
    Obfuscation o;
    o.salt = rng.bytes(kSaltBytes);
    o.lock = detail::lock_of(o.salt, y);
    o.pad_bits = std::uint16_t(z.size());
    if (!z.empty()) o.pad = bytes_from_bits(bits_xor(z, detail::kdf(o.salt, y, z.size())));
    o.cap_id = detail::cap_id(cap.material, o.salt);
    o.params = params;
    Registry::instance().put(o.cap_id, cap.f);
    return o;
}

inline Bits eval_obf(const Obfuscation& o, const Bits& x) {
    if (x.size() != o.params.in_len) throw std::invalid_argument("eval_obf: input length mismatch");
    const Bits zero(o.out_width(), 0);
    auto f = Registry::instance().get(o.cap_id);
    if (!f) return zero;
    Bits y;
    try {
        y = (*f)(x);
    } catch (const std::exception&) {
        return zero;
    }
    if (y.size() != o.params.out_len || detail::lock_of(o.salt, y) != o.lock) return zero;
    if (!o.pad_bits) return Bits{1};
    Bits z = bits_from_bytes(o.pad);
    z.resize(o.pad_bits);
    return bits_xor(z, detail::kdf(o.salt, y, o.pad_bits));
}

// Serialized form; anything unparsable evaluates to 0.
inline Bits eval_obf_bytes(const Bytes& ob, const Bits& x) {
    try {
        return eval_obf(Obfuscation::parse(ob), x);
    } catch (const std::exception&) {
        return Bits{0};
    }
}

// Simulator: random lock and pad, capability for a freshly keyed decryption.
inline Obfuscation sim_cc(unsigned lambda, const Params& params, std::size_t pad_bits, Rng& rng) {
    auto kp = fhe::keygen({std::max(lambda, 4u), 0}, fhe::RandomTape::sample(rng, std::max(lambda, 4u)));
    auto cap = dec_capability(kp.sk, lambda);
    Obfuscation o;
    o.salt = rng.bytes(kSaltBytes);
    o.lock = rng.bytes(kLockBytes);
    o.pad_bits = std::uint16_t(pad_bits);
    o.pad = rng.bytes((pad_bits + 7) / 8);
    if (pad_bits % 8) o.pad.back() &= std::uint8_t((1u << (pad_bits % 8)) - 1);
    o.cap_id = detail::cap_id(cap.material, o.salt);
    o.params = params;
    Registry::instance().put(o.cap_id, cap.f);
    return o;
}

}  // namespace vbbq::cc
