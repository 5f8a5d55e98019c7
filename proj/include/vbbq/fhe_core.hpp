#pragma once

// Leveled FHE, reference backend.
//
// Security fiction: every ciphertext is an authenticated randomized encryption
// under key material derived from the public sub-key and a master constant that
// never leaves this header's ref:: namespace. eval() opens the inputs, evaluates
// in the clear and re-encrypts with a lower level. Nothing outside this module
// and the seals built on it (qfhe sealed path, cc_obf capabilities) touches
// ref::open.
//
// Scheme (all 32-bit blocks are SIMON32/64):
//   PRF_r(i)   = E_{r}(2i) | E_{r}(2i+1) << 32          r zero-extended to 64 bits
//   sk_i       = PRF_r(i)
//   pk_i       = E_{sk_i}(0x70B10000) | E_{sk_i}(0x70B10001) << 32
//   K(pk_i)    = E_M(lo(pk_i)) | E_M(hi(pk_i) ^ 0x9E3779B9) << 32
//   enc bit m  : s = E_K(n); c = m ^ (s & 1); tag = (s >> 16) ^ (c ? mask(K) : 0)
//   mask(K)    = (K >> 48) | 1
//   bridge c*_i = bitwise Enc_{pk_i}(sk_{i-1}), nonce 0xB7000000 | j, level 0
//
// pk body = pk_0 || (pk_1 || c*_1) || ... || (pk_d || c*_d). Fresh ciphertexts
// are made under the top sub-key pk_d, so sk = sk_d opens every level.

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bits.hpp"
#include "circuit_ir.hpp"
#include "prf.hpp"
#include "simon.hpp"

namespace vbbq::fhe {

struct DepthExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DecryptionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AuthenticationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FheParams {
    unsigned lambda = 6;
    unsigned d = 0;
};

struct RandomTape {
    Bits r;

    static RandomTape sample(Rng& rng, unsigned lambda) { return {rng.bits(lambda)}; }
    std::uint64_t key() const {
        if (r.size() > 64) throw std::invalid_argument("RandomTape: at most 64 bits");
        return bits_to_uint(r);
    }
    Bytes bytes() const { return bytes_from_bits(r); }
    bool operator==(const RandomTape&) const = default;
};

inline constexpr std::size_t kCiphertextBytes = 17;
inline constexpr std::size_t kSubKeyBytes = 8;
inline constexpr std::size_t kSkBits = 64;
inline constexpr std::size_t kBridgeBytes = kSkBits * kCiphertextBytes;
inline constexpr std::size_t kChainBlockBytes = kSubKeyBytes + kBridgeBytes;

struct Ciphertext {
    std::uint64_t key_id = 0;
    std::uint16_t level = 0;
    std::uint32_t nonce = 0;
    std::uint8_t c = 0;
    std::uint16_t tag = 0;

    bool operator==(const Ciphertext&) const = default;

    void serialize_into(Bytes& out) const {
        put_le(out, key_id, 8);
        put_le(out, level, 2);
        put_le(out, nonce, 4);
        out.push_back(c);
        put_le(out, tag, 2);
    }
    Bytes serialize() const {
        Bytes b;
        serialize_into(b);
        return b;
    }
    static Ciphertext parse(const Bytes& in, std::size_t off = 0) {
        if (off + kCiphertextBytes > in.size()) throw FormatError("ciphertext: truncated");
        Ciphertext ct;
        ct.key_id = get_le(in, off, 8);
        ct.level = std::uint16_t(get_le(in, off + 8, 2));
        ct.nonce = std::uint32_t(get_le(in, off + 10, 4));
        ct.c = in[off + 14];
        ct.tag = std::uint16_t(get_le(in, off + 15, 2));
        return ct;
    }
};

inline Bytes serialize(const std::vector<Ciphertext>& cts) {
    Bytes b;
    b.reserve(cts.size() * kCiphertextBytes);
    for (const auto& c : cts) c.serialize_into(b);
    return b;
}

inline std::vector<Ciphertext> parse_ciphertexts(const Bytes& b) {
    if (b.size() % kCiphertextBytes) throw FormatError("ciphertext list: bad length");
    std::vector<Ciphertext> v;
    for (std::size_t off = 0; off < b.size(); off += kCiphertextBytes)
        v.push_back(Ciphertext::parse(b, off));
    return v;
}

struct PublicKey {
    FheParams params;
    Bytes body;
    bool operator==(const PublicKey& o) const {
        return params.lambda == o.params.lambda && params.d == o.params.d && body == o.body;
    }
};

struct SecretKey {
    std::uint64_t material = 0;  // sk_d
    std::uint64_t key_id = 0;    // pk_d, the decryption tag
    static constexpr std::size_t kBytes = 16;
    Bytes serialize() const {
        Bytes b;
        put_le(b, material, 8);
        put_le(b, key_id, 8);
        return b;
    }
};

struct KeyPair {
    PublicKey pk;
    SecretKey sk;
};

// ---------------------------------------------------------------------------

namespace ref {

inline constexpr std::uint64_t kSealMaster = 0x5EA1ED0B7A1C3E29ULL;
inline constexpr std::uint32_t kPkDomain = 0x70B10000u;
inline constexpr std::uint32_t kKeyTweak = 0x9E3779B9u;
inline constexpr std::uint32_t kBridgeNonce = 0xB7000000u;

inline std::uint64_t pair(std::uint32_t lo, std::uint32_t hi) {
    return std::uint64_t(lo) | (std::uint64_t(hi) << 32);
}

inline std::uint64_t prf_tape(std::uint64_t r_key, std::uint64_t i) {
    auto k = simon::expand(r_key);
    return pair(simon::encrypt(k, std::uint32_t(2 * i)), simon::encrypt(k, std::uint32_t(2 * i + 1)));
}

inline std::uint64_t pub_of(std::uint64_t sk) {
    auto k = simon::expand(sk);
    return pair(simon::encrypt(k, kPkDomain), simon::encrypt(k, kPkDomain + 1));
}

inline const simon::Schedule& master_schedule() {
    static const simon::Schedule s = simon::expand(kSealMaster);
    return s;
}

inline std::uint64_t enc_key(std::uint64_t pk_sub) {
    const auto& m = master_schedule();
    return pair(simon::encrypt(m, std::uint32_t(pk_sub)),
                simon::encrypt(m, std::uint32_t(pk_sub >> 32) ^ kKeyTweak));
}

inline std::uint16_t tag_mask(std::uint64_t K) { return std::uint16_t((K >> 48) | 1u); }

// Key material for one sub-key, schedule cached.
struct SealKey {
    std::uint64_t pk_sub;
    std::uint64_t K;
    simon::Schedule sched;
    explicit SealKey(std::uint64_t pk) : pk_sub(pk), K(enc_key(pk)), sched(simon::expand(K)) {}
};

inline Ciphertext seal_bit(const SealKey& k, std::uint32_t nonce, int m, std::uint16_t level) {
    std::uint32_t s = simon::encrypt(k.sched, nonce);
    Ciphertext ct;
    ct.key_id = k.pk_sub;
    ct.level = level;
    ct.nonce = nonce;
    ct.c = std::uint8_t((m ^ int(s & 1u)) & 1);
    ct.tag = std::uint16_t((s >> 16) ^ (ct.c ? tag_mask(k.K) : 0));
    return ct;
}

inline int open_bit(const SealKey& k, const Ciphertext& ct) {
    if (ct.key_id != k.pk_sub) throw DecryptionFailure("ciphertext key id does not match key");
    if (ct.c > 1) throw AuthenticationError("ciphertext payload tampered");
    std::uint32_t s = simon::encrypt(k.sched, ct.nonce);
    std::uint16_t expect = std::uint16_t((s >> 16) ^ (ct.c ? tag_mask(k.K) : 0));
    if (expect != ct.tag) throw AuthenticationError("ciphertext payload tampered");
    return (ct.c ^ int(s & 1u)) & 1;
}

// Sub-key pair and bridge for chain position i.
struct SubKey {
    std::uint64_t sk;
    std::uint64_t pk;
};

inline SubKey sub_keygen(std::uint64_t r_key, std::uint64_t i) {
    SubKey s;
    s.sk = prf_tape(r_key, i);
    s.pk = pub_of(s.sk);
    return s;
}

inline std::vector<Ciphertext> bridge(std::uint64_t pk_i, std::uint64_t sk_prev) {
    SealKey k(pk_i);
    std::vector<Ciphertext> v;
    v.reserve(kSkBits);
    for (std::size_t j = 0; j < kSkBits; ++j)
        v.push_back(seal_bit(k, kBridgeNonce | std::uint32_t(j), int((sk_prev >> j) & 1u), 0));
    return v;
}

// Body bytes of chain block i: pk_0, or pk_i || c*_i.
inline Bytes chain_block_body(std::uint64_t r_key, std::uint64_t i) {
    Bytes out;
    auto cur = sub_keygen(r_key, i);
    put_le(out, cur.pk, 8);
    if (i > 0) {
        auto prev = sub_keygen(r_key, i - 1);
        for (const auto& ct : bridge(cur.pk, prev.sk)) ct.serialize_into(out);
    }
    return out;
}

}  // namespace ref

// ---------------------------------------------------------------------------
// pk parsing helpers shared with pk_decompose

inline std::size_t pk_body_size(unsigned d) { return kSubKeyBytes + std::size_t(d) * kChainBlockBytes; }

inline void check_pk(const PublicKey& pk) {
    if (pk.body.size() != pk_body_size(pk.params.d))
        throw FormatError("public key: body length does not match d");
}

inline std::size_t chain_block_offset(std::size_t i) {
    return i == 0 ? 0 : kSubKeyBytes + (i - 1) * kChainBlockBytes;
}

inline std::uint64_t sub_public_key(const PublicKey& pk, std::size_t i) {
    check_pk(pk);
    if (i > pk.params.d) throw std::out_of_range("sub_public_key: index beyond d");
    return get_le(pk.body, chain_block_offset(i), 8);
}

inline std::uint64_t top_public_key(const PublicKey& pk) { return sub_public_key(pk, pk.params.d); }

// ---------------------------------------------------------------------------
// audit: counts of secret-key use through the public API

namespace audit {
inline std::atomic<std::uint64_t>& secret_key_uses() {
    static std::atomic<std::uint64_t> n{0};
    return n;
}
}  // namespace audit

// ---------------------------------------------------------------------------
// Backend seam

class Backend {
public:
    virtual ~Backend() = default;
    virtual KeyPair keygen(const FheParams& params, const RandomTape& r) const = 0;
    virtual std::vector<Ciphertext> enc(const PublicKey& pk, const Bits& m, Rng& rng) const = 0;
    virtual Bits dec(const SecretKey& sk, const std::vector<Ciphertext>& cts) const = 0;
    virtual std::vector<Ciphertext> eval(const PublicKey& pk, const BooleanCircuit& c,
                                         const std::vector<Ciphertext>& cts) const = 0;
    // Homomorphic addition; consumes no level. Output level = min of inputs.
    virtual Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) const = 0;
    virtual Ciphertext add_plain(const PublicKey& pk, const Ciphertext& a, int bit) const = 0;

    // Seal entry points (qfhe sealed path, cc_obf capabilities). Not for callers
    // holding only public material.
    virtual Bits sealed_open(const PublicKey& pk, const std::vector<Ciphertext>& cts) const = 0;
    virtual std::vector<Ciphertext> sealed_encrypt(const PublicKey& pk, const Bits& m,
                                                   std::uint16_t level, Rng& rng) const = 0;
};

class ReferenceBackend final : public Backend {
public:
    KeyPair keygen(const FheParams& params, const RandomTape& r) const override {
        if (params.lambda < 4) throw std::invalid_argument("keygen: lambda must be >= 4");
        if (r.r.size() != params.lambda) throw std::invalid_argument("keygen: tape length != lambda");
        const std::uint64_t rk = r.key();
        KeyPair kp;
        kp.pk.params = params;
        for (unsigned i = 0; i <= params.d; ++i) {
            auto b = ref::chain_block_body(rk, i);
            kp.pk.body.insert(kp.pk.body.end(), b.begin(), b.end());
        }
        auto top = ref::sub_keygen(rk, params.d);
        kp.sk.material = top.sk;
        kp.sk.key_id = top.pk;
        return kp;
    }

    std::vector<Ciphertext> enc(const PublicKey& pk, const Bits& m, Rng& rng) const override {
        return sealed_encrypt(pk, m, std::uint16_t(pk.params.d), rng);
    }

    Bits dec(const SecretKey& sk, const std::vector<Ciphertext>& cts) const override {
        audit::secret_key_uses()++;
        if (ref::pub_of(sk.material) != sk.key_id)
            throw DecryptionFailure("secret key material does not match its tag");
        ref::SealKey k(sk.key_id);
        Bits out;
        out.reserve(cts.size());
        for (const auto& ct : cts) out.push_back(std::uint8_t(ref::open_bit(k, ct)));
        return out;
    }

    std::vector<Ciphertext> eval(const PublicKey& pk, const BooleanCircuit& c,
                                 const std::vector<Ciphertext>& cts) const override {
        if (cts.size() != c.n_inputs) throw std::invalid_argument("eval: ciphertext count != inputs");
        const std::size_t dc = depth(c);
        std::size_t level = pk.params.d;
        for (const auto& ct : cts) level = std::min<std::size_t>(level, ct.level);
        if (dc > level)
            throw DepthExceeded("eval: circuit depth " + std::to_string(dc) +
                                " exceeds remaining level " + std::to_string(level));
        Bits m = sealed_open(pk, cts);
        Bits y = vbbq::eval(c, m);
        Rng rng = op_rng(pk, cts, "eval", c.gates.size());
        return sealed_encrypt(pk, y, std::uint16_t(level - dc), rng);
    }

    Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) const override {
        Bits m = sealed_open(pk, {a, b});
        Rng rng = op_rng(pk, {a, b}, "add", 0);
        return sealed_encrypt(pk, {std::uint8_t(m[0] ^ m[1])}, std::min(a.level, b.level), rng)[0];
    }

    Ciphertext add_plain(const PublicKey& pk, const Ciphertext& a, int bit) const override {
        if (!(bit & 1)) return a;
        Bits m = sealed_open(pk, {a});
        Rng rng = op_rng(pk, {a}, "add_plain", 1);
        return sealed_encrypt(pk, {std::uint8_t(m[0] ^ 1)}, a.level, rng)[0];
    }

    Bits sealed_open(const PublicKey& pk, const std::vector<Ciphertext>& cts) const override {
        ref::SealKey k(top_public_key(pk));
        Bits out;
        out.reserve(cts.size());
        for (const auto& ct : cts) out.push_back(std::uint8_t(ref::open_bit(k, ct)));
        return out;
    }

    std::vector<Ciphertext> sealed_encrypt(const PublicKey& pk, const Bits& m, std::uint16_t level,
                                           Rng& rng) const override {
        ref::SealKey k(top_public_key(pk));
        std::vector<Ciphertext> v;
        v.reserve(m.size());
        for (auto bit : m) v.push_back(ref::seal_bit(k, rng.u32(), bit & 1, level));
        return v;
    }

private:
    // Deterministic randomness for re-encryption, bound to the operation's inputs.
    static Rng op_rng(const PublicKey& pk, const std::vector<Ciphertext>& cts, const char* op,
                      std::uint64_t extra) {
        Bytes data = serialize(cts);
        put_le(data, extra, 8);
        put_le(data, top_public_key(pk), 8);
        auto h = hash32(std::string("vbbq/fhe/") + op, data);
        return Rng(Bytes(h.begin(), h.end()), "vbbq/fhe/op");
    }
};

inline const Backend& backend() {
    static const ReferenceBackend b;
    return b;
}

inline KeyPair keygen(const FheParams& params, const RandomTape& r) { return backend().keygen(params, r); }
inline std::vector<Ciphertext> enc(const PublicKey& pk, const Bits& m, Rng& rng) {
    return backend().enc(pk, m, rng);
}
inline Bits dec(const SecretKey& sk, const std::vector<Ciphertext>& cts) { return backend().dec(sk, cts); }
inline std::vector<Ciphertext> eval(const PublicKey& pk, const BooleanCircuit& c,
                                    const std::vector<Ciphertext>& cts) {
    return backend().eval(pk, c, cts);
}
inline Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
    return backend().add(pk, a, b);
}
inline Ciphertext add_plain(const PublicKey& pk, const Ciphertext& a, int bit) {
    return backend().add_plain(pk, a, bit);
}

// Sub-scheme secret key for chain position i (bridge checks, tests).
inline SecretKey sub_secret_key(const RandomTape& r, std::uint64_t i) {
    auto s = ref::sub_keygen(r.key(), i);
    return {s.sk, s.pk};
}

}  // namespace vbbq::fhe
