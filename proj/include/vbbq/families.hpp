#pragma once

// Circuit families with auxiliary information and the choice-input members.
//
// Member inputs: x (lambda bits, LSB first) then b (2 bits, LSB first).
// Output: w payload bits then one flag bit.
//   b = 0           -> payload = alpha_ct || o (zero padded), flag 0
//   b = 1, x <= K   -> payload = key block x body (zero padded), flag 0
//   b = 1, x > K    -> bottom: payload all ones, flag 1
//   b = 2           -> payload[0, lambda) = MBPF_{alpha->beta}(x) or 0, flag 0
//   b = 3           -> bottom
// Members use the bootstrapped strategy, so K = d.

#include <memory>
#include <stdexcept>
#include <string>

#include "cc_obf.hpp"
#include "circuit_ir.hpp"
#include "fhe_core.hpp"
#include "pk_decompose.hpp"
#include "simon.hpp"

namespace vbbq::fam {

using fhe::Ciphertext;
using Sig = CircuitBuilder::Sig;

enum class Kind { POINT, ZERO };
inline const char* kind_name(Kind k) { return k == Kind::POINT ? "POINT" : "ZERO"; }

struct AuxInfo {
    fhe::PublicKey pk;
    std::vector<Ciphertext> alpha_ct;
    cc::Obfuscation o;

    // alpha_ct || o, the b = 0 payload
    Bytes payload() const {
        Bytes b = fhe::serialize(alpha_ct);
        Bytes ob = o.serialize();
        b.insert(b.end(), ob.begin(), ob.end());
        return b;
    }
};

// Inverse of AuxInfo::payload on a zero-padded byte string.
inline std::pair<std::vector<Ciphertext>, cc::Obfuscation> parse_payload(const Bytes& p, unsigned lambda) {
    const std::size_t ct_len = std::size_t(lambda) * fhe::kCiphertextBytes;
    const std::size_t head = cc::kSaltBytes + cc::kLockBytes;
    if (p.size() < ct_len + head + 2) throw fhe::FormatError("aux payload: truncated");
    auto cts = fhe::parse_ciphertexts(Bytes(p.begin(), p.begin() + ct_len));
    const std::size_t pad_bits = get_le(p, ct_len + head, 2);
    const std::size_t olen = head + 2 + (pad_bits + 7) / 8 + 8 + 12;
    if (p.size() < ct_len + olen) throw fhe::FormatError("aux payload: truncated obfuscation");
    auto o = cc::Obfuscation::parse(Bytes(p.begin() + ct_len, p.begin() + ct_len + olen));
    return {cts, o};
}

inline cc::Params dec_params(unsigned lambda) {
    return {std::uint32_t(cc::dec_input_bits(lambda)), lambda, lambda};
}

inline Bits sample_nonzero(Rng& rng, unsigned lambda) {
    for (;;) {
        Bits v = rng.bits(lambda);
        if (!bits_all_zero(v)) return v;
    }
}

struct Sampled {
    AuxInfo aux;
    fhe::SecretKey sk;  // harness only
    Bits beta;
};

// Keys from r; beta, encryption and obfuscation randomness from beta_rng.
inline Sampled sample_D_r(const Bits& alpha, unsigned d, const fhe::RandomTape& r, Rng beta_rng) {
    const unsigned lambda = unsigned(alpha.size());
    auto kp = fhe::keygen({lambda, d}, r);
    Sampled s;
    s.sk = kp.sk;
    s.aux.pk = kp.pk;
    Rng br = beta_rng.derive("beta"), er = beta_rng.derive("enc"), orng = beta_rng.derive("obf");
    s.beta = sample_nonzero(br, lambda);
    s.aux.alpha_ct = fhe::enc(kp.pk, alpha, er);
    s.aux.o = cc::obf_cc(cc::dec_capability(kp.sk, lambda), dec_params(lambda), s.beta, {}, orng);
    return s;
}

inline Sampled sample_D(const Bits& alpha, unsigned d, Rng rng) {
    Rng kr = rng.derive("keys");
    auto r = fhe::RandomTape::sample(kr, unsigned(alpha.size()));
    return sample_D_r(alpha, d, r, rng.derive("beta-seed"));
}

// Pair for the auxiliary-input experiment.
inline std::pair<FunctionSpec, AuxInfo> build_aux_member_v4(Kind kind, const Bits& alpha, const Bits& beta,
                                                            const AuxInfo& aux) {
    if (alpha.size() != beta.size()) throw std::invalid_argument("aux member: |alpha| != |beta|");
    FunctionSpec s = kind == Kind::POINT ? mbpf_spec(alpha, beta) : zero_spec(alpha.size(), beta.size());
    return {s, aux};
}

// ---------------------------------------------------------------------------

enum class Path { Table, Prf };

struct Member {
    Kind kind = Kind::POINT;
    unsigned lambda = 0, d = 0;
    Bits alpha, beta;
    fhe::RandomTape r, r2;
    Bytes aux_payload;

    std::size_t n_in() const { return lambda + 2; }
    std::size_t K() const { return d; }
    // payload width, independent of d
    std::size_t w() const {
        const std::size_t aux_bits = 8 * (std::size_t(lambda) * fhe::kCiphertextBytes + cc::kSaltBytes +
                                          cc::kLockBytes + 2 + 8 + 12);
        return std::max({aux_bits, 8 * fhe::kChainBlockBytes, std::size_t(lambda)});
    }
    std::size_t n_out() const { return w() + 1; }
};

inline Member build_member(Kind kind, const Bits& alpha, const Bits& beta, unsigned d, const fhe::RandomTape& r,
                           const fhe::RandomTape& r2, const AuxInfo& aux) {
    const unsigned lambda = unsigned(alpha.size());
    if (beta.size() != lambda || r.r.size() != lambda) throw std::invalid_argument("member: width mismatch");
    if (lambda < 4 || lambda > 16) throw std::invalid_argument("member: lambda out of range");
    if (d >= (1u << lambda)) throw std::invalid_argument("member: d must be addressable by x");
    Member m{kind, lambda, d, alpha, beta, r, r2, aux.payload()};
    if (8 * m.aux_payload.size() > m.w()) throw std::invalid_argument("member: aux payload too wide");
    return m;
}

inline Bits bottom(const Member& m) { return Bits(m.n_out(), 1); }

// Reference semantics, straight from the case definitions.
inline Bits member_eval(const Member& m, const Bits& x, unsigned b) {
    if (x.size() != m.lambda || b > 3) throw std::invalid_argument("member_eval: input");
    Bits out(m.n_out(), 0);
    auto put = [&](const Bytes& bytes) {
        Bits v = bits_from_bytes(bytes);
        std::copy(v.begin(), v.end(), out.begin());
    };
    const std::uint64_t i = bits_to_uint(x);
    switch (b) {
        case 0: put(m.aux_payload); break;
        case 1:
            if (i > m.K()) return bottom(m);
            put(pk::block_gen(m.lambda, i, m.r, m.r2, pk::Strategy::Bootstrapped).body);
            break;
        case 2:
            if (m.kind == Kind::POINT && x == m.alpha) std::copy(m.beta.begin(), m.beta.end(), out.begin());
            break;
        default: return bottom(m);
    }
    return out;
}

inline Bits member_input(const Bits& x, unsigned b) {
    Bits v = x;
    v.push_back(std::uint8_t(b & 1));
    v.push_back(std::uint8_t((b >> 1) & 1));
    return v;
}

namespace detail {

struct BuilderAlg {
    using Bit = Sig;
    CircuitBuilder& b;
    Bit XOR(Bit x, Bit y) { return b.XOR(x, y); }
    Bit AND(Bit x, Bit y) { return b.AND(x, y); }
    Bit NOT(Bit x) { return b.NOT(x); }
    Bit lit(bool v) { return CircuitBuilder::lit(v); }
};

// x > c for a c given as signals (MSB-first ripple)
inline Sig greater(CircuitBuilder& b, const std::vector<Sig>& x, const std::vector<Sig>& c) {
    Sig gt = CircuitBuilder::ZERO, eq = CircuitBuilder::ONE;
    for (std::size_t k = x.size(); k-- > 0;) {
        gt = b.OR(gt, b.AND(eq, b.AND(x[k], b.NOT(c[k]))));
        eq = b.AND(eq, b.NOT(b.XOR(x[k], c[k])));
    }
    return gt;
}

// x - 1 over |x| bits (wraps at 0)
inline std::vector<Sig> decrement(CircuitBuilder& b, const std::vector<Sig>& x) {
    std::vector<Sig> o(x.size());
    Sig borrow = CircuitBuilder::ONE;
    for (std::size_t k = 0; k < x.size(); ++k) {
        o[k] = b.XOR(x[k], borrow);
        borrow = b.AND(borrow, b.NOT(x[k]));
    }
    return o;
}

// Chain block body for a variable index: pk_i || bridge(pk_i, sk_{i-1}), the
// bridge part zeroed when i = 0. rk is the baked tape key.
inline std::vector<Sig> chain_block_circuit(CircuitBuilder& b, const std::array<Sig, 64>& rk,
                                            const std::vector<Sig>& i_bits) {
    BuilderAlg alg{b};
    simon::Generic<BuilderAlg> S{alg};
    auto rs = S.expand(rk);
    auto block_of = [&](const std::vector<Sig>& idx, bool odd) {
        std::array<Sig, 32> blk;
        blk.fill(CircuitBuilder::ZERO);
        blk[0] = CircuitBuilder::lit(odd);
        for (std::size_t k = 0; k < idx.size() && k + 1 < 32; ++k) blk[k + 1] = idx[k];
        return blk;
    };
    auto const_block = [&](std::uint32_t v) {
        std::array<Sig, 32> blk;
        for (int k = 0; k < 32; ++k) blk[k] = CircuitBuilder::lit((v >> k) & 1u);
        return blk;
    };
    auto join = [](const std::array<Sig, 32>& lo, const std::array<Sig, 32>& hi) {
        std::array<Sig, 64> o;
        for (int k = 0; k < 32; ++k) {
            o[k] = lo[k];
            o[32 + k] = hi[k];
        }
        return o;
    };
    auto prf_tape = [&](const std::vector<Sig>& idx) {
        return join(S.encrypt(rs, block_of(idx, false)), S.encrypt(rs, block_of(idx, true)));
    };
    auto sk = prf_tape(i_bits);
    auto sk_prev = prf_tape(decrement(b, i_bits));
    auto ks = S.expand(sk);
    auto pk = join(S.encrypt(ks, const_block(fhe::ref::kPkDomain)), S.encrypt(ks, const_block(fhe::ref::kPkDomain + 1)));
    Sig nonzero = CircuitBuilder::ZERO;
    for (auto s : i_bits) nonzero = b.OR(nonzero, s);

    std::vector<Sig> out(pk.begin(), pk.end());
    std::array<Sig, 64> mk;
    for (int j = 0; j < 64; ++j) mk[j] = CircuitBuilder::lit((fhe::ref::kSealMaster >> j) & 1u);
    auto ms = S.expand(mk);
    std::array<Sig, 32> lo, hi;
    for (int j = 0; j < 32; ++j) {
        lo[j] = pk[j];
        hi[j] = b.XOR(pk[32 + j], CircuitBuilder::lit((fhe::ref::kKeyTweak >> j) & 1u));
    }
    auto K = join(S.encrypt(ms, lo), S.encrypt(ms, hi));
    auto kk = S.expand(K);
    auto gate = [&](Sig s) { return b.AND(nonzero, s); };
    auto put_uint = [&](std::uint64_t v, int n) {
        for (int k = 0; k < n; ++k) out.push_back(gate(CircuitBuilder::lit((v >> k) & 1u)));
    };
    for (std::size_t j = 0; j < fhe::kSkBits; ++j) {
        const std::uint32_t nonce = fhe::ref::kBridgeNonce | std::uint32_t(j);
        auto s = S.encrypt(kk, const_block(nonce));
        Sig c = b.XOR(sk_prev[j], s[0]);
        for (int k = 0; k < 64; ++k) out.push_back(gate(pk[k]));
        put_uint(0, 16);
        put_uint(nonce, 32);
        out.push_back(gate(c));
        put_uint(0, 7);
        for (int t = 0; t < 16; ++t) {
            Sig mm = t == 0 ? CircuitBuilder::ONE : K[48 + t];
            out.push_back(gate(b.XOR(s[16 + t], b.AND(c, mm))));
        }
    }
    return out;
}

}  // namespace detail

// Table path bakes the K+1 precomputed blocks; PRF path computes block x from
// the baked tape inside the circuit and materializes every data constant, so
// its size does not depend on d (or on any sampled value).
inline BooleanCircuit member_circuit(const Member& m, Path path = Path::Table) {
    CircuitBuilder b(m.n_in());
    const std::size_t lam = m.lambda, w = m.w();
    std::vector<Sig> x;
    for (std::size_t k = 0; k < lam; ++k) x.push_back(b.input(k));
    const Sig b0 = b.input(lam), b1 = b.input(lam + 1);
    const Sig sel0 = b.AND(b.NOT(b0), b.NOT(b1)), sel1 = b.AND(b0, b.NOT(b1)), sel2 = b.AND(b.NOT(b0), b1),
              sel3 = b.AND(b0, b1);
    auto konst = [&](bool v) { return path == Path::Prf ? b.constant_gate(v) : CircuitBuilder::lit(v); };

    std::vector<Sig> kbits;
    for (std::size_t k = 0; k < lam; ++k) kbits.push_back(konst((m.K() >> k) & 1u));
    const Sig in_range = b.NOT(detail::greater(b, x, kbits));
    const Sig bot = b.OR(sel3, b.AND(sel1, b.NOT(in_range)));
    const Sig blk_sel = b.AND(sel1, in_range);

    std::vector<Sig> abits;
    for (auto v : m.alpha) abits.push_back(konst(v));
    const Sig point = m.kind == Kind::POINT ? b.AND(sel2, b.equal(x, abits)) : CircuitBuilder::ZERO;

    Bits aux = bits_from_bytes(m.aux_payload);
    aux.resize(w, 0);

    std::vector<Sig> block(w, CircuitBuilder::ZERO);
    if (path == Path::Table) {
        for (std::size_t i = 0; i <= m.K(); ++i) {
            Sig eq = b.AND(blk_sel, b.equal_const(x, i));
            Bits body = bits_from_bytes(pk::block_gen(m.lambda, i, m.r, m.r2, pk::Strategy::Bootstrapped).body);
            for (std::size_t j = 0; j < body.size(); ++j)
                if (body[j]) block[j] = b.XOR(block[j], eq);
        }
    } else {
        std::array<Sig, 64> rk;
        for (std::size_t k = 0; k < 64; ++k) rk[k] = k < lam ? konst(m.r.r[k]) : CircuitBuilder::ZERO;
        auto body = detail::chain_block_circuit(b, rk, x);
        for (std::size_t j = 0; j < body.size(); ++j) block[j] = b.AND(blk_sel, body[j]);
    }

    for (std::size_t j = 0; j < w; ++j) {
        Sig v = b.XOR(block[j], bot);
        v = b.XOR(v, b.AND(sel0, konst(aux[j])));
        if (j < lam) v = b.XOR(v, b.AND(point, konst(m.beta[j])));
        b.output(v);
    }
    b.output(bot);
    return b.build();
}

// Netlist with a metadata header; d can be redacted for what the attack sees.
inline std::string serialize_member(const Member& m, const BooleanCircuit& c, bool redact_d) {
    std::string h = std::string("# member kind=") + kind_name(m.kind) + " lambda=" + std::to_string(m.lambda) +
                    " d=" + (redact_d ? std::string("redacted") : std::to_string(m.d)) + "\n";
    return h + to_netlist(c);
}

}  // namespace vbbq::fam
