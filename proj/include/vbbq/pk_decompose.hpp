#pragma once

// Decomposable public keys: blocks c_0..c_K, assembly, block simulation.
//
// bootstrapped: K = d, c_0 = pk_0, c_i = pk_i || c*_i.
// garbled:      K = gate count of the reference KeyGen circuit for (lambda, d);
//               c_0 = active input labels for r, c_i = garbled gate i-1.
//
// The KeyGen circuit is emitted level by level from the same scheme as
// fhe::ref, so the circuit for d is a prefix of the circuit for d+1 and gate i
// is the same for every d that contains it.

#include <map>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <stdexcept>
#include <vector>

#include "circuit_ir.hpp"
#include "fhe_core.hpp"
#include "garbling.hpp"
#include "simon.hpp"

namespace vbbq::pk {

struct AssemblyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Strategy : std::uint8_t { Bootstrapped = 1, Garbled = 2 };

inline const char* strategy_name(Strategy s) {
    return s == Strategy::Bootstrapped ? "bootstrapped" : "garbled";
}

struct KeyBlock {
    std::uint32_t index = 0;
    Strategy strategy = Strategy::Bootstrapped;
    Bytes body;

    bool operator==(const KeyBlock&) const = default;

    Bytes serialize() const {
        Bytes b;
        put_le(b, index, 4);
        b.push_back(std::uint8_t(strategy));
        b.insert(b.end(), body.begin(), body.end());
        return b;
    }
    static KeyBlock parse(const Bytes& b) {
        if (b.size() < 5) throw fhe::FormatError("key block: truncated");
        KeyBlock k;
        k.index = std::uint32_t(get_le(b, 0, 4));
        if (b[4] != 1 && b[4] != 2) throw fhe::FormatError("key block: bad strategy tag");
        k.strategy = Strategy(b[4]);
        k.body.assign(b.begin() + 5, b.end());
        return k;
    }
};

// ---------------------------------------------------------------------------
// Chain key pair (bootstrapped KeyGen, in the open)

struct ChainKeyPair {
    std::vector<fhe::ref::SubKey> sub;           // i = 0..d
    std::vector<std::vector<fhe::Ciphertext>> bridge;  // bridge[i] = c*_i, bridge[0] empty
    fhe::KeyPair kp;
};

inline ChainKeyPair chain_keygen(const fhe::FheParams& params, const fhe::RandomTape& r) {
    ChainKeyPair ck;
    ck.kp = fhe::keygen(params, r);
    const std::uint64_t rk = r.key();
    for (unsigned i = 0; i <= params.d; ++i) {
        ck.sub.push_back(fhe::ref::sub_keygen(rk, i));
        if (i == 0) ck.bridge.emplace_back();
        else ck.bridge.push_back(fhe::ref::bridge(ck.sub[i].pk, ck.sub[i - 1].sk));
    }
    return ck;
}

// ---------------------------------------------------------------------------
// KeyGen as a BooleanCircuit

namespace detail {

struct BuilderAlg {
    using Bit = CircuitBuilder::Sig;
    CircuitBuilder& b;
    Bit XOR(Bit x, Bit y) { return b.XOR(x, y); }
    Bit AND(Bit x, Bit y) { return b.AND(x, y); }
    Bit NOT(Bit x) { return b.NOT(x); }
    Bit lit(bool v) { return CircuitBuilder::lit(v); }
};

using Sig = CircuitBuilder::Sig;
using Bits64 = std::array<Sig, 64>;
using Bits32 = std::array<Sig, 32>;

struct KeygenEmitter {
    unsigned lambda;
    CircuitBuilder b;
    BuilderAlg alg{b};
    simon::Generic<BuilderAlg> S{alg};
    std::array<simon::Word<Sig>, simon::kRounds> r_sched;
    Bits64 prev_sk{};
    unsigned levels = 0;                 // levels emitted so far
    std::vector<std::size_t> gate_end;   // gate count after level i
    std::vector<std::size_t> out_end;    // output count after level i
    std::unordered_map<std::uint32_t, std::uint32_t> out_pos;  // wire -> output position

    explicit KeygenEmitter(unsigned lam) : lambda(lam), b(lam) {
        std::array<Sig, 64> rk;
        for (unsigned i = 0; i < 64; ++i) rk[i] = i < lam ? b.input(i) : CircuitBuilder::ZERO;
        r_sched = S.expand(rk);
    }

    Bits32 const_block(std::uint32_t v) {
        Bits32 x;
        for (int i = 0; i < 32; ++i) x[i] = CircuitBuilder::lit((v >> i) & 1u);
        return x;
    }
    Bits64 join(const Bits32& lo, const Bits32& hi) {
        Bits64 o;
        for (int i = 0; i < 32; ++i) {
            o[i] = lo[i];
            o[32 + i] = hi[i];
        }
        return o;
    }
    template <class Sched>
    Bits64 pair(const Sched& k, const Bits32& lo, const Bits32& hi) {
        return join(S.encrypt(k, lo), S.encrypt(k, hi));
    }
    void out_uint(std::uint64_t v, int nbits) {
        for (int i = 0; i < nbits; ++i) b.output(CircuitBuilder::lit((v >> i) & 1u));
    }
    void out_bits(const Sig* v, int n) {
        for (int i = 0; i < n; ++i) b.output(v[i]);
    }

    void emit_level() {
        const unsigned i = levels;
        // sk_i = PRF_r(i), pk_i = E_{sk_i}(dom) | E_{sk_i}(dom+1)
        Bits64 sk = pair(r_sched, const_block(2 * i), const_block(2 * i + 1));
        auto ks = S.expand(sk);
        Bits64 pk = pair(ks, const_block(fhe::ref::kPkDomain), const_block(fhe::ref::kPkDomain + 1));
        out_bits(pk.data(), 64);
        if (i > 0) {
            // K(pk_i) under the master constant
            std::array<Sig, 64> mk;
            for (int j = 0; j < 64; ++j) mk[j] = CircuitBuilder::lit((fhe::ref::kSealMaster >> j) & 1u);
            auto ms = S.expand(mk);
            Bits32 lo, hi;
            for (int j = 0; j < 32; ++j) {
                lo[j] = pk[j];
                hi[j] = b.XOR(pk[32 + j], CircuitBuilder::lit((fhe::ref::kKeyTweak >> j) & 1u));
            }
            Bits64 K = pair(ms, lo, hi);
            auto kk = S.expand(K);
            for (std::size_t j = 0; j < fhe::kSkBits; ++j) {
                const std::uint32_t nonce = fhe::ref::kBridgeNonce | std::uint32_t(j);
                Bits32 s = S.encrypt(kk, const_block(nonce));
                Sig c = b.XOR(prev_sk[j], s[0]);
                // key id, level, nonce, c byte, tag
                out_bits(pk.data(), 64);
                out_uint(0, 16);
                out_uint(nonce, 32);
                b.output(c);
                out_uint(0, 7);
                for (int t = 0; t < 16; ++t) {
                    Sig m = t == 0 ? CircuitBuilder::ONE : K[48 + t];
                    b.output(b.XOR(s[16 + t], b.AND(c, m)));
                }
            }
        }
        prev_sk = sk;
        ++levels;
        gate_end.push_back(b.gate_count());
        const auto& ow = b.peek().output_wires;
        for (std::size_t p = out_end.empty() ? 0 : out_end.back(); p < ow.size(); ++p)
            out_pos.emplace(ow[p], std::uint32_t(p));
        out_end.push_back(ow.size());
    }
};

struct KeygenCache {
    std::mutex mu;
    std::map<unsigned, std::unique_ptr<KeygenEmitter>> emitters;
    std::map<std::pair<unsigned, unsigned>, std::shared_ptr<const BooleanCircuit>> circuits;
};

inline KeygenCache& keygen_cache() {
    static KeygenCache c;
    return c;
}

inline KeygenEmitter& emitter_locked(KeygenCache& c, unsigned lambda) {
    auto& e = c.emitters[lambda];
    if (!e) e = std::make_unique<KeygenEmitter>(lambda);
    return *e;
}

}  // namespace detail

// KeyGen(lambda, d, .) with r as the lambda circuit inputs; outputs are the pk
// body bits (LSB-first per byte).
inline std::shared_ptr<const BooleanCircuit> keygen_circuit(unsigned lambda, unsigned d) {
    auto& cache = detail::keygen_cache();
    std::lock_guard<std::mutex> lk(cache.mu);
    auto key = std::make_pair(lambda, d);
    if (auto it = cache.circuits.find(key); it != cache.circuits.end()) return it->second;
    auto& e = detail::emitter_locked(cache, lambda);
    while (e.levels <= d) e.emit_level();
    const BooleanCircuit& full = e.b.peek();
    auto c = std::make_shared<BooleanCircuit>();
    c->n_inputs = full.n_inputs;
    c->gates.assign(full.gates.begin(), full.gates.begin() + e.gate_end[d]);
    c->n_wires = full.n_inputs + c->gates.size();
    c->output_wires.assign(full.output_wires.begin(), full.output_wires.begin() + e.out_end[d]);
    cache.circuits[key] = c;
    return c;
}

// Gate i of the KeyGen circuit together with its output position, without
// knowing d: levels are emitted until the gate exists.
inline std::pair<Gate, std::uint32_t> keygen_gate(unsigned lambda, std::size_t i) {
    auto& cache = detail::keygen_cache();
    std::lock_guard<std::mutex> lk(cache.mu);
    auto& e = detail::emitter_locked(cache, lambda);
    while (e.b.gate_count() <= i) e.emit_level();
    const BooleanCircuit& full = e.b.peek();
    const Gate g = full.gates[i];
    auto it = e.out_pos.find(g.out);
    std::uint32_t pos = it == e.out_pos.end() ? gc::kNoOutput : it->second;
    return {g, pos};
}

inline std::size_t block_count(unsigned lambda, unsigned d, Strategy s) {
    if (s == Strategy::Bootstrapped) return std::size_t(d) + 1;
    return keygen_circuit(lambda, d)->gates.size() + 1;
}

// K(lambda, d): index of the last block
inline std::size_t K(unsigned lambda, unsigned d, Strategy s) { return block_count(lambda, d, s) - 1; }

inline Bytes garble_seed(const fhe::RandomTape& r2) {
    auto h = hash32("vbbq/pk/garble-seed", r2.bytes());
    return Bytes(h.begin(), h.end());
}

inline KeyBlock block_gen(unsigned lambda, std::size_t i, const fhe::RandomTape& r,
                          const fhe::RandomTape& r2, Strategy s) {
    if (r.r.size() != lambda) throw std::invalid_argument("block_gen: tape length != lambda");
    KeyBlock blk;
    blk.index = std::uint32_t(i);
    blk.strategy = s;
    if (s == Strategy::Bootstrapped) {
        blk.body = fhe::ref::chain_block_body(r.key(), i);
        return blk;
    }
    const Bytes seed = garble_seed(r2);
    if (i == 0) {
        for (unsigned w = 0; w < lambda; ++w) {
            auto l = gc::wire_labels(seed, w).of(r.r[w]);
            blk.body.insert(blk.body.end(), l.begin(), l.end());
        }
        return blk;
    }
    auto [g, pos] = keygen_gate(lambda, i - 1);
    blk.body = gc::garble_gate_local(g, std::uint32_t(i - 1), pos, seed).serialize();
    return blk;
}

namespace detail {
inline void check_order(const std::vector<KeyBlock>& blocks, Strategy s) {
    if (blocks.empty()) throw AssemblyError("assemble: no blocks");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].index != i) throw AssemblyError("assemble: missing or out-of-order block " + std::to_string(i));
        if (blocks[i].strategy != s) throw AssemblyError("assemble: mixed strategies");
    }
}

inline fhe::PublicKey pk_from_body(unsigned lambda, Bytes body) {
    if (body.size() < fhe::kSubKeyBytes || (body.size() - fhe::kSubKeyBytes) % fhe::kChainBlockBytes)
        throw AssemblyError("assemble: body length is not a chain");
    fhe::PublicKey pk;
    pk.params.lambda = lambda;
    pk.params.d = unsigned((body.size() - fhe::kSubKeyBytes) / fhe::kChainBlockBytes);
    pk.body = std::move(body);
    return pk;
}

inline gc::GarbledCircuit circuit_from_blocks(unsigned lambda, const std::vector<KeyBlock>& blocks,
                                              std::vector<gc::Label>& input) {
    const auto& b0 = blocks[0].body;
    if (b0.size() != std::size_t(lambda) * gc::kLabelBytes) throw AssemblyError("assemble: bad encode block");
    input.resize(lambda);
    for (unsigned w = 0; w < lambda; ++w)
        std::copy(b0.begin() + w * gc::kLabelBytes, b0.begin() + (w + 1) * gc::kLabelBytes, input[w].begin());
    gc::GarbledCircuit g;
    g.n_inputs = lambda;
    for (std::size_t i = 1; i < blocks.size(); ++i) {
        auto gg = gc::GarbledGate::parse(blocks[i].body);
        if (gg.index != i - 1) throw AssemblyError("assemble: gate index mismatch");
        g.gates.push_back(std::move(gg));
    }
    g.n_wires = lambda + g.gates.size();
    gc::outputs_from_gates(g);
    return g;
}
}  // namespace detail

inline fhe::PublicKey assemble(const std::vector<KeyBlock>& blocks, unsigned lambda) {
    if (blocks.empty()) throw AssemblyError("assemble: no blocks");
    const Strategy s = blocks[0].strategy;
    detail::check_order(blocks, s);
    if (s == Strategy::Bootstrapped) {
        Bytes body;
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::size_t want = i == 0 ? fhe::kSubKeyBytes : fhe::kChainBlockBytes;
            if (blocks[i].body.size() != want) throw AssemblyError("assemble: block " + std::to_string(i) + " has wrong size");
            body.insert(body.end(), blocks[i].body.begin(), blocks[i].body.end());
        }
        return detail::pk_from_body(lambda, std::move(body));
    }
    std::vector<gc::Label> input;
    auto g = detail::circuit_from_blocks(lambda, blocks, input);
    try {
        Bits bits = gc::decode(g, gc::evaluate(g, input));
        return detail::pk_from_body(lambda, bytes_from_bits(bits));
    } catch (const gc::GarbleError& e) {
        throw AssemblyError(std::string("assemble: ") + e.what());
    }
}

inline std::vector<KeyBlock> block_gen_all(unsigned lambda, unsigned d, const fhe::RandomTape& r,
                                           const fhe::RandomTape& r2, Strategy s) {
    std::vector<KeyBlock> v;
    const std::size_t n = block_count(lambda, d, s);
    if (s == Strategy::Bootstrapped) {
        for (std::size_t i = 0; i < n; ++i) v.push_back(block_gen(lambda, i, r, r2, s));
        return v;
    }
    // same bytes as calling block_gen per index, without re-locking per gate
    auto c = keygen_circuit(lambda, d);
    const Bytes seed = garble_seed(r2);
    v.push_back(block_gen(lambda, 0, r, r2, s));
    auto pos = gc::output_positions(*c);
    for (std::size_t i = 0; i < c->gates.size(); ++i) {
        auto it = pos.find(c->gates[i].out);
        v.push_back({std::uint32_t(i + 1), s,
                     gc::garble_gate_local(c->gates[i], std::uint32_t(i), it == pos.end() ? gc::kNoOutput : it->second, seed)
                         .serialize()});
    }
    return v;
}

// Bootstrapped: exact parse of pk. Garbled: the garbling privacy simulator on
// the KeyGen topology with output pk; `seed` plays the role of fresh r'.
inline std::vector<KeyBlock> sim_blocks(unsigned lambda, const fhe::PublicKey& pk, Strategy s,
                                        std::uint64_t seed = 0) {
    fhe::check_pk(pk);
    std::vector<KeyBlock> v;
    const unsigned d = pk.params.d;
    if (s == Strategy::Bootstrapped) {
        for (unsigned i = 0; i <= d; ++i) {
            const std::size_t off = fhe::chain_block_offset(i);
            const std::size_t len = i == 0 ? fhe::kSubKeyBytes : fhe::kChainBlockBytes;
            v.push_back({i, s, Bytes(pk.body.begin() + off, pk.body.begin() + off + len)});
        }
        return v;
    }
    auto c = keygen_circuit(lambda, d);
    auto sim = gc::simulate(*c, bits_from_bytes(pk.body), seed_bytes(seed));
    KeyBlock b0{0, s, {}};
    for (unsigned w = 0; w < lambda; ++w)
        b0.body.insert(b0.body.end(), sim.input_labels[w].label0.begin(), sim.input_labels[w].label0.end());
    v.push_back(std::move(b0));
    for (std::size_t i = 0; i < sim.gates.size(); ++i)
        v.push_back({std::uint32_t(i + 1), s, sim.gates[i].serialize()});
    return v;
}

}  // namespace vbbq::pk
