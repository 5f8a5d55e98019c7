#pragma once

// Invariant suites shared by `vbbq verify` and the acceptance gate. Each suite
// returns one Check per property; a Check fails with a short reason.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "candidates.hpp"
#include "garbling.hpp"
#include "oracle_sim.hpp"
#include "pk_decompose.hpp"
#include "qfhe.hpp"
#include "qsim.hpp"

namespace vbbq::verify {

struct Check {
    std::string name;
    bool pass = true;
    std::string detail;
};

inline bool all_pass(const std::vector<Check>& cs) {
    for (const auto& c : cs)
        if (!c.pass) return false;
    return !cs.empty();
}

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> v{"recovery", "decompose", "qfhe", "garble", "oracle"};
    return v;
}

namespace detail {

// counts failures and keeps the first reason
struct Tally {
    std::size_t cases = 0, failed = 0;
    std::string first;
    void expect(bool ok, const std::string& why) {
        ++cases;
        if (!ok && failed++ == 0) first = why;
    }
    Check done(std::string name) const {
        Check c{std::move(name), failed == 0 && cases > 0, {}};
        std::ostringstream os;
        os << cases << " cases";
        if (failed) os << ", " << failed << " failed; first: " << first;
        c.detail = os.str();
        return c;
    }
};

inline BooleanCircuit random_circuit(Rng& rng, std::size_t n_in, std::size_t n_gates, std::size_t n_out) {
    BooleanCircuit c;
    c.n_inputs = n_in;
    c.n_wires = n_in;
    for (std::size_t g = 0; g < n_gates; ++g) {
        Gate gt{};
        const auto k = rng.below(3);
        gt.kind = k == 0 ? GateKind::AND : k == 1 ? GateKind::XOR : GateKind::NOT;
        gt.in0 = std::uint32_t(rng.below(c.n_wires));
        gt.in1 = gt.kind == GateKind::NOT ? 0 : std::uint32_t(rng.below(c.n_wires));
        gt.out = std::uint32_t(c.n_wires++);
        c.gates.push_back(gt);
    }
    for (std::size_t k = 0; k < n_out; ++k) c.output_wires.push_back(std::uint32_t(c.n_wires - 1 - k));
    return c;
}

// X, Z, H, CNOT, CCX and optionally MEASURE on fresh ancillas after the inputs
inline qsim::QuantumCircuit random_qc(Rng& rng, std::size_t n_in, std::size_t n_anc, std::size_t n_ops,
                                      bool allow_measure) {
    using namespace qsim;
    QuantumCircuit c;
    c.n_qubits = n_in + n_anc;
    const std::size_t n = c.n_qubits;
    for (std::size_t a = 0; a < n_anc; ++a) c.ops.push_back(INIT0(std::uint32_t(n_in + a)));
    for (std::size_t k = 0; k < n_ops; ++k) {
        std::uint32_t a = std::uint32_t(rng.below(n)), b = a, t = a;
        if (n > 1)
            while (b == a) b = std::uint32_t(rng.below(n));
        if (n > 2)
            while (t == a || t == b) t = std::uint32_t(rng.below(n));
        switch (rng.below(allow_measure ? 6 : 5)) {
            case 0: c.ops.push_back(X(a)); break;
            case 1: c.ops.push_back(Z(a)); break;
            case 2: c.ops.push_back(H(a)); break;
            case 3: c.ops.push_back(n > 1 ? CNOT(a, b) : X(a)); break;
            case 4: c.ops.push_back(n > 2 ? CCX(a, b, t) : n > 1 ? CNOT(b, a) : Z(a)); break;
            default: c.ops.push_back(MEASURE(a)); break;
        }
    }
    return c;
}

// arbitrary table n -> m as a MUX tree
inline BooleanCircuit table_circuit(const std::vector<Bits>& table, std::size_t n) {
    CircuitBuilder b(n);
    for (std::size_t j = 0; j < table[0].size(); ++j) {
        std::vector<CircuitBuilder::Sig> level;
        for (const auto& row : table) level.push_back(CircuitBuilder::lit(row[j]));
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<CircuitBuilder::Sig> next;
            for (std::size_t i = 0; i < level.size(); i += 2) next.push_back(b.MUX(b.input(k), level[i + 1], level[i]));
            level.swap(next);
        }
        b.output(level[0]);
    }
    return b.build();
}

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct RecoveryOptions {
    std::uint64_t seed = 1;
    std::size_t pairs = 60;
};

inline std::vector<Check> recovery(const RecoveryOptions& opt = {}) {
    using namespace qsim;
    Rng rng(opt.seed, "vbbq/verify/recovery");
    detail::Tally bound, exact;
    // at least a third of the corpus has 0 < eps <= 1/4
    const std::size_t want_noisy = opt.pairs / 3;
    std::size_t drawn = 0, noisy = 0, tries = 0;
    while ((drawn < opt.pairs || noisy < want_noisy) && tries++ < 200 * opt.pairs) {
        auto c = detail::random_qc(rng, 2, 2, 8, rng.bit());
        c.output_wires.clear();
        const std::size_t n_out = 1 + rng.below(2);
        for (std::size_t k = 0; k < n_out; ++k) c.output_wires.push_back(std::uint32_t(c.n_qubits - 1 - k));
        if (make_coherent(c).base.n_qubits + n_out > kMaxDensityQubits) continue;
        auto in = rng.bit() ? DensityMatrix::random(2, rng, 1) : DensityMatrix::basis(2, rng.below(4));
        auto nb = nearest_basis(output_state(c, in));
        if (nb.eps > 0.25) continue;
        if (nb.eps <= 1e-9 && drawn - noisy >= opt.pairs - want_noisy) continue;
        ++drawn;
        noisy += nb.eps > 1e-9;
        auto res = input_recover_channel(c, in);
        const double dist = trace_distance(res.joint, tensor(in, DensityMatrix::basis(n_out, nb.x)));
        bound.expect(dist <= 2 * std::sqrt(nb.eps) + 1e-6,
                     "eps=" + detail::num(nb.eps) + " dist=" + detail::num(dist));
        if (nb.eps <= 1e-9) exact.expect(dist <= 1e-9, "exact case dist=" + detail::num(dist));
    }
    std::vector<Check> out;
    auto b = bound.done("recovery: joint within 2 sqrt(eps), eps <= 1/4");
    b.detail += ", " + std::to_string(noisy) + " with eps > 0";
    if (drawn < opt.pairs || noisy < want_noisy) {
        b.pass = false;
        b.detail += "; corpus short";
    }
    out.push_back(b);
    out.push_back(exact.done("recovery: exact when eps = 0"));

    // reuse through the interpreter: basis is unchanged, noisy stays within the bound
    detail::Tally reuse;
    const std::size_t lambda = 6;
    const Bits a = bits_from_uint(0b110101, lambda), v = bits_from_uint(0b011011, lambda);
    const auto f = build_function(mbpf_spec(a, v));
    for (const auto& name : cand::names()) {
        auto c = cand::get(name);
        auto o0 = c->obf(f, rng);
        auto o = o0;
        for (std::uint64_t x : {0b110101u, 0u, 7u, 0b110101u, 63u}) {
            auto [next, y] = cand::interpret_rec(o, bits_from_uint(x, lambda), rng);
            o = std::move(next);
            const double drift = classical_trace_distance(o.state, o0.state);
            const double lim = c->eps_f() == 0 ? 1e-9 : 2 * std::sqrt(c->eps_f()) + 1e-6;
            // a noisy wrong answer may leave rho further away; only correct outcomes are bounded
            if (y == vbbq::eval(f, bits_from_uint(x, lambda)))
                reuse.expect(drift <= lim, name + " drift=" + detail::num(drift));
            o = o0;
        }
        if (c->eps_f() == 0) {
            auto r = cand::recovery_report(o0, a, v);
            reuse.expect(r.joint <= 1e-9 && r.recovered <= 1e-9, name + " report joint=" + detail::num(r.joint));
        }
    }
    out.push_back(reuse.done("recovery: candidate reuse"));
    return out;
}

// ---------------------------------------------------------------------------

struct DecomposeOptions {
    unsigned lambda = 6, max_d = 8;
    std::uint64_t seed = 1;
    bool inject_fault = false;  // flip a byte of one generated block; the suite must then fail
};

inline std::vector<Check> decompose(const DecomposeOptions& opt = {}) {
    using namespace pk;
    Rng rng(opt.seed, "vbbq/verify/decompose");
    detail::Tally asm_ok, sim_ok, bridge_ok;
    for (unsigned d = 0; d <= opt.max_d; ++d) {
        const auto r = fhe::RandomTape::sample(rng, opt.lambda), r2 = fhe::RandomTape::sample(rng, opt.lambda);
        const auto kp = fhe::keygen({opt.lambda, d}, r);
        for (auto s : {Strategy::Bootstrapped, Strategy::Garbled}) {
            const std::string tag = std::string(strategy_name(s)) + " d=" + std::to_string(d);
            auto bl = block_gen_all(opt.lambda, d, r, r2, s);
            // block 0 (sub-key or input labels) is read by every evaluation
            if (opt.inject_fault && d == opt.max_d / 2) bl.front().body[0] ^= 0x40;
            bool same = false;
            try {
                same = assemble(bl, opt.lambda) == kp.pk;
            } catch (const std::exception&) {
            }
            asm_ok.expect(same, "assemble != keygen at " + tag);
            bool sim_same = false;
            try {
                auto sb = sim_blocks(opt.lambda, kp.pk, s, rng.u64());
                sim_same = sb.size() == bl.size() && assemble(sb, opt.lambda) == kp.pk;
                for (std::size_t i = 0; sim_same && i < sb.size(); ++i)
                    sim_same = sb[i].index == bl[i].index && sb[i].body.size() == bl[i].body.size();
                if (s == Strategy::Bootstrapped) sim_same = sim_same && sb == bl;
            } catch (const std::exception&) {
            }
            sim_ok.expect(sim_same, "simulated blocks differ at " + tag);
        }
        const auto ck = chain_keygen({opt.lambda, d}, r);
        for (unsigned i = 1; i <= d; ++i) {
            auto prev = fhe::sub_secret_key(r, i - 1);
            bridge_ok.expect(fhe::dec(fhe::sub_secret_key(r, i), ck.bridge[i]) == bits_from_uint(prev.material, 64),
                             "bridge " + std::to_string(i) + " at d=" + std::to_string(d));
        }
    }
    return {asm_ok.done("decompose: assemble(blocks) == keygen, d=0.." + std::to_string(opt.max_d)),
            sim_ok.done("decompose: simulated blocks assemble to pk"),
            bridge_ok.done("decompose: bridges decrypt to previous sub-key")};
}

// ---------------------------------------------------------------------------

struct QfheOptions {
    std::uint64_t seed = 1;
    std::size_t classical = 200, quantum = 40;
    unsigned lambda = 6;
};

inline std::vector<Check> qfhe_suite(const QfheOptions& opt = {}) {
    using namespace qsim;
    Rng rng(opt.seed, "vbbq/verify/qfhe");
    detail::Tally cls, qu, rej;
    for (std::size_t t = 0; t < opt.classical; ++t) {
        const unsigned d = unsigned(1 + rng.below(4));
        const auto kp = fhe::keygen({opt.lambda, d}, fhe::RandomTape::sample(rng, opt.lambda));
        const std::size_t n = 1 + rng.below(5);
        auto c = detail::random_circuit(rng, n, 2 + rng.below(12), 1 + rng.below(3));
        const Bits m = rng.bits(n);
        try {
            auto out = fhe::eval(kp.pk, c, fhe::enc(kp.pk, m, rng));
            cls.expect(fhe::dec(kp.sk, out) == vbbq::eval(c, m), "dec(eval) != eval, trial " + std::to_string(t));
        } catch (const fhe::DepthExceeded&) {
            // over budget for this d: a rejection is the specified behaviour, not a case
        }
    }
    while (cls.cases < opt.classical) {
        // top up with circuits of depth 1
        const auto kp = fhe::keygen({opt.lambda, 1}, fhe::RandomTape::sample(rng, opt.lambda));
        CircuitBuilder b(2);
        b.output(b.AND(b.input(0), b.input(1)));
        const Bits m = rng.bits(2);
        auto c = b.build();
        cls.expect(fhe::dec(kp.sk, fhe::eval(kp.pk, c, fhe::enc(kp.pk, m, rng))) == vbbq::eval(c, m), "and gate");
    }
    for (std::size_t t = 0; t < opt.quantum; ++t) {
        const std::size_t n_in = 1 + rng.below(4), n_anc = rng.below(3);
        auto c = detail::random_qc(rng, n_in, n_anc, 12, true);
        const std::size_t td = toffoli_depth(c);
        const auto kp = fhe::keygen({opt.lambda, unsigned(td + rng.below(2))}, fhe::RandomTape::sample(rng, opt.lambda));
        auto rho = DensityMatrix::random(n_in, rng, 2);
        auto out = qfhe::qeval(kp.pk, c, qfhe::qenc(kp.pk, rho, rng), rng);
        const double dist = trace_distance(qfhe::qdec_density(kp.sk, out), run(c, rho));
        qu.expect(dist <= 1e-6 && c.n_qubits <= 8, "qdec(qeval) off by " + detail::num(dist));
    }
    for (unsigned d = 0; d <= 3; ++d) {
        const auto kp = fhe::keygen({opt.lambda, d}, fhe::RandomTape::sample(rng, opt.lambda));
        QuantumCircuit c;
        c.n_qubits = d + 3;
        for (unsigned k = 0; k <= d; ++k) c.ops.push_back(CCX(k, k + 1, k + 2));
        bool threw = false;
        try {
            qfhe::qeval(kp.pk, c, qfhe::qenc(kp.pk, DensityMatrix::basis(c.n_qubits, 0), rng), rng);
        } catch (const fhe::DepthExceeded&) {
            threw = true;
        }
        rej.expect(threw, "depth " + std::to_string(d + 1) + " accepted at d=" + std::to_string(d));
        c.ops.pop_back();
        bool ok = true;
        try {
            qfhe::qeval(kp.pk, c, qfhe::qenc(kp.pk, DensityMatrix::basis(c.n_qubits, 0), rng), rng);
        } catch (const std::exception&) {
            ok = false;
        }
        rej.expect(ok, "depth " + std::to_string(d) + " rejected at d=" + std::to_string(d));
    }
    return {cls.done("qfhe: dec(eval(C, enc(m))) == C(m)"), qu.done("qfhe: qdec(qeval(C, qenc(rho))) == C(rho)"),
            rej.done("qfhe: Toffoli depth d+1 rejected, d accepted")};
}

// ---------------------------------------------------------------------------

inline std::vector<Check> garble_suite(std::uint64_t seed = 1) {
    Rng rng(seed, "vbbq/verify/garble");
    detail::Tally corr, sim, indep;
    for (int rep = 0; rep < 30; ++rep) {
        auto c = detail::random_circuit(rng, 5, 25, 4);
        auto g = gc::garble(c, rng.bytes(32));
        for (std::uint64_t x = 0; x < 32; ++x) {
            auto in = bits_from_uint(x, 5);
            corr.expect(gc::decode(g, gc::evaluate(g, gc::encode(g, in))) == vbbq::eval(c, in),
                        "rep " + std::to_string(rep) + " x=" + std::to_string(x));
        }
        auto y = rng.bits(4);
        auto s = gc::simulate(c, y, rng.bytes(32));
        std::vector<gc::Label> lab;
        for (const auto& l : s.input_labels) lab.push_back(l.label0);
        sim.expect(gc::decode(s, gc::evaluate(s, lab)) == y, "simulated garbling decodes wrong");
        // the simulator is a function of (topology, output, seed) only
        const auto seed2 = rng.bytes(32);
        const Bits x1 = rng.bits(5), x2 = rng.bits(5);
        const auto s1 = gc::simulate(c, vbbq::eval(c, x1), seed2);
        const auto s2 = gc::simulate(c, vbbq::eval(c, x2), seed2);
        indep.expect((vbbq::eval(c, x1) == vbbq::eval(c, x2)) == (s1 == s2), "simulation leaks beyond output");
    }
    return {corr.done("garble: decode(evaluate(encode(x))) == C(x)"), sim.done("garble: simulation decodes to y"),
            indep.done("garble: simulation depends on output only")};
}

// ---------------------------------------------------------------------------

inline std::vector<Check> oracle_suite(std::uint64_t seed = 1) {
    using orc::OracleHandle;
    using qsim::StateVector;
    Rng rng(seed, "vbbq/verify/oracle");
    detail::Tally exh, rnd, cnt;
    auto dist = [](const StateVector& a, const StateVector& b) { return (a.amps - b.amps).norm(); };
    for (std::size_t n = 1; n <= 2; ++n)
        for (std::size_t m = 1; m <= 3; ++m) {
            const std::uint64_t rows = 1u << n, funcs = std::uint64_t(1) << (m * rows);
            for (std::uint64_t gi = 0; gi < funcs; ++gi) {
                std::vector<Bits> table;
                for (std::uint64_t r = 0; r < rows; ++r)
                    table.push_back(bits_from_uint((gi >> (r * m)) & ((1u << m) - 1), m));
                const auto g = detail::table_circuit(table, n);
                for (std::uint64_t cv = 0; cv < (1u << m); ++cv) {
                    const Bits c = bits_from_uint(cv, m);
                    const auto f = orc::choice_function(g, c);
                    OracleHandle gh(g), fh(f);
                    orc::ChoiceAdapter ad(gh, c);
                    const std::size_t w = 1 + n + m;
                    bool ok = true;
                    for (std::uint64_t i = 0; i < (1u << w) && ok; ++i) {
                        auto s = StateVector::basis(w, i), t = s;
                        ad.squery(s);
                        fh.squery(t);
                        const Bits bx = bits_from_uint(i & ((1u << (1 + n)) - 1), 1 + n);
                        ok = dist(s, t) <= 1e-12 && ad.query(bx) == vbbq::eval(f, bx);
                    }
                    exh.expect(ok, "n=" + std::to_string(n) + " m=" + std::to_string(m) + " g=" + std::to_string(gi) +
                                       " c=" + std::to_string(cv));
                    cnt.expect(gh.count() == 2 * ad.count(), "g-queries != 2 f-queries");
                }
            }
        }
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng.below(2), m = 1 + rng.below(3);
        const auto g = detail::random_circuit(rng, n, 8, m);
        const Bits c = rng.bits(m);
        OracleHandle gh(g), fh(orc::choice_function(g, c));
        orc::ChoiceAdapter ad(gh, c);
        auto s = StateVector::random(1 + n + m, rng), u = s;
        ad.squery(s);
        fh.squery(u);
        rnd.expect(dist(s, u) <= 1e-9, "random state off by " + detail::num(dist(s, u)));
        cnt.expect(gh.superposition_count() == 2 * ad.count(), "g-queries != 2 f-queries");
    }
    return {exh.done("oracle: choice adapter equals f on every basis input (m<=3, n<=2)"),
            rnd.done("oracle: choice adapter equals f on random states"),
            cnt.done("oracle: two g-queries per f-query")};
}

inline std::vector<Check> run_suite(const std::string& name, std::uint64_t seed) {
    if (name == "recovery") return recovery({seed});
    if (name == "decompose") return decompose({6, 8, seed});
    if (name == "qfhe") return qfhe_suite({seed});
    if (name == "garble") return garble_suite(seed);
    if (name == "oracle") return oracle_suite(seed);
    throw std::invalid_argument("verify: unknown suite '" + name + "'");
}

}  // namespace vbbq::verify
