#pragma once

// The two distinguishers.
//
// attack_aux(rho, aux): homomorphically run J on (rho, alpha_ct), demote the
// output ciphertexts and feed them to the compute-and-compare obfuscation o.
//
// attack_noaux(rho): the same, but alpha_ct, o and the evaluation key come out
// of rho itself through J_rec (b = 0 for the aux data, b = 1 for key blocks
// 0..q). Every J_rec happens before the single qeval, which comes last.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <thread>

#include "candidates.hpp"
#include "families.hpp"
#include "qfhe.hpp"
#include "stats.hpp"

namespace vbbq::atk {

// What the attack did, in order. Only public material is touched.
struct Log {
    std::vector<std::string> steps;
    std::size_t rec_calls = 0, qeval_calls = 0;
    std::string diagnostic;  // why the attack output 0 early, if it did
    double rho_drift = -1;   // distance of rho after the J_rec phase (basis ensembles only)

    // qeval exactly once, after the last J_rec
    bool order_ok() const {
        auto q = std::find(steps.begin(), steps.end(), "qeval");
        if (q == steps.end() || std::count(steps.begin(), steps.end(), "qeval") != 1) return false;
        return std::none_of(q, steps.end(), [](const std::string& s) { return s.rfind("rec", 0) == 0; });
    }
};

struct Result {
    int bit = 0;
    Log log;
};

namespace detail {

inline Bits run_obf(const cc::Obfuscation& o, const std::vector<fhe::Ciphertext>& cts) {
    return cc::eval_obf(o, bits_from_bytes(fhe::serialize(cts)));
}

// step 1 of both attacks once the inputs are ciphertexts: qeval J on
// (rho, x_ct), demote the first `take` output wires, run o.
inline int eval_and_compare(const fhe::PublicKey& pk, const cand::Obfuscation& rho,
                            const std::vector<fhe::Ciphertext>& x_ct, std::size_t take, const cc::Obfuscation& o,
                            Rng& rng, Log& log) {
    auto I = cand::interpreter(rho.n_in, rho.n_out);
    auto in = qfhe::tensor(qfhe::qenc(pk, rho.state, rng), qfhe::promote(pk, x_ct, rng));
    log.steps.push_back("qeval");
    log.qeval_calls++;
    auto out = qfhe::qeval(pk, I->J, std::move(in), rng);
    std::vector<std::uint32_t> wires(I->J.output_wires.begin(), I->J.output_wires.begin() + take);
    auto cts = qfhe::demote(pk, out, wires, rng);
    log.steps.push_back("obf");
    Bits r = run_obf(o, cts);
    return r.size() == 1 && r[0] == 1;
}

template <class F>
Result guarded(F&& body) {
    Result res;
    try {
        res.bit = body(res.log);
    } catch (const std::exception& e) {
        res.bit = 0;
        res.log.diagnostic = e.what();
    }
    return res;
}

}  // namespace detail

inline Result attack_aux(const cand::Obfuscation& rho, const fam::AuxInfo& aux, Rng& rng) {
    return detail::guarded([&](Log& log) {
        if (aux.alpha_ct.size() != rho.n_in) throw std::invalid_argument("attack_aux: |alpha_ct| != input width");
        return detail::eval_and_compare(aux.pk, rho, aux.alpha_ct, rho.n_out, aux.o, rng, log);
    });
}

// lambda is public: it fixes the member widths.
inline Result attack_noaux(const cand::Obfuscation& rho, unsigned lambda, Rng& rng) {
    return detail::guarded([&](Log& log) -> int {
        if (rho.n_in != std::size_t(lambda) + 2) throw std::invalid_argument("attack_noaux: not a member obfuscation");
        const std::size_t w = rho.n_out - 1;
        const std::size_t q = cand::interpreter(rho.n_in, rho.n_out)->q;
        cand::Obfuscation cur = rho;
        auto rec = [&](std::uint64_t x, unsigned b, const std::string& tag) {
            log.steps.push_back(tag);
            log.rec_calls++;
            auto [next, y] = cand::interpret_rec(cur, fam::member_input(bits_from_uint(x, lambda), b), rng);
            cur = std::move(next);
            return y;
        };
        // step 1: aux data
        Bits y0 = rec(0, 0, "rec:aux");
        if (y0.back()) {
            log.diagnostic = "bottom on b=0";
            return 0;
        }
        auto [alpha_ct, o] = fam::parse_payload(bytes_from_bits(Bits(y0.begin(), y0.begin() + w)), lambda);
        // step 2: key blocks 0..q
        std::vector<pk::KeyBlock> blocks;
        for (std::uint64_t i = 0; i <= q; ++i) {
            Bits y = rec(i, 1, "rec:block:" + std::to_string(i));
            if (y.back()) {
                log.diagnostic = "bottom at block " + std::to_string(i) + ": key too short for depth " + std::to_string(q);
                return 0;
            }
            const std::size_t len = i == 0 ? fhe::kSubKeyBytes : fhe::kChainBlockBytes;
            blocks.push_back({std::uint32_t(i), pk::Strategy::Bootstrapped,
                              bytes_from_bits(Bits(y.begin(), y.begin() + 8 * len))});
        }
        if (cand::detail::all_basis(cur.state) && cand::detail::all_basis(rho.state))
            log.rho_drift = qsim::classical_trace_distance(cur.state, rho.state);
        log.steps.push_back("assemble");
        auto pk = pk::assemble(blocks, lambda);
        // step 3: x = alpha_ct, b = 2
        auto x_ct = alpha_ct;
        auto b_ct = fhe::enc(pk, Bits{0, 1}, rng);
        x_ct.insert(x_ct.end(), b_ct.begin(), b_ct.end());
        // step 4
        return detail::eval_and_compare(pk, cur, x_ct, lambda, o, rng, log);
    });
}

// ---------------------------------------------------------------------------
// Experiments

enum class Mode { Aux, NoAux };
inline const char* mode_name(Mode m) { return m == Mode::Aux ? "aux" : "noaux"; }

struct ExperimentConfig {
    Mode mode = Mode::NoAux;
    std::string candidate = "basis";
    std::size_t trials = 100;
    unsigned lambda = 6;
    std::uint64_t seed = 1;
    int d_offset = 0;  // members get d = q + d_offset
    unsigned jobs = 1;
};

struct TrialOutcome {
    int point = 0, zero = 0;
    bool order_ok = true;
    std::string diag_point, diag_zero;
};

struct Report {
    ExperimentConfig cfg;
    std::size_t q = 0, d = 0;
    std::size_t point_hits = 0, zero_hits = 0;
    double p_point = 0, p_zero = 0, advantage = 0;
    stats::Interval ci_point, ci_zero;
    bool order_ok = true;
    std::vector<TrialOutcome> outcomes;
};

inline std::size_t depth_for(Mode mode, unsigned lambda) {
    if (mode == Mode::Aux) return cand::interpreter(lambda, lambda)->q;
    fam::Member probe;
    probe.lambda = lambda;
    return cand::interpreter(std::size_t(lambda) + 2, probe.n_out())->q;
}

inline TrialOutcome run_trial(const ExperimentConfig& cfg, std::size_t d, std::uint64_t t) {
    Rng rng = trial_rng(cfg.seed, std::string("attack/") + mode_name(cfg.mode) + "/" + cfg.candidate, t);
    const auto cand = cand::get(cfg.candidate);
    Rng srng = rng.derive("sample");
    const Bits alpha = fam::sample_nonzero(srng, cfg.lambda);
    const auto r = fhe::RandomTape::sample(srng, cfg.lambda), r2 = fhe::RandomTape::sample(srng, cfg.lambda);
    const auto s = fam::sample_D_r(alpha, unsigned(d), r, rng.derive("d"));
    TrialOutcome out;
    for (fam::Kind kind : {fam::Kind::POINT, fam::Kind::ZERO}) {
        Rng orng = rng.derive("obf", kind == fam::Kind::POINT), arng = rng.derive("attack", kind == fam::Kind::POINT);
        Result res;
        if (cfg.mode == Mode::Aux) {
            auto [spec, aux] = fam::build_aux_member_v4(kind, alpha, s.beta, s.aux);
            res = attack_aux(cand->obf(build_function(spec), orng), aux, arng);
        } else {
            auto m = fam::build_member(kind, alpha, s.beta, unsigned(d), r, r2, s.aux);
            res = attack_noaux(cand->obf(fam::member_circuit(m), orng), cfg.lambda, arng);
        }
        if (kind == fam::Kind::POINT) {
            out.point = res.bit;
            out.diag_point = res.log.diagnostic;
        } else {
            out.zero = res.bit;
            out.diag_zero = res.log.diagnostic;
        }
        if (res.log.diagnostic.empty() && !res.log.order_ok()) out.order_ok = false;
    }
    return out;
}

// Runs trials in index order across `jobs` workers; the result does not depend
// on scheduling.
inline Report run_experiment(const ExperimentConfig& cfg) {
    if (cfg.trials == 0) throw std::invalid_argument("run_experiment: trials must be >= 1");
    cand::get(cfg.candidate);
    Report rep;
    rep.cfg = cfg;
    rep.q = depth_for(cfg.mode, cfg.lambda);
    const long d = long(rep.q) + cfg.d_offset;
    if (d < 0) throw std::invalid_argument("run_experiment: negative depth");
    rep.d = std::size_t(d);
    rep.outcomes.resize(cfg.trials);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next++) < cfg.trials;) rep.outcomes[t] = run_trial(cfg, rep.d, t);
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, unsigned(cfg.trials)));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& o : rep.outcomes) {
        rep.point_hits += o.point;
        rep.zero_hits += o.zero;
        rep.order_ok = rep.order_ok && o.order_ok;
    }
    const double n = double(cfg.trials);
    rep.p_point = rep.point_hits / n;
    rep.p_zero = rep.zero_hits / n;
    rep.advantage = std::abs(rep.p_point - rep.p_zero);
    rep.ci_point = stats::wilson(rep.point_hits, cfg.trials);
    rep.ci_zero = stats::wilson(rep.zero_hits, cfg.trials);
    return rep;
}

}  // namespace vbbq::atk
