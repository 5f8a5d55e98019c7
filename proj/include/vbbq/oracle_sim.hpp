#pragma once

// Black-box side: oracle handles with query accounting, the two-query choice
// adapter, the member oracle rebuilt from a point oracle plus public data, and
// baseline simulators with the measure-a-random-query extractor.

#include <json.hpp>

#include <functional>
#include <string>
#include <unordered_set>

#include "attack.hpp"
#include "families.hpp"
#include "pk_decompose.hpp"
#include "qsim.hpp"
#include "stats.hpp"

namespace vbbq::orc {

using qsim::StateVector;

inline std::string hex(const Bits& b) {
    static const char* d = "0123456789abcdef";
    std::string s;
    for (std::size_t i = 0; i < b.size(); i += 4) {
        int v = 0;
        for (std::size_t k = 0; k < 4 && i + k < b.size(); ++k) v |= b[i + k] << k;
        s.push_back(d[v]);
    }
    return s;
}

// |x>|z> -> |x>|z ^ f(x)> on chosen wires of a dense state.
inline void apply_table(const std::vector<Bits>& table, StateVector& s, const std::vector<std::uint32_t>& xw,
                        const std::vector<std::uint32_t>& zw) {
    qsim::Vec out = qsim::Vec::Zero(s.amps.size());
    for (std::size_t i = 0; i < s.dim(); ++i) {
        std::size_t x = 0;
        for (std::size_t k = 0; k < xw.size(); ++k) x |= ((i >> xw[k]) & 1u) << k;
        std::size_t j = i;
        const Bits& fx = table[x];
        for (std::size_t k = 0; k < zw.size(); ++k)
            if (fx[k]) j ^= std::size_t(1) << zw[k];
        out[Eigen::Index(j)] += s.amps[Eigen::Index(i)];
    }
    s.amps = std::move(out);
}

class OracleHandle {
public:
    explicit OracleHandle(BooleanCircuit f) : f_(std::move(f)) { f_.validate(); }

    std::size_t n_in() const { return f_.n_inputs; }
    std::size_t n_out() const { return f_.output_wires.size(); }
    std::uint64_t classical_count() const { return classical_; }
    std::uint64_t superposition_count() const { return superposition_; }
    std::uint64_t count() const { return classical_ + superposition_; }
    // classical query inputs in order
    const std::vector<Bits>& queries() const { return inputs_; }

    Bits query(const Bits& x) {
        if (x.size() != n_in()) throw std::invalid_argument("query: input width mismatch");
        Bits y = n_in() <= 16 ? table().at(bits_to_uint(x)) : vbbq::eval(f_, x);
        log("classical", hex(x), hex(y));
        inputs_.push_back(x);
        ++classical_;
        return y;
    }

    // x on xw, z on zw
    void squery(StateVector& s, const std::vector<std::uint32_t>& xw, const std::vector<std::uint32_t>& zw) {
        if (xw.size() != n_in() || zw.size() != n_out()) throw std::invalid_argument("squery: register width mismatch");
        for (auto w : xw)
            if (w >= s.n_qubits) throw std::invalid_argument("squery: wire out of range");
        for (auto w : zw)
            if (w >= s.n_qubits) throw std::invalid_argument("squery: wire out of range");
        apply_table(table(), s, xw, zw);
        log("superposition", "", "");
        ++superposition_;
    }
    // x on the low wires, z above
    void squery(StateVector& s) {
        std::vector<std::uint32_t> xw, zw;
        for (std::uint32_t k = 0; k < n_in(); ++k) xw.push_back(k);
        for (std::uint32_t k = 0; k < n_out(); ++k) zw.push_back(std::uint32_t(n_in() + k));
        if (s.n_qubits != n_in() + n_out()) throw std::invalid_argument("squery: state width mismatch");
        squery(s, xw, zw);
    }

    void record_transcript(bool on) { record_ = on; }
    // one JSON object per line: query index, mode, input, output
    std::string transcript_jsonl() const {
        std::string s;
        for (const auto& j : transcript_) s += j.dump() + "\n";
        return s;
    }

private:
    const std::vector<Bits>& table() {
        if (table_.empty()) table_ = truth_table(f_);
        return table_;
    }
    void log(const char* mode, std::string in, std::string out) {
        if (!record_) return;
        nlohmann::json j;
        j["i"] = count();
        j["mode"] = mode;
        if (!in.empty()) j["input"] = in;
        if (!out.empty()) j["output"] = out;
        transcript_.push_back(std::move(j));
    }

    BooleanCircuit f_;
    std::vector<Bits> table_;
    std::uint64_t classical_ = 0, superposition_ = 0;
    std::vector<Bits> inputs_;
    bool record_ = false;
    std::vector<nlohmann::json> transcript_;
};

// ---------------------------------------------------------------------------
// f(b, x) = c if b = 0 else g(x), input layout [b, x].

inline BooleanCircuit choice_function(const BooleanCircuit& g, const Bits& c) {
    if (c.size() != g.output_wires.size()) throw std::invalid_argument("choice: |c| != output width of g");
    CircuitBuilder b(g.n_inputs + 1);
    std::vector<CircuitBuilder::Sig> x;
    for (std::size_t i = 0; i < g.n_inputs; ++i) x.push_back(b.input(i + 1));
    auto gx = b.embed(g, x);
    const auto sel = b.input(0);
    for (std::size_t j = 0; j < c.size(); ++j) b.output(b.MUX(sel, gx[j], CircuitBuilder::lit(c[j])));
    return b.build();
}

// Simulates f-queries with exactly two g-queries each:
//   g(X -> aux); CCX(b, aux_i, z_i); X(b); CNOT(b, z_i) where c_i = 1; X(b); g(X -> aux)
class ChoiceAdapter {
public:
    ChoiceAdapter(OracleHandle& g, Bits c) : g_(g), c_(std::move(c)) {
        if (c_.size() != g.n_out()) throw std::invalid_argument("choice: |c| != output width of g");
    }
    std::size_t n_in() const { return g_.n_in() + 1; }
    std::size_t n_out() const { return g_.n_out(); }
    std::uint64_t count() const { return count_; }

    Bits query(const Bits& bx) {
        if (bx.size() != n_in()) throw std::invalid_argument("choice query: width");
        const Bits x(bx.begin() + 1, bx.end());
        int b = bx[0];
        Bits aux = g_.query(x), z(n_out(), 0);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] ^= b & aux[i];
        b ^= 1;
        for (std::size_t i = 0; i < z.size(); ++i) z[i] ^= b & c_[i];
        b ^= 1;
        aux = bits_xor(aux, g_.query(x));
        if (!bits_all_zero(aux)) throw std::logic_error("choice: aux not restored");
        ++count_;
        return z;
    }

    // s over [b, X (n), Z (m)]
    void squery(StateVector& s) {
        const std::size_t n = g_.n_in(), m = n_out(), base = 1 + n + m;
        if (s.n_qubits != base) throw std::invalid_argument("choice squery: state width");
        StateVector big = StateVector::basis(base + m, 0);
        big.amps.setZero();
        for (std::size_t i = 0; i < s.dim(); ++i) big.amps[Eigen::Index(i)] = s.amps[Eigen::Index(i)];
        std::vector<std::uint32_t> xw, zw, aw;
        for (std::uint32_t k = 0; k < n; ++k) xw.push_back(1 + k);
        for (std::uint32_t k = 0; k < m; ++k) {
            zw.push_back(std::uint32_t(1 + n + k));
            aw.push_back(std::uint32_t(base + k));
        }
        g_.squery(big, xw, aw);
        for (std::size_t i = 0; i < m; ++i) big.apply(qsim::CCX(0, aw[i], zw[i]));
        big.apply(qsim::X(0));
        for (std::size_t i = 0; i < m; ++i)
            if (c_[i]) big.apply(qsim::CNOT(0, zw[i]));
        big.apply(qsim::X(0));
        g_.squery(big, xw, aw);
        // aux back at |0>
        double leak = 0;
        for (std::size_t i = s.dim(); i < big.dim(); ++i) leak += std::norm(big.amps[Eigen::Index(i)]);
        if (leak > 1e-12) throw std::logic_error("choice: aux not restored");
        for (std::size_t i = 0; i < s.dim(); ++i) s.amps[Eigen::Index(i)] = big.amps[Eigen::Index(i)];
        ++count_;
    }

private:
    OracleHandle& g_;
    Bits c_;
    std::uint64_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Member oracle answered from the point (or zero) oracle plus public inputs:
// b = 0 -> the aux payload, b = 1 -> simulated key blocks from pk, b = 2 -> the
// point oracle, b = 3 or x > K -> bottom.

class ComposedMemberOracle {
public:
    ComposedMemberOracle(OracleHandle& point, Bytes aux_payload, const fhe::PublicKey& pk, std::size_t w)
        : point_(point), aux_(std::move(aux_payload)), w_(w),
          blocks_(pk::sim_blocks(pk.params.lambda, pk, pk::Strategy::Bootstrapped)) {
        if (point.n_in() != pk.params.lambda) throw std::invalid_argument("composed: point oracle width");
    }

    Bits query(const Bits& x, unsigned b) {
        const unsigned lambda = unsigned(point_.n_in());
        if (x.size() != lambda || b > 3) throw std::invalid_argument("composed: input");
        ++count_;
        Bits out(w_ + 1, 0);
        auto put = [&](const Bytes& bytes) {
            Bits v = bits_from_bytes(bytes);
            std::copy(v.begin(), v.end(), out.begin());
        };
        const std::uint64_t i = bits_to_uint(x);
        switch (b) {
            case 0: put(aux_); return out;
            case 1:
                if (i >= blocks_.size()) break;
                put(blocks_[i].body);
                return out;
            case 2: {
                Bits y = point_.query(x);
                std::copy(y.begin(), y.end(), out.begin());
                return out;
            }
            default: break;
        }
        return Bits(w_ + 1, 1);
    }
    std::uint64_t count() const { return count_; }

private:
    OracleHandle& point_;
    Bytes aux_;
    std::size_t w_;
    std::vector<pk::KeyBlock> blocks_;
    std::uint64_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Baseline simulators: S^{oracle}(aux) -> bit under a query budget.

using Simulator = std::function<int(OracleHandle&, const fam::AuxInfo&, std::size_t budget, Rng&)>;

// does o accept y (o fires on encryptions of beta)
inline bool o_accepts(const fam::AuxInfo& aux, const Bits& y, Rng& rng) {
    auto ct = fhe::enc(aux.pk, y, rng);
    Bits r = cc::eval_obf(aux.o, bits_from_bytes(fhe::serialize(ct)));
    return r.size() == 1 && r[0];
}

inline int sim_random_guess(OracleHandle&, const fam::AuxInfo&, std::size_t, Rng& rng) { return rng.bit(); }

// distinct random probes (all inputs when the budget allows); 1 on any nonzero answer
inline int sim_exhaustive_probe(OracleHandle& h, const fam::AuxInfo&, std::size_t budget, Rng& rng) {
    const std::uint64_t space = std::uint64_t(1) << h.n_in();
    if (budget >= space) {
        for (std::uint64_t x = 0; x < space; ++x)
            if (!bits_all_zero(h.query(bits_from_uint(x, h.n_in())))) return 1;
        return 0;
    }
    std::unordered_set<std::uint64_t> seen;
    while (seen.size() < budget) {
        std::uint64_t x = rng.below(space);
        if (!seen.insert(x).second) continue;
        if (!bits_all_zero(h.query(bits_from_uint(x, h.n_in())))) return 1;
    }
    return 0;
}

// probes derived from alpha_ct (its masked bits, then hashed variants); an
// answer counts only if o accepts it
inline int sim_replay_probe(OracleHandle& h, const fam::AuxInfo& aux, std::size_t budget, Rng& rng) {
    const std::size_t n = h.n_in();
    Bits masked;
    for (const auto& c : aux.alpha_ct) masked.push_back(c.c & 1);
    masked.resize(n, 0);
    const auto dig = hash32("vbbq/oracle/replay-seed", fhe::serialize(aux.alpha_ct));
    const Bytes seed(dig.begin(), dig.end());
    std::unordered_set<std::uint64_t> seen;
    for (std::uint64_t k = 0; seen.size() < budget && k < 64 * budget + 64; ++k) {
        Bits x = masked;
        if (k > 0) {
            auto d = prf(seed, "vbbq/oracle/replay", k);
            x = bits_from_bytes(Bytes(d.begin(), d.end()));
            x.resize(n);
        }
        if (!seen.insert(bits_to_uint(x)).second) continue;
        Bits y = h.query(x);
        if (!bits_all_zero(y) && o_accepts(aux, y, rng)) return 1;
    }
    return 0;
}

inline std::vector<std::pair<std::string, Simulator>> baselines() {
    return {{"random-guess", sim_random_guess},
            {"exhaustive-probe", sim_exhaustive_probe},
            {"alpha-replay", sim_replay_probe}};
}

// Measure-a-random-query extractor: run S against the zero oracle and output
// the input of a uniformly chosen query (uniform guess if S made none).
struct Extraction {
    Bits guess;
    std::size_t d_prime = 0;   // queries made (sequential, so also the query depth)
    double hit_prob = 0;       // Pr[guess = alpha] over the choice of query, exactly
};

inline Extraction o2h_extract(const Simulator& sim, const fam::AuxInfo& aux, unsigned lambda, std::size_t budget,
                              const Bits& alpha, Rng& sim_rng, Rng& pick_rng) {
    OracleHandle zero(build_function(zero_spec(lambda, lambda)));
    sim(zero, aux, budget, sim_rng);
    Extraction e;
    const auto& qs = zero.queries();
    e.d_prime = qs.size();
    if (qs.empty()) {
        e.guess = pick_rng.bits(lambda);
        e.hit_prob = std::ldexp(1.0, -int(lambda));
        return e;
    }
    e.guess = qs[pick_rng.below(qs.size())];
    e.hit_prob = double(std::count(qs.begin(), qs.end(), alpha)) / double(qs.size());
    return e;
}

struct BaselineRow {
    std::string name;
    std::size_t trials = 0, budget = 0, max_d_prime = 0;
    std::size_t point_hits = 0, zero_hits = 0, ext_hits = 0;
    double advantage = 0, ext_freq = 0, ext_exact = 0;
    double ext_limit = 0;   // budget / 2^lambda + 3 sigma
    double o2h_bound = 0;   // 2 d' sqrt(ext_exact + 3 sigma) + 3 sigma_adv
    bool adv_ok = false, ext_ok = false, o2h_ok = false;
};

struct BaselineConfig {
    unsigned lambda = 12;
    std::size_t budget = 128, trials = 1000;
    std::uint64_t seed = 1;
    double max_advantage = 0.05;
};

// POINT and ZERO runs share the simulator's randomness per trial.
inline std::vector<BaselineRow> run_baselines(const BaselineConfig& cfg) {
    const std::size_t d = atk::depth_for(atk::Mode::Aux, cfg.lambda);
    std::vector<BaselineRow> rows;
    for (const auto& [name, sim] : baselines()) {
        BaselineRow row;
        row.name = name;
        row.trials = cfg.trials;
        row.budget = cfg.budget;
        double exact_sum = 0, exact_sq = 0;
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            Rng rng = trial_rng(cfg.seed, "baseline/" + name, t);
            Rng srng = rng.derive("sample");
            const Bits alpha = fam::sample_nonzero(srng, cfg.lambda);
            const auto s = fam::sample_D(alpha, unsigned(d), rng.derive("d"));
            OracleHandle point(build_function(mbpf_spec(alpha, s.beta)));
            OracleHandle zero(build_function(zero_spec(cfg.lambda, cfg.lambda)));
            Rng r1 = rng.derive("sim"), r2 = rng.derive("sim");
            row.point_hits += sim(point, s.aux, cfg.budget, r1);
            row.zero_hits += sim(zero, s.aux, cfg.budget, r2);
            Rng er = rng.derive("sim"), pr = rng.derive("pick");
            auto ex = o2h_extract(sim, s.aux, cfg.lambda, cfg.budget, alpha, er, pr);
            row.ext_hits += ex.guess == alpha;
            row.max_d_prime = std::max(row.max_d_prime, ex.d_prime);
            exact_sum += ex.hit_prob;
            exact_sq += ex.hit_prob * ex.hit_prob;
        }
        const double n = double(cfg.trials);
        row.advantage = std::abs(double(row.point_hits) - double(row.zero_hits)) / n;
        row.ext_freq = row.ext_hits / n;
        row.ext_exact = exact_sum / n;
        const double p0 = std::min(1.0, double(cfg.budget) / std::ldexp(1.0, int(cfg.lambda)));
        row.ext_limit = p0 + 3 * stats::sigma(p0, cfg.trials);
        const double ext_sd = std::sqrt(std::max(0.0, exact_sq / n - row.ext_exact * row.ext_exact) / n);
        const double pp = row.point_hits / n, pz = row.zero_hits / n;
        const double adv_sd = std::sqrt(pp * (1 - pp) / n + pz * (1 - pz) / n);
        row.o2h_bound = 2 * double(row.max_d_prime) * std::sqrt(row.ext_exact + 3 * ext_sd) + 3 * adv_sd;
        row.adv_ok = row.advantage <= cfg.max_advantage;
        row.ext_ok = row.ext_freq <= row.ext_limit;
        row.o2h_ok = row.advantage <= row.o2h_bound;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace vbbq::orc
