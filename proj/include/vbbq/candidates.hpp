#pragma once

// Candidate quantum obfuscators (obf, J) for the attack to target.
//
// Shipped candidates describe C by a decision list: a partition of {0,1}^n_in
// into prefix cubes (high input bits fixed, low bits free), one entry per cube,
// padded to E = 5 * n_in entries. Entry layout on the program register:
//   valid | key (n_in) | mask (n_in) | value (n_out)
// J is a coherent lookup: every entry is compared with x and, on a match, its
// value is XORed into the output register. Cubes are disjoint, so exactly one
// entry fires. J depends only on (n_in, n_out).
//
// Wire layout of J: program [0, P), x [P, P+n_in), out, u (n_in), tree (n_in);
// J_rec adds Y (n_out) on top.

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include "circuit_ir.hpp"
#include "qsim.hpp"

namespace vbbq::cand {

using qsim::Ensemble;
using qsim::QuantumCircuit;

struct UnsupportedShape : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Obfuscation {
    std::string candidate;
    std::size_t n_in = 0, n_out = 0;
    Ensemble state;  // program register only

    std::size_t n_qubits() const { return state.n_qubits(); }
};

struct Interpreter {
    std::size_t n_in = 0, n_out = 0, entries = 0, entry_width = 0;
    std::size_t prog = 0;  // P
    QuantumCircuit J, J_rec;
    std::size_t q = 0;  // Toffoli depth of J

    std::uint32_t x_off() const { return std::uint32_t(prog); }
    std::uint32_t out_off() const { return std::uint32_t(prog + n_in); }
    std::vector<std::uint32_t> out_wires() const { return J.output_wires; }
    std::vector<std::uint32_t> y_wires() const { return J_rec.output_wires; }
};

inline std::size_t entry_capacity(std::size_t n_in) { return 5 * n_in; }

namespace detail {

inline std::shared_ptr<const Interpreter> build_interpreter(std::size_t n_in, std::size_t n_out) {
    using namespace qsim;
    auto it = std::make_shared<Interpreter>();
    Interpreter& I = *it;
    I.n_in = n_in;
    I.n_out = n_out;
    I.entries = entry_capacity(n_in);
    I.entry_width = 1 + 2 * n_in + n_out;
    I.prog = I.entries * I.entry_width;
    const std::uint32_t x0 = std::uint32_t(I.prog), out0 = std::uint32_t(x0 + n_in),
                        u0 = std::uint32_t(out0 + n_out), t0 = std::uint32_t(u0 + n_in);
    const std::size_t n_tree = n_in;  // n_in + 1 leaves
    const std::size_t n_wires = t0 + n_tree;

    std::vector<QOp> body;
    for (std::size_t e = 0; e < I.entries; ++e) {
        const std::uint32_t base = std::uint32_t(e * I.entry_width);
        const std::uint32_t valid = base, key = base + 1, mask = std::uint32_t(key + n_in),
                            val = std::uint32_t(mask + n_in);
        std::vector<QOp> pre, tree;
        for (std::uint32_t k = 0; k < n_in; ++k) pre.push_back(CNOT(key + k, x0 + k));
        for (std::uint32_t k = 0; k < n_in; ++k) {
            pre.push_back(CCX(mask + k, x0 + k, u0 + k));
            pre.push_back(X(u0 + k));
        }
        std::vector<std::uint32_t> layer{valid};
        for (std::uint32_t k = 0; k < n_in; ++k) layer.push_back(u0 + k);
        std::uint32_t next = t0;
        while (layer.size() > 1) {
            std::vector<std::uint32_t> nl;
            for (std::size_t k = 0; k + 1 < layer.size(); k += 2) {
                tree.push_back(CCX(layer[k], layer[k + 1], next));
                nl.push_back(next++);
            }
            if (layer.size() % 2) nl.push_back(layer.back());
            layer.swap(nl);
        }
        const std::uint32_t match = layer[0];
        body.insert(body.end(), pre.begin(), pre.end());
        body.insert(body.end(), tree.begin(), tree.end());
        for (std::uint32_t j = 0; j < n_out; ++j) body.push_back(CCX(match, val + j, out0 + j));
        body.insert(body.end(), tree.rbegin(), tree.rend());
        body.insert(body.end(), pre.rbegin(), pre.rend());
    }

    I.J.n_qubits = n_wires;
    for (std::uint32_t w = out0; w < n_wires; ++w) I.J.ops.push_back(INIT0(w));
    I.J.ops.insert(I.J.ops.end(), body.begin(), body.end());
    for (std::uint32_t j = 0; j < n_out; ++j) I.J.output_wires.push_back(out0 + j);
    I.J.validate();
    I.q = toffoli_depth(I.J);

    const std::uint32_t y0 = std::uint32_t(n_wires);
    I.J_rec.n_qubits = n_wires + n_out;
    for (std::uint32_t w = out0; w < I.J_rec.n_qubits; ++w) I.J_rec.ops.push_back(INIT0(w));
    I.J_rec.ops.insert(I.J_rec.ops.end(), body.begin(), body.end());
    for (std::uint32_t j = 0; j < n_out; ++j) I.J_rec.ops.push_back(CNOT(out0 + j, y0 + j));
    I.J_rec.ops.insert(I.J_rec.ops.end(), body.rbegin(), body.rend());
    for (std::uint32_t j = 0; j < n_out; ++j) I.J_rec.output_wires.push_back(y0 + j);
    I.J_rec.validate();
    return it;
}

// Partial trace keeping [0, n): terms are grouped by their bits above n.
inline Ensemble keep_prefix(const Ensemble& e, std::size_t n) {
    std::vector<qsim::Branch> out;
    for (const auto& br : e.branches()) {
        const double nrm = br.state.norm2();
        std::unordered_map<qsim::BitVec, std::vector<qsim::Term>, qsim::BitVecHash> groups;
        std::vector<qsim::BitVec> order;
        for (const auto& t : br.state.terms()) {
            qsim::BitVec hi(t.bits.size() - n);
            for (std::size_t k = n; k < t.bits.size(); ++k)
                if (t.bits.get(k)) hi.set(k - n, 1);
            auto [g, fresh] = groups.try_emplace(hi);
            if (fresh) order.push_back(hi);
            qsim::BitVec lo = t.bits;
            lo.resize(n);
            g->second.push_back({std::move(lo), t.amp});
        }
        for (const auto& k : order) {
            auto& terms = groups[k];
            double g2 = 0;
            for (const auto& t : terms) g2 += std::norm(t.amp);
            if (g2 <= 0) continue;
            out.push_back({br.weight * g2 / nrm, qsim::SparseState::from_terms(n, std::move(terms))});
        }
    }
    return Ensemble::mixture(std::move(out));
}

inline bool all_basis(const Ensemble& e) {
    for (const auto& b : e.branches())
        if (b.state.terms().size() != 1) return false;
    return true;
}

}  // namespace detail

// J for the given widths; built once, shared.
inline std::shared_ptr<const Interpreter> interpreter(std::size_t n_in, std::size_t n_out) {
    static std::mutex mu;
    static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const Interpreter>> cache;
    std::lock_guard<std::mutex> lk(mu);
    auto& slot = cache[{n_in, n_out}];
    if (!slot) slot = detail::build_interpreter(n_in, n_out);
    return slot;
}

// ---------------------------------------------------------------------------
// Decision lists

struct Entry {
    bool valid = false;
    Bits key, mask, value;
};

// Prefix-cube partition of a truth table; cubes with equal outputs merge.
inline std::vector<Entry> decision_list(const std::vector<Bits>& table, std::size_t n_in) {
    if (table.size() != (std::size_t(1) << n_in)) throw std::invalid_argument("decision_list: table size");
    const std::size_t cap = entry_capacity(n_in);
    std::vector<Entry> out;
    // (base row, free low bits)
    std::vector<std::pair<std::uint64_t, std::size_t>> stack{{0, n_in}};
    while (!stack.empty()) {
        auto [base, free] = stack.back();
        stack.pop_back();
        const std::uint64_t n = std::uint64_t(1) << free;
        bool uniform = true;
        for (std::uint64_t r = 1; r < n && uniform; ++r) uniform = table[base + r] == table[base];
        if (!uniform) {
            const std::uint64_t half = n / 2;
            stack.push_back({base + half, free - 1});
            stack.push_back({base, free - 1});
            continue;
        }
        Entry e;
        e.valid = true;
        e.key = bits_from_uint(base, n_in);
        e.mask.assign(n_in, 0);
        for (std::size_t k = free; k < n_in; ++k) e.mask[k] = 1;
        e.value = table[base];
        out.push_back(std::move(e));
        if (out.size() > cap)
            throw UnsupportedShape("decision list needs more than " + std::to_string(cap) + " entries");
    }
    return out;
}

inline Bits encode(const std::vector<Entry>& list, const Interpreter& I) {
    Bits p(I.prog, 0);
    for (std::size_t e = 0; e < list.size(); ++e) {
        const auto& en = list[e];
        const std::size_t base = e * I.entry_width;
        p[base] = en.valid;
        for (std::size_t k = 0; k < I.n_in; ++k) {
            p[base + 1 + k] = en.key[k];
            p[base + 1 + I.n_in + k] = en.mask[k];
        }
        for (std::size_t j = 0; j < I.n_out; ++j) p[base + 1 + 2 * I.n_in + j] = en.value[j];
    }
    return p;
}

// ---------------------------------------------------------------------------

class Candidate {
public:
    virtual ~Candidate() = default;
    virtual std::string name() const = 0;
    virtual double eps_f() const = 0;
    virtual Obfuscation obf(const BooleanCircuit& c, Rng& rng) const = 0;
    virtual std::shared_ptr<const Interpreter> interp(std::size_t n_in, std::size_t n_out) const {
        return interpreter(n_in, n_out);
    }
    std::size_t program_qubits(std::size_t n_in, std::size_t n_out) const { return interp(n_in, n_out)->prog; }
};

// rho = |desc(C)><desc(C)|
class BasisCandidate : public Candidate {
public:
    std::string name() const override { return "basis"; }
    double eps_f() const override { return 0; }
    Obfuscation obf(const BooleanCircuit& c, Rng&) const override {
        auto I = interp(c.n_inputs, c.output_wires.size());
        return {name(), I->n_in, I->n_out, Ensemble::basis(describe(c, *I))};
    }
    static Bits describe(const BooleanCircuit& c, const Interpreter& I) {
        c.validate();
        if (c.n_inputs > 16) throw UnsupportedShape("decision list: more than 16 inputs");
        return encode(decision_list(truth_table(c), c.n_inputs), I);
    }
};

// (1 - eps) |desc><desc| + eps/4 sum_c |desc_c><desc_c|, desc_c flipping a
// nonempty set of value columns in every valid entry, so every input errs
// with probability exactly eps.
class NoisyCandidate : public Candidate {
public:
    explicit NoisyCandidate(double eps = 0.05) : eps_(eps) {
        if (!(eps >= 0 && eps <= 1)) throw std::invalid_argument("noisy candidate: eps out of range");
    }
    std::string name() const override { return "noisy"; }
    double eps_f() const override { return eps_; }
    Obfuscation obf(const BooleanCircuit& c, Rng& rng) const override {
        auto I = interp(c.n_inputs, c.output_wires.size());
        const Bits desc = BasisCandidate::describe(c, *I);
        std::vector<qsim::Branch> br;
        br.push_back({1 - eps_, qsim::SparseState::basis(desc)});
        for (int k = 0; k < kCopies; ++k) {
            Bits cols;
            do cols = rng.bits(I->n_out);
            while (bits_all_zero(cols));
            Bits d = desc;
            for (std::size_t e = 0; e < I->entries; ++e) {
                const std::size_t base = e * I->entry_width;
                if (!d[base]) continue;
                for (std::size_t j = 0; j < I->n_out; ++j) d[base + 1 + 2 * I->n_in + j] ^= cols[j];
            }
            br.push_back({eps_ / kCopies, qsim::SparseState::basis(d)});
        }
        if (eps_ == 0) br.resize(1);
        return {name(), I->n_in, I->n_out, Ensemble::mixture(std::move(br))};
    }

private:
    static constexpr int kCopies = 4;
    double eps_;
};

// ---------------------------------------------------------------------------
// Registry

inline std::map<std::string, std::shared_ptr<const Candidate>>& registry() {
    static std::map<std::string, std::shared_ptr<const Candidate>> r{
        {"basis", std::make_shared<BasisCandidate>()},
        {"noisy", std::make_shared<NoisyCandidate>(0.05)},
    };
    return r;
}

inline void register_candidate(std::shared_ptr<const Candidate> c) { registry()[c->name()] = std::move(c); }

inline std::shared_ptr<const Candidate> get(const std::string& name) {
    auto it = registry().find(name);
    if (it == registry().end()) throw std::invalid_argument("unknown candidate: " + name);
    return it->second;
}

inline std::vector<std::string> names() {
    std::vector<std::string> v;
    for (const auto& [k, c] : registry()) v.push_back(k);
    return v;
}

// ---------------------------------------------------------------------------
// Running J

inline Ensemble with_input(const Obfuscation& o, const Bits& x) {
    if (x.size() != o.n_in) throw std::invalid_argument("interpret: input width mismatch");
    return qsim::tensor(o.state, Ensemble::basis(x));
}

// Exact output distribution of J(rho (x) |x><x|).
inline std::vector<std::pair<Bits, double>> output_distribution(const Obfuscation& o, const Bits& x) {
    auto I = interpreter(o.n_in, o.n_out);
    return qsim::run(I->J, with_input(o, x)).distribution(I->out_wires());
}

inline Bits interpret(const Obfuscation& o, const Bits& x, Rng& rng) {
    auto I = interpreter(o.n_in, o.n_out);
    auto e = qsim::run(I->J, with_input(o, x));
    return e.measure(I->out_wires(), rng);
}

// J_rec then measure Y. Returns the recovered program state and the outcome.
inline std::pair<Obfuscation, Bits> interpret_rec(const Obfuscation& o, const Bits& x, Rng& rng) {
    auto I = interpreter(o.n_in, o.n_out);
    auto e = qsim::run(I->J_rec, with_input(o, x));
    Bits y = e.measure(I->y_wires(), rng);
    Obfuscation r{o.candidate, o.n_in, o.n_out, detail::keep_prefix(e, I->prog)};
    return {std::move(r), y};
}

// Recovery quantities for one (rho, x) with expected output cx:
//   eps       = 1/2 || J(rho (x) x) - |cx><cx| ||_1
//   joint     = distance of (recovered input, Y) from rho (x) x (x) |cx>
//   recovered = distance of the recovered input (unconditioned) from rho (x) x
struct RecoveryReport {
    double eps = 0, joint = 0, recovered = 0;
};

inline RecoveryReport recovery_report(const Obfuscation& o, const Bits& x, const Bits& cx) {
    auto I = interpreter(o.n_in, o.n_out);
    const Ensemble in = with_input(o, x);
    const std::size_t n_in_w = I->prog + I->n_in;
    RecoveryReport r;
    if (detail::all_basis(in)) {
        auto out = qsim::run(I->J, in).distribution(I->out_wires());
        double p = 0;
        for (const auto& [v, w] : out)
            if (v == cx) p += w;
        r.eps = 1 - p;
        // J_rec maps basis branches to basis branches
        Ensemble after = qsim::run(I->J_rec, in);
        std::vector<qsim::Branch> joint;
        for (const auto& b : after.branches()) {
            const auto& t = b.state.terms().at(0);
            Bits keep = t.bits.slice(0, n_in_w);
            Bits y = t.bits.slice(I->y_wires());
            keep.insert(keep.end(), y.begin(), y.end());
            joint.push_back({b.weight, qsim::SparseState::basis(keep)});
        }
        Bits ref_y = cx;
        std::vector<qsim::Branch> ref;
        for (const auto& b : in.branches()) {
            Bits v = b.state.terms()[0].bits.slice(0, n_in_w);
            v.insert(v.end(), ref_y.begin(), ref_y.end());
            ref.push_back({b.weight, qsim::SparseState::basis(v)});
        }
        auto je = Ensemble::mixture(joint), re = Ensemble::mixture(ref);
        r.joint = qsim::classical_trace_distance(je, re);
        r.recovered = qsim::classical_trace_distance(detail::keep_prefix(je, n_in_w), in);
        return r;
    }
    throw UnsupportedShape("recovery_report: program state is not a mixture of basis states");
}

}  // namespace vbbq::cand
