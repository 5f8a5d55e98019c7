#pragma once

// Quantum simulation.
//
// Dense: StateVector (<= 22 qubits) and DensityMatrix (<= 10 qubits), qubit 0
// is the least significant bit of the basis index.
//
// Sparse: SparseState is a list of (basis bitstring, amplitude) terms and
// Ensemble a weighted list of SparseStates. Classical gates permute terms in
// place, so a basis state of a few hundred thousand qubits costs one bitset.
// This is what carries obfuscations and QOTP ciphertexts.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bits.hpp"
#include "circuit_ir.hpp"
#include "prf.hpp"

namespace vbbq::qsim {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

struct StructuralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxStateQubits = 22;
inline constexpr std::size_t kMaxDensityQubits = 10;
inline constexpr double kTol = 1e-9;

// ---------------------------------------------------------------------------
// Circuits

enum class Op : std::uint8_t { X, Z, H, CNOT, CCX, MEASURE, INIT0 };

inline const char* op_name(Op k) {
    switch (k) {
        case Op::X: return "X";
        case Op::Z: return "Z";
        case Op::H: return "H";
        case Op::CNOT: return "CNOT";
        case Op::CCX: return "CCX";
        case Op::MEASURE: return "MEASURE";
        case Op::INIT0: return "INIT0";
    }
    return "?";
}

inline int n_controls(Op k) { return k == Op::CNOT ? 1 : k == Op::CCX ? 2 : 0; }

struct QOp {
    Op kind;
    std::uint32_t c0 = 0, c1 = 0;  // controls
    std::uint32_t t = 0;           // target / single wire
    bool operator==(const QOp&) const = default;
};

inline QOp X(std::uint32_t t) { return {Op::X, 0, 0, t}; }
inline QOp Z(std::uint32_t t) { return {Op::Z, 0, 0, t}; }
inline QOp H(std::uint32_t t) { return {Op::H, 0, 0, t}; }
inline QOp CNOT(std::uint32_t c, std::uint32_t t) { return {Op::CNOT, c, 0, t}; }
inline QOp CCX(std::uint32_t a, std::uint32_t b, std::uint32_t t) { return {Op::CCX, a, b, t}; }
inline QOp MEASURE(std::uint32_t t) { return {Op::MEASURE, 0, 0, t}; }
inline QOp INIT0(std::uint32_t t) { return {Op::INIT0, 0, 0, t}; }

struct QuantumCircuit {
    std::size_t n_qubits = 0;
    std::vector<QOp> ops;
    std::vector<std::uint32_t> output_wires;  // read by interpreters and C_rec

    void validate() const {
        std::vector<std::uint8_t> used(n_qubits, 0);
        auto touch = [&](std::uint32_t w) {
            if (w >= n_qubits) throw StructuralError("circuit: wire index out of range");
            used[w] = 1;
        };
        for (const auto& o : ops) {
            if (o.kind == Op::INIT0) {
                if (o.t >= n_qubits) throw StructuralError("circuit: wire index out of range");
                if (used[o.t]) throw StructuralError("circuit: INIT0 on a wire already in use");
                used[o.t] = 1;
                continue;
            }
            const int nc = n_controls(o.kind);
            if (nc >= 1) touch(o.c0);
            if (nc == 2) touch(o.c1);
            touch(o.t);
            if ((nc >= 1 && o.c0 == o.t) || (nc == 2 && (o.c1 == o.t || o.c0 == o.c1)))
                throw StructuralError("circuit: repeated wire in a gate");
        }
        for (auto w : output_wires)
            if (w >= n_qubits) throw StructuralError("circuit: output wire out of range");
    }

    std::vector<std::uint32_t> init_wires() const {
        std::vector<std::uint32_t> v;
        for (const auto& o : ops)
            if (o.kind == Op::INIT0) v.push_back(o.t);
        return v;
    }
    // Wires fed by the caller, in increasing order.
    std::vector<std::uint32_t> input_wires() const {
        std::vector<std::uint8_t> init(n_qubits, 0);
        for (auto w : init_wires()) init[w] = 1;
        std::vector<std::uint32_t> v;
        for (std::uint32_t w = 0; w < n_qubits; ++w)
            if (!init[w]) v.push_back(w);
        return v;
    }
    std::size_t measure_count() const {
        return std::count_if(ops.begin(), ops.end(), [](const QOp& o) { return o.kind == Op::MEASURE; });
    }
};

// Multiplicative Toffoli depth: a CCX puts its target at
// max(level(target), max(level(controls)) + 1); CNOT carries the control level
// into the target; X, Z, H, MEASURE, INIT0 are free. This is the budget qeval
// charges against ciphertext levels.
inline std::size_t toffoli_depth(const QuantumCircuit& c) {
    std::vector<std::size_t> lv(c.n_qubits, 0);
    std::size_t best = 0;
    for (const auto& o : c.ops) {
        if (o.kind == Op::CCX) lv[o.t] = std::max(lv[o.t], std::max(lv[o.c0], lv[o.c1]) + 1);
        else if (o.kind == Op::CNOT) lv[o.t] = std::max(lv[o.t], lv[o.c0]);
        best = std::max(best, lv[o.t]);
    }
    return best;
}

// Quantum circuit of a reversible classical circuit (same wire numbering);
// ancillas are INIT0 so the inputs are the original circuit inputs.
inline QuantumCircuit from_reversible(const ReversibleCircuit& r) {
    QuantumCircuit q;
    q.n_qubits = r.n_wires;
    for (auto w : r.ancilla_wires) q.ops.push_back(INIT0(w));
    for (const auto& g : r.gates) {
        switch (g.kind) {
            case RevKind::X: q.ops.push_back(X(g.t)); break;
            case RevKind::CNOT: q.ops.push_back(CNOT(g.c0, g.t)); break;
            case RevKind::CCX: q.ops.push_back(CCX(g.c0, g.c1, g.t)); break;
        }
    }
    q.output_wires = r.output_wires;
    return q;
}

// ---------------------------------------------------------------------------
// Dense kernels on a column of 2^n amplitudes

inline void apply_dense(cplx* v, std::size_t dim, const QOp& o) {
    const std::size_t tb = std::size_t(1) << o.t;
    switch (o.kind) {
        case Op::X:
            for (std::size_t i = 0; i < dim; ++i)
                if (!(i & tb)) std::swap(v[i], v[i | tb]);
            break;
        case Op::Z:
            for (std::size_t i = 0; i < dim; ++i)
                if (i & tb) v[i] = -v[i];
            break;
        case Op::H: {
            const double s = 1.0 / std::sqrt(2.0);
            for (std::size_t i = 0; i < dim; ++i)
                if (!(i & tb)) {
                    cplx a = v[i], b = v[i | tb];
                    v[i] = s * (a + b);
                    v[i | tb] = s * (a - b);
                }
            break;
        }
        case Op::CNOT: {
            const std::size_t cb = std::size_t(1) << o.c0;
            for (std::size_t i = 0; i < dim; ++i)
                if ((i & cb) && !(i & tb)) std::swap(v[i], v[i | tb]);
            break;
        }
        case Op::CCX: {
            const std::size_t cb = (std::size_t(1) << o.c0) | (std::size_t(1) << o.c1);
            for (std::size_t i = 0; i < dim; ++i)
                if ((i & cb) == cb && !(i & tb)) std::swap(v[i], v[i | tb]);
            break;
        }
        case Op::MEASURE:
        case Op::INIT0: throw StructuralError("apply_dense: not a unitary gate");
    }
}

// ---------------------------------------------------------------------------
// StateVector

struct StateVector {
    std::size_t n_qubits = 0;
    Vec amps;

    static StateVector basis(std::size_t n, std::uint64_t x) {
        if (n > kMaxStateQubits) throw StructuralError("statevector: too many qubits");
        StateVector s;
        s.n_qubits = n;
        s.amps = Vec::Zero(Eigen::Index(1) << n);
        s.amps[Eigen::Index(x)] = 1.0;
        return s;
    }
    static StateVector random(std::size_t n, Rng& rng) {
        StateVector s = basis(n, 0);
        // Gaussian entries via Box-Muller, then normalize (Haar-distributed)
        for (Eigen::Index i = 0; i < s.amps.size(); ++i) {
            double u1 = std::max(rng.uniform01(), 1e-300), u2 = rng.uniform01();
            double r = std::sqrt(-2.0 * std::log(u1));
            s.amps[i] = cplx(r * std::cos(2 * M_PI * u2), r * std::sin(2 * M_PI * u2));
        }
        s.amps.normalize();
        return s;
    }
    std::size_t dim() const { return std::size_t(amps.size()); }
    double norm2() const { return amps.squaredNorm(); }
    void check() const {
        if (std::abs(norm2() - 1.0) > kTol) throw StructuralError("statevector: not normalized");
    }
    void apply(const QOp& o) {
        if (o.t >= n_qubits) throw StructuralError("statevector: wire out of range");
        apply_dense(amps.data(), dim(), o);
    }
};

// ---------------------------------------------------------------------------
// DensityMatrix

struct DensityMatrix {
    std::size_t n_qubits = 0;
    Mat m;

    std::size_t dim() const { return std::size_t(m.rows()); }

    static DensityMatrix from_matrix(std::size_t n, Mat mat) {
        if (n > kMaxDensityQubits) throw StructuralError("density matrix: too many qubits");
        if (mat.rows() != (Eigen::Index(1) << n) || mat.cols() != mat.rows())
            throw StructuralError("density matrix: bad dimension");
        return {n, std::move(mat)};
    }
    static DensityMatrix pure(const StateVector& s) {
        return from_matrix(s.n_qubits, s.amps * s.amps.adjoint());
    }
    static DensityMatrix basis(std::size_t n, std::uint64_t x) { return pure(StateVector::basis(n, x)); }
    static DensityMatrix maximally_mixed(std::size_t n) {
        const Eigen::Index d = Eigen::Index(1) << n;
        return from_matrix(n, Mat::Identity(d, d) / double(d));
    }
    // Random mixed state of rank <= k.
    static DensityMatrix random(std::size_t n, Rng& rng, std::size_t k = 2) {
        const Eigen::Index d = Eigen::Index(1) << n;
        Mat acc = Mat::Zero(d, d);
        double tot = 0;
        for (std::size_t i = 0; i < k; ++i) {
            auto s = StateVector::random(n, rng);
            double w = rng.uniform01() + 1e-3;
            acc += w * s.amps * s.amps.adjoint();
            tot += w;
        }
        return from_matrix(n, acc / tot);
    }

    cplx trace() const { return m.trace(); }

    void check(double tol = kTol) const {
        if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol) throw StructuralError("density matrix: not Hermitian");
        if (std::abs(trace() - 1.0) > tol) throw StructuralError("density matrix: trace != 1");
        Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol) throw StructuralError("density matrix: not PSD");
    }

    void apply(const QOp& o) {
        if (o.t >= n_qubits) throw StructuralError("density matrix: wire out of range");
        if (o.kind == Op::MEASURE) {
            dephase(o.t);
            return;
        }
        if (o.kind == Op::INIT0) return;
        // rho <- G rho G^dagger = (G (G rho)^dagger)^dagger
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index col = 0; col < m.cols(); ++col) apply_dense(m.col(col).data(), dim(), o);
            m.adjointInPlace();
        }
    }
    // Non-selective computational-basis measurement of wire w.
    void dephase(std::uint32_t w) {
        const std::size_t b = std::size_t(1) << w;
        for (std::size_t i = 0; i < dim(); ++i)
            for (std::size_t j = 0; j < dim(); ++j)
                if ((i ^ j) & b) m(Eigen::Index(i), Eigen::Index(j)) = 0;
    }
    double prob_basis(std::uint64_t x) const { return m(Eigen::Index(x), Eigen::Index(x)).real(); }
};

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
    // a on the low qubits, b on the high ones
    Mat k(Eigen::Index(a.dim() * b.dim()), Eigen::Index(a.dim() * b.dim()));
    for (std::size_t i = 0; i < b.dim(); ++i)
        for (std::size_t j = 0; j < b.dim(); ++j)
            k.block(Eigen::Index(i * a.dim()), Eigen::Index(j * a.dim()), Eigen::Index(a.dim()),
                    Eigen::Index(a.dim())) = b.m(Eigen::Index(i), Eigen::Index(j)) * a.m;
    return DensityMatrix::from_matrix(a.n_qubits + b.n_qubits, std::move(k));
}

// Reduced state on `keep` (keep[0] becomes qubit 0 of the result).
inline DensityMatrix partial_trace(const DensityMatrix& r, const std::vector<std::uint32_t>& keep) {
    std::vector<std::uint8_t> kept(r.n_qubits, 0);
    for (auto w : keep) {
        if (w >= r.n_qubits || kept[w]) throw StructuralError("partial_trace: bad keep list");
        kept[w] = 1;
    }
    std::size_t traced_mask = 0;
    for (std::size_t w = 0; w < r.n_qubits; ++w)
        if (!kept[w]) traced_mask |= std::size_t(1) << w;
    auto sub = [&](std::size_t i) {
        std::size_t s = 0;
        for (std::size_t k = 0; k < keep.size(); ++k) s |= ((i >> keep[k]) & 1u) << k;
        return s;
    };
    const Eigen::Index d = Eigen::Index(1) << keep.size();
    Mat out = Mat::Zero(d, d);
    for (std::size_t i = 0; i < r.dim(); ++i)
        for (std::size_t j = 0; j < r.dim(); ++j)
            if ((i & traced_mask) == (j & traced_mask))
                out(Eigen::Index(sub(i)), Eigen::Index(sub(j))) += r.m(Eigen::Index(i), Eigen::Index(j));
    return DensityMatrix::from_matrix(keep.size(), std::move(out));
}

// Places `in` on wires `pos` of an n-qubit register whose other wires are |0>.
inline DensityMatrix embed(const DensityMatrix& in, const std::vector<std::uint32_t>& pos, std::size_t n) {
    if (pos.size() != in.n_qubits) throw StructuralError("embed: position count");
    auto spread = [&](std::size_t i) {
        std::size_t s = 0;
        for (std::size_t k = 0; k < pos.size(); ++k) s |= ((i >> k) & 1u) << pos[k];
        return s;
    };
    const Eigen::Index d = Eigen::Index(1) << n;
    if (n > kMaxDensityQubits) throw StructuralError("embed: too many qubits");
    Mat out = Mat::Zero(d, d);
    for (std::size_t i = 0; i < in.dim(); ++i)
        for (std::size_t j = 0; j < in.dim(); ++j)
            out(Eigen::Index(spread(i)), Eigen::Index(spread(j))) = in.m(Eigen::Index(i), Eigen::Index(j));
    return DensityMatrix::from_matrix(n, std::move(out));
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
    if (a.n_qubits != b.n_qubits || a.dim() != b.dim())
        throw std::invalid_argument("trace_distance: dimension mismatch");
    Mat diff = a.m - b.m;
    diff = 0.5 * (diff + diff.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(diff, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// ---------------------------------------------------------------------------
// run / make_coherent / C_rec

inline DensityMatrix run(const QuantumCircuit& c, const DensityMatrix& input) {
    c.validate();
    const auto in_w = c.input_wires();
    if (input.n_qubits != in_w.size())
        throw StructuralError("run: input has " + std::to_string(input.n_qubits) + " qubits, circuit expects " +
                              std::to_string(in_w.size()));
    DensityMatrix r = embed(input, in_w, c.n_qubits);
    for (const auto& o : c.ops) r.apply(o);
    return r;
}

struct CoherentUnitary {
    QuantumCircuit base;                       // unitary gates only
    std::vector<std::uint32_t> cnot_targets;   // measurement-record wires
    std::vector<std::uint32_t> aux_inputs;     // wires that start in |0>
    std::vector<std::uint32_t> input_wires;    // wires fed by the caller

    void check_unitary_only() const {
        for (const auto& o : base.ops)
            if (o.kind == Op::MEASURE || o.kind == Op::INIT0)
                throw StructuralError("coherent unitary: non-unitary op");
    }
};

inline CoherentUnitary make_coherent(const QuantumCircuit& c) {
    c.validate();
    CoherentUnitary u;
    u.base.n_qubits = c.n_qubits + c.measure_count();
    u.base.output_wires = c.output_wires;
    u.aux_inputs = c.init_wires();
    u.input_wires = c.input_wires();
    std::uint32_t next = std::uint32_t(c.n_qubits);
    for (const auto& o : c.ops) {
        if (o.kind == Op::INIT0) continue;
        if (o.kind == Op::MEASURE) {
            u.base.ops.push_back(CNOT(o.t, next));
            u.cnot_targets.push_back(next);
            u.aux_inputs.push_back(next);
            ++next;
            continue;
        }
        u.base.ops.push_back(o);
    }
    return u;
}

inline CoherentUnitary inverse(const CoherentUnitary& u) {
    CoherentUnitary v = u;
    std::reverse(v.base.ops.begin(), v.base.ops.end());  // every gate is self-inverse
    return v;
}

inline void apply_unitary(const CoherentUnitary& u, DensityMatrix& r) {
    if (r.n_qubits != u.base.n_qubits) throw StructuralError("apply_unitary: width");
    for (const auto& o : u.base.ops) r.apply(o);
}
inline void apply_unitary(const CoherentUnitary& u, StateVector& s) {
    if (s.n_qubits != u.base.n_qubits) throw StructuralError("apply_unitary: width");
    for (const auto& o : u.base.ops) s.apply(o);
}

// Deferred-measurement form of run(): aux at |0>, apply U_C, dephase and trace
// the record wires. Output is on the circuit's own n_qubits wires.
inline DensityMatrix run_deferred(const QuantumCircuit& c, const DensityMatrix& input) {
    auto u = make_coherent(c);
    DensityMatrix r = embed(input, u.input_wires, u.base.n_qubits);
    apply_unitary(u, r);
    for (auto w : u.cnot_targets) r.dephase(w);
    std::vector<std::uint32_t> keep;
    for (std::uint32_t w = 0; w < c.n_qubits; ++w) keep.push_back(w);
    return partial_trace(r, keep);
}

// C(rho_in): the reduced state of the output register after run().
inline DensityMatrix output_state(const QuantumCircuit& c, const DensityMatrix& input) {
    return partial_trace(run(c, input), c.output_wires);
}

struct NearClassical {
    std::uint64_t x = 0;   // most likely output string
    double eps = 0;        // 1/2 || C(rho) - |x><x| ||_1
};

inline NearClassical nearest_basis(const DensityMatrix& out) {
    NearClassical nc;
    double best = -1;
    for (std::size_t i = 0; i < out.dim(); ++i)
        if (out.prob_basis(i) > best) {
            best = out.prob_basis(i);
            nc.x = i;
        }
    nc.eps = trace_distance(out, DensityMatrix::basis(out.n_qubits, nc.x));
    return nc;
}

struct RecoverResult {
    DensityMatrix joint;               // input register (low) then Y (high)
    DensityMatrix recovered;           // input register alone
    std::vector<double> outcome_probs; // distribution of Y
};

// C_rec: U_C, CNOT the output wires into a fresh Y, U_C^dagger, discard A2 and M.
inline RecoverResult input_recover_channel(const QuantumCircuit& c, const DensityMatrix& input) {
    auto u = make_coherent(c);
    const std::size_t n_out = c.output_wires.size();
    const std::size_t total = u.base.n_qubits + n_out;
    DensityMatrix r = embed(input, u.input_wires, total);
    for (const auto& o : u.base.ops) r.apply(o);
    for (std::size_t k = 0; k < n_out; ++k)
        r.apply(CNOT(c.output_wires[k], std::uint32_t(u.base.n_qubits + k)));
    auto ui = inverse(u);
    for (const auto& o : ui.base.ops) r.apply(o);
    std::vector<std::uint32_t> keep = u.input_wires;
    for (std::size_t k = 0; k < n_out; ++k) keep.push_back(std::uint32_t(u.base.n_qubits + k));
    RecoverResult res{partial_trace(r, keep), {}, {}};
    std::vector<std::uint32_t> a1;
    for (std::uint32_t k = 0; k < u.input_wires.size(); ++k) a1.push_back(k);
    res.recovered = partial_trace(res.joint, a1);
    std::vector<std::uint32_t> y;
    for (std::size_t k = 0; k < n_out; ++k) y.push_back(std::uint32_t(u.input_wires.size() + k));
    auto ys = partial_trace(res.joint, y);
    for (std::size_t i = 0; i < ys.dim(); ++i) res.outcome_probs.push_back(std::max(0.0, ys.prob_basis(i)));
    return res;
}

// C_rec followed by measuring Y: returns the post-measurement input state and
// the outcome bits (LSB = output_wires[0]).
inline std::pair<DensityMatrix, Bits> input_recover_run(const QuantumCircuit& c, const DensityMatrix& input,
                                                        Rng& rng) {
    auto res = input_recover_channel(c, input);
    double u = rng.uniform01(), acc = 0;
    std::size_t y = res.outcome_probs.size() - 1;
    for (std::size_t i = 0; i < res.outcome_probs.size(); ++i) {
        acc += res.outcome_probs[i];
        if (u < acc) {
            y = i;
            break;
        }
    }
    const std::size_t na = res.recovered.n_qubits;
    const std::size_t da = std::size_t(1) << na;
    Mat post = res.joint.m.block(Eigen::Index(y * da), Eigen::Index(y * da), Eigen::Index(da), Eigen::Index(da));
    const double p = post.trace().real();
    if (p > 0) post /= p;
    return {DensityMatrix::from_matrix(na, std::move(post)), bits_from_uint(y, c.output_wires.size())};
}

// ---------------------------------------------------------------------------
// Oracle unitaries |x>|y> -> |x>|y ^ f(x)>

struct OracleLayout {
    std::size_t n_in = 0, n_out = 0, n_anc = 0;
};

// Wires: x = 0..n_in-1, y = n_in..n_in+n_out-1, ancillas after. Computes f into
// ancillas with the reversible compilation, CNOTs into y, uncomputes.
inline CoherentUnitary oracle_unitary(const BooleanCircuit& f, OracleLayout* layout = nullptr) {
    auto rev = compile_reversible(f);
    const std::size_t n = f.n_inputs, m = f.n_outputs();
    const std::size_t anc = f.n_wires - n;
    // reversible wire w -> quantum wire
    auto map = [&](std::uint32_t w) -> std::uint32_t {
        return w < n ? w : std::uint32_t(n + m + (w - n));
    };
    CoherentUnitary u;
    u.base.n_qubits = n + m + anc;
    auto push = [&](const RevGate& g) {
        switch (g.kind) {
            case RevKind::X: u.base.ops.push_back(X(map(g.t))); break;
            case RevKind::CNOT: u.base.ops.push_back(CNOT(map(g.c0), map(g.t))); break;
            case RevKind::CCX: u.base.ops.push_back(CCX(map(g.c0), map(g.c1), map(g.t))); break;
        }
    };
    for (const auto& g : rev.gates) push(g);
    for (std::size_t k = 0; k < m; ++k) {
        std::uint32_t src = f.output_wires[k];
        if (src < n) u.base.ops.push_back(CNOT(src, std::uint32_t(n + k)));
        else u.base.ops.push_back(CNOT(map(src), std::uint32_t(n + k)));
    }
    for (auto it = rev.gates.rbegin(); it != rev.gates.rend(); ++it) push(*it);
    for (std::size_t a = 0; a < anc; ++a) u.aux_inputs.push_back(std::uint32_t(n + m + a));
    for (std::size_t k = 0; k < n + m; ++k) u.input_wires.push_back(std::uint32_t(k));
    for (std::size_t k = 0; k < m; ++k) u.base.output_wires.push_back(std::uint32_t(n + k));
    if (layout) *layout = {n, m, anc};
    return u;
}

// Direct action of the XOR oracle on an (n_in + n_out)-qubit statevector,
// from the truth table. Used as the reference for oracle_unitary.
inline void apply_oracle_direct(const std::vector<Bits>& table, std::size_t n_in, StateVector& s) {
    const std::size_t n_out = table.empty() ? 0 : table[0].size();
    if (s.n_qubits != n_in + n_out) throw StructuralError("oracle: width mismatch");
    Vec out = Vec::Zero(s.amps.size());
    for (std::size_t i = 0; i < s.dim(); ++i) {
        std::size_t x = i & ((std::size_t(1) << n_in) - 1);
        std::size_t fx = bits_to_uint(table[x]);
        out[Eigen::Index(i ^ (fx << n_in))] += s.amps[Eigen::Index(i)];
    }
    s.amps = std::move(out);
}

// ---------------------------------------------------------------------------
// Sparse states

class BitVec {
public:
    BitVec() = default;
    explicit BitVec(std::size_t n) : n_(n), w_((n + 63) / 64, 0) {}

    std::size_t size() const { return n_; }
    void resize(std::size_t n) {
        n_ = n;
        w_.resize((n + 63) / 64, 0);
        if (n % 64) w_.back() &= (std::uint64_t(1) << (n % 64)) - 1;
    }
    int get(std::size_t i) const { return int((w_[i >> 6] >> (i & 63)) & 1u); }
    void set(std::size_t i, int v) {
        const std::uint64_t m = std::uint64_t(1) << (i & 63);
        if (v) w_[i >> 6] |= m;
        else w_[i >> 6] &= ~m;
    }
    void flip(std::size_t i) { w_[i >> 6] ^= std::uint64_t(1) << (i & 63); }
    bool operator==(const BitVec&) const = default;
    const std::vector<std::uint64_t>& words() const { return w_; }

    std::size_t hash() const {
        std::uint64_t h = 0x9E3779B97F4A7C15ULL ^ n_;
        for (auto w : w_) {
            h ^= w + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
        }
        return std::size_t(h);
    }

    static BitVec from_bits(const Bits& b) {
        BitVec v(b.size());
        for (std::size_t i = 0; i < b.size(); ++i)
            if (b[i]) v.set(i, 1);
        return v;
    }
    Bits slice(std::size_t off, std::size_t len) const {
        Bits b(len);
        for (std::size_t i = 0; i < len; ++i) b[i] = std::uint8_t(get(off + i));
        return b;
    }
    Bits slice(const std::vector<std::uint32_t>& wires) const {
        Bits b(wires.size());
        for (std::size_t i = 0; i < wires.size(); ++i) b[i] = std::uint8_t(get(wires[i]));
        return b;
    }
    void write(std::size_t off, const Bits& b) {
        for (std::size_t i = 0; i < b.size(); ++i) set(off + i, b[i]);
    }
    // this on the low wires, o above it
    void append(const BitVec& o) {
        const std::size_t off = n_;
        resize(n_ + o.n_);
        if (off % 64 == 0) {
            std::copy(o.w_.begin(), o.w_.end(), w_.begin() + off / 64);
            return;
        }
        for (std::size_t i = 0; i < o.n_; ++i)
            if (o.get(i)) set(off + i, 1);
    }

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> w_;
};

struct BitVecHash {
    std::size_t operator()(const BitVec& v) const { return v.hash(); }
};

struct Term {
    BitVec bits;
    cplx amp;
};

// Pure state as a sum of basis terms.
class SparseState {
public:
    SparseState() = default;
    static SparseState basis(const Bits& x) {
        SparseState s;
        s.n_ = x.size();
        s.terms_.push_back({BitVec::from_bits(x), 1.0});
        return s;
    }
    static SparseState from_dense(const StateVector& v, double cut = 1e-14) {
        SparseState s;
        s.n_ = v.n_qubits;
        for (std::size_t i = 0; i < v.dim(); ++i)
            if (std::abs(v.amps[Eigen::Index(i)]) > cut)
                s.terms_.push_back({BitVec::from_bits(bits_from_uint(i, v.n_qubits)), v.amps[Eigen::Index(i)]});
        return s;
    }

    static SparseState from_terms(std::size_t n, std::vector<Term> terms) {
        SparseState s;
        s.n_ = n;
        for (const auto& t : terms)
            if (t.bits.size() != n) throw StructuralError("sparse: term width mismatch");
        s.terms_ = std::move(terms);
        return s;
    }

    std::size_t n_qubits() const { return n_; }
    const std::vector<Term>& terms() const { return terms_; }
    std::vector<Term>& terms() { return terms_; }

    // New wires are |0>.
    void grow(std::size_t n) {
        if (n < n_) throw StructuralError("sparse: cannot shrink");
        n_ = n;
        for (auto& t : terms_) t.bits.resize(n);
    }

    double norm2() const {
        double s = 0;
        for (const auto& t : terms_) s += std::norm(t.amp);
        return s;
    }

    void apply(const QOp& o) {
        if (o.t >= n_) throw StructuralError("sparse: wire out of range");
        switch (o.kind) {
            case Op::X:
                for (auto& t : terms_) t.bits.flip(o.t);
                break;
            case Op::Z:
                for (auto& t : terms_)
                    if (t.bits.get(o.t)) t.amp = -t.amp;
                break;
            case Op::CNOT:
                for (auto& t : terms_)
                    if (t.bits.get(o.c0)) t.bits.flip(o.t);
                break;
            case Op::CCX:
                for (auto& t : terms_)
                    if (t.bits.get(o.c0) && t.bits.get(o.c1)) t.bits.flip(o.t);
                break;
            case Op::H: apply_h(o.t); break;
            case Op::INIT0: break;
            case Op::MEASURE: throw StructuralError("sparse pure state: MEASURE needs an Ensemble");
        }
    }

    // Probability that wire w reads 1.
    double prob_one(std::uint32_t w) const {
        double p = 0;
        for (const auto& t : terms_)
            if (t.bits.get(w)) p += std::norm(t.amp);
        return p / norm2();
    }

    // Keeps terms with wire w == v, renormalized. Returns the branch probability.
    double project(std::uint32_t w, int v) {
        double before = norm2(), kept = 0;
        std::vector<Term> nt;
        for (auto& t : terms_)
            if (t.bits.get(w) == v) {
                kept += std::norm(t.amp);
                nt.push_back(std::move(t));
            }
        terms_.swap(nt);
        if (kept > 0) {
            double s = 1.0 / std::sqrt(kept);
            for (auto& t : terms_) t.amp *= s;
        }
        return before > 0 ? kept / before : 0;
    }

    StateVector to_dense() const {
        auto s = StateVector::basis(n_, 0);
        s.amps.setZero();
        for (const auto& t : terms_) {
            std::uint64_t idx = 0;
            for (std::size_t i = 0; i < n_; ++i)
                if (t.bits.get(i)) idx |= std::uint64_t(1) << i;
            s.amps[Eigen::Index(idx)] += t.amp;
        }
        return s;
    }

private:
    void apply_h(std::uint32_t w) {
        const double s = 1.0 / std::sqrt(2.0);
        std::unordered_map<BitVec, cplx, BitVecHash> acc;
        acc.reserve(terms_.size() * 2);
        std::vector<BitVec> order;
        for (auto& t : terms_) {
            BitVec b0 = t.bits, b1 = t.bits;
            b0.set(w, 0);
            b1.set(w, 1);
            const double sign = t.bits.get(w) ? -1.0 : 1.0;
            auto add = [&](BitVec&& b, cplx a) {
                auto [it, fresh] = acc.try_emplace(b, 0.0);
                if (fresh) order.push_back(b);
                it->second += a;
            };
            add(std::move(b0), s * t.amp);
            add(std::move(b1), sign * s * t.amp);
        }
        terms_.clear();
        for (auto& b : order) {
            cplx a = acc[b];
            if (std::abs(a) > 1e-14) terms_.push_back({std::move(b), a});
        }
    }

    std::size_t n_ = 0;
    std::vector<Term> terms_;
};

// Mixed state: sum_k w_k |psi_k><psi_k|.
struct Branch {
    double weight;
    SparseState state;
};

class Ensemble {
public:
    Ensemble() = default;
    explicit Ensemble(SparseState s) { branches_.push_back({1.0, std::move(s)}); }
    static Ensemble basis(const Bits& x) { return Ensemble(SparseState::basis(x)); }
    static Ensemble mixture(std::vector<Branch> b) {
        Ensemble e;
        e.branches_ = std::move(b);
        e.check_widths();
        return e;
    }

    std::size_t n_qubits() const { return branches_.empty() ? 0 : branches_[0].state.n_qubits(); }
    const std::vector<Branch>& branches() const { return branches_; }
    std::vector<Branch>& branches() { return branches_; }
    double total_weight() const {
        double s = 0;
        for (const auto& b : branches_) s += b.weight;
        return s;
    }

    void grow(std::size_t n) {
        for (auto& b : branches_) b.state.grow(n);
    }

    void apply(const QOp& o) {
        if (o.kind != Op::MEASURE) {
            for (auto& b : branches_) b.state.apply(o);
            return;
        }
        std::vector<Branch> nb;
        for (auto& b : branches_) {
            double p1 = b.state.prob_one(o.t);
            if (p1 <= 1e-15 || p1 >= 1 - 1e-15) {
                // already classical on o.t: no split
                b.state.project(o.t, p1 > 0.5);
                nb.push_back(std::move(b));
                continue;
            }
            if (p1 < 1 - 1e-15) {
                SparseState s0 = b.state;
                s0.project(o.t, 0);
                nb.push_back({b.weight * (1 - p1), std::move(s0)});
            }
            if (p1 > 1e-15) {
                b.state.project(o.t, 1);
                nb.push_back({b.weight * p1, std::move(b.state)});
            }
        }
        branches_.swap(nb);
    }

    // Distribution of the classical value on `wires` (only valid when every
    // term is a basis state on those wires, i.e. after dephasing or for
    // classical data); exact in general via per-term probabilities.
    std::vector<std::pair<Bits, double>> distribution(const std::vector<std::uint32_t>& wires) const {
        std::vector<std::pair<Bits, double>> out;
        for (const auto& b : branches_) {
            const double nrm = b.state.norm2();
            for (const auto& t : b.state.terms()) {
                Bits v = t.bits.slice(wires);
                double p = b.weight * std::norm(t.amp) / nrm;
                auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == v; });
                if (it == out.end()) out.push_back({std::move(v), p});
                else it->second += p;
            }
        }
        return out;
    }

    // Measures `wires`, samples an outcome, keeps the consistent part.
    Bits measure(const std::vector<std::uint32_t>& wires, Rng& rng) {
        for (auto w : wires) apply(MEASURE(w));
        double u = rng.uniform01() * total_weight(), acc = 0;
        std::size_t pick = branches_.size() - 1;
        for (std::size_t i = 0; i < branches_.size(); ++i) {
            acc += branches_[i].weight;
            if (u < acc) {
                pick = i;
                break;
            }
        }
        Bits y = branches_[pick].state.terms().at(0).bits.slice(wires);
        condition(wires, y);
        return y;
    }

    // Drops branches whose (measured) value on `wires` differs from y and
    // renormalizes. Returns the probability mass kept.
    double condition(const std::vector<std::uint32_t>& wires, const Bits& y) {
        std::vector<Branch> nb;
        double kept = 0, tot = total_weight();
        for (auto& b : branches_) {
            bool ok = true;
            for (const auto& t : b.state.terms())
                if (t.bits.slice(wires) != y) ok = false;
            if (ok) {
                kept += b.weight;
                nb.push_back(std::move(b));
            }
        }
        for (auto& b : nb) b.weight /= kept;
        branches_.swap(nb);
        return tot > 0 ? kept / tot : 0;
    }

    DensityMatrix to_density() const {
        const std::size_t n = n_qubits();
        const Eigen::Index d = Eigen::Index(1) << n;
        if (n > kMaxDensityQubits) throw StructuralError("ensemble: too many qubits for dense form");
        Mat m = Mat::Zero(d, d);
        for (const auto& b : branches_) {
            auto v = b.state.to_dense();
            m += b.weight * (v.amps * v.amps.adjoint()) / b.state.norm2();
        }
        return DensityMatrix::from_matrix(n, m / total_weight());
    }

private:
    void check_widths() const {
        for (const auto& b : branches_)
            if (b.state.n_qubits() != n_qubits()) throw StructuralError("ensemble: width mismatch");
    }
    std::vector<Branch> branches_;
};

// a on the low wires, b above.
inline SparseState tensor(const SparseState& a, const SparseState& b) {
    SparseState s;
    s.grow(a.n_qubits() + b.n_qubits());
    s.terms().clear();
    for (const auto& ta : a.terms())
        for (const auto& tb : b.terms()) {
            BitVec v = ta.bits;
            v.append(tb.bits);
            s.terms().push_back({std::move(v), ta.amp * tb.amp});
        }
    return s;
}

inline Ensemble tensor(const Ensemble& a, const Ensemble& b) {
    std::vector<Branch> v;
    for (const auto& x : a.branches())
        for (const auto& y : b.branches()) v.push_back({x.weight * y.weight, tensor(x.state, y.state)});
    return Ensemble::mixture(std::move(v));
}

// Spectral decomposition of a density matrix as an ensemble of pure states.
inline Ensemble ensemble_from_density(const DensityMatrix& r, double cut = 1e-14) {
    Mat h = 0.5 * (r.m + r.m.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    std::vector<Branch> v;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        const double w = es.eigenvalues()[k];
        if (w <= cut) continue;
        StateVector sv;
        sv.n_qubits = r.n_qubits;
        sv.amps = es.eigenvectors().col(k);
        v.push_back({w, SparseState::from_dense(sv)});
    }
    return Ensemble::mixture(std::move(v));
}

// Trace distance between ensembles of basis-state branches (each branch a
// single term). Exact for that case without going dense.
inline double classical_trace_distance(const Ensemble& a, const Ensemble& b) {
    std::unordered_map<BitVec, double, BitVecHash> p;
    auto add = [&](const Ensemble& e, double sign) {
        for (const auto& br : e.branches()) {
            if (br.state.terms().size() != 1) throw StructuralError("classical_trace_distance: branch is not a basis state");
            p[br.state.terms()[0].bits] += sign * br.weight / e.total_weight();
        }
    };
    add(a, 1.0);
    add(b, -1.0);
    double s = 0;
    for (const auto& [k, v] : p) s += std::abs(v);
    return 0.5 * s;
}

// run() on an Ensemble over the circuit's input wires. Fast path when the input
// wires are a prefix 0..k-1 (the interpreters are laid out that way).
inline Ensemble run(const QuantumCircuit& c, Ensemble e) {
    const auto in_w = c.input_wires();
    if (e.n_qubits() != in_w.size()) throw StructuralError("run: ensemble width does not match circuit inputs");
    bool prefix = true;
    for (std::size_t k = 0; k < in_w.size(); ++k)
        if (in_w[k] != k) prefix = false;
    if (prefix) {
        e.grow(c.n_qubits);
    } else {
        for (auto& b : e.branches())
            for (auto& t : b.state.terms()) {
                BitVec nb(c.n_qubits);
                for (std::size_t k = 0; k < in_w.size(); ++k) nb.set(in_w[k], t.bits.get(k));
                t.bits = std::move(nb);
            }
        e.grow(c.n_qubits);
    }
    for (const auto& o : c.ops) e.apply(o);
    return e;
}

}  // namespace vbbq::qsim
