#pragma once

// Quantum layer over fhe_core: QOTP ciphertexts X^a Z^b |psi> with the pad bits
// a, b held as FHE ciphertexts.
//
// qeval has two paths. Circuits built from X, Z, CNOT only update the pad
// ciphertexts homomorphically (level-free XORs). Anything else (H, CCX,
// MEASURE, INIT0) goes through the sealed backend: pads are opened inside the
// seal, the plain circuit runs on the unpadded state, and fresh pads are
// encrypted at level - toffoli_depth. A padded qubit measured inside the seal
// is dephased there.

#include <atomic>
#include <stdexcept>
#include <string>
#include <vector>

#include "fhe_core.hpp"
#include "qsim.hpp"

namespace vbbq::qfhe {

using fhe::Ciphertext;
using qsim::Ensemble;

struct NotClassical : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct QCiphertext {
    Ensemble state;               // padded; qubit k carries pads (a[k], b[k])
    std::vector<Ciphertext> a, b;

    std::size_t n_qubits() const { return a.size(); }
    std::uint16_t level() const {
        std::uint16_t l = 0xFFFF;
        for (const auto& c : a) l = std::min(l, c.level);
        for (const auto& c : b) l = std::min(l, c.level);
        return l;
    }
};

// (m xor a, Enc(a), Enc(b)) per qubit
struct ClassicalQCiphertext {
    Bits masked;
    std::vector<Ciphertext> a, b;

    Bytes serialize() const {
        Bytes out;
        put_le(out, masked.size(), 4);
        Bytes mb = bytes_from_bits(masked);
        out.insert(out.end(), mb.begin(), mb.end());
        for (const auto& c : a) c.serialize_into(out);
        for (const auto& c : b) c.serialize_into(out);
        return out;
    }
    static ClassicalQCiphertext parse(const Bytes& in) {
        if (in.size() < 4) throw fhe::FormatError("classical qciphertext: truncated");
        const std::size_t n = get_le(in, 0, 4);
        const std::size_t nb = (n + 7) / 8;
        if (in.size() != 4 + nb + 2 * n * fhe::kCiphertextBytes)
            throw fhe::FormatError("classical qciphertext: bad length");
        ClassicalQCiphertext c;
        c.masked = bits_from_bytes(Bytes(in.begin() + 4, in.begin() + 4 + nb));
        c.masked.resize(n);
        auto cts = fhe::parse_ciphertexts(Bytes(in.begin() + 4 + nb, in.end()));
        c.a.assign(cts.begin(), cts.begin() + n);
        c.b.assign(cts.begin() + n, cts.end());
        return c;
    }
};

namespace audit {
inline std::atomic<std::uint64_t>& qeval_calls() {
    static std::atomic<std::uint64_t> n{0};
    return n;
}
}  // namespace audit

namespace detail {
inline void pad(Ensemble& e, std::size_t k, int a, int b) {
    // X^a Z^b: Z first
    if (b) e.apply(qsim::Z(std::uint32_t(k)));
    if (a) e.apply(qsim::X(std::uint32_t(k)));
}
inline void unpad(Ensemble& e, std::size_t k, int a, int b) {
    if (a) e.apply(qsim::X(std::uint32_t(k)));
    if (b) e.apply(qsim::Z(std::uint32_t(k)));
}
}  // namespace detail

inline QCiphertext qenc(const fhe::PublicKey& pk, Ensemble psi, Rng& rng) {
    QCiphertext qc;
    const std::size_t n = psi.n_qubits();
    Bits a = rng.bits(n), b = rng.bits(n);
    for (std::size_t k = 0; k < n; ++k) detail::pad(psi, k, a[k], b[k]);
    qc.state = std::move(psi);
    qc.a = fhe::enc(pk, a, rng);
    qc.b = fhe::enc(pk, b, rng);
    return qc;
}

inline QCiphertext qenc(const fhe::PublicKey& pk, const qsim::DensityMatrix& rho, Rng& rng) {
    return qenc(pk, qsim::ensemble_from_density(rho), rng);
}

inline Ensemble qdec(const fhe::SecretKey& sk, const QCiphertext& qc) {
    Bits a = fhe::dec(sk, qc.a), b = fhe::dec(sk, qc.b);
    Ensemble e = qc.state;
    for (std::size_t k = 0; k < qc.n_qubits(); ++k) detail::unpad(e, k, a[k], b[k]);
    return e;
}

inline qsim::DensityMatrix qdec_density(const fhe::SecretKey& sk, const QCiphertext& qc) {
    return qdec(sk, qc).to_density();
}

// |0> with a = m, b = 0: decrypts to m.
inline QCiphertext promote(const fhe::PublicKey& pk, const std::vector<Ciphertext>& ct, Rng& rng) {
    QCiphertext qc;
    qc.state = Ensemble::basis(Bits(ct.size(), 0));
    qc.a = ct;
    qc.b = fhe::enc(pk, Bits(ct.size(), 0), rng);
    return qc;
}

// a on the low qubits
inline QCiphertext tensor(const QCiphertext& x, const QCiphertext& y) {
    QCiphertext qc;
    qc.state = qsim::tensor(x.state, y.state);
    qc.a = x.a;
    qc.a.insert(qc.a.end(), y.a.begin(), y.a.end());
    qc.b = x.b;
    qc.b.insert(qc.b.end(), y.b.begin(), y.b.end());
    return qc;
}

namespace detail {
// Every branch must be a basis state on the wire up to tol.
inline void require_classical(const Ensemble& e, std::uint32_t w, double tol = 1e-6) {
    for (const auto& br : e.branches()) {
        double p = br.state.prob_one(w);
        if (p > tol && p < 1 - tol) throw NotClassical("demote: qubit " + std::to_string(w) + " is not classical");
    }
}
}  // namespace detail

// Measures the padded wires (s = m xor a) and returns Enc(a) xor s. The state
// is collapsed on those wires.
inline std::vector<Ciphertext> demote(const fhe::PublicKey& pk, QCiphertext& qc,
                                      const std::vector<std::uint32_t>& wires, Rng& rng) {
    for (auto w : wires) {
        if (w >= qc.n_qubits()) throw qsim::StructuralError("demote: wire out of range");
        detail::require_classical(qc.state, w);
    }
    Bits s = qc.state.measure(wires, rng);
    std::vector<Ciphertext> out;
    out.reserve(wires.size());
    for (std::size_t k = 0; k < wires.size(); ++k) out.push_back(fhe::add_plain(pk, qc.a[wires[k]], s[k]));
    return out;
}

inline std::vector<Ciphertext> demote(const fhe::PublicKey& pk, QCiphertext& qc, Rng& rng) {
    std::vector<std::uint32_t> all;
    for (std::uint32_t k = 0; k < qc.n_qubits(); ++k) all.push_back(k);
    return demote(pk, qc, all, rng);
}

inline ClassicalQCiphertext to_classical(QCiphertext qc, Rng& rng) {
    std::vector<std::uint32_t> all;
    for (std::uint32_t k = 0; k < qc.n_qubits(); ++k) {
        all.push_back(k);
        detail::require_classical(qc.state, k);
    }
    ClassicalQCiphertext c;
    c.masked = qc.state.measure(all, rng);
    c.a = qc.a;
    c.b = qc.b;
    return c;
}

inline QCiphertext from_classical(const ClassicalQCiphertext& c) {
    return {Ensemble::basis(c.masked), c.a, c.b};
}

enum class Path { Auto, Sealed };

inline bool pauli_only(const qsim::QuantumCircuit& c) {
    for (const auto& o : c.ops)
        if (o.kind != qsim::Op::X && o.kind != qsim::Op::Z && o.kind != qsim::Op::CNOT) return false;
    return true;
}

// Output covers every circuit qubit, in wire order.
inline QCiphertext qeval(const fhe::PublicKey& pk, const qsim::QuantumCircuit& c, QCiphertext in, Rng& rng,
                         Path path = Path::Auto) {
    audit::qeval_calls()++;
    c.validate();
    const auto in_w = c.input_wires();
    if (in_w.size() != in.n_qubits())
        throw qsim::StructuralError("qeval: circuit expects " + std::to_string(in_w.size()) + " input qubits, got " +
                                    std::to_string(in.n_qubits()));
    const std::size_t tdepth = qsim::toffoli_depth(c);
    const std::size_t level = std::min<std::size_t>(in.level(), pk.params.d);
    if (tdepth > level)
        throw fhe::DepthExceeded("qeval: Toffoli depth " + std::to_string(tdepth) + " exceeds remaining level " +
                                 std::to_string(level));

    if (path == Path::Auto && pauli_only(c) && in_w.size() == c.n_qubits) {
        for (const auto& o : c.ops) {
            in.state.apply(o);
            if (o.kind == qsim::Op::CNOT) {
                in.a[o.t] = fhe::add(pk, in.a[o.t], in.a[o.c0]);
                in.b[o.c0] = fhe::add(pk, in.b[o.c0], in.b[o.t]);
            }
        }
        return in;
    }

    const auto& be = fhe::backend();
    Bits a = be.sealed_open(pk, in.a), b = be.sealed_open(pk, in.b);
    Ensemble e = std::move(in.state);
    for (std::size_t k = 0; k < a.size(); ++k) detail::unpad(e, k, a[k], b[k]);
    e = qsim::run(c, std::move(e));
    const std::size_t n = c.n_qubits;
    Bits na = rng.bits(n), nb = rng.bits(n);
    for (std::size_t k = 0; k < n; ++k) detail::pad(e, k, na[k], nb[k]);
    QCiphertext out;
    out.state = std::move(e);
    const auto lv = std::uint16_t(level - tdepth);
    out.a = be.sealed_encrypt(pk, na, lv, rng);
    out.b = be.sealed_encrypt(pk, nb, lv, rng);
    return out;
}

}  // namespace vbbq::qfhe
