#include <gtest/gtest.h>

#include <vbbq/qfhe.hpp>

using namespace vbbq;
using namespace vbbq::qsim;
using namespace vbbq::qfhe;

namespace {

fhe::KeyPair kp_for(unsigned d, std::uint64_t r) { return fhe::keygen({6, d}, {bits_from_uint(r, 6)}); }

DensityMatrix plus_state() {
    auto s = StateVector::basis(1, 0);
    s.apply(H(0));
    return DensityMatrix::pure(s);
}

QuantumCircuit random_qc(Rng& rng, std::size_t n_in, std::size_t n_anc, std::size_t n_ops, bool clifford_free) {
    QuantumCircuit c;
    c.n_qubits = n_in + n_anc;
    for (std::size_t a = 0; a < n_anc; ++a) c.ops.push_back(INIT0(std::uint32_t(n_in + a)));
    const std::size_t n = c.n_qubits;
    // kinds needing 2 or 3 distinct wires are only drawn when they exist
    const std::size_t kinds = clifford_free ? (n > 1 ? 3 : 2) : (n > 2 ? 6 : n > 1 ? 5 : 2);
    for (std::size_t k = 0; k < n_ops; ++k) {
        std::uint32_t a = std::uint32_t(rng.below(n)), b = a, d = a;
        if (n > 1)
            while (b == a) b = std::uint32_t(rng.below(n));
        if (n > 2)
            while (d == a || d == b) d = std::uint32_t(rng.below(n));
        std::size_t kind = rng.below(kinds);
        if (kinds == 5 && kind == 4) kind = 5;  // no CCX on 2 wires
        if (!clifford_free && kinds == 2 && kind == 1) kind = 3;
        switch (kind) {
            case 0: c.ops.push_back(X(a)); break;
            case 1: c.ops.push_back(Z(a)); break;
            case 2: c.ops.push_back(CNOT(a, b)); break;
            case 3: c.ops.push_back(H(a)); break;
            case 4: c.ops.push_back(CCX(a, b, d)); break;
            default: c.ops.push_back(MEASURE(a)); break;
        }
    }
    return c;
}

}  // namespace

TEST(Qenc, ZeroPadsLeaveStateUnchanged) {
    auto kp = kp_for(2, 3);
    for (std::uint64_t seed = 0;; ++seed) {
        Rng probe(seed);
        Bits a = probe.bits(1), b = probe.bits(1);
        if (a[0] || b[0]) continue;
        Rng rng(seed);
        auto qc = qenc(kp.pk, plus_state(), rng);
        EXPECT_LT(trace_distance(qc.state.to_density(), plus_state()), 1e-12);
        break;
    }
}

TEST(Qenc, RoundTrips) {
    auto kp = kp_for(2, 4);
    Rng rng(1);
    auto qc = qenc(kp.pk, DensityMatrix::basis(2, 0b10), rng);  // |01>: qubit 1 set
    EXPECT_LT(trace_distance(qdec_density(kp.sk, qc), DensityMatrix::basis(2, 0b10)), 1e-12);
    std::vector<DensityMatrix> cases = {DensityMatrix::basis(1, 0), DensityMatrix::basis(1, 1), plus_state()};
    for (int k = 0; k < 5; ++k) cases.push_back(DensityMatrix::random(3, rng, 2));
    for (const auto& r : cases) EXPECT_LT(trace_distance(qdec_density(kp.sk, qenc(kp.pk, r, rng)), r), 1e-9);
}

TEST(Qenc, PaddedMarginalIsMaximallyMixed) {
    auto kp = kp_for(1, 5);
    Rng rng(2);
    auto psi = DensityMatrix::random(1, rng, 1);
    Mat acc = Mat::Zero(2, 2);
    for (int t = 0; t < 200; ++t) acc += qenc(kp.pk, psi, rng).state.to_density().m;
    auto avg = DensityMatrix::from_matrix(1, acc / 200.0);
    EXPECT_LE(trace_distance(avg, DensityMatrix::maximally_mixed(1)), 0.05);
}

TEST(Qdec, WrongKeyFails) {
    auto a = kp_for(1, 1), b = kp_for(1, 2);
    Rng rng(3);
    EXPECT_THROW(qdec(b.sk, qenc(a.pk, DensityMatrix::basis(1, 0), rng)), fhe::DecryptionFailure);
}

TEST(Promote, DecryptsToPlaintext) {
    auto kp = kp_for(2, 6);
    Rng rng(4);
    for (int m = 0; m < 2; ++m) {
        auto qc = promote(kp.pk, fhe::enc(kp.pk, Bits{std::uint8_t(m)}, rng), rng);
        EXPECT_LT(trace_distance(qdec_density(kp.sk, qc), DensityMatrix::basis(1, m)), 1e-12);
    }
    for (std::uint64_t x = 0; x < 16; ++x) {
        auto qc = promote(kp.pk, fhe::enc(kp.pk, bits_from_uint(x, 4), rng), rng);
        EXPECT_LT(trace_distance(qdec_density(kp.sk, qc), DensityMatrix::basis(4, x)), 1e-12);
    }
}

TEST(Demote, InvertsPromoteAndQenc) {
    auto kp = kp_for(2, 7);
    Rng rng(5);
    for (std::uint64_t x = 0; x < 8; ++x) {
        auto ct = fhe::enc(kp.pk, bits_from_uint(x, 3), rng);
        auto qc = promote(kp.pk, ct, rng);
        EXPECT_EQ(fhe::dec(kp.sk, demote(kp.pk, qc, rng)), bits_from_uint(x, 3));
        auto q2 = qenc(kp.pk, DensityMatrix::basis(3, x), rng);
        EXPECT_EQ(fhe::dec(kp.sk, demote(kp.pk, q2, rng)), bits_from_uint(x, 3));
    }
    auto qp = qenc(kp.pk, plus_state(), rng);
    EXPECT_THROW(demote(kp.pk, qp, rng), NotClassical);
}

TEST(Classical, ConversionAndSerialization) {
    auto kp = kp_for(2, 8);
    Rng rng(6);
    auto qc = qenc(kp.pk, DensityMatrix::basis(3, 5), rng);
    auto c = to_classical(qc, rng);
    EXPECT_EQ(ClassicalQCiphertext::parse(c.serialize()).serialize(), c.serialize());
    EXPECT_LT(trace_distance(qdec_density(kp.sk, from_classical(c)), DensityMatrix::basis(3, 5)), 1e-12);
    // masked bit is m xor a
    auto a = fhe::dec(kp.sk, c.a);
    auto m = bits_from_uint(5, 3);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(c.masked[k] ^ a[k], m[k]);
    EXPECT_THROW(ClassicalQCiphertext::parse(Bytes(7)), fhe::FormatError);
}

TEST(Qeval, XLeavesPadCiphertextsUntouched) {
    auto kp = kp_for(1, 9);
    Rng rng(7);
    auto qc = qenc(kp.pk, DensityMatrix::basis(1, 0), rng);
    QuantumCircuit c;
    c.n_qubits = 1;
    c.ops = {X(0)};
    auto out = qeval(kp.pk, c, qc, rng);
    EXPECT_EQ(out.a, qc.a);
    EXPECT_EQ(out.b, qc.b);
    EXPECT_LT(trace_distance(qdec_density(kp.sk, out), DensityMatrix::basis(1, 1)), 1e-12);
}

TEST(Qeval, CnotOnBasis) {
    auto kp = kp_for(1, 10);
    Rng rng(8);
    QuantumCircuit c;
    c.n_qubits = 2;
    c.ops = {CNOT(0, 1)};
    auto out = qeval(kp.pk, c, qenc(kp.pk, DensityMatrix::basis(2, 0b01), rng), rng);
    EXPECT_LT(trace_distance(qdec_density(kp.sk, out), DensityMatrix::basis(2, 0b11)), 1e-12);
}

TEST(Qeval, MatchesPlainRunOnSmallCircuits) {
    Rng rng(9);
    for (int rep = 0; rep < 60; ++rep) {
        std::size_t n_in = 1 + rng.below(4), n_anc = rng.below(3);
        auto c = random_qc(rng, n_in, n_anc, 12, false);
        std::size_t td = toffoli_depth(c);
        auto kp = kp_for(unsigned(td + rng.below(2)), rng.below(64));
        auto rho = DensityMatrix::random(n_in, rng, 2);
        auto out = qeval(kp.pk, c, qenc(kp.pk, rho, rng), rng);
        EXPECT_LT(trace_distance(qdec_density(kp.sk, out), run(c, rho)), 1e-6);
        EXPECT_EQ(out.level(), kp.pk.params.d - td);
    }
}

TEST(Qeval, PauliAndSealedPathsAgree) {
    Rng rng(10);
    for (int rep = 0; rep < 30; ++rep) {
        auto c = random_qc(rng, 4, 0, 15, true);
        auto kp = kp_for(1, rng.below(64));
        auto rho = DensityMatrix::random(4, rng, 2);
        auto in = qenc(kp.pk, rho, rng);
        auto p = qeval(kp.pk, c, in, rng, Path::Auto);
        auto s = qeval(kp.pk, c, in, rng, Path::Sealed);
        EXPECT_EQ(p.level(), 1);
        EXPECT_LT(trace_distance(qdec_density(kp.sk, p), qdec_density(kp.sk, s)), 1e-9);
    }
}

TEST(Qeval, DepthBudget) {
    Rng rng(11);
    for (unsigned d = 0; d <= 3; ++d) {
        auto kp = kp_for(d, 12 + d);
        QuantumCircuit c;
        c.n_qubits = 2 + d + 1;
        // chain of d+1 Toffolis
        for (unsigned k = 0; k <= d; ++k) c.ops.push_back(CCX(k, k + 1, k + 2));
        ASSERT_EQ(toffoli_depth(c), d + 1);
        EXPECT_THROW(qeval(kp.pk, c, qenc(kp.pk, DensityMatrix::basis(c.n_qubits, 0), rng), rng),
                     fhe::DepthExceeded);
        c.ops.pop_back();
        EXPECT_NO_THROW(qeval(kp.pk, c, qenc(kp.pk, DensityMatrix::basis(c.n_qubits, 0), rng), rng));
    }
}

TEST(Qeval, RejectsWidthMismatch) {
    auto kp = kp_for(1, 13);
    Rng rng(12);
    QuantumCircuit c;
    c.n_qubits = 3;
    EXPECT_THROW(qeval(kp.pk, c, qenc(kp.pk, DensityMatrix::basis(2, 0), rng), rng), StructuralError);
}

TEST(Qeval, AuditCountsCalls) {
    auto kp = kp_for(1, 14);
    Rng rng(13);
    QuantumCircuit c;
    c.n_qubits = 1;
    auto before = audit::qeval_calls().load();
    qeval(kp.pk, c, qenc(kp.pk, DensityMatrix::basis(1, 0), rng), rng);
    EXPECT_EQ(audit::qeval_calls().load(), before + 1);
}
