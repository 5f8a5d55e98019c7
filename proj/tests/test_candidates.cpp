#include <gtest/gtest.h>

#include <cmath>

#include <vbbq/candidates.hpp>
#include <vbbq/stats.hpp>

#include "common.hpp"

using namespace vbbq;
using namespace vbbq::cand;

namespace {

BooleanCircuit mbpf(std::uint64_t a, std::uint64_t b, std::size_t lambda) {
    return build_function(mbpf_spec(bits_from_uint(a, lambda), bits_from_uint(b, lambda)));
}

// parity of all inputs: every adjacent pair of rows differs
BooleanCircuit parity(std::size_t n) {
    CircuitBuilder b(n);
    auto s = b.input(0);
    for (std::size_t i = 1; i < n; ++i) s = b.XOR(s, b.input(i));
    b.output(s);
    return b.build();
}

// does entry e contain input x (independent of the J wiring)
bool contains(const Entry& e, std::uint64_t x) {
    for (std::size_t k = 0; k < e.key.size(); ++k)
        if (e.mask[k] && int((x >> k) & 1u) != e.key[k]) return false;
    return e.valid;
}

const BasisCandidate kBasis;

}  // namespace

TEST(DecisionList, PartitionsAndAgreesWithTable) {
    Rng rng(1);
    int checked = 0;
    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 2 + rng.below(4);
        auto c = testutil::random_circuit(rng, n, 3 + rng.below(8), 2);
        auto table = truth_table(c);
        std::vector<Entry> list;
        try {
            list = decision_list(table, n);
        } catch (const UnsupportedShape&) {
            continue;
        }
        ++checked;
        for (std::uint64_t x = 0; x < (1u << n); ++x) {
            int hits = 0;
            for (const auto& e : list)
                if (contains(e, x)) {
                    ++hits;
                    EXPECT_EQ(e.value, table[x]);
                }
            EXPECT_EQ(hits, 1) << "x=" << x;
        }
    }
    EXPECT_GT(checked, 30);
}

TEST(DecisionList, MbpfNeedsLambdaPlusOneCubes) {
    auto list = decision_list(truth_table(mbpf(0b1011, 0b0110, 4)), 4);
    EXPECT_EQ(list.size(), 5u);
}

TEST(DecisionList, RejectsWideShapes) {
    EXPECT_THROW(decision_list(truth_table(parity(6)), 6), UnsupportedShape);
    Rng rng(0);
    EXPECT_THROW(kBasis.obf(parity(6), rng), UnsupportedShape);
}

TEST(Interpreter, DependsOnlyOnWidths) {
    auto a = interpreter(6, 6), b = interpreter(6, 6);
    EXPECT_EQ(a.get(), b.get());
    EXPECT_EQ(a->prog, 5u * 6 * (1 + 12 + 6));
    // program size: 5 n (1 + 2n + m)
    for (std::size_t n : {2u, 4u, 8u})
        for (std::size_t m : {1u, 3u, 9u}) EXPECT_EQ(kBasis.program_qubits(n, m), 5 * n * (1 + 2 * n + m));
}

// q = 1 (mask/t) + ceil(log2(n_in + 1)) (AND tree) + 1 (value)
TEST(Interpreter, MeasuredDepth) {
    EXPECT_EQ(interpreter(4, 4)->q, 1u + 3 + 1);
    EXPECT_EQ(interpreter(6, 6)->q, 1u + 3 + 1);
    EXPECT_EQ(interpreter(7, 3)->q, 1u + 3 + 1);
    EXPECT_EQ(interpreter(8, 5)->q, 1u + 4 + 1);
}

TEST(Basis, InterpretIsExact) {
    Rng rng(2);
    auto c = mbpf(0b1011, 0b0110, 4);
    auto o = kBasis.obf(c, rng);
    EXPECT_EQ(o.n_qubits(), interpreter(4, 4)->prog);
    for (std::uint64_t x = 0; x < 16; ++x) {
        auto d = output_distribution(o, bits_from_uint(x, 4));
        ASSERT_EQ(d.size(), 1u);
        EXPECT_EQ(d[0].first, x == 0b1011 ? bits_from_uint(0b0110, 4) : Bits(4, 0));
        EXPECT_NEAR(d[0].second, 1.0, 1e-12);
    }
}

TEST(Basis, RandomCircuitsAgree) {
    Rng rng(3);
    int checked = 0;
    while (checked < 20) {
        const std::size_t n = 2 + rng.below(3);
        auto c = testutil::random_circuit(rng, n, 4 + rng.below(6), 2);
        Obfuscation o;
        try {
            o = kBasis.obf(c, rng);
        } catch (const UnsupportedShape&) {
            continue;
        }
        ++checked;
        for (std::uint64_t x = 0; x < (1u << n); ++x) {
            Bits xb = bits_from_uint(x, n);
            EXPECT_EQ(interpret(o, xb, rng), vbbq::eval(c, xb));
        }
    }
}

TEST(Basis, SequentialReuse) {
    Rng rng(4);
    auto c = mbpf(0b110101, 0b011011, 6);
    auto o0 = kBasis.obf(c, rng);
    auto o = o0;
    for (std::uint64_t x : {0b110101u, 0u, 7u, 0b110101u, 63u}) {
        auto [next, y] = interpret_rec(o, bits_from_uint(x, 6), rng);
        EXPECT_EQ(y, vbbq::eval(c, bits_from_uint(x, 6)));
        o = next;
    }
    EXPECT_LE(qsim::classical_trace_distance(o.state, o0.state), 1e-9);
    auto r = recovery_report(o0, bits_from_uint(0b110101, 6), bits_from_uint(0b011011, 6));
    EXPECT_LE(r.eps, 1e-9);
    EXPECT_LE(r.joint, 1e-9);
    EXPECT_LE(r.recovered, 1e-9);
}

TEST(Noisy, EveryInputErrsWithProbabilityEps) {
    NoisyCandidate noisy(0.05);
    Rng rng(5);
    auto c = mbpf(0b1011, 0b0110, 4);
    auto o = noisy.obf(c, rng);
    for (std::uint64_t x = 0; x < 16; ++x) {
        Bits xb = bits_from_uint(x, 4);
        double p = 0;
        for (const auto& [v, w] : output_distribution(o, xb))
            if (v == vbbq::eval(c, xb)) p += w;
        EXPECT_NEAR(p, 0.95, 1e-12);
    }
}

TEST(Noisy, EmpiricalSuccessRate) {
    NoisyCandidate noisy(0.05);
    Rng rng(6);
    auto c = mbpf(0b1011, 0b0110, 4);
    auto o = noisy.obf(c, rng);
    const int n = 1000;
    int ok = 0;
    for (int t = 0; t < n; ++t) ok += interpret(o, bits_from_uint(0b1011, 4), rng) == bits_from_uint(0b0110, 4);
    EXPECT_GE(double(ok) / n, 0.95 - 3 * stats::sigma(0.95, n));
}

TEST(Noisy, RecoveryWithinTwoSqrtEps) {
    NoisyCandidate noisy(0.05);
    Rng rng(7);
    auto c = mbpf(0b1011, 0b0110, 4);
    auto o = noisy.obf(c, rng);
    auto r = recovery_report(o, bits_from_uint(0b1011, 4), bits_from_uint(0b0110, 4));
    EXPECT_NEAR(r.eps, 0.05, 1e-12);
    EXPECT_LE(r.joint, 2 * std::sqrt(r.eps) + 1e-6);
    EXPECT_LE(r.recovered, 2 * std::sqrt(r.eps) + 1e-6);
    // post-measurement state after a correct outcome drops the noisy branches
    for (int t = 0; t < 20; ++t) {
        auto [o2, y] = interpret_rec(o, bits_from_uint(0b1011, 4), rng);
        EXPECT_LE(qsim::classical_trace_distance(o2.state, o.state), 2 * std::sqrt(0.05));
    }
}

TEST(Noisy, RecOutcomesMatchInterpret) {
    NoisyCandidate noisy(0.2);
    Rng rng(8);
    auto c = mbpf(0b1011, 0b0110, 4);
    auto o = noisy.obf(c, rng);
    const Bits x = bits_from_uint(0b1011, 4);
    std::map<Bits, std::uint64_t> ia, ib;
    for (int t = 0; t < 1000; ++t) {
        ia[interpret(o, x, rng)]++;
        ib[interpret_rec(o, x, rng).second]++;
    }
    std::vector<std::uint64_t> a, b;
    for (const auto& [k, v] : ia) {
        a.push_back(v);
        b.push_back(ib[k]);
    }
    for (const auto& [k, v] : ib)
        if (!ia.count(k)) {
            a.push_back(0);
            b.push_back(v);
        }
    EXPECT_GT(stats::chi2_two_sample_p(a, b), 0.01);
}

TEST(Noisy, DeterministicInSeed) {
    NoisyCandidate noisy(0.05);
    auto c = mbpf(0b1011, 0b0110, 4);
    Rng r1(9), r2(9), r3(10);
    auto a = noisy.obf(c, r1), b = noisy.obf(c, r2), d = noisy.obf(c, r3);
    EXPECT_LE(qsim::classical_trace_distance(a.state, b.state), 0.0);
    EXPECT_GT(qsim::classical_trace_distance(a.state, d.state), 0.0);
}

TEST(Registry, ShippedCandidates) {
    EXPECT_EQ(names(), (std::vector<std::string>{"basis", "noisy"}));
    EXPECT_EQ(get("noisy")->eps_f(), 0.05);
    EXPECT_THROW(get("nope"), std::invalid_argument);
}
