#include <gtest/gtest.h>

#include <sstream>

#include <vbbq/oracle_sim.hpp>

#include "common.hpp"

using namespace vbbq;
using namespace vbbq::orc;

namespace {

double dist(const StateVector& a, const StateVector& b) { return (a.amps - b.amps).norm(); }

// g as an arbitrary table, built into a circuit through a decision tree of MUXes
BooleanCircuit table_circuit(const std::vector<Bits>& table, std::size_t n) {
    CircuitBuilder b(n);
    const std::size_t m = table[0].size();
    for (std::size_t j = 0; j < m; ++j) {
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

}  // namespace

TEST(Oracle, ClassicalQueriesCountAndRepeat) {
    OracleHandle h(build_function(mbpf_spec(bits_from_uint(5, 3), bits_from_uint(3, 3))));
    h.record_transcript(true);
    EXPECT_EQ(h.query(bits_from_uint(5, 3)), bits_from_uint(3, 3));
    EXPECT_EQ(h.query(bits_from_uint(5, 3)), bits_from_uint(3, 3));
    EXPECT_EQ(h.classical_count(), 2u);
    std::istringstream in(h.transcript_jsonl());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j["i"], n);
        EXPECT_EQ(j["mode"], "classical");
        EXPECT_EQ(j["input"], "5");
        EXPECT_EQ(j["output"], "3");
        ++n;
    }
    EXPECT_EQ(n, 2);
    EXPECT_THROW(h.query(Bits(4, 0)), std::invalid_argument);
}

TEST(Oracle, SuperpositionQueryIsSelfInverse) {
    Rng rng(1);
    OracleHandle h(testutil::random_circuit(rng, 3, 10, 2));
    auto s = StateVector::random(5, rng), s0 = s;
    h.squery(s);
    h.squery(s);
    EXPECT_LE(dist(s, s0), 1e-9);
    EXPECT_EQ(h.superposition_count(), 2u);
}

TEST(Oracle, ZeroOracleIsIdentity) {
    OracleHandle h(build_function(zero_spec(3, 2)));
    auto s = StateVector::basis(5, 0);
    for (std::uint32_t k = 0; k < 3; ++k) s.apply(qsim::H(k));
    auto s0 = s;
    h.squery(s);
    EXPECT_LE(dist(s, s0), 1e-9);
}

TEST(Oracle, MatchesQsimOracleUnitary) {
    Rng rng(2);
    auto f = testutil::random_circuit(rng, 3, 12, 2);
    OracleHandle h(f);
    auto s = StateVector::random(5, rng), t = s;
    h.squery(s);
    qsim::apply_oracle_direct(truth_table(f), 3, t);
    EXPECT_LE(dist(s, t), 1e-12);
}

// every g: n -> m and c for m <= 3, n <= 2, every basis input (b, x, z)
TEST(Choice, ExhaustiveBasisEquality) {
    int cases = 0;
    for (std::size_t n = 1; n <= 2; ++n)
        for (std::size_t m = 1; m <= 3; ++m) {
            const std::uint64_t rows = 1u << n, funcs = 1u << (m * rows);
            for (std::uint64_t gi = 0; gi < funcs; gi += (funcs > 64 ? 37 : 1)) {
                std::vector<Bits> table;
                for (std::uint64_t r = 0; r < rows; ++r) table.push_back(bits_from_uint((gi >> (r * m)) & ((1u << m) - 1), m));
                auto g = table_circuit(table, n);
                for (std::uint64_t cv = 0; cv < (1u << m); ++cv) {
                    Bits c = bits_from_uint(cv, m);
                    OracleHandle gh(g), fh(choice_function(g, c));
                    ChoiceAdapter ad(gh, c);
                    const std::size_t w = 1 + n + m;
                    for (std::uint64_t i = 0; i < (1u << w); ++i) {
                        auto s = StateVector::basis(w, i), t = s;
                        ad.squery(s);
                        fh.squery(t);
                        ASSERT_LE(dist(s, t), 1e-12) << "n=" << n << " m=" << m << " g=" << gi << " c=" << cv;
                        Bits bx = bits_from_uint(i & ((1u << (1 + n)) - 1), 1 + n);
                        ASSERT_EQ(ad.query(bx), vbbq::eval(choice_function(g, c), bx));
                        ++cases;
                    }
                    EXPECT_EQ(gh.count(), 2 * ad.count());
                }
            }
        }
    EXPECT_GT(cases, 1000);
}

TEST(Choice, RandomSuperpositionStates) {
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        auto g = testutil::random_circuit(rng, 2, 8, 3);
        Bits c = rng.bits(3);
        OracleHandle gh(g), fh(choice_function(g, c));
        ChoiceAdapter ad(gh, c);
        auto s = StateVector::random(6, rng), u = s;
        ad.squery(s);
        fh.squery(u);
        EXPECT_LE(dist(s, u), 1e-9);
        EXPECT_EQ(gh.superposition_count(), 2 * ad.count());
    }
}

TEST(Compose, ScriptedRunMatchesMemberOracle) {
    Rng rng(4);
    const unsigned lambda = 6, d = 3;
    Bits alpha = fam::sample_nonzero(rng, lambda);
    auto r = fhe::RandomTape::sample(rng, lambda), r2 = fhe::RandomTape::sample(rng, lambda);
    auto s = fam::sample_D_r(alpha, d, r, rng.derive("d"));
    for (auto kind : {fam::Kind::POINT, fam::Kind::ZERO}) {
        auto m = fam::build_member(kind, alpha, s.beta, d, r, r2, s.aux);
        OracleHandle full(fam::member_circuit(m));
        OracleHandle point(build_function(kind == fam::Kind::POINT ? mbpf_spec(alpha, s.beta)
                                                                   : zero_spec(lambda, lambda)));
        ComposedMemberOracle comp(point, s.aux.payload(), s.aux.pk, m.w());
        const std::vector<std::pair<std::uint64_t, unsigned>> script{
            {0, 0}, {9, 0}, {0, 1}, {2, 1}, {3, 1}, {4, 1}, {bits_to_uint(alpha), 2}, {1, 2}, {7, 3}, {63, 1}};
        std::size_t b2 = 0;
        for (auto [x, b] : script) {
            Bits xb = bits_from_uint(x, lambda);
            EXPECT_EQ(comp.query(xb, b), full.query(fam::member_input(xb, b))) << "x=" << x << " b=" << b;
            b2 += b == 2;
        }
        EXPECT_EQ(point.count(), b2);
        EXPECT_EQ(comp.count(), script.size());
    }
}

TEST(Baselines, FullSearchFindsPoint) {
    Rng rng(5);
    Bits alpha = fam::sample_nonzero(rng, 6);
    auto s = fam::sample_D(alpha, 1, rng.derive("d"));
    OracleHandle point(build_function(mbpf_spec(alpha, s.beta)));
    EXPECT_EQ(sim_exhaustive_probe(point, s.aux, 64, rng), 1);
    EXPECT_LE(point.count(), 64u);
}

TEST(Baselines, ReplayProbeHonoursBudgetAndChecksWithO) {
    Rng rng(6);
    Bits alpha = fam::sample_nonzero(rng, 6);
    auto s = fam::sample_D(alpha, 1, rng.derive("d"));
    OracleHandle zero(build_function(zero_spec(6, 6)));
    EXPECT_EQ(sim_replay_probe(zero, s.aux, 20, rng), 0);
    EXPECT_EQ(zero.count(), 20u);
    EXPECT_TRUE(o_accepts(s.aux, s.beta, rng));
    Bits off = s.beta;
    off[1] ^= 1;
    EXPECT_FALSE(o_accepts(s.aux, off, rng));
}

TEST(Baselines, ExtractorWithoutQueriesGuessesUniformly) {
    Rng rng(7), a(1), b(2);
    Bits alpha = fam::sample_nonzero(rng, 6);
    auto s = fam::sample_D(alpha, 1, rng.derive("d"));
    auto e = o2h_extract(sim_random_guess, s.aux, 6, 128, alpha, a, b);
    EXPECT_EQ(e.d_prime, 0u);
    EXPECT_EQ(e.guess.size(), 6u);
    EXPECT_DOUBLE_EQ(e.hit_prob, 1.0 / 64);
}

TEST(Baselines, SmallRunGap) {
    BaselineConfig cfg;
    cfg.lambda = 8;
    cfg.budget = 8;
    cfg.trials = 300;
    cfg.seed = 3;
    auto rows = run_baselines(cfg);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].name, "random-guess");
    EXPECT_EQ(rows[0].advantage, 0.0);
    for (const auto& r : rows) {
        EXPECT_TRUE(r.adv_ok) << r.name << " adv " << r.advantage;
        EXPECT_TRUE(r.ext_ok) << r.name << " ext " << r.ext_freq;
        EXPECT_TRUE(r.o2h_ok) << r.name;
        EXPECT_LE(r.max_d_prime, cfg.budget);
    }
}
