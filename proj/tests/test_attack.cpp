#include <gtest/gtest.h>

#include <cmath>

#include <vbbq/attack.hpp>

using namespace vbbq;
using namespace vbbq::atk;

namespace {

struct Setup {
    Bits alpha;
    fhe::RandomTape r, r2;
    fam::Sampled s;
    std::size_t d;
};

Setup setup(unsigned lambda, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Setup st;
    st.alpha = fam::sample_nonzero(rng, lambda);
    st.r = fhe::RandomTape::sample(rng, lambda);
    st.r2 = fhe::RandomTape::sample(rng, lambda);
    st.s = fam::sample_D_r(st.alpha, unsigned(d), st.r, rng.derive("d"));
    st.d = d;
    return st;
}

cand::Obfuscation member_obf(const Setup& st, fam::Kind k, const cand::Candidate& c, Rng& rng) {
    auto m = fam::build_member(k, st.alpha, st.s.beta, unsigned(st.d), st.r, st.r2, st.s.aux);
    return c.obf(fam::member_circuit(m), rng);
}

const std::size_t kQ = depth_for(Mode::NoAux, 6);

}  // namespace

TEST(NoAux, DepthIsMeasured) { EXPECT_EQ(kQ, 6u); }

TEST(NoAux, PointOneZeroZero) {
    cand::BasisCandidate basis;
    for (std::uint64_t seed : {1u, 2u}) {
        auto st = setup(6, kQ, seed);
        Rng rng(seed);
        auto before_sk = fhe::audit::secret_key_uses().load();
        auto before_q = qfhe::audit::qeval_calls().load();
        auto p = attack_noaux(member_obf(st, fam::Kind::POINT, basis, rng), 6, rng);
        EXPECT_EQ(p.bit, 1) << p.log.diagnostic;
        EXPECT_TRUE(p.log.order_ok());
        EXPECT_EQ(p.log.rec_calls, kQ + 2);
        EXPECT_EQ(p.log.qeval_calls, 1u);
        EXPECT_EQ(p.log.rho_drift, 0.0);
        EXPECT_EQ(fhe::audit::secret_key_uses().load(), before_sk);
        EXPECT_EQ(qfhe::audit::qeval_calls().load(), before_q + 1);
        auto z = attack_noaux(member_obf(st, fam::Kind::ZERO, basis, rng), 6, rng);
        EXPECT_EQ(z.bit, 0);
        EXPECT_TRUE(z.log.diagnostic.empty()) << z.log.diagnostic;
        EXPECT_TRUE(z.log.order_ok());
    }
}

TEST(NoAux, ShortKeyHitsBottom) {
    cand::BasisCandidate basis;
    auto st = setup(6, kQ - 1, 3);
    Rng rng(3);
    auto p = attack_noaux(member_obf(st, fam::Kind::POINT, basis, rng), 6, rng);
    EXPECT_EQ(p.bit, 0);
    EXPECT_NE(p.log.diagnostic.find("bottom at block " + std::to_string(kQ)), std::string::npos);
    EXPECT_EQ(p.log.qeval_calls, 0u);
}

TEST(NoAux, NoisyDriftWithinIteratedBound) {
    cand::NoisyCandidate noisy(0.05);
    auto st = setup(6, kQ, 4);
    Rng rng(4);
    auto res = attack_noaux(member_obf(st, fam::Kind::POINT, noisy, rng), 6, rng);
    ASSERT_GE(res.log.rho_drift, 0.0);
    EXPECT_LE(res.log.rho_drift, double(kQ + 2) * 2 * std::sqrt(0.05) + 1e-6);
}

TEST(NoAux, RejectsWrongWidths) {
    cand::BasisCandidate basis;
    Rng rng(5);
    auto o = basis.obf(build_function(mbpf_spec(Bits(4, 1), Bits(4, 1))), rng);
    auto res = attack_noaux(o, 6, rng);
    EXPECT_EQ(res.bit, 0);
    EXPECT_FALSE(res.log.diagnostic.empty());
}

TEST(Aux, PointOneZeroZero) {
    cand::BasisCandidate basis;
    const std::size_t q = depth_for(Mode::Aux, 6);
    auto st = setup(6, q, 6);
    Rng rng(6);
    for (auto k : {fam::Kind::POINT, fam::Kind::ZERO}) {
        auto [spec, aux] = fam::build_aux_member_v4(k, st.alpha, st.s.beta, st.s.aux);
        auto res = attack_aux(basis.obf(build_function(spec), rng), aux, rng);
        EXPECT_EQ(res.bit, k == fam::Kind::POINT ? 1 : 0) << res.log.diagnostic;
        EXPECT_TRUE(res.log.order_ok());
    }
}

TEST(Aux, WrongKeyGivesZeroWithDiagnostic) {
    cand::BasisCandidate basis;
    const std::size_t q = depth_for(Mode::Aux, 6);
    auto st = setup(6, q, 7), other = setup(6, q, 8);
    Rng rng(7);
    auto [spec, aux] = fam::build_aux_member_v4(fam::Kind::POINT, st.alpha, st.s.beta, st.s.aux);
    aux.pk = other.s.aux.pk;
    auto res = attack_aux(basis.obf(build_function(spec), rng), aux, rng);
    EXPECT_EQ(res.bit, 0);
    EXPECT_FALSE(res.log.diagnostic.empty());
}

TEST(Aux, ShallowKeyRejectedByQeval) {
    cand::BasisCandidate basis;
    const std::size_t q = depth_for(Mode::Aux, 6);
    auto st = setup(6, q - 1, 9);
    Rng rng(9);
    auto [spec, aux] = fam::build_aux_member_v4(fam::Kind::POINT, st.alpha, st.s.beta, st.s.aux);
    auto res = attack_aux(basis.obf(build_function(spec), rng), aux, rng);
    EXPECT_EQ(res.bit, 0);
    EXPECT_NE(res.log.diagnostic.find("Toffoli depth"), std::string::npos);
}

TEST(Experiment, RejectsZeroTrials) {
    ExperimentConfig cfg;
    cfg.trials = 0;
    EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
}

TEST(Experiment, SmallRunAndSchedulingIndependence) {
    ExperimentConfig cfg;
    cfg.trials = 4;
    cfg.seed = 11;
    auto a = run_experiment(cfg);
    EXPECT_EQ(a.point_hits, 4u);
    EXPECT_EQ(a.zero_hits, 0u);
    EXPECT_DOUBLE_EQ(a.advantage, 1.0);
    EXPECT_TRUE(a.order_ok);
    EXPECT_EQ(a.d, a.q);
    cfg.jobs = 3;
    auto b = run_experiment(cfg);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        EXPECT_EQ(a.outcomes[t].point, b.outcomes[t].point);
        EXPECT_EQ(a.outcomes[t].zero, b.outcomes[t].zero);
    }
}

TEST(Experiment, AuxModeSmallRun) {
    ExperimentConfig cfg;
    cfg.mode = Mode::Aux;
    cfg.trials = 4;
    auto r = run_experiment(cfg);
    EXPECT_EQ(r.point_hits, 4u);
    EXPECT_EQ(r.zero_hits, 0u);
}

TEST(Experiment, ShortKeyAlwaysZero) {
    ExperimentConfig cfg;
    cfg.trials = 3;
    cfg.d_offset = -1;
    auto r = run_experiment(cfg);
    EXPECT_EQ(r.point_hits + r.zero_hits, 0u);
    for (const auto& o : r.outcomes) EXPECT_NE(o.diag_point.find("bottom"), std::string::npos);
}
