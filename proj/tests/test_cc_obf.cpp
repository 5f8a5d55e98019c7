#include <gtest/gtest.h>

#include <vbbq/cc_obf.hpp>
#include <vbbq/stats.hpp>

using namespace vbbq;
using namespace vbbq::cc;

namespace {
fhe::KeyPair kp_for(std::uint64_t r) { return fhe::keygen({6, 1}, {bits_from_uint(r, 6)}); }
Params dec_params(unsigned lambda) { return {std::uint32_t(dec_input_bits(lambda)), lambda, lambda}; }
Bits ct_bits(const std::vector<fhe::Ciphertext>& c) { return bits_from_bytes(fhe::serialize(c)); }
}  // namespace

TEST(CC, IdentityFourBits) {
    Rng rng(1);
    auto o = obf_cc(identity_capability(4), {4, 4, 4}, bits_from_string("1010"), {}, rng);
    EXPECT_EQ(eval_obf(o, bits_from_string("1010")), Bits{1});
    EXPECT_EQ(eval_obf(o, bits_from_string("1011")), Bits{0});
    EXPECT_THROW(eval_obf(o, bits_from_string("101")), std::invalid_argument);
}

TEST(CC, DecryptionCompare) {
    auto kp = kp_for(3);
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        Bits beta = rng.bits(6), other = beta;
        for (auto& v : other) v ^= 1;
        auto o = obf_cc(dec_capability(kp.sk, 6), dec_params(6), beta, {}, rng);
        EXPECT_EQ(eval_obf(o, ct_bits(fhe::enc(kp.pk, beta, rng))), Bits{1});
        EXPECT_EQ(eval_obf(o, ct_bits(fhe::enc(kp.pk, other, rng))), Bits{0});
        // garbage that does not parse as ciphertexts under sk
        EXPECT_EQ(eval_obf(o, rng.bits(dec_input_bits(6))), Bits{0});
    }
}

TEST(CC, MultiBitPayload) {
    Rng rng(3);
    Bits z = bits_from_string("1100101");
    auto o = obf_cc(identity_capability(3), {3, 3, 3}, bits_from_string("011"), z, rng);
    EXPECT_EQ(eval_obf(o, bits_from_string("011")), z);
    EXPECT_EQ(eval_obf(o, bits_from_string("111")), Bits(7, 0));
}

TEST(CC, ExhaustiveEquivalenceTwelveBits) {
    Rng rng(4);
    Bits y = rng.bits(12);
    auto o = obf_cc(identity_capability(12), {12, 12, 12}, y, {}, rng);
    for (std::uint64_t x = 0; x < 4096; ++x)
        ASSERT_EQ(eval_obf(o, bits_from_uint(x, 12))[0], bits_from_uint(x, 12) == y);
}

TEST(CC, SerializationRoundTrip) {
    Rng rng(5);
    auto o = obf_cc(identity_capability(5), {5, 5, 5}, rng.bits(5), rng.bits(9), rng);
    auto b = o.serialize();
    EXPECT_EQ(b.size(), kSaltBytes + kLockBytes + 2 + 2 + 8 + 12);
    EXPECT_EQ(Obfuscation::parse(b), o);
    b.pop_back();
    EXPECT_THROW(Obfuscation::parse(b), fhe::FormatError);
    EXPECT_EQ(eval_obf_bytes(b, rng.bits(5)), Bits{0});
}

TEST(CC, NoTargetBytesInObfuscation) {
    Rng rng(6);
    Bits y = bits_from_string("1111000011110000");
    auto b = obf_cc(identity_capability(16), {16, 16, 16}, y, {}, rng).serialize();
    Bytes yb = bytes_from_bits(y);
    EXPECT_EQ(std::search(b.begin(), b.end(), yb.begin(), yb.end()), b.end());
}

TEST(Sim, StructurallyIdenticalAndNeverMatches) {
    auto kp = kp_for(7);
    Rng rng(7);
    auto real = obf_cc(dec_capability(kp.sk, 6), dec_params(6), rng.bits(6), {}, rng);
    auto sim = sim_cc(6, dec_params(6), 0, rng);
    EXPECT_EQ(real.serialize().size(), sim.serialize().size());
    EXPECT_EQ(real.params, sim.params);
    for (int t = 0; t < 1000; ++t) {
        Bits x = t % 2 ? rng.bits(dec_input_bits(6)) : ct_bits(fhe::enc(kp.pk, rng.bits(6), rng));
        ASSERT_EQ(eval_obf(sim, x), Bits{0});
    }
    auto simz = sim_cc(6, dec_params(6), 11, rng);
    EXPECT_EQ(simz.serialize().size(), obf_cc(dec_capability(kp.sk, 6), dec_params(6), rng.bits(6), rng.bits(11), rng)
                                           .serialize()
                                           .size());
}

// Necessary condition for target hiding: lock bytes look the same whatever y is.
TEST(Sim, LockDistributionIndependentOfTarget) {
    Rng rng(8);
    std::vector<std::uint64_t> a(16, 0), b(16, 0);
    for (int t = 0; t < 1000; ++t) {
        Bits y = rng.bits(8);
        auto o = obf_cc(identity_capability(8), {8, 8, 8}, y, {}, rng);
        (y[0] ? a : b)[o.lock[0] & 15]++;
    }
    EXPECT_GT(stats::chi2_two_sample_p(a, b), 0.01);
    std::vector<std::uint64_t> all(16);
    for (int i = 0; i < 16; ++i) all[i] = a[i] + b[i];
    EXPECT_GT(stats::chi2_uniform_p(all), 0.01);
}

TEST(Audit, SealedDecNotCountedAsSecretKeyUse) {
    auto kp = kp_for(9);
    Rng rng(9);
    Bits beta = rng.bits(6);
    auto o = obf_cc(dec_capability(kp.sk, 6), dec_params(6), beta, {}, rng);
    auto before = fhe::audit::secret_key_uses().load();
    eval_obf(o, ct_bits(fhe::enc(kp.pk, beta, rng)));
    EXPECT_EQ(fhe::audit::secret_key_uses().load(), before);
}
