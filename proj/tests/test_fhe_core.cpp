#include <gtest/gtest.h>

#include <set>

#include <vbbq/fhe_core.hpp>

#include "common.hpp"

using namespace vbbq;
using namespace vbbq::fhe;

namespace {

struct BoolAlg {
    using Bit = int;
    int XOR(int a, int b) { return a ^ b; }
    int AND(int a, int b) { return a & b; }
    int NOT(int a) { return a ^ 1; }
    int lit(bool v) { return v; }
};

RandomTape tape(std::uint64_t v, unsigned lambda) { return {bits_from_uint(v, lambda)}; }

KeyPair kp_for(unsigned lambda, unsigned d, std::uint64_t r) { return keygen({lambda, d}, tape(r, lambda)); }

BooleanCircuit identity(std::size_t n) {
    CircuitBuilder b(n);
    for (std::size_t i = 0; i < n; ++i) b.output(b.input(i));
    return b.build();
}

}  // namespace

// Published SIMON32/64 vector: key 1918 1110 0908 0100, pt 6565 6877, ct c69b e9bb.
TEST(Simon, PublishedTestVector) {
    EXPECT_EQ(simon::encrypt(0x1918111009080100ULL, 0x65656877u), 0xc69be9bbu);
}

TEST(Simon, GenericMatchesNative) {
    BoolAlg alg;
    simon::Generic<BoolAlg> g{alg};
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        std::uint64_t key = rng.u64();
        std::uint32_t pt = rng.u32();
        std::array<int, 64> kb;
        std::array<int, 32> pb;
        for (int i = 0; i < 64; ++i) kb[i] = (key >> i) & 1;
        for (int i = 0; i < 32; ++i) pb[i] = (pt >> i) & 1;
        auto ct = g.encrypt(g.expand(kb), pb);
        std::uint32_t v = 0;
        for (int i = 0; i < 32; ++i) v |= std::uint32_t(ct[i]) << i;
        EXPECT_EQ(v, simon::encrypt(key, pt));
    }
}

TEST(Keygen, DeterministicInArguments) {
    auto a = kp_for(6, 3, 41), b = kp_for(6, 3, 41);
    EXPECT_EQ(a.pk, b.pk);
    EXPECT_EQ(a.sk.serialize(), b.sk.serialize());
}

TEST(Keygen, DistinctTapesGiveDistinctKeys) {
    Rng rng(77);
    std::set<Bytes> seen;
    std::set<std::uint64_t> tapes;
    for (int t = 0; t < 1000; ++t) {
        std::uint64_t r = rng.below(1u << 20);
        if (!tapes.insert(r).second) continue;
        EXPECT_TRUE(seen.insert(kp_for(20, 1, r).pk.body).second);
    }
}

TEST(Keygen, DepthZeroRejectsOneGate) {
    auto kp = kp_for(6, 0, 5);
    Rng rng(1);
    auto ct = enc(kp.pk, Bits{1, 0}, rng);
    CircuitBuilder b(2);
    b.output(b.AND(b.input(0), b.input(1)));
    EXPECT_THROW(eval(kp.pk, b.build(), ct), DepthExceeded);
}

TEST(Keygen, SecretKeySizeIndependentOfDepth) {
    for (unsigned d = 0; d <= 16; ++d) {
        auto kp = kp_for(8, d, 99);
        EXPECT_EQ(kp.sk.serialize().size(), SecretKey::kBytes);
        EXPECT_EQ(kp.pk.body.size(), pk_body_size(d));
    }
}

TEST(Keygen, RejectsBadTape) {
    EXPECT_THROW(keygen({6, 1}, tape(1, 5)), std::invalid_argument);
    EXPECT_THROW(keygen({3, 1}, tape(1, 3)), std::invalid_argument);
}

TEST(Enc, RoundTripBothBits) {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        auto kp = kp_for(6, 2, rng.below(64));
        for (int m = 0; m < 2; ++m) EXPECT_EQ(dec(kp.sk, enc(kp.pk, Bits{std::uint8_t(m)}, rng)), Bits{std::uint8_t(m)});
    }
}

TEST(Enc, OneCiphertextPerBitAtLevelD) {
    auto kp = kp_for(6, 5, 17);
    Rng rng(4);
    auto cts = enc(kp.pk, rng.bits(8), rng);
    ASSERT_EQ(cts.size(), 8u);
    for (const auto& c : cts) EXPECT_EQ(c.level, 5);
}

TEST(Enc, Randomized) {
    auto kp = kp_for(6, 1, 9);
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        auto a = enc(kp.pk, Bits{1}, rng)[0], b = enc(kp.pk, Bits{1}, rng)[0];
        EXPECT_NE(a.serialize(), b.serialize());
    }
}

TEST(Dec, ExhaustiveFourBits) {
    auto kp = kp_for(6, 2, 33);
    Rng rng(6);
    for (std::uint64_t m = 0; m < 16; ++m) EXPECT_EQ(dec(kp.sk, enc(kp.pk, bits_from_uint(m, 4), rng)), bits_from_uint(m, 4));
}

TEST(Dec, WrongKeyFails) {
    auto a = kp_for(6, 2, 1), b = kp_for(6, 2, 2);
    Rng rng(7);
    EXPECT_THROW(dec(b.sk, enc(a.pk, Bits{1}, rng)), DecryptionFailure);
}

TEST(Dec, TamperedPayloadFails) {
    auto kp = kp_for(6, 2, 3);
    Rng rng(8);
    auto ct = enc(kp.pk, Bits{1}, rng);
    auto bad = ct;
    bad[0].c ^= 1;
    EXPECT_THROW(dec(kp.sk, bad), AuthenticationError);
    bad = ct;
    bad[0].tag ^= 0x10;
    EXPECT_THROW(dec(kp.sk, bad), AuthenticationError);
    bad = ct;
    bad[0].nonce ^= 1;
    EXPECT_THROW(dec(kp.sk, bad), AuthenticationError);
}

TEST(Serialization, LayoutAndRoundTrip) {
    auto kp = kp_for(6, 3, 12);
    Rng rng(9);
    auto ct = enc(kp.pk, Bits{1}, rng)[0];
    auto b = ct.serialize();
    ASSERT_EQ(b.size(), kCiphertextBytes);
    EXPECT_EQ(get_le(b, 0, 8), kp.sk.key_id);
    EXPECT_EQ(get_le(b, 8, 2), 3u);
    EXPECT_EQ(Ciphertext::parse(b), ct);
    EXPECT_THROW(parse_ciphertexts(Bytes(kCiphertextBytes + 1)), FormatError);
}

TEST(Eval, IdentityAndAnd) {
    auto kp = kp_for(6, 2, 21);
    Rng rng(10);
    for (std::uint64_t m = 0; m < 8; ++m) {
        auto x = bits_from_uint(m, 3);
        EXPECT_EQ(dec(kp.sk, eval(kp.pk, identity(3), enc(kp.pk, x, rng))), x);
    }
    CircuitBuilder b(2);
    b.output(b.AND(b.input(0), b.input(1)));
    auto and2 = b.build();
    EXPECT_EQ(dec(kp.sk, eval(kp.pk, and2, enc(kp.pk, Bits{1, 1}, rng))), Bits{1});
    EXPECT_EQ(dec(kp.sk, eval(kp.pk, and2, enc(kp.pk, Bits{1, 0}, rng))), Bits{0});
}

TEST(Eval, LevelBudgetBoundary) {
    Rng rng(11);
    for (unsigned d = 1; d <= 6; ++d) {
        auto kp = kp_for(6, d, rng.below(64));
        auto ok = testutil::chain_circuit(rng, 4, d);
        auto over = testutil::chain_circuit(rng, 4, d + 1);
        ASSERT_EQ(depth(ok), d);
        auto x = rng.bits(4);
        auto out = eval(kp.pk, ok, enc(kp.pk, x, rng));
        EXPECT_EQ(dec(kp.sk, out), vbbq::eval(ok, x));
        for (const auto& c : out) EXPECT_EQ(c.level, 0);
        EXPECT_THROW(eval(kp.pk, over, enc(kp.pk, x, rng)), DepthExceeded);
    }
}

TEST(Eval, LevelsCompose) {
    auto kp = kp_for(6, 4, 8);
    Rng rng(12);
    auto c2 = testutil::chain_circuit(rng, 3, 2);
    auto x = rng.bits(3);
    auto once = eval(kp.pk, c2, enc(kp.pk, x, rng));
    EXPECT_EQ(once[0].level, 2);
    auto twice = eval(kp.pk, c2, once);
    EXPECT_EQ(twice[0].level, 0);
    EXPECT_EQ(dec(kp.sk, twice), vbbq::eval(c2, vbbq::eval(c2, x)));
    EXPECT_THROW(eval(kp.pk, c2, twice), DepthExceeded);
}

// dec(eval(C, enc(m))) = C(m) exactly for random circuits within budget
TEST(Eval, PerfectCorrectnessProperty) {
    Rng rng(13);
    for (int t = 0; t < 200; ++t) {
        unsigned d = 1 + unsigned(rng.below(8));
        auto kp = kp_for(6, d, rng.below(64));
        BooleanCircuit c;
        do c = testutil::random_circuit(rng, 5, 4 + rng.below(12), 3);
        while (depth(c) > d);
        auto m = rng.bits(5);
        EXPECT_EQ(dec(kp.sk, eval(kp.pk, c, enc(kp.pk, m, rng))), vbbq::eval(c, m));
    }
}

TEST(Add, LevelFreeXor) {
    auto kp = kp_for(6, 3, 4);
    Rng rng(14);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            auto ca = enc(kp.pk, Bits{std::uint8_t(a)}, rng)[0], cb = enc(kp.pk, Bits{std::uint8_t(b)}, rng)[0];
            auto s = add(kp.pk, ca, cb);
            EXPECT_EQ(s.level, 3);
            EXPECT_EQ(dec(kp.sk, {s}), Bits{std::uint8_t(a ^ b)});
            EXPECT_EQ(dec(kp.sk, {add_plain(kp.pk, ca, 1)}), Bits{std::uint8_t(a ^ 1)});
            EXPECT_EQ(add_plain(kp.pk, ca, 0), ca);
        }
}

TEST(Audit, DecCountsSecretKeyUse) {
    auto kp = kp_for(6, 1, 2);
    Rng rng(15);
    auto ct = enc(kp.pk, Bits{1}, rng);
    auto before = audit::secret_key_uses().load();
    dec(kp.sk, ct);
    EXPECT_EQ(audit::secret_key_uses().load(), before + 1);
    eval(kp.pk, identity(1), ct);
    EXPECT_EQ(audit::secret_key_uses().load(), before + 1);
}
