#include <gtest/gtest.h>

#include <vbbq/pk_decompose.hpp>

using namespace vbbq;
using namespace vbbq::pk;

namespace {
fhe::RandomTape tape(std::uint64_t v, unsigned lambda) { return {bits_from_uint(v, lambda)}; }
constexpr Strategy kBoth[] = {Strategy::Bootstrapped, Strategy::Garbled};
}  // namespace

TEST(KeygenCircuit, ComputesKeygen) {
    for (unsigned d = 0; d <= 2; ++d) {
        auto c = keygen_circuit(6, d);
        for (std::uint64_t r : {0ull, 5ull, 63ull}) {
            auto pk = fhe::keygen({6, d}, tape(r, 6)).pk;
            EXPECT_EQ(bytes_from_bits(eval(*c, bits_from_uint(r, 6))), pk.body);
        }
    }
}

TEST(KeygenCircuit, PrefixAcrossDepths) {
    auto c1 = keygen_circuit(6, 1), c2 = keygen_circuit(6, 2);
    ASSERT_LT(c1->gates.size(), c2->gates.size());
    for (std::size_t i = 0; i < c1->gates.size(); ++i) EXPECT_EQ(c1->gates[i], c2->gates[i]);
    for (std::size_t i = 0; i < c1->gates.size(); i += 997) EXPECT_EQ(keygen_gate(6, i).first, c1->gates[i]);
}

TEST(Blocks, CountsPerStrategy) {
    for (unsigned d = 0; d <= 3; ++d) {
        EXPECT_EQ(K(6, d, Strategy::Bootstrapped), d);
        EXPECT_EQ(K(6, d, Strategy::Garbled), keygen_circuit(6, d)->gates.size());
    }
}

TEST(Blocks, SerializationRoundTrip) {
    auto b = block_gen(6, 1, tape(3, 6), tape(4, 6), Strategy::Bootstrapped);
    EXPECT_EQ(KeyBlock::parse(b.serialize()), b);
    auto bad = b.serialize();
    bad[4] = 9;
    EXPECT_THROW(KeyBlock::parse(bad), fhe::FormatError);
}

TEST(Blocks, BlockGenAllMatchesPerIndex) {
    auto r = tape(11, 6), r2 = tape(12, 6);
    for (auto s : kBoth) {
        auto all = block_gen_all(6, 1, r, r2, s);
        ASSERT_EQ(all.size(), block_count(6, 1, s));
        for (std::size_t i = 0; i < all.size(); i += (s == Strategy::Garbled ? 331 : 1))
            EXPECT_EQ(block_gen(6, i, r, r2, s), all[i]);
    }
}

TEST(Assemble, EqualsKeygenSmallDepths) {
    for (unsigned d = 0; d <= 2; ++d)
        for (auto s : kBoth)
            for (std::uint64_t rv : {1ull, 42ull}) {
                auto r = tape(rv, 6);
                EXPECT_EQ(assemble(block_gen_all(6, d, r, tape(rv + 7, 6), s), 6), fhe::keygen({6, d}, r).pk)
                    << strategy_name(s) << " d=" << d;
            }
}

TEST(Assemble, RejectsMissingReorderedMixed) {
    auto r = tape(2, 6), r2 = tape(3, 6);
    for (auto s : kBoth) {
        auto bl = block_gen_all(6, 2, r, r2, s);
        auto drop = bl;
        drop.erase(drop.begin() + 1);
        EXPECT_THROW(assemble(drop, 6), AssemblyError);
        auto swp = bl;
        std::swap(swp[0], swp[1]);
        EXPECT_THROW(assemble(swp, 6), AssemblyError);
    }
    auto mix = block_gen_all(6, 1, r, r2, Strategy::Bootstrapped);
    mix[1] = block_gen(6, 1, r, r2, Strategy::Garbled);
    EXPECT_THROW(assemble(mix, 6), AssemblyError);
    EXPECT_THROW(assemble({}, 6), AssemblyError);
}

TEST(Assemble, CorruptGarbledBlockFails) {
    auto bl = block_gen_all(6, 0, tape(9, 6), tape(10, 6), Strategy::Garbled);
    bl[0].body[0] ^= 0x55;
    EXPECT_THROW(assemble(bl, 6), AssemblyError);
}

TEST(SimBlocks, BootstrappedExact) {
    for (unsigned d = 0; d <= 4; ++d) {
        auto r = tape(17 + d, 6);
        auto pk = fhe::keygen({6, d}, r).pk;
        EXPECT_EQ(sim_blocks(6, pk, Strategy::Bootstrapped), block_gen_all(6, d, r, r, Strategy::Bootstrapped));
    }
}

TEST(SimBlocks, GarbledAssemblesToPk) {
    for (unsigned d = 0; d <= 1; ++d) {
        auto pk = fhe::keygen({6, d}, tape(33, 6)).pk;
        auto sim = sim_blocks(6, pk, Strategy::Garbled, 5);
        EXPECT_EQ(sim.size(), block_count(6, d, Strategy::Garbled));
        EXPECT_EQ(assemble(sim, 6), pk);
        auto real = block_gen_all(6, d, tape(33, 6), tape(1, 6), Strategy::Garbled);
        for (std::size_t i = 0; i < sim.size(); i += 101) EXPECT_EQ(sim[i].body.size(), real[i].body.size());
    }
}

TEST(Bridges, DecryptToPreviousSubKey) {
    auto r = tape(21, 6);
    for (unsigned d = 1; d <= 4; ++d) {
        auto ck = chain_keygen({6, d}, r);
        for (unsigned i = 1; i <= d; ++i) {
            auto ski = fhe::sub_secret_key(r, i);
            auto prev = fhe::sub_secret_key(r, i - 1);
            EXPECT_EQ(fhe::dec(ski, ck.bridge[i]), bits_from_uint(prev.material, 64));
        }
        EXPECT_EQ(ck.kp.sk.material, fhe::sub_secret_key(r, d).material);
    }
}
