#include <gtest/gtest.h>

#include <numbers>

#include "cslsh/core.hpp"
#include "cslsh/oracle.hpp"
#include "cslsh/rng.hpp"

using namespace cslsh;

namespace {

Dataset bits(std::size_t dim, std::initializer_list<const char*> rows) {
    std::vector<Point> pts;
    for (const char* r : rows) pts.push_back(Point::from_bit_string(r));
    return Dataset::from_points(Metric::hamming, dim, pts);
}

}  // namespace

TEST(Distance, HammingIdentityIsZero) {
    const auto x = Point::from_bit_string("0000");
    EXPECT_EQ(distance(Metric::hamming, 4, x.view(), x.view()), 0.0);
}

TEST(Distance, HammingCountsDifferingBits) {
    const auto x = Point::from_bit_string("0000"), y = Point::from_bit_string("0101");
    EXPECT_EQ(distance(Metric::hamming, 4, x.view(), y.view()), 2.0);
}

TEST(Distance, AngularOrthogonalIsHalfPi) {
    const auto x = Point::from_reals({1, 0}), y = Point::from_reals({0, 1});
    EXPECT_DOUBLE_EQ(distance(Metric::angular, 2, x.view(), y.view()), std::numbers::pi / 2);
}

TEST(Distance, EuclideanThreeFourFive) {
    const auto x = Point::from_reals({0, 0}), y = Point::from_reals({3, 4});
    EXPECT_DOUBLE_EQ(distance(Metric::euclidean, 2, x.view(), y.view()), 5.0);
}

TEST(Distance, DimensionMismatchThrows) {
    const auto x = Point::from_bit_string("0000"), y = Point::from_bit_string("00001");
    EXPECT_THROW((void)distance(Metric::hamming, 4, x.view(), y.view()), input_error);
    const auto a = Point::from_reals({1, 0}), b = Point::from_reals({1, 0, 0});
    EXPECT_THROW((void)distance(Metric::euclidean, 2, a.view(), b.view()), input_error);
}

TEST(Distance, AngularZeroVectorRejected) {
    const auto a = Point::from_reals({0, 0}), b = Point::from_reals({1, 0});
    EXPECT_THROW((void)distance(Metric::angular, 2, a.view(), b.view()), input_error);
    EXPECT_THROW((void)Dataset::from_reals(Metric::angular, 2, {0, 0}), input_error);
}

TEST(Dataset, RejectsBitsBeyondDimensionAndRaggedInput) {
    EXPECT_THROW((void)Dataset::from_bits(3, {0b1000}), input_error);
    EXPECT_THROW((void)Dataset::from_reals(Metric::euclidean, 3, {1, 2, 3, 4}), input_error);
    EXPECT_THROW((void)Dataset::from_reals(Metric::hamming, 1, {1}), input_error);
}

TEST(QueryOrder, StrictDistanceOrder) {
    const auto d = bits(4, {"0001", "0011"});
    const auto q = Point::from_bit_string("0000");
    const QueryOrder order(d, q.view());
    EXPECT_TRUE(order.precedes(PointId{0}, PointId{1}));
    EXPECT_FALSE(order.precedes(PointId{1}, PointId{0}));
}

TEST(QueryOrder, TiesBreakBySmallerId) {
    const auto d = bits(4, {"1000", "0000", "0100", "0010", "0001", "1100", "1010", "0110"});
    const auto q = Point::from_bit_string("0000");
    const QueryOrder order(d, q.view());
    EXPECT_TRUE(order.precedes(PointId{2}, PointId{4}));  // both at distance 1
    EXPECT_FALSE(order.precedes(PointId{4}, PointId{2}));
}

TEST(QueryOrder, Irreflexive) {
    const auto d = bits(4, {"0001"});
    const auto q = Point::from_bit_string("0000");
    EXPECT_FALSE(QueryOrder(d, q.view()).precedes(PointId{0}, PointId{0}));
}

TEST(QueryOrder, InvalidIdThrows) {
    const auto d = bits(4, {"0001"});
    const auto q = Point::from_bit_string("0000");
    EXPECT_THROW((void)QueryOrder(d, q.view()).precedes(PointId{0}, PointId{5}), input_error);
}

TEST(QueryOrder, StrictTotalOrderOnRandomSet) {
    auto rng = RngSeed(5).derive("order", 0).stream();
    std::vector<std::uint64_t> words(48);
    for (auto& w : words) w = rng() & 0x3F;  // dim 6: many ties
    const auto d = Dataset::from_bits(6, words);
    const auto qd = Dataset::from_bits(6, {rng() & 0x3F});
    const QueryOrder order(d, qd.point(0));
    const auto n = static_cast<std::uint32_t>(d.size());
    for (std::uint32_t x = 0; x < n; ++x)
        for (std::uint32_t y = 0; y < n; ++y) {
            const bool xy = order.precedes(PointId{x}, PointId{y}), yx = order.precedes(PointId{y}, PointId{x});
            if (x == y) EXPECT_FALSE(xy || yx);
            else EXPECT_NE(xy, yx);
            for (std::uint32_t z = 0; z < n; z += 7)
                if (xy && order.precedes(PointId{y}, PointId{z})) {
                    EXPECT_TRUE(order.precedes(PointId{x}, PointId{z}));
                }
        }
}

TEST(BruteForce, ExactMatchAndTieBreak) {
    const auto d = bits(4, {"1111", "0000", "0000"});
    const auto q = Point::from_bit_string("0000");
    EXPECT_EQ(brute_force_nn(d, q.view()).id.index, 1U);
    const auto e = bits(4, {"1111", "1110", "0001", "1100", "1000", "1101", "0111", "1011", "0010", "0011"});
    EXPECT_EQ(brute_force_nn(e, q.view()).id.index, 2U);  // ids 2 and 8 both at distance 1
}

TEST(BruteForce, MatchesReverseScan) {
    auto rng = RngSeed(9).derive("bf", 0).stream();
    std::vector<std::uint64_t> words(100);
    for (auto& w : words) w = rng() & 0xFFFF;
    const auto d = Dataset::from_bits(16, words);
    for (int t = 0; t < 20; ++t) {
        const auto qd = Dataset::from_bits(16, {rng() & 0xFFFF});
        std::optional<Candidate> best;
        for (std::size_t x = d.size(); x-- > 0;) {
            const Candidate c{d.distance(PointId{static_cast<std::uint32_t>(x)}, qd.point(0)), PointId{static_cast<std::uint32_t>(x)}};
            if (!best || c.distance <= best->distance) best = c;
        }
        EXPECT_EQ(brute_force_nn(d, qd.point(0)).id, best->id);
    }
}

TEST(Rng, SameScopeAndIndexReplay) {
    const RngSeed s(42);
    auto a = derive_rng(s, "tree", 0), b = derive_rng(s, "tree", 0);
    for (int k = 0; k < 100; ++k) EXPECT_EQ(a(), b());
}

TEST(Rng, DistinctIndexOrScopeDiffers) {
    const RngSeed s(42);
    EXPECT_NE(derive_rng(s, "tree", 0)(), derive_rng(s, "tree", 1)());
    EXPECT_NE(derive_rng(s, "tree", 0)(), derive_rng(s, "forest", 0)());
    EXPECT_NE(derive_rng(RngSeed(1), "tree", 0)(), derive_rng(RngSeed(2), "tree", 0)());
}

TEST(Rng, BelowIsUnbiasedOnSmallRange) {
    auto rng = RngSeed(3).derive("below", 0).stream();
    std::array<int, 6> counts{};
    constexpr int draws = 60000;
    for (int k = 0; k < draws; ++k) ++counts[rng.below(6)];
    for (int c : counts) EXPECT_NEAR(c, draws / 6.0, 5 * std::sqrt(draws / 6.0));
}

TEST(Rng, UniformInUnitInterval) {
    auto rng = RngSeed(4).derive("u", 0).stream();
    for (int k = 0; k < 10000; ++k) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}
