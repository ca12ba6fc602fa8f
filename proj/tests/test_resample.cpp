#include "test_util.hpp"

#include "trecs/resample.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

using namespace trecs;
using trecs::testing::indexed_sequence;
using trecs::testing::random_sequence;

namespace {

using Idx = std::vector<std::size_t>;

// Exact integer evaluation for alpha = k/5.
Idx oracle_plan(std::size_t n, std::size_t l, std::size_t k)
{
    Idx out;
    for (std::size_t i = 1; i <= l; ++i) {
        std::size_t v = (k * i) / 5;
        if (v == 0) {
            v = 1;
        }
        if (v > n) {
            v = n;
        }
        out.push_back(v);
    }
    return out;
}

} // namespace

TEST(IndexPlan, HandEvaluatedCases)
{
    EXPECT_EQ(compute_index_plan(10, 5, 1.0).indices, (Idx{1, 2, 3, 4, 5}));
    EXPECT_EQ(compute_index_plan(10, 5, 2.0).indices, (Idx{2, 4, 6, 8, 10}));
    EXPECT_EQ(compute_index_plan(5, 4, 3.0).indices, (Idx{3, 5, 5, 5}));
    EXPECT_EQ(compute_index_plan(10, 6, 0.5).indices, (Idx{1, 1, 1, 2, 2, 3}));
}

TEST(IndexPlan, CarriesItsInputs)
{
    const auto p = compute_index_plan(7, 3, 1.4);
    EXPECT_EQ(p.source_len, 7u);
    EXPECT_EQ(p.target_len, 3u);
    EXPECT_DOUBLE_EQ(p.alpha, 1.4);
    EXPECT_EQ(p.indices.size(), 3u);
}

TEST(IndexPlan, RejectsNonPositiveArguments)
{
    EXPECT_THROW(compute_index_plan(0, 5, 1.0), std::invalid_argument);
    EXPECT_THROW(compute_index_plan(5, 0, 1.0), std::invalid_argument);
    EXPECT_THROW(compute_index_plan(5, 5, 0.0), std::invalid_argument);
    EXPECT_THROW(compute_index_plan(5, 5, -1.0), std::invalid_argument);
    EXPECT_THROW(compute_index_plan(5, 5, std::nan("")), std::invalid_argument);
}

TEST(IndexPlan, MatchesIntegerOracleOnSweepGrid)
{
    for (std::size_t n = 1; n <= 20; ++n) {
        for (std::size_t l = 1; l <= 20; ++l) {
            for (std::size_t k = 1; k <= 15; ++k) {
                ASSERT_EQ(compute_index_plan(n, l, k / 5.0).indices, oracle_plan(n, l, k))
                    << "n=" << n << " l=" << l << " k=" << k;
            }
        }
    }
}

TEST(IndexPlan, MonotoneAndInRange)
{
    Rng rng(3);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + rng.below(80);
        const std::size_t l = 1 + rng.below(80);
        const double alpha = rng.uniform(0.05, 5.0);
        const auto p = compute_index_plan(n, l, alpha);
        ASSERT_TRUE(std::is_sorted(p.indices.begin(), p.indices.end()));
        for (const auto v : p.indices) {
            ASSERT_GE(v, 1u);
            ASSERT_LE(v, n);
        }
    }
}

TEST(IndexPlan, UnitAlphaIsPrefix)
{
    for (std::size_t n = 1; n <= 30; ++n) {
        for (std::size_t l = 1; l <= n; ++l) {
            const auto p = compute_index_plan(n, l, 1.0);
            for (std::size_t i = 0; i < l; ++i) {
                ASSERT_EQ(p.indices[i], i + 1);
            }
        }
    }
}

TEST(ApplyPlan, SelectsFrames)
{
    const auto seq = indexed_sequence(5);
    const auto out = apply_index_plan(seq, compute_index_plan(5, 4, 3.0));
    EXPECT_EQ(trecs::testing::frame_values_of(out), (std::vector<double>{3, 5, 5, 5}));
    EXPECT_EQ(out.id(), "seq@\xCE\xB1=3");

    const auto first = apply_index_plan(indexed_sequence(10), compute_index_plan(10, 5, 1.0));
    EXPECT_EQ(trecs::testing::frame_values_of(first), (std::vector<double>{1, 2, 3, 4, 5}));

    const auto one = apply_index_plan(seq, compute_index_plan(5, 1, 1.0));
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0], seq[0]);
}

TEST(ApplyPlan, LengthMismatchThrows)
{
    EXPECT_THROW(apply_index_plan(indexed_sequence(4), compute_index_plan(5, 2, 1.0)), std::invalid_argument);
}

TEST(IndexedResample, Examples)
{
    const auto seq = indexed_sequence(10);
    EXPECT_TRUE(resample_by_rate_indexed(seq, 1.0).same_frames(seq));
    EXPECT_EQ(trecs::testing::frame_values_of(resample_by_rate_indexed(seq, 2.0)),
              (std::vector<double>{2, 4, 6, 8, 10}));
    EXPECT_EQ(trecs::testing::frame_values_of(resample_by_rate_indexed(seq, 0.5)),
              (std::vector<double>{1, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9, 10}));
}

TEST(IndexedResample, NeverEmpty)
{
    const auto out = resample_by_rate_indexed(indexed_sequence(2), 3.0);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].values()[0], 2.0);
    EXPECT_THROW(resample_by_rate_indexed(indexed_sequence(2), 0.0), std::invalid_argument);
}

TEST(Interpolate, Examples)
{
    const Shape s{2, 2, 3};
    FrameSequence constant("c", std::vector<Frame>(4, Frame(s, 7.5)));
    for (const double t : {1.0, 1.3, 2.5, 3.99, 4.0}) {
        EXPECT_EQ(interpolate_at(constant, t), Frame(s, 7.5));
    }

    Rng rng(11);
    const auto seq = random_sequence(rng, 5, s);
    EXPECT_EQ(interpolate_at(seq, 2.0), seq[1]);

    FrameSequence ramp("r", std::vector<Frame>{Frame(s, 0.0), Frame(s, 10.0)});
    EXPECT_EQ(interpolate_at(ramp, 1.25), Frame(s, 2.5));
}

TEST(Interpolate, ClampsOutOfRange)
{
    const auto seq = indexed_sequence(4);
    EXPECT_EQ(interpolate_at(seq, -3.0), seq[0]);
    EXPECT_EQ(interpolate_at(seq, 9.0), seq[3]);
}

TEST(Interpolate, StaysBetweenBracketingFrames)
{
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const auto seq = random_sequence(rng, 2 + rng.below(6), {3, 2, 2});
        const double t = rng.uniform(1.0, static_cast<double>(seq.size()));
        const auto f = static_cast<std::size_t>(t);
        const Frame out = interpolate_at(seq, t);
        const auto a = seq.frame(f).values();
        const auto b = seq.frame(std::min(f + 1, seq.size())).values();
        for (std::size_t k = 0; k < a.size(); ++k) {
            ASSERT_GE(out.values()[k], std::min(a[k], b[k]));
            ASSERT_LE(out.values()[k], std::max(a[k], b[k]));
        }
    }
}

TEST(InterpolatedResample, Examples)
{
    Rng rng(2);
    const auto seq = random_sequence(rng, 10, {2, 2, 1});
    const auto same = resample_by_rate_interpolated(seq, 1.0);
    ASSERT_EQ(same.size(), seq.size());
    for (std::size_t k = 0; k < seq.size(); ++k) {
        EXPECT_EQ(same[k], seq[k]);
    }

    const auto fast = resample_by_rate_interpolated(indexed_sequence(10), 2.0);
    EXPECT_EQ(trecs::testing::frame_values_of(fast), (std::vector<double>{1, 3, 5, 7, 9}));

    const auto slow = resample_by_rate_interpolated(indexed_sequence(3), 0.5);
    EXPECT_EQ(trecs::testing::frame_values_of(slow), (std::vector<double>{1, 1.5, 2, 2.5, 3, 3}));
}

TEST(InterpolatedResample, LengthIsRoundedRatio)
{
    EXPECT_EQ(interpolated_output_length(10, 3.0), 3u);  // 3.33
    EXPECT_EQ(interpolated_output_length(10, 4.0), 3u);  // 2.5 rounds up
    EXPECT_EQ(interpolated_output_length(10, 0.3), 33u); // 33.3
    EXPECT_EQ(interpolated_output_length(1, 3.0), 1u);
    EXPECT_THROW(interpolated_output_length(10, 0.0), std::invalid_argument);
}

TEST(LoopToMinLength, Examples)
{
    const auto long_seq = indexed_sequence(60);
    EXPECT_TRUE(loop_to_min_length(long_seq, 50).same_frames(long_seq));
    EXPECT_EQ(trecs::testing::frame_values_of(loop_to_min_length(indexed_sequence(3), 7)),
              (std::vector<double>{1, 2, 3, 1, 2, 3, 1}));
    EXPECT_EQ(trecs::testing::frame_values_of(loop_to_min_length(indexed_sequence(1), 4)),
              (std::vector<double>{1, 1, 1, 1}));
}

TEST(LoopToMinLength, LengthAndPrefix)
{
    for (std::size_t n = 1; n <= 12; ++n) {
        for (std::size_t m = 1; m <= 30; ++m) {
            const auto seq = indexed_sequence(n);
            const auto out = loop_to_min_length(seq, m);
            ASSERT_EQ(out.size(), std::max(n, m));
            for (std::size_t k = 0; k < n; ++k) {
                ASSERT_EQ(out[k], seq[k]);
            }
        }
    }
}

TEST(FrameSequence, RejectsBadInput)
{
    EXPECT_THROW(FrameSequence("x", std::vector<Frame>{}), std::invalid_argument);
    EXPECT_THROW(FrameSequence("x", std::vector<Frame>{Frame({1, 1, 1}), Frame({1, 2, 1})}), std::invalid_argument);
    EXPECT_THROW(indexed_sequence(3).frame(0), std::out_of_range);
    EXPECT_THROW(indexed_sequence(3).frame(4), std::out_of_range);
}
