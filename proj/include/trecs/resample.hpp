#pragma once

#include "trecs/format.hpp"
#include "trecs/frame.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

namespace trecs {

/// Source-frame selection for one (N, L, alpha) triple. Indices are 1-based.
struct IndexPlan {
    double alpha = 1.0;
    std::size_t source_len = 0;
    std::size_t target_len = 0;
    std::vector<std::size_t> indices;

    friend bool operator==(const IndexPlan&, const IndexPlan&) = default;
};

namespace detail {

inline void require_alpha(double alpha)
{
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("resampling factor must be a positive finite number");
    }
}

} // namespace detail

/// l_i = floor(alpha * i) for i = 1..L, clamped into [1, N].
inline IndexPlan compute_index_plan(std::size_t source_len, std::size_t target_len, double alpha)
{
    if (source_len < 1 || target_len < 1) {
        throw std::invalid_argument("source and target lengths must be at least 1");
    }
    detail::require_alpha(alpha);

    IndexPlan plan{alpha, source_len, target_len, {}};
    plan.indices.reserve(target_len);
    const auto n = static_cast<double>(source_len);
    for (std::size_t i = 1; i <= target_len; ++i) {
        const double raw = std::floor(alpha * static_cast<double>(i));
        if (raw < 1.0) {
            plan.indices.push_back(1);
        } else if (raw >= n) {
            plan.indices.push_back(source_len);
        } else {
            plan.indices.push_back(static_cast<std::size_t>(raw));
        }
    }
    return plan;
}

inline FrameSequence apply_index_plan(const FrameSequence& seq, const IndexPlan& plan)
{
    if (plan.source_len != seq.size()) {
        throw std::invalid_argument("index plan source length does not match the sequence length");
    }
    std::vector<FramePtr> out;
    out.reserve(plan.indices.size());
    for (const std::size_t index : plan.indices) {
        if (index < 1 || index > seq.size()) {
            throw std::invalid_argument("index plan refers to a frame outside the sequence");
        }
        out.push_back(seq.ptr(index - 1));
    }
    return FrameSequence(seq.id() + "@\xCE\xB1=" + format_real(plan.alpha), std::move(out));
}

/// Output length used for test-time input resampling: max(1, floor(N / alpha)).
inline std::size_t indexed_output_length(std::size_t source_len, double alpha)
{
    detail::require_alpha(alpha);
    const double len = std::floor(static_cast<double>(source_len) / alpha);
    return len < 1.0 ? 1 : static_cast<std::size_t>(len);
}

inline FrameSequence resample_by_rate_indexed(const FrameSequence& seq, double alpha)
{
    const std::size_t target = indexed_output_length(seq.size(), alpha);
    return apply_index_plan(seq, compute_index_plan(seq.size(), target, alpha));
}

/// Linear blend between the two frames bracketing the fractional 1-based position t.
inline Frame interpolate_at(const FrameSequence& seq, double t)
{
    const auto n = static_cast<double>(seq.size());
    t = std::clamp(t, 1.0, n);
    const double f = std::floor(t);
    const double w = t - f;
    const auto lower = static_cast<std::size_t>(f);
    if (lower >= seq.size() || w == 0.0) {
        return seq.frame(lower);
    }
    const Frame& a = seq.frame(lower);
    const Frame& b = seq.frame(lower + 1);
    Frame out(a.shape());
    auto dst = out.values();
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t k = 0; k < dst.size(); ++k) {
        dst[k] = (1.0 - w) * va[k] + w * vb[k];
    }
    return out;
}

/// Output length used for rate-modified variants: max(1, round-half-up(N / rate)).
inline std::size_t interpolated_output_length(std::size_t source_len, double rate)
{
    detail::require_alpha(rate);
    const double len = std::floor(static_cast<double>(source_len) / rate + 0.5);
    return len < 1.0 ? 1 : static_cast<std::size_t>(len);
}

inline FrameSequence resample_by_rate_interpolated(const FrameSequence& seq, double rate)
{
    const std::size_t m = interpolated_output_length(seq.size(), rate);
    const auto n = static_cast<double>(seq.size());
    std::vector<FramePtr> out;
    out.reserve(m);
    for (std::size_t j = 1; j <= m; ++j) {
        const double t = std::clamp(1.0 + static_cast<double>(j - 1) * rate, 1.0, n);
        if (t == std::floor(t)) {
            out.push_back(seq.ptr(static_cast<std::size_t>(t) - 1));
        } else {
            out.push_back(std::make_shared<const Frame>(interpolate_at(seq, t)));
        }
    }
    return FrameSequence(seq.id() + "@rate=" + format_real(rate), std::move(out));
}

/// Repeats the whole sequence until it has at least min_len frames, then truncates to min_len.
/// Sequences already long enough are returned unchanged.
inline FrameSequence loop_to_min_length(const FrameSequence& seq, std::size_t min_len)
{
    if (seq.size() >= min_len) {
        return seq;
    }
    std::vector<FramePtr> out;
    out.reserve(min_len);
    for (std::size_t k = 0; k < min_len; ++k) {
        out.push_back(seq.ptr(k % seq.size()));
    }
    return FrameSequence(seq.id(), std::move(out));
}

} // namespace trecs
