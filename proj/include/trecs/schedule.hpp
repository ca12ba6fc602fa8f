#pragma once

#include "trecs/format.hpp"
#include "trecs/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trecs {

enum class ScheduleKind { constant, random, sinusoidal };
enum class SinusoidMode { normalized, literal_clamped };

/// Training-time generator of resampling factors.
///
/// Kinds:
///  - constant:   always alpha_const.
///  - random:     uniform on [lo, hi], keyed by (seed, v_n) so draw k never depends on
///                draws before it.
///  - sinusoidal: v_n is used directly as a phase in radians. The normalized mode maps
///                sin onto [lo, hi]; literal_clamped evaluates lo + (hi - lo) * sin(v_n)
///                and clamps, which piles the negative half of the cycle onto lo.
struct ScheduleState {
    ScheduleKind kind = ScheduleKind::constant;
    double alpha_const = 1.0;
    double lo = 0.2;
    double hi = 3.0;
    std::uint64_t seed = 0;
    std::uint64_t v_n = 0;
    SinusoidMode sr_mode = SinusoidMode::normalized;

    friend bool operator==(const ScheduleState&, const ScheduleState&) = default;
};

inline void validate(const ScheduleState& s)
{
    if (!(s.lo > 0.0) || !(s.lo < s.hi) || !std::isfinite(s.hi)) {
        throw std::invalid_argument("schedule bounds must satisfy 0 < lo < hi");
    }
    if (s.kind == ScheduleKind::constant && (!(s.alpha_const > 0.0) || !std::isfinite(s.alpha_const))) {
        throw std::invalid_argument("constant schedule needs a positive alpha");
    }
}

inline ScheduleState constant_schedule(double alpha)
{
    ScheduleState s;
    s.kind = ScheduleKind::constant;
    s.alpha_const = alpha;
    validate(s);
    return s;
}

inline ScheduleState random_schedule(std::uint64_t seed, double lo = 0.2, double hi = 3.0)
{
    ScheduleState s;
    s.kind = ScheduleKind::random;
    s.seed = seed;
    s.lo = lo;
    s.hi = hi;
    validate(s);
    return s;
}

inline ScheduleState sinusoidal_schedule(std::uint64_t seed, SinusoidMode mode = SinusoidMode::normalized)
{
    ScheduleState s;
    s.kind = ScheduleKind::sinusoidal;
    s.seed = seed;
    s.sr_mode = mode;
    return s;
}

/// Pure draw for video number k; next_alpha(s) == draw_at(s, s.v_n).
inline double draw_at(const ScheduleState& s, std::uint64_t k)
{
    switch (s.kind) {
    case ScheduleKind::constant:
        return s.alpha_const;
    case ScheduleKind::random:
        return std::min(s.hi, s.lo + (s.hi - s.lo) * to_unit(mix_keys(s.seed, k)));
    case ScheduleKind::sinusoidal: {
        const double phase = std::sin(static_cast<double>(k));
        if (s.sr_mode == SinusoidMode::normalized) {
            return std::clamp(s.lo + (s.hi - s.lo) * (phase + 1.0) / 2.0, s.lo, s.hi);
        }
        return std::clamp(s.lo + (s.hi - s.lo) * phase, s.lo, s.hi);
    }
    }
    throw std::logic_error("unknown schedule kind");
}

inline double next_alpha(ScheduleState& s)
{
    const double a = draw_at(s, s.v_n);
    ++s.v_n;
    return a;
}

/// Counts of `draws` successive alphas over `bins` equal-width bins on [lo, hi].
/// Works on a copy; `s` is left untouched.
inline std::vector<std::size_t> alpha_histogram(const ScheduleState& s, std::size_t draws, std::size_t bins)
{
    if (draws < 1 || bins < 1) {
        throw std::invalid_argument("histogram needs at least one draw and one bin");
    }
    ScheduleState copy = s;
    std::vector<std::size_t> counts(bins, 0);
    const double width = (copy.hi - copy.lo) / static_cast<double>(bins);
    for (std::size_t d = 0; d < draws; ++d) {
        const double a = next_alpha(copy);
        auto b = static_cast<std::ptrdiff_t>(std::floor((a - copy.lo) / width));
        b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    return counts;
}

/// Parses "cvr:0.8", "rr:seed=42[,lo=..,hi=..]" or "sr:seed=42[,mode=normalized|literal]".
inline ScheduleState parse_schedule(std::string_view text)
{
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw std::invalid_argument("schedule descriptor must look like kind:params, got '" + std::string(text) + "'");
    }
    const std::string_view kind = trim(text.substr(0, colon));
    std::string_view rest = trim(text.substr(colon + 1));

    ScheduleState s;
    if (kind == "cvr") {
        const auto a = parse_real(rest);
        if (!a) {
            throw std::invalid_argument("cvr schedule needs a numeric alpha, got '" + std::string(rest) + "'");
        }
        s = constant_schedule(*a);
        return s;
    }
    if (kind == "rr") {
        s.kind = ScheduleKind::random;
    } else if (kind == "sr") {
        s.kind = ScheduleKind::sinusoidal;
    } else {
        throw std::invalid_argument("unknown schedule kind '" + std::string(kind) + "'");
    }

    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = trim(rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        if (item.empty()) {
            continue;
        }
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument("schedule parameter must be key=value, got '" + std::string(item) + "'");
        }
        const std::string_view key = trim(item.substr(0, eq));
        const std::string_view value = trim(item.substr(eq + 1));
        if (key == "seed") {
            const auto v = parse_integer<std::uint64_t>(value);
            if (!v) {
                throw std::invalid_argument("bad schedule seed '" + std::string(value) + "'");
            }
            s.seed = *v;
        } else if (key == "lo" || key == "hi") {
            const auto v = parse_real(value);
            if (!v) {
                throw std::invalid_argument("bad schedule bound '" + std::string(value) + "'");
            }
            (key == "lo" ? s.lo : s.hi) = *v;
        } else if (key == "mode" && s.kind == ScheduleKind::sinusoidal) {
            if (value == "normalized") {
                s.sr_mode = SinusoidMode::normalized;
            } else if (value == "literal" || value == "literal-clamped") {
                s.sr_mode = SinusoidMode::literal_clamped;
            } else {
                throw std::invalid_argument("unknown sinusoidal mode '" + std::string(value) + "'");
            }
        } else {
            throw std::invalid_argument("unknown schedule parameter '" + std::string(key) + "'");
        }
    }
    validate(s);
    return s;
}

/// Canonical descriptor; parse_schedule(describe(s)) reproduces s apart from v_n.
inline std::string describe(const ScheduleState& s)
{
    switch (s.kind) {
    case ScheduleKind::constant:
        return "cvr:" + format_real(s.alpha_const);
    case ScheduleKind::random:
        return "rr:seed=" + std::to_string(s.seed) + ",lo=" + format_real(s.lo) + ",hi=" + format_real(s.hi);
    case ScheduleKind::sinusoidal:
        return "sr:seed=" + std::to_string(s.seed) + ",lo=" + format_real(s.lo) + ",hi=" + format_real(s.hi) +
               ",mode=" + (s.sr_mode == SinusoidMode::normalized ? "normalized" : "literal-clamped");
    }
    return {};
}

} // namespace trecs
