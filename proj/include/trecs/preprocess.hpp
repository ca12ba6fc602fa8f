#pragma once

#include "trecs/format.hpp"
#include "trecs/frame.hpp"
#include "trecs/random.hpp"
#include "trecs/resample.hpp"
#include "trecs/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace trecs {

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Fixed-length window; short inputs are looped first. No offset means random.
struct ClipExtract {
    std::size_t clip_len = 0;
    std::optional<std::size_t> fixed_offset;
    friend bool operator==(const ClipExtract&, const ClipExtract&) = default;
};

/// Aspect-preserving bilinear resize so that min(H, W) == min_side.
struct ResizeMinSide {
    std::size_t min_side = 0;
    friend bool operator==(const ResizeMinSide&, const ResizeMinSide&) = default;
};

struct CenterCrop {
    std::size_t height = 0;
    std::size_t width = 0;
    friend bool operator==(const CenterCrop&, const CenterCrop&) = default;
};

/// One coin per sample (train mode only); all frames flip together.
struct HorizontalFlipRandom {
    double p = 0.5;
    friend bool operator==(const HorizontalFlipRandom&, const HorizontalFlipRandom&) = default;
};

struct SubtractMeanRGB {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    friend bool operator==(const SubtractMeanRGB&, const SubtractMeanRGB&) = default;
};

/// Mean frames applied cyclically: clip frame j uses block frame ((j - 1) mod size) + 1.
/// A missing block subtracts zero.
struct SubtractMeanBlock {
    std::string source;
    std::shared_ptr<const FrameSequence> block;
    std::size_t block_len = 16;

    friend bool operator==(const SubtractMeanBlock& a, const SubtractMeanBlock& b)
    {
        return a.source == b.source && a.block_len == b.block_len;
    }
};

/// Maps 8-bit intensities [0, 255] linearly onto [lo, hi].
struct RescaleRange {
    double lo = -1.0;
    double hi = 1.0;
    friend bool operator==(const RescaleRange&, const RescaleRange&) = default;
};

struct SegmentSample {
    std::size_t segments = 1;
    std::size_t frames_per_segment = 1;
    friend bool operator==(const SegmentSample&, const SegmentSample&) = default;
};

using Stage = std::variant<ClipExtract, ResizeMinSide, CenterCrop, HorizontalFlipRandom, SubtractMeanRGB,
                           SubtractMeanBlock, RescaleRange, SegmentSample>;

inline bool is_temporal(const Stage& s)
{
    return std::holds_alternative<ClipExtract>(s) || std::holds_alternative<SegmentSample>(s);
}

struct PipelineSpec {
    std::string name;
    std::vector<Stage> stages;
    std::size_t model_input_len = 1;
    std::string notes;

    friend bool operator==(const PipelineSpec&, const PipelineSpec&) = default;
};

enum class Mode { train, test };

// ---------------------------------------------------------------------------
// Spatial primitives
// ---------------------------------------------------------------------------

inline Shape resized_shape(const Shape& in, std::size_t min_side)
{
    if (min_side == 0) {
        throw std::invalid_argument("resize target must be positive");
    }
    Shape out = in;
    if (in.height <= in.width) {
        out.height = min_side;
        out.width = static_cast<std::size_t>(
            std::floor(static_cast<double>(in.width) * static_cast<double>(min_side) / static_cast<double>(in.height) + 0.5));
    } else {
        out.width = min_side;
        out.height = static_cast<std::size_t>(
            std::floor(static_cast<double>(in.height) * static_cast<double>(min_side) / static_cast<double>(in.width) + 0.5));
    }
    out.height = std::max<std::size_t>(out.height, 1);
    out.width = std::max<std::size_t>(out.width, 1);
    return out;
}

/// Bilinear resampling with half-pixel centres and edge clamping.
inline Frame resize_bilinear(const Frame& in, Shape target)
{
    if (target == in.shape()) {
        return in;
    }
    Frame out(target);
    const double sy = static_cast<double>(in.height()) / static_cast<double>(target.height);
    const double sx = static_cast<double>(in.width()) / static_cast<double>(target.width);
    const auto max_y = static_cast<double>(in.height() - 1);
    const auto max_x = static_cast<double>(in.width() - 1);
    for (std::size_t y = 0; y < target.height; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, in.height() - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < target.width; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, in.width() - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < target.channels; ++c) {
                const double top = (1.0 - wx) * in.at(y0, x0, c) + wx * in.at(y0, x1, c);
                const double bottom = (1.0 - wx) * in.at(y1, x0, c) + wx * in.at(y1, x1, c);
                out.at(y, x, c) = (1.0 - wy) * top + wy * bottom;
            }
        }
    }
    return out;
}

inline Frame center_crop(const Frame& in, std::size_t h, std::size_t w)
{
    if (h == 0 || w == 0) {
        throw std::invalid_argument("crop size must be positive");
    }
    if (in.height() < h || in.width() < w) {
        throw std::invalid_argument("frame " + std::to_string(in.height()) + "x" + std::to_string(in.width()) +
                                    " is smaller than crop " + std::to_string(h) + "x" + std::to_string(w));
    }
    const std::size_t oy = (in.height() - h) / 2;
    const std::size_t ox = (in.width() - w) / 2;
    Frame out(Shape{h, w, in.channels()});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < in.channels(); ++c) {
                out.at(y, x, c) = in.at(oy + y, ox + x, c);
            }
        }
    }
    return out;
}

inline Frame flip_horizontal(const Frame& in)
{
    Frame out(in.shape());
    for (std::size_t y = 0; y < in.height(); ++y) {
        for (std::size_t x = 0; x < in.width(); ++x) {
            for (std::size_t c = 0; c < in.channels(); ++c) {
                out.at(y, in.width() - 1 - x, c) = in.at(y, x, c);
            }
        }
    }
    return out;
}

inline Frame subtract_mean_rgb(const Frame& in, const SubtractMeanRGB& mean)
{
    if (in.channels() != 3) {
        throw std::invalid_argument("mean RGB subtraction needs 3-channel frames");
    }
    Frame out = in;
    auto v = out.values();
    for (std::size_t k = 0; k < v.size(); k += 3) {
        v[k] -= mean.r;
        v[k + 1] -= mean.g;
        v[k + 2] -= mean.b;
    }
    return out;
}

inline Frame rescale_range(const Frame& in, const RescaleRange& range)
{
    Frame out = in;
    for (double& v : out.values()) {
        v = range.lo + (range.hi - range.lo) * v / 255.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Temporal primitives
// ---------------------------------------------------------------------------

/// Evenly spaced reduction (or loop-extension) to segments * frames_per_segment frames.
/// The result is the concatenation of `segments` contiguous equal blocks.
inline FrameSequence segment_sample(const FrameSequence& seq, std::size_t segments, std::size_t frames_per_segment)
{
    if (segments < 1 || frames_per_segment < 1) {
        throw std::invalid_argument("segment sampling needs at least one segment of one frame");
    }
    const std::size_t total = segments * frames_per_segment;
    const FrameSequence looped = loop_to_min_length(seq, total);
    const std::size_t n = looped.size();
    std::vector<FramePtr> out;
    out.reserve(total);
    for (std::size_t k = 0; k < total; ++k) {
        out.push_back(looped.ptr(k * n / total));
    }
    return FrameSequence(seq.id(), std::move(out));
}

/// Even spacing leaves nothing to randomize; the seed is accepted for interface symmetry.
inline FrameSequence segment_sample(const FrameSequence& seq, std::size_t segments, std::size_t frames_per_segment,
                                    std::uint64_t /*rng_seed*/)
{
    return segment_sample(seq, segments, frames_per_segment);
}

/// Offset (0-based) that ClipExtract uses for a looped input of length n.
/// In test mode a random offset becomes 0, so every input alpha shows the action from its
/// first frame and only the playback speed changes across a sweep.
inline std::size_t clip_offset(const ClipExtract& stage, std::size_t n, Mode mode, Rng& rng)
{
    const std::size_t slack = n - stage.clip_len;
    if (stage.fixed_offset) {
        return std::min(*stage.fixed_offset, slack);
    }
    if (mode == Mode::test) {
        return 0;
    }
    return static_cast<std::size_t>(rng.below(slack + 1));
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

inline void validate(const PipelineSpec& spec)
{
    if (spec.model_input_len < 1) {
        throw std::invalid_argument("model input length must be at least 1");
    }
    std::size_t clips = 0;
    std::size_t segment_stages = 0;
    bool seen_spatial = false;
    for (const Stage& s : spec.stages) {
        if (is_temporal(s)) {
            if (seen_spatial) {
                throw std::invalid_argument("temporal stages must precede spatial stages");
            }
        } else {
            seen_spatial = true;
        }
        if (const auto* c = std::get_if<ClipExtract>(&s)) {
            ++clips;
            if (c->clip_len < 1) {
                throw std::invalid_argument("clip length must be at least 1");
            }
        }
        if (const auto* seg = std::get_if<SegmentSample>(&s)) {
            ++segment_stages;
            if (seg->segments < 1 || seg->frames_per_segment < 1) {
                throw std::invalid_argument("segment sampling needs at least one segment of one frame");
            }
            if (spec.model_input_len % seg->segments != 0) {
                throw std::invalid_argument("model input length must be a multiple of the segment count");
            }
        }
    }
    if (clips > 1 || segment_stages > 1) {
        throw std::invalid_argument("a pipeline holds at most one ClipExtract and one SegmentSample");
    }
}

/// Per-sample random stream: keyed by the sequence id, so data order never changes augmentation.
inline Rng sample_rng(std::uint64_t rng_seed, const std::string& sequence_id)
{
    return Rng(mix_keys(rng_seed, hash_string(sequence_id)));
}

/// Runs the full preprocessing chain:
///   test mode: input resampling by input_alpha (index based), otherwise bypassed;
///   the stage list (temporal stages, then spatial stages);
///   a final index resample by a scheduled alpha to model_input_len frames.
/// In train mode the final alpha is next_alpha(schedule). In test mode it is 1.0, or the
/// constant of a constant schedule; the schedule is not advanced.
///
/// Spatial stages act frame by frame, so they are evaluated only on the frames the final
/// plan selects. Results equal running every stage over every frame.
inline FrameSequence run_pipeline(const FrameSequence& raw, const PipelineSpec& spec, Mode mode, double input_alpha,
                                  ScheduleState& schedule, std::uint64_t rng_seed)
{
    validate(spec);
    detail::require_alpha(input_alpha);
    Rng rng = sample_rng(rng_seed, raw.id());

    FrameSequence seq = mode == Mode::test ? resample_by_rate_indexed(raw, input_alpha) : raw;

    std::size_t segments = 1;
    std::size_t k = 0;
    for (; k < spec.stages.size() && is_temporal(spec.stages[k]); ++k) {
        if (const auto* clip = std::get_if<ClipExtract>(&spec.stages[k])) {
            const FrameSequence looped = loop_to_min_length(seq, clip->clip_len);
            const std::size_t offset = clip_offset(*clip, looped.size(), mode, rng);
            std::vector<FramePtr> frames(looped.frames().begin() + static_cast<std::ptrdiff_t>(offset),
                                         looped.frames().begin() + static_cast<std::ptrdiff_t>(offset + clip->clip_len));
            seq = FrameSequence(seq.id(), std::move(frames));
        } else if (const auto* seg = std::get_if<SegmentSample>(&spec.stages[k])) {
            seq = segment_sample(seq, seg->segments, seg->frames_per_segment);
            segments = seg->segments;
        }
    }

    bool flip = false;
    for (std::size_t s = k; s < spec.stages.size(); ++s) {
        if (const auto* f = std::get_if<HorizontalFlipRandom>(&spec.stages[s])) {
            if (mode == Mode::train) {
                flip = rng.coin(f->p) || flip;
            }
        }
    }

    double alpha = 1.0;
    if (mode == Mode::train) {
        alpha = next_alpha(schedule);
    } else if (schedule.kind == ScheduleKind::constant) {
        alpha = schedule.alpha_const;
    }

    // Final selection, per segment when segment sampling is active.
    std::vector<std::size_t> positions;
    positions.reserve(spec.model_input_len);
    const std::size_t block = seq.size() / segments;
    const std::size_t per_block = spec.model_input_len / segments;
    for (std::size_t b = 0; b < segments; ++b) {
        const IndexPlan plan = compute_index_plan(block, per_block, alpha);
        for (const std::size_t idx : plan.indices) {
            positions.push_back(b * block + idx);
        }
    }

    std::map<std::size_t, FramePtr> done;
    std::vector<FramePtr> out;
    out.reserve(positions.size());
    for (const std::size_t pos : positions) {
        auto it = done.find(pos);
        if (it == done.end()) {
            FramePtr frame = seq.ptr(pos - 1);
            for (std::size_t s = k; s < spec.stages.size(); ++s) {
                const Stage& stage = spec.stages[s];
                if (const auto* r = std::get_if<ResizeMinSide>(&stage)) {
                    frame = std::make_shared<const Frame>(resize_bilinear(*frame, resized_shape(frame->shape(), r->min_side)));
                } else if (const auto* c = std::get_if<CenterCrop>(&stage)) {
                    frame = std::make_shared<const Frame>(center_crop(*frame, c->height, c->width));
                } else if (std::holds_alternative<HorizontalFlipRandom>(stage)) {
                    if (flip) {
                        frame = std::make_shared<const Frame>(flip_horizontal(*frame));
                    }
                } else if (const auto* m = std::get_if<SubtractMeanRGB>(&stage)) {
                    frame = std::make_shared<const Frame>(subtract_mean_rgb(*frame, *m));
                } else if (const auto* mb = std::get_if<SubtractMeanBlock>(&stage)) {
                    if (mb->block) {
                        const Frame& mean = (*mb->block)[(pos - 1) % mb->block->size()];
                        if (mean.shape() != frame->shape()) {
                            throw std::invalid_argument("mean block shape does not match the frame shape");
                        }
                        Frame f = *frame;
                        auto v = f.values();
                        const auto mv = mean.values();
                        for (std::size_t i = 0; i < v.size(); ++i) {
                            v[i] -= mv[i];
                        }
                        frame = std::make_shared<const Frame>(std::move(f));
                    }
                } else if (const auto* rr = std::get_if<RescaleRange>(&stage)) {
                    frame = std::make_shared<const Frame>(rescale_range(*frame, *rr));
                }
            }
            it = done.emplace(pos, std::move(frame)).first;
        }
        out.push_back(it->second);
    }
    return FrameSequence(raw.id(), std::move(out));
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline PipelineSpec preset(const std::string& model_name)
{
    if (model_name == "c3d") {
        return {"c3d",
                {ClipExtract{50, {}}, ResizeMinSide{112}, CenterCrop{112, 112}, SubtractMeanBlock{"", nullptr, 16}},
                16,
                "16-frame clips; mean block loaded from file, zero when absent"};
    }
    if (model_name == "i3d") {
        return {"i3d", {ClipExtract{250, {}}, ResizeMinSide{256}, CenterCrop{224, 224}, RescaleRange{-1.0, 1.0}}, 64, ""};
    }
    if (model_name == "tsn") {
        return {"tsn",
                {SegmentSample{3, 60}, ResizeMinSide{256}, CenterCrop{224, 224}, HorizontalFlipRandom{0.5},
                 SubtractMeanRGB{123.0, 117.0, 104.0}},
                3,
                "one snippet frame per segment"};
    }
    if (model_name == "resnet50_lstm") {
        return {"resnet50_lstm",
                {ClipExtract{250, {}}, ResizeMinSide{256}, CenterCrop{224, 224}, SubtractMeanRGB{123.68, 116.78, 103.94}},
                250,
                ""};
    }
    if (model_name == "toy") {
        return {"toy", {ClipExtract{32, {}}}, 16, "synthetic 1x32x1 frames"};
    }
    throw std::invalid_argument("unknown preset '" + model_name + "'");
}

inline const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names{"c3d", "i3d", "tsn", "resnet50_lstm", "toy"};
    return names;
}

// ---------------------------------------------------------------------------
// Config text: "key = value" lines plus ordered "stage = kind k=v ..." lines.
// ---------------------------------------------------------------------------

inline std::string stage_to_text(const Stage& stage)
{
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ClipExtract>) {
                return "clip_extract clip_len=" + std::to_string(s.clip_len) +
                       " offset=" + (s.fixed_offset ? std::to_string(*s.fixed_offset) : std::string("random"));
            } else if constexpr (std::is_same_v<T, ResizeMinSide>) {
                return "resize_min_side min_side=" + std::to_string(s.min_side);
            } else if constexpr (std::is_same_v<T, CenterCrop>) {
                return "center_crop h=" + std::to_string(s.height) + " w=" + std::to_string(s.width);
            } else if constexpr (std::is_same_v<T, HorizontalFlipRandom>) {
                return "horizontal_flip_random p=" + format_real(s.p);
            } else if constexpr (std::is_same_v<T, SubtractMeanRGB>) {
                return "subtract_mean_rgb r=" + format_real(s.r) + " g=" + format_real(s.g) + " b=" + format_real(s.b);
            } else if constexpr (std::is_same_v<T, SubtractMeanBlock>) {
                return "subtract_mean_block frames=" + std::to_string(s.block_len) +
                       (s.source.empty() ? std::string() : " path=" + s.source);
            } else if constexpr (std::is_same_v<T, RescaleRange>) {
                return "rescale_range lo=" + format_real(s.lo) + " hi=" + format_real(s.hi);
            } else {
                return "segment_sample segments=" + std::to_string(s.segments) +
                       " frames_per_segment=" + std::to_string(s.frames_per_segment);
            }
        },
        stage);
}

inline void write_config(std::ostream& os, const PipelineSpec& spec)
{
    os << "name = " << spec.name << '\n';
    os << "model_input_len = " << spec.model_input_len << '\n';
    if (!spec.notes.empty()) {
        os << "notes = " << spec.notes << '\n';
    }
    for (const Stage& s : spec.stages) {
        os << "stage = " << stage_to_text(s) << '\n';
    }
}

inline std::string to_config(const PipelineSpec& spec)
{
    std::ostringstream os;
    write_config(os, spec);
    return os.str();
}

namespace detail {

inline std::map<std::string, std::string> parse_stage_args(std::istringstream& in)
{
    std::map<std::string, std::string> args;
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("stage argument must be key=value, got '" + token + "'");
        }
        args[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return args;
}

inline std::size_t arg_count(const std::map<std::string, std::string>& args, const std::string& key)
{
    const auto it = args.find(key);
    if (it == args.end()) {
        throw std::invalid_argument("stage is missing '" + key + "'");
    }
    const auto v = parse_integer<std::size_t>(it->second);
    if (!v) {
        throw std::invalid_argument("stage argument '" + key + "' must be a non-negative integer");
    }
    return *v;
}

inline double arg_real(const std::map<std::string, std::string>& args, const std::string& key)
{
    const auto it = args.find(key);
    if (it == args.end()) {
        throw std::invalid_argument("stage is missing '" + key + "'");
    }
    const auto v = parse_real(it->second);
    if (!v) {
        throw std::invalid_argument("stage argument '" + key + "' must be a number");
    }
    return *v;
}

inline Stage parse_stage(const std::string& text)
{
    std::istringstream in(text);
    std::string kind;
    in >> kind;
    const auto args = parse_stage_args(in);
    if (kind == "clip_extract") {
        ClipExtract s{arg_count(args, "clip_len"), {}};
        const auto it = args.find("offset");
        if (it != args.end() && it->second != "random") {
            s.fixed_offset = arg_count(args, "offset");
        }
        return s;
    }
    if (kind == "resize_min_side") {
        return ResizeMinSide{arg_count(args, "min_side")};
    }
    if (kind == "center_crop") {
        return CenterCrop{arg_count(args, "h"), arg_count(args, "w")};
    }
    if (kind == "horizontal_flip_random") {
        return HorizontalFlipRandom{args.count("p") ? arg_real(args, "p") : 0.5};
    }
    if (kind == "subtract_mean_rgb") {
        return SubtractMeanRGB{arg_real(args, "r"), arg_real(args, "g"), arg_real(args, "b")};
    }
    if (kind == "subtract_mean_block") {
        SubtractMeanBlock s;
        s.block_len = args.count("frames") ? arg_count(args, "frames") : 16;
        if (const auto it = args.find("path"); it != args.end()) {
            s.source = it->second;
        }
        return s;
    }
    if (kind == "rescale_range") {
        return RescaleRange{arg_real(args, "lo"), arg_real(args, "hi")};
    }
    if (kind == "segment_sample") {
        return SegmentSample{arg_count(args, "segments"), arg_count(args, "frames_per_segment")};
    }
    throw std::invalid_argument("unknown stage kind '" + kind + "'");
}

} // namespace detail

inline PipelineSpec parse_config(std::istream& is)
{
    PipelineSpec spec;
    spec.model_input_len = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') {
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + " has no '='");
        }
        const std::string key(trim(view.substr(0, eq)));
        const std::string value(trim(view.substr(eq + 1)));
        if (key == "name") {
            spec.name = value;
        } else if (key == "model_input_len") {
            const auto v = parse_integer<std::size_t>(value);
            if (!v) {
                throw std::invalid_argument("model_input_len must be an integer");
            }
            spec.model_input_len = *v;
        } else if (key == "notes") {
            spec.notes = value;
        } else if (key == "stage") {
            spec.stages.push_back(detail::parse_stage(value));
        } else {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
    }
    validate(spec);
    return spec;
}

inline PipelineSpec parse_config(const std::string& text)
{
    std::istringstream is(text);
    return parse_config(is);
}

} // namespace trecs
