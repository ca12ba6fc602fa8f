#pragma once

// Desk-scale verification rig: synthetic rate-varying "actions" and a linear softmax
// classifier trained by mini-batch SGD on flattened pipeline outputs.

#include "trecs/frame.hpp"
#include "trecs/frame_io.hpp"
#include "trecs/preprocess.hpp"
#include "trecs/random.hpp"
#include "trecs/schedule.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trecs {

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    std::size_t num_classes = 6;
    std::size_t frames_per_sample = 40;
    std::size_t frame_dim = 32;
    std::size_t samples_per_class = 200;
    double rate_lo = 0.7;
    double rate_hi = 1.3;
    double noise_sigma = 0.05;
    double max_phase = 0.1;
    std::uint64_t seed = 0;
};

struct LabeledSequence {
    FrameSequence seq;
    std::size_t label = 0;
    double natural_rate = 1.0;
    double phase = 0.0;
};

struct SyntheticDataset {
    std::vector<LabeledSequence> train;
    std::vector<LabeledSequence> test;
    std::size_t num_classes = 0;
};

inline void validate(const SyntheticSpec& s)
{
    if (s.num_classes < 1 || s.frames_per_sample < 1 || s.frame_dim < 1 || s.samples_per_class < 1) {
        throw std::invalid_argument("synthetic counts must all be at least 1");
    }
    if (!(s.noise_sigma >= 0.0)) {
        throw std::invalid_argument("noise sigma must be non-negative");
    }
    if (!(s.rate_lo > 0.0) || !(s.rate_lo <= s.rate_hi) || !std::isfinite(s.rate_hi)) {
        throw std::invalid_argument("natural rate range must satisfy 0 < lo <= hi");
    }
    if (!(s.max_phase >= 0.0)) {
        throw std::invalid_argument("maximum phase must be non-negative");
    }
}

/// Position of the bump for class c at action time tau in [0, 1].
/// Each class starts at its own point, evenly spread over the frame; the first half of the
/// classes move right, the rest left, over half the frame. Kinds cycle linear, quadratic,
/// sinusoidal, and the sinusoid's frequency grows with c / 3. Classes therefore differ in
/// where and how the bump moves, and playback speed is the main nuisance.
inline double class_trajectory(std::size_t c, std::size_t num_classes, double tau, std::size_t frame_dim)
{
    tau = std::clamp(tau, 0.0, 1.0);
    const double lo = 2.0;
    const double hi = std::max(lo, static_cast<double>(frame_dim) - 3.0);
    const double spread = num_classes > 1 ? static_cast<double>(c) / static_cast<double>(num_classes - 1) : 0.0;
    const double start = lo + (hi - lo) * spread;
    const double dir = 2 * c < num_classes ? 1.0 : -1.0;
    const double span = (hi - lo) / 2.0;
    double g = 0.0;
    switch (c % 3) {
    case 0:
        g = tau;
        break;
    case 1:
        g = tau * tau;
        break;
    default:
        g = std::sin(std::numbers::pi / 2.0 * static_cast<double>(c / 3 + 1) * tau);
        break;
    }
    return std::clamp(start + dir * span * g, lo, hi);
}

/// One sample: frame k shows a width-2 Gaussian bump at class_trajectory(phase + rate * k / (F - 1)).
inline FrameSequence render_sample(const SyntheticSpec& spec, std::size_t c, double rate, double phase, Rng* noise,
                                   std::string id)
{
    std::vector<Frame> frames;
    frames.reserve(spec.frames_per_sample);
    const double denom = spec.frames_per_sample > 1 ? static_cast<double>(spec.frames_per_sample - 1) : 1.0;
    constexpr double width = 2.0;
    for (std::size_t k = 0; k < spec.frames_per_sample; ++k) {
        const double tau = phase + rate * static_cast<double>(k) / denom;
        const double p = class_trajectory(c, spec.num_classes, tau, spec.frame_dim);
        Frame f(Shape{1, spec.frame_dim, 1});
        auto v = f.values();
        for (std::size_t x = 0; x < spec.frame_dim; ++x) {
            const double d = static_cast<double>(x) - p;
            v[x] = std::exp(-d * d / (2.0 * width * width));
            if (noise && spec.noise_sigma > 0.0) {
                v[x] += spec.noise_sigma * noise->normal();
            }
        }
        frames.push_back(std::move(f));
    }
    return FrameSequence(std::move(id), std::move(frames));
}

/// Deterministic under spec.seed; the first 80% of each class's samples form the train split.
inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec)
{
    validate(spec);
    SyntheticDataset data;
    data.num_classes = spec.num_classes;
    const std::size_t n_train = spec.samples_per_class * 4 / 5;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            Rng rng(mix_keys(mix_keys(spec.seed, c), s));
            const double rate = rng.uniform(spec.rate_lo, spec.rate_hi);
            const double phase = rng.uniform(0.0, spec.max_phase);
            std::string id = "syn_c" + std::to_string(c) + "_s" + std::to_string(s);
            LabeledSequence item{render_sample(spec, c, rate, phase, &rng, std::move(id)), c, rate, phase};
            (s < n_train ? data.train : data.test).push_back(std::move(item));
        }
    }
    return data;
}

/// Pipeline the toy model trains on: the toy preset.
inline PipelineSpec toy_pipeline() { return preset("toy"); }

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

struct ToyClassifier {
    std::size_t num_classes = 0;
    std::size_t input_len = 0;
    std::size_t frame_dim = 0;
    std::vector<double> weights; // num_classes x features, row-major
    std::vector<double> bias;
    std::string trained_config;

    ToyClassifier() = default;
    ToyClassifier(std::size_t classes, std::size_t len, std::size_t dim)
        : num_classes(classes), input_len(len), frame_dim(dim), weights(classes * len * dim, 0.0), bias(classes, 0.0)
    {
    }

    std::size_t features() const { return input_len * frame_dim; }

    friend bool operator==(const ToyClassifier&, const ToyClassifier&) = default;
};

struct Prediction {
    std::size_t label = 0;
    std::vector<double> scores;
};

namespace detail {

inline void softmax_logits(const ToyClassifier& m, std::span<const double> x, std::vector<double>& out)
{
    const std::size_t d = m.features();
    out.resize(m.num_classes);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m.num_classes; ++k) {
        double z = m.bias[k];
        const double* w = m.weights.data() + k * d;
        for (std::size_t j = 0; j < d; ++j) {
            z += w[j] * x[j];
        }
        out[k] = z;
        top = std::max(top, z);
    }
    double sum = 0.0;
    for (double& z : out) {
        z = std::exp(z - top);
        sum += z;
    }
    for (double& z : out) {
        z /= sum;
    }
}

} // namespace detail

inline Prediction predict(const ToyClassifier& model, std::span<const double> input)
{
    if (input.size() != model.features()) {
        throw std::invalid_argument("classifier expects " + std::to_string(model.features()) + " inputs, got " +
                                    std::to_string(input.size()));
    }
    Prediction p;
    detail::softmax_logits(model, input, p.scores);
    for (std::size_t k = 1; k < p.scores.size(); ++k) {
        if (p.scores[k] > p.scores[p.label]) {
            p.label = k;
        }
    }
    return p;
}

inline Prediction predict(const ToyClassifier& model, const FrameSequence& seq)
{
    const auto x = seq.flatten();
    return predict(model, x);
}

struct Example {
    std::vector<double> x;
    std::size_t y = 0;
};

/// Mean cross-entropy over a batch.
inline double batch_loss(const ToyClassifier& m, std::span<const Example> batch)
{
    std::vector<double> p;
    double loss = 0.0;
    for (const auto& ex : batch) {
        detail::softmax_logits(m, ex.x, p);
        loss -= std::log(std::max(p[ex.y], 1e-300));
    }
    return loss / static_cast<double>(batch.size());
}

/// Analytic gradient of batch_loss: (p - onehot) x^T averaged over the batch.
inline void batch_gradient(const ToyClassifier& m, std::span<const Example> batch, std::vector<double>& grad_w,
                           std::vector<double>& grad_b)
{
    const std::size_t d = m.features();
    grad_w.assign(m.weights.size(), 0.0);
    grad_b.assign(m.num_classes, 0.0);
    std::vector<double> p;
    for (const auto& ex : batch) {
        detail::softmax_logits(m, ex.x, p);
        for (std::size_t k = 0; k < m.num_classes; ++k) {
            const double delta = p[k] - (k == ex.y ? 1.0 : 0.0);
            grad_b[k] += delta;
            double* g = grad_w.data() + k * d;
            for (std::size_t j = 0; j < d; ++j) {
                g[j] += delta * ex.x[j];
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad_w) {
        g *= inv;
    }
    for (double& g : grad_b) {
        g *= inv;
    }
}

/// Max relative error between the analytic gradient and central differences over
/// `coordinates` random weight entries. Relative error is |a - n| / max(|a|, |n|),
/// counted as absolute error when both magnitudes fall below 1e-8.
inline double gradient_check(const ToyClassifier& model, std::span<const Example> batch, std::size_t coordinates = 50,
                             double h = 1e-5, std::uint64_t seed = 0)
{
    if (batch.empty()) {
        throw std::invalid_argument("gradient check needs a non-empty batch");
    }
    std::vector<double> gw;
    std::vector<double> gb;
    batch_gradient(model, batch, gw, gb);
    ToyClassifier probe = model;
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t n = 0; n < coordinates; ++n) {
        const auto j = static_cast<std::size_t>(rng.below(probe.weights.size()));
        const double saved = probe.weights[j];
        probe.weights[j] = saved + h;
        const double up = batch_loss(probe, batch);
        probe.weights[j] = saved - h;
        const double down = batch_loss(probe, batch);
        probe.weights[j] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max(std::abs(gw[j]), std::abs(numeric));
        const double err = std::abs(gw[j] - numeric) / (scale < 1e-8 ? 1.0 : scale);
        worst = std::max(worst, err);
    }
    return worst;
}

/// Small random weights, used to probe gradients away from the zero start.
inline ToyClassifier random_classifier(std::size_t classes, std::size_t len, std::size_t dim, std::uint64_t seed,
                                       double scale = 0.01)
{
    ToyClassifier m(classes, len, dim);
    Rng rng(seed);
    for (double& w : m.weights) {
        w = scale * rng.normal();
    }
    for (double& b : m.bias) {
        b = scale * rng.normal();
    }
    return m;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainHyper {
    std::size_t epochs = 30;
    double lr = 0.05;
    std::size_t batch = 32;
    std::uint64_t seed = 0;
};

struct TrainResult {
    ToyClassifier model;
    std::vector<double> epoch_loss;
    std::vector<double> alphas;
};

/// Called after every epoch with the 1-based epoch number.
using EpochCallback = std::function<void(std::size_t, const ToyClassifier&)>;

/// Mini-batch SGD from zero weights. Every sample goes through run_pipeline in train
/// mode for every epoch, so the schedule supplies one alpha per sample visit.
inline TrainResult train_toy(const std::vector<LabeledSequence>& train, std::size_t num_classes,
                             const PipelineSpec& pipeline, ScheduleState schedule, const TrainHyper& hyper,
                             const EpochCallback& on_epoch = {})
{
    if (train.empty()) {
        throw std::invalid_argument("training split is empty");
    }
    if (hyper.batch < 1) {
        throw std::invalid_argument("batch size must be at least 1");
    }
    validate(pipeline);
    const Shape shape = train.front().seq.shape();
    if (shape.height != 1 || shape.channels != 1) {
        throw std::invalid_argument("the toy classifier expects 1 x W x 1 frames");
    }

    TrainResult result;
    result.model = ToyClassifier(num_classes, pipeline.model_input_len, shape.width);
    result.model.trained_config = describe(schedule);
    ToyClassifier& model = result.model;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(mix_keys(hyper.seed, 0x5348554646ULL));
    std::vector<double> gw;
    std::vector<double> gb;
    std::vector<Example> batch;

    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        for (std::size_t k = order.size(); k > 1; --k) {
            std::swap(order[k - 1], order[static_cast<std::size_t>(shuffle.below(k))]);
        }
        const std::uint64_t epoch_seed = mix_keys(hyper.seed, epoch);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            const std::size_t stop = std::min(order.size(), start + hyper.batch);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) {
                const LabeledSequence& item = train[order[i]];
                const std::uint64_t v_before = schedule.v_n;
                FrameSequence x = run_pipeline(item.seq, pipeline, Mode::train, 1.0, schedule, epoch_seed);
                result.alphas.push_back(draw_at(schedule, v_before));
                batch.push_back(Example{x.flatten(), item.label});
            }
            loss_sum += batch_loss(model, batch) * static_cast<double>(batch.size());
            batch_gradient(model, batch, gw, gb);
            for (std::size_t j = 0; j < gw.size(); ++j) {
                model.weights[j] -= hyper.lr * gw[j];
            }
            for (std::size_t j = 0; j < gb.size(); ++j) {
                model.bias[j] -= hyper.lr * gb[j];
            }
        }
        const double epoch_loss = loss_sum / static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss)) {
            throw NumericalError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
        }
        result.epoch_loss.push_back(epoch_loss);
        if (on_epoch) {
            on_epoch(epoch, model);
        }
    }
    return result;
}

/// Flattened pipeline outputs for a split, e.g. for gradient checks.
inline std::vector<Example> pipeline_examples(const std::vector<LabeledSequence>& items, const PipelineSpec& pipeline,
                                              Mode mode, std::uint64_t seed)
{
    std::vector<Example> out;
    out.reserve(items.size());
    ScheduleState unit = constant_schedule(1.0);
    for (const auto& item : items) {
        out.push_back(Example{run_pipeline(item.seq, pipeline, mode, 1.0, unit, seed).flatten(), item.label});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model files: "TRCM", u32 version, u64 classes, u64 input_len, u64 frame_dim, then
// weights and bias as little-endian IEEE-754 doubles. Metadata goes to "<file>.json".
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t model_format_version = 1;

inline std::filesystem::path metadata_path(const std::filesystem::path& model_file)
{
    return std::filesystem::path(model_file.string() + ".json");
}

namespace detail {

template<typename T>
void put_le(std::vector<std::uint8_t>& buf, T v)
{
    std::uint64_t bits = 0;
    if constexpr (std::is_same_v<T, double>) {
        std::memcpy(&bits, &v, sizeof v);
    } else {
        bits = static_cast<std::uint64_t>(v);
    }
    for (std::size_t k = 0; k < sizeof(T); ++k) {
        buf.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
    }
}

template<typename T>
T get_le(const std::vector<char>& buf, std::size_t& at)
{
    if (at + sizeof(T) > buf.size()) {
        throw IoError("model file is truncated");
    }
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + k])) << (8 * k);
    }
    at += sizeof(T);
    if constexpr (std::is_same_v<T, double>) {
        double v = 0.0;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    } else {
        return static_cast<T>(bits);
    }
}

} // namespace detail

inline void save_model(const std::filesystem::path& file, const ToyClassifier& m,
                       const nlohmann::json& extra_metadata = nlohmann::json::object())
{
    std::vector<std::uint8_t> buf{'T', 'R', 'C', 'M'};
    detail::put_le<std::uint32_t>(buf, model_format_version);
    detail::put_le<std::uint64_t>(buf, m.num_classes);
    detail::put_le<std::uint64_t>(buf, m.input_len);
    detail::put_le<std::uint64_t>(buf, m.frame_dim);
    for (const double w : m.weights) {
        detail::put_le(buf, w);
    }
    for (const double b : m.bias) {
        detail::put_le(buf, b);
    }
    detail::write_file(file, buf.data(), buf.size());

    nlohmann::json meta = extra_metadata;
    meta["format"] = "TRCM";
    meta["version"] = model_format_version;
    meta["num_classes"] = m.num_classes;
    meta["input_len"] = m.input_len;
    meta["frame_dim"] = m.frame_dim;
    meta["trained_config"] = m.trained_config;
    const std::string text = meta.dump(2) + "\n";
    detail::write_file(metadata_path(file), text.data(), text.size());
}

inline ToyClassifier load_model(const std::filesystem::path& file)
{
    const auto buf = detail::read_file(file);
    if (buf.size() < 4 || std::memcmp(buf.data(), "TRCM", 4) != 0) {
        throw IoError("'" + file.string() + "' is not a TRCM model file");
    }
    std::size_t at = 4;
    const auto version = detail::get_le<std::uint32_t>(buf, at);
    if (version != model_format_version) {
        throw IoError("unsupported model version " + std::to_string(version));
    }
    const auto classes = detail::get_le<std::uint64_t>(buf, at);
    const auto len = detail::get_le<std::uint64_t>(buf, at);
    const auto dim = detail::get_le<std::uint64_t>(buf, at);
    if (buf.size() != at + 8 * (classes * len * dim + classes)) {
        throw IoError("model file '" + file.string() + "' has the wrong size for its dimensions");
    }
    ToyClassifier m(classes, len, dim);
    for (double& w : m.weights) {
        w = detail::get_le<double>(buf, at);
    }
    for (double& b : m.bias) {
        b = detail::get_le<double>(buf, at);
    }
    const auto meta_file = metadata_path(file);
    if (std::filesystem::exists(meta_file)) {
        const auto text = detail::read_file(meta_file);
        const auto meta = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
        if (meta.is_discarded()) {
            throw IoError("model metadata '" + meta_file.string() + "' is not valid JSON");
        }
        m.trained_config = meta.value("trained_config", "");
    }
    return m;
}

} // namespace trecs
