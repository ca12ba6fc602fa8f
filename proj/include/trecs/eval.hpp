#pragma once

// Input-alpha sweeps and the statistics derived from them.

#include "trecs/dataset.hpp"
#include "trecs/format.hpp"
#include "trecs/frame_io.hpp"
#include "trecs/preprocess.hpp"
#include "trecs/schedule.hpp"
#include "trecs/toy_model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trecs {

inline constexpr std::size_t sweep_size = 15;

/// {0.2, 0.4, ..., 3.0}, each the double nearest to k / 5.
inline std::vector<double> sweep_alphas()
{
    std::vector<double> a;
    for (int k = 1; k <= static_cast<int>(sweep_size); ++k) {
        a.push_back(k / 5.0);
    }
    return a;
}

struct ClassBinStats {
    /// Percent accuracy per bin B1..B4; empty bins are absent.
    std::array<std::optional<double>, 4> bin_acc;
    double ma = 0.0;
    double md = 0.0;

    friend bool operator==(const ClassBinStats&, const ClassBinStats&) = default;
};

enum class TemporalType { TypeI, TypeII };

inline const char* to_string(TemporalType t) { return t == TemporalType::TypeI ? "TypeI" : "TypeII"; }

struct AlphaSweepReport {
    std::vector<double> alphas;
    std::vector<double> accuracy; // percent, aligned with alphas
    double acc_uniform = 0.0;
    double std = 0.0;
    std::map<std::string, ClassBinStats> per_class;
    std::string model_tag;
    std::string dataset_tag;
    std::string checkpoint_tag;

    double accuracy_at(double alpha) const
    {
        for (std::size_t k = 0; k < alphas.size(); ++k) {
            if (alphas[k] == alpha) {
                return accuracy[k];
            }
        }
        throw std::out_of_range("alpha " + format_real(alpha) + " is not on the sweep grid");
    }

    friend bool operator==(const AlphaSweepReport&, const AlphaSweepReport&) = default;
};

/// One line of the per-sample prediction log.
struct SampleRecord {
    std::string sample_id;
    double alpha = 1.0;
    std::string true_label;
    std::string pred_label;
    bool correct = false;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct SweepOutcome {
    AlphaSweepReport report;
    std::vector<SampleRecord> log;
};

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Population standard deviation of the fifteen sweep accuracies.
inline double stability(std::span<const double> accuracies)
{
    if (accuracies.size() != sweep_size) {
        throw std::invalid_argument("stability needs exactly 15 accuracies, got " + std::to_string(accuracies.size()));
    }
    // Offsets from the first value keep a constant sweep at exactly zero.
    const double ref = accuracies.front();
    double mean = 0.0;
    for (const double a : accuracies) {
        mean += a - ref;
    }
    mean /= static_cast<double>(accuracies.size());
    double ss = 0.0;
    for (const double a : accuracies) {
        const double d = a - ref - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(accuracies.size()));
}

struct BinObservation {
    std::string class_name;
    double rate = 1.0;
    bool correct = false;
};

/// Fills ma / md from the present bins.
inline void finish_bin_stats(ClassBinStats& s)
{
    double sum = 0.0;
    std::size_t present = 0;
    double lo = 0.0;
    double hi = 0.0;
    for (const auto& b : s.bin_acc) {
        if (!b) {
            continue;
        }
        if (present == 0) {
            lo = hi = *b;
        }
        lo = std::min(lo, *b);
        hi = std::max(hi, *b);
        sum += *b;
        ++present;
    }
    s.ma = present ? sum / static_cast<double>(present) : 0.0;
    s.md = present ? hi - lo : 0.0;
}

/// Per-class accuracy in each rate bin, weighting by sample count inside a bin.
inline std::map<std::string, ClassBinStats> class_bin_stats(std::span<const BinObservation> results)
{
    std::map<std::string, std::array<std::pair<std::size_t, std::size_t>, 4>> tally;
    for (const auto& r : results) {
        auto& bins = tally[r.class_name];
        auto& [correct, total] = bins[static_cast<std::size_t>(bin_of_rate(r.rate))];
        correct += r.correct ? 1 : 0;
        ++total;
    }
    std::map<std::string, ClassBinStats> out;
    for (const auto& [name, bins] : tally) {
        ClassBinStats s;
        for (std::size_t b = 0; b < 4; ++b) {
            if (bins[b].second > 0) {
                s.bin_acc[b] = 100.0 * static_cast<double>(bins[b].first) / static_cast<double>(bins[b].second);
            }
        }
        finish_bin_stats(s);
        out.emplace(name, s);
    }
    return out;
}

/// TypeI when the sweep's accuracy range exceeds the threshold (percentage points).
inline TemporalType classify_temporal_type(const AlphaSweepReport& report, double range_threshold = 10.0)
{
    if (report.accuracy.empty()) {
        return TemporalType::TypeII;
    }
    const auto [lo, hi] = std::minmax_element(report.accuracy.begin(), report.accuracy.end());
    return *hi - *lo > range_threshold ? TemporalType::TypeI : TemporalType::TypeII;
}

inline double accuracy_range(const AlphaSweepReport& report)
{
    const auto [lo, hi] = std::minmax_element(report.accuracy.begin(), report.accuracy.end());
    return *hi - *lo;
}

/// Builds every aggregate of a report from its per-sample log.
inline AlphaSweepReport aggregate_log(std::span<const SampleRecord> log, const std::vector<double>& alphas)
{
    AlphaSweepReport r;
    r.alphas = alphas;
    r.accuracy.assign(alphas.size(), 0.0);
    std::vector<std::size_t> correct(alphas.size(), 0);
    std::vector<std::size_t> total(alphas.size(), 0);
    std::vector<BinObservation> obs;
    obs.reserve(log.size());
    for (const auto& rec : log) {
        const auto it = std::find(alphas.begin(), alphas.end(), rec.alpha);
        if (it == alphas.end()) {
            throw std::invalid_argument("log alpha " + format_real(rec.alpha) + " is not on the sweep grid");
        }
        const auto k = static_cast<std::size_t>(it - alphas.begin());
        correct[k] += rec.correct ? 1 : 0;
        ++total[k];
        obs.push_back(BinObservation{rec.true_label, rec.alpha, rec.correct});
    }
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        if (total[k] > 0) {
            r.accuracy[k] = 100.0 * static_cast<double>(correct[k]) / static_cast<double>(total[k]);
        }
    }
    r.acc_uniform = r.accuracy_at(1.0);
    r.std = stability(r.accuracy);
    r.per_class = class_bin_stats(obs);
    return r;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

template<typename C>
concept SequenceClassifier = requires(const C& c, const FrameSequence& s) {
    { c(s) } -> std::convertible_to<std::size_t>;
};

template<typename C>
concept LabelNamer = requires(const C& c, std::size_t k) {
    { c(k) } -> std::convertible_to<std::string>;
};

struct SweepOptions {
    std::uint64_t rng_seed = 0;
    std::string model_tag;
    std::string dataset_tag;
    std::string checkpoint_tag;
    std::vector<std::string> class_names;

    std::string name_of(std::size_t label) const
    {
        return label < class_names.size() ? class_names[label] : std::to_string(label);
    }
};

/// Evaluates every test sample at every sweep alpha (test mode) and aggregates.
template<SequenceClassifier Classifier>
SweepOutcome input_alpha_test(const Classifier& classifier, const std::vector<LabeledSequence>& test,
                              const PipelineSpec& pipeline, const ScheduleState& schedule_for_test,
                              const SweepOptions& options = {})
{
    if (test.empty()) {
        throw std::invalid_argument("input-alpha test needs a non-empty test split");
    }
    SweepOutcome out;
    const auto alphas = sweep_alphas();
    out.log.reserve(alphas.size() * test.size());
    for (const double alpha : alphas) {
        for (const auto& item : test) {
            ScheduleState schedule = schedule_for_test;
            const FrameSequence x = run_pipeline(item.seq, pipeline, Mode::test, alpha, schedule, options.rng_seed);
            const std::size_t pred = classifier(x);
            out.log.push_back(SampleRecord{item.seq.id(), alpha, options.name_of(item.label), options.name_of(pred),
                                           pred == item.label});
        }
    }
    out.report = aggregate_log(out.log, alphas);
    out.report.model_tag = options.model_tag;
    out.report.dataset_tag = options.dataset_tag;
    out.report.checkpoint_tag = options.checkpoint_tag;
    return out;
}

/// Adapts a ToyClassifier to the SequenceClassifier interface.
struct ToyPredictor {
    const ToyClassifier* model;
    std::size_t operator()(const FrameSequence& s) const { return predict(*model, s).label; }
};

struct Checkpoint {
    std::string tag;
    ToyClassifier model;
};

struct CheckpointResult {
    std::string tag;
    std::optional<SweepOutcome> outcome;
    std::string error;
};

/// One sweep per checkpoint, in order; a failing checkpoint records its error and the
/// sweep moves on.
inline std::vector<CheckpointResult> checkpoint_sweep(const std::vector<Checkpoint>& checkpoints,
                                                      const std::vector<LabeledSequence>& test,
                                                      const PipelineSpec& pipeline, SweepOptions options = {})
{
    if (checkpoints.empty()) {
        throw std::invalid_argument("checkpoint sweep needs at least one checkpoint");
    }
    std::vector<CheckpointResult> results;
    const ScheduleState unit = constant_schedule(1.0);
    for (const auto& cp : checkpoints) {
        CheckpointResult r{cp.tag, std::nullopt, {}};
        try {
            options.checkpoint_tag = cp.tag;
            r.outcome = input_alpha_test(ToyPredictor{&cp.model}, test, pipeline, unit, options);
        } catch (const std::exception& e) {
            r.error = e.what();
        }
        results.push_back(std::move(r));
    }
    return results;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

inline void write_csv(std::ostream& os, const AlphaSweepReport& r, double range_threshold = 10.0)
{
    os << "alpha,accuracy\n";
    for (std::size_t k = 0; k < r.alphas.size(); ++k) {
        os << format_real(r.alphas[k]) << ',' << format_real(r.accuracy[k]) << '\n';
    }
    os << '\n' << "acc_uniform,std,type\n";
    os << format_real(r.acc_uniform) << ',' << format_real(r.std) << ','
       << to_string(classify_temporal_type(r, range_threshold)) << '\n';
}

inline nlohmann::json to_json(const AlphaSweepReport& r)
{
    nlohmann::json j;
    j["alphas"] = r.alphas;
    j["accuracy"] = r.accuracy;
    j["acc_uniform"] = r.acc_uniform;
    j["std"] = r.std;
    j["model_tag"] = r.model_tag;
    j["dataset_tag"] = r.dataset_tag;
    j["checkpoint_tag"] = r.checkpoint_tag;
    j["type"] = to_string(classify_temporal_type(r));
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [name, s] : r.per_class) {
        nlohmann::json bins = nlohmann::json::object();
        for (std::size_t b = 0; b < 4; ++b) {
            bins[to_string(all_bins[b])] = s.bin_acc[b] ? nlohmann::json(*s.bin_acc[b]) : nlohmann::json(nullptr);
        }
        classes[name] = {{"bin_acc", bins}, {"ma", s.ma}, {"md", s.md}};
    }
    j["per_class"] = classes;
    return j;
}

inline AlphaSweepReport report_from_json(const nlohmann::json& j)
{
    AlphaSweepReport r;
    r.alphas = j.at("alphas").get<std::vector<double>>();
    r.accuracy = j.at("accuracy").get<std::vector<double>>();
    r.acc_uniform = j.at("acc_uniform").get<double>();
    r.std = j.at("std").get<double>();
    r.model_tag = j.value("model_tag", "");
    r.dataset_tag = j.value("dataset_tag", "");
    r.checkpoint_tag = j.value("checkpoint_tag", "");
    for (const auto& [name, c] : j.at("per_class").items()) {
        ClassBinStats s;
        for (std::size_t b = 0; b < 4; ++b) {
            const auto& v = c.at("bin_acc").at(to_string(all_bins[b]));
            if (!v.is_null()) {
                s.bin_acc[b] = v.get<double>();
            }
        }
        s.ma = c.at("ma").get<double>();
        s.md = c.at("md").get<double>();
        r.per_class.emplace(name, s);
    }
    return r;
}

/// "brush_hair  M.A. 67.8  M.D. 6.67"-style rows, one per class.
inline std::string format_class_row(const std::string& name, const ClassBinStats& s)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s  M.A. %.1f  M.D. %.2f", name.c_str(), s.ma, s.md);
    return buf;
}

inline void write_log(std::ostream& os, std::span<const SampleRecord> log)
{
    for (const auto& r : log) {
        os << r.sample_id << '\t' << format_real(r.alpha) << '\t' << r.true_label << '\t' << r.pred_label << '\t'
           << (r.correct ? 1 : 0) << '\n';
    }
}

inline std::vector<SampleRecord> read_log(std::istream& is)
{
    std::vector<SampleRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) {
            f.push_back(field);
        }
        if (f.size() != 5) {
            throw std::invalid_argument("per-sample log line needs 5 fields: " + line);
        }
        const auto alpha = parse_real(f[1]);
        if (!alpha || (f[4] != "0" && f[4] != "1")) {
            throw std::invalid_argument("malformed per-sample log line: " + line);
        }
        out.push_back(SampleRecord{f[0], *alpha, f[2], f[3], f[4] == "1"});
    }
    return out;
}

namespace detail {

inline std::string xml_escape(const std::string& text)
{
    std::string out;
    for (const char c : text) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

} // namespace detail

/// Accuracy (0-100) against alpha (0.2-3.0), one polyline and legend entry per report.
inline void write_svg(std::ostream& os, std::span<const AlphaSweepReport> reports)
{
    if (reports.empty()) {
        throw std::invalid_argument("plot needs at least one report");
    }
    constexpr double width = 640.0;
    constexpr double height = 400.0;
    constexpr double left = 60.0;
    constexpr double right = 160.0;
    constexpr double top = 20.0;
    constexpr double bottom = 50.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    auto px = [&](double alpha) { return left + (alpha - 0.2) / 2.8 * plot_w; };
    auto py = [&](double acc) { return top + (100.0 - acc) / 100.0 * plot_h; };
    static constexpr std::array<const char*, 8> palette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 100; k += 20) {
        os << "<text x=\"" << left - 8 << "\" y=\"" << py(k) + 4 << "\" text-anchor=\"end\">" << k << "</text>\n";
    }
    for (const double a : {0.2, 1.0, 2.0, 3.0}) {
        os << "<text x=\"" << px(a) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">" << format_real(a)
           << "</text>\n";
    }
    os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10
       << "\" text-anchor=\"middle\">input alpha</text>\n";
    os << "<text x=\"15\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 15 " << top + plot_h / 2
       << ")\" text-anchor=\"middle\">accuracy (%)</text>\n";
    for (std::size_t r = 0; r < reports.size(); ++r) {
        const auto* color = palette[r % palette.size()];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < reports[r].alphas.size(); ++k) {
            os << (k ? " " : "") << px(reports[r].alphas[k]) << ',' << py(reports[r].accuracy[k]);
        }
        os << "\"/>\n";
        const double ly = top + 10.0 + 18.0 * static_cast<double>(r);
        const std::string tag = reports[r].model_tag.empty() ? "report " + std::to_string(r + 1) : reports[r].model_tag;
        os << "<g class=\"legend\"><line x1=\"" << left + plot_w + 10 << "\" y1=\"" << ly << "\" x2=\""
           << left + plot_w + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>"
           << "<text x=\"" << left + plot_w + 35 << "\" y=\"" << ly + 4 << "\">" << detail::xml_escape(tag) << "</text></g>\n";
    }
    os << "</svg>\n";
}

namespace detail {

template<typename Fn>
void write_text_file(const std::filesystem::path& path, Fn&& body)
{
    std::ostringstream os;
    body(os);
    const auto text = os.str();
    write_file(path, text.data(), text.size());
}

} // namespace detail

enum class ReportFormat { csv, json };

/// Writes the report plus its per-sample log ("<stem>.log.tsv") next to it.
inline void emit_report(const std::filesystem::path& file, const SweepOutcome& outcome, ReportFormat format)
{
    detail::write_text_file(file, [&](std::ostream& os) {
        if (format == ReportFormat::csv) {
            write_csv(os, outcome.report);
        } else {
            os << to_json(outcome.report).dump(2) << '\n';
        }
    });
    auto log_file = file;
    log_file.replace_extension(".log.tsv");
    detail::write_text_file(log_file, [&](std::ostream& os) { write_log(os, outcome.log); });
}

inline void emit_plot(const std::filesystem::path& file, std::span<const AlphaSweepReport> reports)
{
    detail::write_text_file(file, [&](std::ostream& os) { write_svg(os, reports); });
}

} // namespace trecs
