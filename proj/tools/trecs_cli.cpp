// trecs: command-line front end for temporal resampling, rate datasets, schedules and
// input-alpha evaluation.
//
// Exit codes: 0 success, 2 invalid arguments, 3 I/O failure, 4 numerical failure.

#include "trecs/trecs.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid = 2;
constexpr int exit_io = 3;
constexpr int exit_numerical = 4;

/// Effective-config header: the resolved flags, so the line can be pasted back as a command.
class ConfigLine {
public:
    explicit ConfigLine(const std::string& command) : text_("# config:" + (command.empty() ? "" : " " + command)) {}

    ConfigLine& flag(const std::string& name)
    {
        text_ += " --" + name;
        return *this;
    }
    ConfigLine& opt(const std::string& name, const std::string& value)
    {
        text_ += " --" + name + " " + quoted(value);
        return *this;
    }
    template<typename T>
        requires std::is_arithmetic_v<T>
    ConfigLine& opt(const std::string& name, T value)
    {
        if constexpr (std::is_floating_point_v<T>) {
            return opt(name, trecs::format_real(value));
        } else {
            return opt(name, std::to_string(value));
        }
    }

    const std::string& str() const { return text_; }

private:
    // Single quotes for values a shell would split or expand.
    static std::string quoted(const std::string& v)
    {
        if (!v.empty() && v.find_first_of(" \t'\"$\\*?;&|<>()") == std::string::npos) {
            return v;
        }
        std::string out = "'";
        for (const char c : v) {
            out += c == '\'' ? std::string("'\\''") : std::string(1, c);
        }
        return out + "'";
    }

    std::string text_;
};

void write_text(const fs::path& file, const std::string& text)
{
    trecs::detail::write_file(file, text.data(), text.size());
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw trecs::IoError("cannot create '" + dir.string() + "': " + ec.message());
    }
}

trecs::ReportFormat parse_format(const std::string& f)
{
    if (f == "csv") {
        return trecs::ReportFormat::csv;
    }
    if (f == "json") {
        return trecs::ReportFormat::json;
    }
    throw std::invalid_argument("unknown report format '" + f + "'");
}

// --- resample ---------------------------------------------------------------

struct ResampleArgs {
    std::string in;
    double alpha = 1.0;
    std::string mode = "indexed";
    std::string out;
};

int run_resample(const ResampleArgs& a)
{
    std::cout << ConfigLine("resample").opt("in", a.in).opt("alpha", a.alpha).opt("mode", a.mode).opt("out", a.out).str()
              << std::endl;
    if (a.mode != "indexed" && a.mode != "interp") {
        throw std::invalid_argument("mode must be 'indexed' or 'interp'");
    }
    trecs::detail::require_alpha(a.alpha);
    const fs::path in(a.in);
    const std::string parent = fs::path(a.in).lexically_normal().filename().string();
    const trecs::FrameSequence seq = trecs::read_sequence(in, parent);
    const trecs::FrameSequence out = a.mode == "indexed" ? trecs::resample_by_rate_indexed(seq, a.alpha)
                                                        : trecs::resample_by_rate_interpolated(seq, a.alpha);
    const fs::path out_dir(a.out);
    fs::remove_all(out_dir);
    trecs::write_sequence(out_dir, out, trecs::detect_format(in));
    json prov{{"parent", a.in}, {"alpha", a.alpha}, {"mode", a.mode}, {"frames_in", seq.size()}, {"frames_out", out.size()}};
    write_text(out_dir / "provenance.json", prov.dump(2) + "\n");
    std::cout << "wrote " << out.size() << " frames to " << out_dir.string() << '\n';
    return exit_ok;
}

// --- gen-rate-dataset -------------------------------------------------------

struct GenArgs {
    std::string manifest;
    std::uint64_t seed = 0;
    std::string out;
    bool grid = false;
};

int run_gen(const GenArgs& a)
{
    ConfigLine cfg("gen-rate-dataset");
    cfg.opt("manifest", a.manifest).opt("seed", a.seed).opt("out", a.out);
    if (a.grid) {
        cfg.flag("grid");
    }
    std::cout << cfg.str() << std::endl;
    const auto manifest = trecs::read_manifest(a.manifest);
    trecs::RateOptions options;
    options.grid = a.grid;
    const fs::path out_dir(a.out);
    ensure_dir(out_dir);
    const auto result = trecs::generate_rate_dataset(manifest, a.seed, out_dir, options);
    const fs::path out_manifest = out_dir / (result.manifest.name + ".tsv");
    trecs::write_manifest(out_manifest, result.manifest);
    for (const auto& e : result.errors) {
        std::cerr << "error: " << e.video_id << ": " << e.message << '\n';
    }
    std::cout << "wrote " << result.manifest.entries.size() << " entries to " << out_manifest.string() << '\n';
    return result.errors.empty() ? exit_ok : exit_io;
}

// --- schedule-sample --------------------------------------------------------

struct ScheduleArgs {
    std::string schedule;
    std::size_t draws = 1000;
    std::size_t bins = 14;
    bool list = false;
};

int run_schedule(const ScheduleArgs& a)
{
    const trecs::ScheduleState s = trecs::parse_schedule(a.schedule);
    ConfigLine cfg("schedule-sample");
    cfg.opt("schedule", trecs::describe(s)).opt("draws", a.draws).opt("bins", a.bins);
    if (a.list) {
        cfg.flag("list");
    }
    std::cout << cfg.str() << '\n';
    if (a.list) {
        trecs::ScheduleState copy = s;
        std::cout << "alpha\n";
        for (std::size_t k = 0; k < a.draws; ++k) {
            std::cout << trecs::format_real(trecs::next_alpha(copy)) << '\n';
        }
        return exit_ok;
    }
    const auto counts = trecs::alpha_histogram(s, a.draws, a.bins);
    const double width = (s.hi - s.lo) / static_cast<double>(a.bins);
    std::cout << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < counts.size(); ++b) {
        const double lo = s.lo + width * static_cast<double>(b);
        const double hi = b + 1 == counts.size() ? s.hi : s.lo + width * static_cast<double>(b + 1);
        std::cout << trecs::format_real(lo) << ',' << trecs::format_real(hi) << ',' << counts[b] << '\n';
    }
    return exit_ok;
}

// --- toy --------------------------------------------------------------------

struct ToyArgs {
    bool train = false;
    bool sweep = false;
    bool checkpoint_sweep = false;
    std::string export_data;
    std::string schedule = "cvr:1.0";
    std::uint64_t seed = 0;
    trecs::SyntheticSpec spec;
    trecs::TrainHyper hyper;
    std::vector<std::string> models;
    std::string out = ".";
    std::string format = "csv";
    std::vector<std::size_t> checkpoint_epochs{2, 5, 10, 20, 30};
};

ConfigLine toy_config(const ToyArgs& a, const std::string& schedule)
{
    ConfigLine cfg("toy");
    if (a.train) {
        cfg.flag("train");
    }
    if (a.sweep) {
        cfg.flag("sweep");
    }
    if (a.checkpoint_sweep) {
        cfg.flag("checkpoint-sweep");
    }
    if (!a.export_data.empty()) {
        cfg.opt("export-data", a.export_data);
    }
    cfg.opt("schedule", schedule).opt("seed", a.seed);
    cfg.opt("classes", a.spec.num_classes).opt("frames", a.spec.frames_per_sample).opt("frame-dim", a.spec.frame_dim);
    cfg.opt("samples-per-class", a.spec.samples_per_class).opt("rate-lo", a.spec.rate_lo).opt("rate-hi", a.spec.rate_hi);
    cfg.opt("noise", a.spec.noise_sigma).opt("max-phase", a.spec.max_phase);
    cfg.opt("epochs", a.hyper.epochs).opt("lr", a.hyper.lr).opt("batch", a.hyper.batch);
    for (const auto& m : a.models) {
        cfg.opt("model", m);
    }
    if (a.checkpoint_sweep) {
        std::string epochs;
        for (const auto e : a.checkpoint_epochs) {
            epochs += (epochs.empty() ? "" : ",") + std::to_string(e);
        }
        cfg.opt("checkpoint-epochs", epochs);
    }
    cfg.opt("out", a.out).opt("format", a.format);
    return cfg;
}

fs::path report_path(const fs::path& dir, const std::string& stem, trecs::ReportFormat f)
{
    return dir / (stem + (f == trecs::ReportFormat::csv ? ".csv" : ".json"));
}

void print_summary(const trecs::AlphaSweepReport& r)
{
    std::cout << (r.model_tag.empty() ? std::string("report") : r.model_tag)
              << (r.checkpoint_tag.empty() ? "" : " [" + r.checkpoint_tag + "]")
              << ": acc_uniform=" << trecs::format_fixed(r.acc_uniform, 2) << " std=" << trecs::format_fixed(r.std, 3)
              << " range=" << trecs::format_fixed(trecs::accuracy_range(r), 2) << " type="
              << trecs::to_string(trecs::classify_temporal_type(r)) << '\n';
}

/// Writes a synthetic dataset as 8-bit TRSQ containers (value * 255) plus a manifest and a
/// pipeline config that rescales back to [0, 1].
void export_synthetic(const trecs::SyntheticDataset& data, const fs::path& dir)
{
    ensure_dir(dir);
    trecs::DatasetManifest m;
    m.name = "synthetic";
    auto add = [&](const trecs::LabeledSequence& item, trecs::Split split) {
        std::vector<trecs::Frame> frames;
        for (std::size_t k = 0; k < item.seq.size(); ++k) {
            trecs::Frame f = item.seq[k];
            for (double& v : f.values()) {
                v *= 255.0;
            }
            frames.push_back(std::move(f));
        }
        const fs::path path = dir / item.seq.id();
        fs::remove_all(path);
        trecs::write_sequence(path, trecs::FrameSequence(item.seq.id(), std::move(frames)), trecs::FrameFormat::trsq);
        m.entries.push_back({item.seq.id(), path, std::to_string(item.label), split, std::nullopt, std::nullopt});
    };
    for (const auto& item : data.train) {
        add(item, trecs::Split::train);
    }
    for (const auto& item : data.test) {
        add(item, trecs::Split::test);
    }
    trecs::write_manifest(dir / "synthetic.tsv", m);
    trecs::PipelineSpec pipeline = trecs::toy_pipeline();
    pipeline.name = "toy_u8";
    pipeline.notes = "toy preset for 8-bit exported frames";
    pipeline.stages.push_back(trecs::RescaleRange{0.0, 1.0});
    write_text(dir / "toy_u8.cfg", trecs::to_config(pipeline));
}

int run_toy(ToyArgs a)
{
    const int modes = int(a.train) + int(a.sweep) + int(a.checkpoint_sweep) + int(!a.export_data.empty());
    if (modes != 1) {
        throw std::invalid_argument("toy needs exactly one of --train, --sweep, --checkpoint-sweep, --export-data");
    }
    const trecs::ScheduleState schedule = trecs::parse_schedule(a.schedule);
    a.spec.seed = a.seed;
    a.hyper.seed = a.seed;
    const trecs::ReportFormat format = parse_format(a.format);
    if (a.train && a.models.empty()) {
        a.models.push_back((fs::path(a.out) / "model.trcm").string());
    }
    if (a.sweep && a.models.empty()) {
        throw std::invalid_argument("toy --sweep needs at least one --model");
    }
    std::cout << toy_config(a, trecs::describe(schedule)).str() << std::endl;

    const trecs::SyntheticDataset data = trecs::generate_synthetic(a.spec);
    const trecs::PipelineSpec pipeline = trecs::toy_pipeline();
    const fs::path out_dir(a.out);

    if (!a.export_data.empty()) {
        export_synthetic(data, a.export_data);
        std::cout << "exported " << data.train.size() + data.test.size() << " sequences to " << a.export_data << '\n';
        return exit_ok;
    }

    if (a.train) {
        const auto result = trecs::train_toy(data.train, data.num_classes, pipeline, schedule, a.hyper);
        const fs::path model_file(a.models.front());
        if (model_file.has_parent_path()) {
            ensure_dir(model_file.parent_path());
        }
        json meta;
        meta["epoch_loss"] = result.epoch_loss;
        meta["seed"] = a.seed;
        trecs::save_model(model_file, result.model, meta);
        std::cout << "trained " << result.model.trained_config << ": final loss "
                  << trecs::format_fixed(result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back(), 6) << ", saved "
                  << model_file.string() << '\n';
        return exit_ok;
    }

    ensure_dir(out_dir);
    std::vector<trecs::AlphaSweepReport> reports;
    trecs::SweepOptions options;
    options.rng_seed = a.seed;
    options.dataset_tag = "synthetic(seed=" + std::to_string(a.seed) + ")";

    if (a.sweep) {
        for (const auto& path : a.models) {
            const trecs::ToyClassifier model = trecs::load_model(path);
            options.model_tag = model.trained_config.empty() ? fs::path(path).stem().string() : model.trained_config;
            const auto outcome = trecs::input_alpha_test(trecs::ToyPredictor{&model}, data.test, pipeline,
                                                         trecs::constant_schedule(1.0), options);
            trecs::emit_report(report_path(out_dir, fs::path(path).stem().string(), format), outcome, format);
            print_summary(outcome.report);
            reports.push_back(outcome.report);
        }
    } else {
        std::vector<trecs::Checkpoint> checkpoints;
        auto hyper = a.hyper;
        hyper.epochs = std::max(hyper.epochs, a.checkpoint_epochs.empty() ? 0 : *std::max_element(
                                                                                    a.checkpoint_epochs.begin(),
                                                                                    a.checkpoint_epochs.end()));
        auto keep = [&](std::size_t epoch, const trecs::ToyClassifier& m) {
            if (std::find(a.checkpoint_epochs.begin(), a.checkpoint_epochs.end(), epoch) != a.checkpoint_epochs.end()) {
                checkpoints.push_back({"epoch" + std::to_string(epoch), m});
                trecs::save_model(out_dir / ("checkpoint_epoch" + std::to_string(epoch) + ".trcm"), m);
            }
        };
        if (std::find(a.checkpoint_epochs.begin(), a.checkpoint_epochs.end(), 0) != a.checkpoint_epochs.end()) {
            trecs::ToyClassifier zero(data.num_classes, pipeline.model_input_len, a.spec.frame_dim);
            zero.trained_config = trecs::describe(schedule);
            checkpoints.push_back({"epoch0", zero});
        }
        trecs::train_toy(data.train, data.num_classes, pipeline, schedule, hyper, keep);
        options.model_tag = trecs::describe(schedule);
        const auto results = trecs::checkpoint_sweep(checkpoints, data.test, pipeline, options);
        for (const auto& r : results) {
            if (!r.outcome) {
                std::cerr << "error: checkpoint " << r.tag << ": " << r.error << '\n';
                continue;
            }
            trecs::emit_report(report_path(out_dir, r.tag, format), *r.outcome, format);
            print_summary(r.outcome->report);
            auto report = r.outcome->report;
            report.model_tag = r.tag;
            reports.push_back(std::move(report));
        }
    }
    trecs::emit_plot(out_dir / "sweep.svg", reports);
    return exit_ok;
}

// --- alpha-test -------------------------------------------------------------

/// Fills SubtractMeanBlock stages that name a frame source; relative paths resolve
/// against the config file's directory.
void load_mean_blocks(trecs::PipelineSpec& pipeline, const fs::path& base)
{
    for (auto& stage : pipeline.stages) {
        auto* mb = std::get_if<trecs::SubtractMeanBlock>(&stage);
        if (!mb || mb->source.empty()) {
            continue;
        }
        fs::path src(mb->source);
        if (src.is_relative()) {
            src = base / src;
        }
        auto block = std::make_shared<const trecs::FrameSequence>(trecs::read_sequence(src, "mean_block"));
        if (block->size() != mb->block_len) {
            throw std::invalid_argument("mean block '" + src.string() + "' has " + std::to_string(block->size()) +
                                        " frames, config says " + std::to_string(mb->block_len));
        }
        mb->block = std::move(block);
    }
}

struct AlphaTestArgs {
    std::string model;
    std::string manifest;
    std::string preset;
    std::string pipeline;
    std::uint64_t seed = 0;
    std::string out = ".";
    std::string format = "csv";
    std::string schedule = "cvr:1.0";
};

int run_alpha_test(const AlphaTestArgs& a)
{
    if (a.preset.empty() == a.pipeline.empty()) {
        throw std::invalid_argument("alpha-test needs exactly one of --preset or --pipeline");
    }
    const trecs::ScheduleState schedule = trecs::parse_schedule(a.schedule);
    ConfigLine cfg("alpha-test");
    cfg.opt("model", a.model).opt("manifest", a.manifest);
    if (!a.preset.empty()) {
        cfg.opt("preset", a.preset);
    } else {
        cfg.opt("pipeline", a.pipeline);
    }
    cfg.opt("schedule", trecs::describe(schedule)).opt("seed", a.seed).opt("out", a.out).opt("format", a.format);
    std::cout << cfg.str() << std::endl;

    const trecs::ReportFormat format = parse_format(a.format);
    trecs::PipelineSpec pipeline;
    if (!a.preset.empty()) {
        pipeline = trecs::preset(a.preset);
    } else {
        std::ifstream in(a.pipeline);
        if (!in) {
            throw trecs::IoError("cannot open pipeline config '" + a.pipeline + "'");
        }
        pipeline = trecs::parse_config(in);
        load_mean_blocks(pipeline, fs::path(a.pipeline).parent_path());
    }
    const trecs::ToyClassifier model = trecs::load_model(a.model);
    const auto manifest = trecs::read_manifest(a.manifest);

    std::vector<trecs::LabeledSequence> test;
    for (const auto& e : manifest.entries) {
        if (e.split != trecs::Split::test) {
            continue;
        }
        const auto label = trecs::parse_integer<std::size_t>(e.label);
        if (!label || *label >= model.num_classes) {
            throw std::invalid_argument("label '" + e.label + "' of '" + e.video_id + "' is not a class index of the model");
        }
        test.push_back({trecs::read_sequence(e.path, e.video_id), *label, e.rate.value_or(1.0), 0.0});
    }
    if (test.empty()) {
        throw std::invalid_argument("manifest has no test-split entries");
    }

    trecs::SweepOptions options;
    options.rng_seed = a.seed;
    options.model_tag = model.trained_config.empty() ? fs::path(a.model).stem().string() : model.trained_config;
    options.dataset_tag = manifest.name;
    const auto outcome =
        trecs::input_alpha_test(trecs::ToyPredictor{&model}, test, pipeline, schedule, options);
    const fs::path out_dir(a.out);
    ensure_dir(out_dir);
    trecs::emit_report(report_path(out_dir, "alpha_test", format), outcome, format);
    const std::vector<trecs::AlphaSweepReport> reports{outcome.report};
    trecs::emit_plot(out_dir / "alpha_test.svg", reports);
    print_summary(outcome.report);
    for (const auto& [name, stats] : outcome.report.per_class) {
        std::cout << trecs::format_class_row(name, stats) << '\n';
    }
    return exit_ok;
}

// --- preset -----------------------------------------------------------------

int run_preset(const std::string& name)
{
    std::cout << ConfigLine("preset").opt("name", name).str() << '\n';
    trecs::write_config(std::cout, trecs::preset(name));
    return exit_ok;
}

// --- --serve-plans ----------------------------------------------------------

/// JSON lines: {"n":..,"l":..,"alpha":..} in, {"indices":[...]} or {"error":".."} out.
int serve_plans()
{
    std::cerr << ConfigLine("").flag("serve-plans").str() << std::endl;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (trecs::trim(line).empty()) {
            continue;
        }
        json reply;
        try {
            const json req = json::parse(line);
            const auto n = req.at("n").get<std::int64_t>();
            const auto l = req.at("l").get<std::int64_t>();
            const auto alpha = req.at("alpha").get<double>();
            if (n < 1 || l < 1) {
                throw std::invalid_argument("n and l must be at least 1");
            }
            const auto plan = trecs::compute_index_plan(static_cast<std::size_t>(n), static_cast<std::size_t>(l), alpha);
            reply["indices"] = plan.indices;
        } catch (const std::exception& e) {
            reply = json{{"error", std::string("invalid argument: ") + e.what()}};
        }
        std::cout << reply.dump() << std::endl;
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Temporal resampling toolkit for rate-invariant sequence classification"};
    app.set_help_all_flag("--help-all");
    bool serve = false;
    app.add_flag("--serve-plans", serve, "Answer JSON-lines index-plan requests on stdin");

    ResampleArgs resample;
    auto* cmd_resample = app.add_subcommand("resample", "Resample a frame directory or container in time");
    cmd_resample->add_option("--in", resample.in, "Input frame directory or .trsq file")->required();
    cmd_resample->add_option("--alpha", resample.alpha, "Resampling factor (> 0)")->required();
    cmd_resample->add_option("--mode", resample.mode, "indexed | interp")->capture_default_str();
    cmd_resample->add_option("--out", resample.out, "Output directory")->required();

    GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen-rate-dataset", "Generate ten interpolated speed variants per video");
    cmd_gen->add_option("--manifest", gen.manifest, "Input manifest (TSV)")->required();
    cmd_gen->add_option("--seed", gen.seed, "Random seed")->required();
    cmd_gen->add_option("--out", gen.out, "Output directory")->required();
    cmd_gen->add_flag("--grid", gen.grid, "Use the fixed rate grid instead of random rates");

    ScheduleArgs sched;
    auto* cmd_sched = app.add_subcommand("schedule-sample", "Histogram (or list) the alphas a schedule emits");
    cmd_sched->add_option("--schedule", sched.schedule, "cvr:A | rr:seed=S | sr:seed=S,mode=normalized|literal")
        ->required();
    cmd_sched->add_option("--draws", sched.draws, "Number of draws")->capture_default_str();
    cmd_sched->add_option("--bins", sched.bins, "Number of equal-width bins")->capture_default_str();
    cmd_sched->add_flag("--list", sched.list, "Print every draw instead of a histogram");

    ToyArgs toy;
    auto* cmd_toy = app.add_subcommand("toy", "Train and evaluate the synthetic desk-scale model");
    cmd_toy->add_flag("--train", toy.train, "Train a model and save it");
    cmd_toy->add_flag("--sweep", toy.sweep, "Run the input-alpha sweep for saved models");
    cmd_toy->add_flag("--checkpoint-sweep", toy.checkpoint_sweep, "Train, keeping checkpoints, and sweep each one");
    cmd_toy->add_option("--export-data", toy.export_data, "Write the synthetic dataset to a directory");
    cmd_toy->add_option("--schedule", toy.schedule, "Training schedule")->capture_default_str();
    cmd_toy->add_option("--seed", toy.seed, "Seed for data, augmentation and training")->required();
    cmd_toy->add_option("--classes", toy.spec.num_classes)->capture_default_str();
    cmd_toy->add_option("--frames", toy.spec.frames_per_sample)->capture_default_str();
    cmd_toy->add_option("--frame-dim", toy.spec.frame_dim)->capture_default_str();
    cmd_toy->add_option("--samples-per-class", toy.spec.samples_per_class)->capture_default_str();
    cmd_toy->add_option("--rate-lo", toy.spec.rate_lo)->capture_default_str();
    cmd_toy->add_option("--rate-hi", toy.spec.rate_hi)->capture_default_str();
    cmd_toy->add_option("--noise", toy.spec.noise_sigma)->capture_default_str();
    cmd_toy->add_option("--max-phase", toy.spec.max_phase)->capture_default_str();
    cmd_toy->add_option("--epochs", toy.hyper.epochs)->capture_default_str();
    cmd_toy->add_option("--lr", toy.hyper.lr)->capture_default_str();
    cmd_toy->add_option("--batch", toy.hyper.batch)->capture_default_str();
    cmd_toy->add_option("--model", toy.models, "Model file (output for --train, inputs for --sweep)");
    cmd_toy->add_option("--checkpoint-epochs", toy.checkpoint_epochs, "Epochs to keep (0 = untrained)")
        ->delimiter(',');
    cmd_toy->add_option("--out", toy.out, "Output directory")->capture_default_str();
    cmd_toy->add_option("--format", toy.format, "csv | json")->capture_default_str();

    AlphaTestArgs at;
    auto* cmd_at = app.add_subcommand("alpha-test", "Input-alpha sweep of a saved model over a manifest's test split");
    cmd_at->add_option("--model", at.model, "Model file")->required();
    cmd_at->add_option("--manifest", at.manifest, "Manifest (TSV)")->required();
    cmd_at->add_option("--preset", at.preset, "Pipeline preset name");
    cmd_at->add_option("--pipeline", at.pipeline, "Pipeline config file");
    cmd_at->add_option("--schedule", at.schedule, "Test-time schedule")->capture_default_str();
    cmd_at->add_option("--seed", at.seed, "Seed for pipeline randomness")->required();
    cmd_at->add_option("--out", at.out, "Output directory")->capture_default_str();
    cmd_at->add_option("--format", at.format, "csv | json")->capture_default_str();

    std::string preset_name;
    auto* cmd_preset = app.add_subcommand("preset", "Print a preset pipeline as a config file");
    cmd_preset->add_option("--name", preset_name, "c3d | i3d | tsn | resnet50_lstm | toy")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_invalid;
    }

    try {
        if (serve) {
            return serve_plans();
        }
        if (cmd_resample->parsed()) {
            return run_resample(resample);
        }
        if (cmd_gen->parsed()) {
            return run_gen(gen);
        }
        if (cmd_sched->parsed()) {
            return run_schedule(sched);
        }
        if (cmd_toy->parsed()) {
            return run_toy(toy);
        }
        if (cmd_at->parsed()) {
            return run_alpha_test(at);
        }
        if (cmd_preset->parsed()) {
            return run_preset(preset_name);
        }
        std::cerr << app.help();
        return exit_invalid;
    } catch (const trecs::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const trecs::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return exit_io;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return exit_invalid;
    } catch (const std::out_of_range& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return exit_invalid;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return exit_io;
    }
}
