// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Every reference value here is computed by code in this file, never by the
// library routine under test.

#include "test_util.hpp"

#include "trecs/trecs.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace trecs;
using trecs::testing::random_sequence;
using trecs::testing::TempDir;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets, fixed up front.
constexpr double interp_tolerance = 1e-12;
constexpr double gradient_tolerance = 1e-4;
constexpr double fd_step = 1e-5;
constexpr double acc_slack_points = 5.0;
constexpr double std_reduction_target = 0.30;
constexpr double type_threshold = 10.0;
constexpr double oracle_stat_tolerance = 1e-9;

// Seeds, fixed up front.
constexpr std::uint64_t rr_seed = 7;
constexpr std::uint64_t sr_seed = 1;
constexpr std::uint64_t fixture_seed = 20240611;

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, double budget_s, const std::function<Verdict()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool pass = v.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s %2d  %-32s %8.3f s (budget %g s)  %s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(), secs,
                budget_s, v.detail.c_str(), in_time ? "" : "  [over time budget]");
    std::fflush(stdout);
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

bool bitwise_equal(const Frame& a, const Frame& b)
{
    if (a.shape() != b.shape()) {
        return false;
    }
    const auto va = a.values();
    const auto vb = b.values();
    return std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) == 0;
}

bool bitwise_equal(const FrameSequence& a, const FrameSequence& b)
{
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!bitwise_equal(a[k], b[k])) {
            return false;
        }
    }
    return true;
}

FrameSequence real_valued_sequence(Rng& rng, std::size_t n, Shape shape)
{
    std::vector<Frame> frames;
    for (std::size_t k = 0; k < n; ++k) {
        Frame f(shape);
        for (double& v : f.values()) {
            v = rng.uniform(-3.0, 300.0);
        }
        frames.push_back(std::move(f));
    }
    return FrameSequence("r", std::move(frames));
}

// Equal-width 14-bin histogram over [0.2, 3.0] with exact rational edges k/5.
std::vector<std::size_t> bin_draws(const std::vector<double>& draws)
{
    std::vector<std::size_t> counts(14, 0);
    for (const double a : draws) {
        std::size_t b = 0;
        while (b < 13 && a >= (b + 2) / 5.0) {
            ++b;
        }
        ++counts[b];
    }
    return counts;
}

// Softmax cross-entropy, written out in long double.
long double oracle_loss(const ToyClassifier& m, const std::vector<Example>& batch)
{
    const std::size_t d = m.input_len * m.frame_dim;
    long double total = 0.0L;
    for (const auto& ex : batch) {
        std::vector<long double> z(m.num_classes);
        for (std::size_t c = 0; c < m.num_classes; ++c) {
            long double s = m.bias[c];
            for (std::size_t j = 0; j < d; ++j) {
                s += static_cast<long double>(m.weights[c * d + j]) * ex.x[j];
            }
            z[c] = s;
        }
        long double top = z[0];
        for (const auto v : z) {
            top = std::max(top, v);
        }
        long double sum = 0.0L;
        for (const auto v : z) {
            sum += std::exp(v - top);
        }
        total += top + std::log(sum) - z[ex.y];
    }
    return total / static_cast<long double>(batch.size());
}

// Worst relative error of batch_gradient against central differences of oracle_loss.
double worst_gradient_error(const ToyClassifier& model, const std::vector<Example>& batch, std::size_t weight_probes,
                            std::uint64_t seed)
{
    std::vector<double> gw;
    std::vector<double> gb;
    batch_gradient(model, batch, gw, gb);
    ToyClassifier probe = model;
    auto central = [&](double& slot) {
        const double saved = slot;
        slot = saved + fd_step;
        const long double up = oracle_loss(probe, batch);
        slot = saved - fd_step;
        const long double down = oracle_loss(probe, batch);
        slot = saved;
        return static_cast<double>((up - down) / (2.0L * fd_step));
    };
    auto rel = [](double a, double n) {
        const double scale = std::max(std::abs(a), std::abs(n));
        return std::abs(a - n) / (scale < 1e-8 ? 1.0 : scale);
    };
    double worst = 0.0;
    for (std::size_t c = 0; c < probe.bias.size(); ++c) {
        worst = std::max(worst, rel(gb[c], central(probe.bias[c])));
    }
    Rng rng(seed);
    for (std::size_t n = 0; n < weight_probes; ++n) {
        const auto j = static_cast<std::size_t>(rng.below(probe.weights.size()));
        worst = std::max(worst, rel(gw[j], central(probe.weights[j])));
    }
    return worst;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            std::ifstream in(e.path(), std::ios::binary);
            out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
        }
    }
    return out;
}

double pop_std(const std::vector<double>& v)
{
    long double mean = 0.0L;
    for (const double x : v) {
        mean += x;
    }
    mean /= v.size();
    long double ss = 0.0L;
    for (const double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return static_cast<double>(std::sqrt(ss / v.size()));
}

double range_of(const std::vector<double>& v)
{
    double lo = v[0];
    double hi = v[0];
    for (const double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    return hi - lo;
}

// Shared by criteria 8, 9 and 10.
struct CoreRun {
    SweepOutcome baseline;
    SweepOutcome rr;
    double seconds = 0.0;
};

CoreRun run_core_effect()
{
    const auto t0 = std::chrono::steady_clock::now();
    const SyntheticSpec spec;
    const TrainHyper hyper;
    const SyntheticDataset data = generate_synthetic(spec);
    const PipelineSpec pipeline = toy_pipeline();
    const auto base = train_toy(data.train, data.num_classes, pipeline, constant_schedule(1.0), hyper);
    const auto rr = train_toy(data.train, data.num_classes, pipeline, random_schedule(rr_seed), hyper);
    SweepOptions options;
    CoreRun run;
    options.model_tag = base.model.trained_config;
    run.baseline = input_alpha_test(ToyPredictor{&base.model}, data.test, pipeline, constant_schedule(1.0), options);
    options.model_tag = rr.model.trained_config;
    run.rr = input_alpha_test(ToyPredictor{&rr.model}, data.test, pipeline, constant_schedule(1.0), options);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

// Recomputes a report from its log with separate counting code and compares.
std::string audit_report(const SweepOutcome& out)
{
    const auto& r = out.report;
    std::vector<double> alphas;
    for (int k = 1; k <= 15; ++k) {
        alphas.push_back(k / 5.0);
    }
    std::vector<long> hit(15, 0);
    std::vector<long> seen(15, 0);
    std::map<std::string, std::array<std::array<long, 2>, 4>> per_class;
    for (const auto& rec : out.log) {
        const auto k = static_cast<std::size_t>(std::lround(rec.alpha * 5.0)) - 1;
        if (k >= 15 || alphas[k] != rec.alpha) {
            return "log alpha off grid";
        }
        hit[k] += rec.correct;
        ++seen[k];
        if (rec.correct != (rec.true_label == rec.pred_label)) {
            return "log correct flag disagrees with labels";
        }
        const std::size_t bin = k < 3 ? 0 : k < 5 ? 1 : k < 10 ? 2 : 3;
        per_class[rec.true_label][bin][0] += rec.correct;
        ++per_class[rec.true_label][bin][1];
    }
    std::vector<double> acc(15);
    for (std::size_t k = 0; k < 15; ++k) {
        acc[k] = seen[k] ? 100.0 * static_cast<double>(hit[k]) / static_cast<double>(seen[k]) : 0.0;
    }
    if (r.alphas != alphas) {
        return "sweep grid differs";
    }
    if (r.accuracy != acc) {
        return "per-alpha accuracy differs";
    }
    if (r.acc_uniform != acc[4]) {
        return "acc_uniform differs";
    }
    if (std::abs(r.std - pop_std(acc)) > oracle_stat_tolerance) {
        return "std differs: " + format_real(r.std) + " vs " + format_real(pop_std(acc));
    }
    if (r.per_class.size() != per_class.size()) {
        return "class count differs";
    }
    for (const auto& [name, bins] : per_class) {
        const auto it = r.per_class.find(name);
        if (it == r.per_class.end()) {
            return "class " + name + " missing";
        }
        std::vector<double> present;
        for (std::size_t b = 0; b < 4; ++b) {
            const bool has = bins[b][1] > 0;
            if (has != it->second.bin_acc[b].has_value()) {
                return "class " + name + " bin presence differs";
            }
            if (has) {
                const double a = 100.0 * static_cast<double>(bins[b][0]) / static_cast<double>(bins[b][1]);
                if (*it->second.bin_acc[b] != a) {
                    return "class " + name + " bin accuracy differs";
                }
                present.push_back(a);
            }
        }
        long double ma = 0.0L;
        for (const double a : present) {
            ma += a;
        }
        ma /= present.size();
        if (std::abs(it->second.ma - static_cast<double>(ma)) > oracle_stat_tolerance ||
            it->second.md != range_of(present)) {
            return "class " + name + " M.A./M.D. differs";
        }
    }

    // The on-disk log re-aggregates to the identical report.
    std::stringstream log_text;
    write_log(log_text, out.log);
    auto again = aggregate_log(read_log(log_text), r.alphas);
    again.model_tag = r.model_tag;
    again.dataset_tag = r.dataset_tag;
    again.checkpoint_tag = r.checkpoint_tag;
    if (!(again == r)) {
        return "log round trip does not reproduce the report";
    }

    std::stringstream csv;
    write_csv(csv, r);
    std::vector<std::string> lines;
    for (std::string line; std::getline(csv, line);) {
        lines.push_back(line);
    }
    std::size_t data_rows = 0;
    for (std::size_t k = 1; k < lines.size() && !lines[k].empty(); ++k) {
        ++data_rows;
    }
    if (lines.empty() || lines[0] != "alpha,accuracy" || data_rows != 15) {
        return "CSV has " + std::to_string(data_rows) + " data rows";
    }
    const std::string verdict = range_of(acc) > type_threshold ? "TypeI" : "TypeII";
    if (lines.back().substr(lines.back().rfind(',') + 1) != verdict ||
        to_string(classify_temporal_type(r)) != verdict) {
        return "Type verdict differs from the range rule";
    }
    return "";
}

} // namespace

int main()
{
    std::printf("acceptance suite\n");

    report(1, "index plan oracle", 1.0, [] {
        std::size_t cases = 0;
        std::size_t mismatches = 0;
        for (long n = 1; n <= 20; ++n) {
            for (long l = 1; l <= 20; ++l) {
                for (long k = 1; k <= 15; ++k) {
                    const auto plan = compute_index_plan(n, l, k / 5.0);
                    bool ok = plan.indices.size() == static_cast<std::size_t>(l);
                    for (long i = 1; ok && i <= l; ++i) {
                        const long raw = (k * i) / 5; // floor(k i / 5) in integers
                        const long expect = std::clamp(raw, 1L, n);
                        ok = plan.indices[i - 1] == static_cast<std::size_t>(expect);
                    }
                    mismatches += !ok;
                    ++cases;
                }
            }
        }
        return Verdict{cases == 6000 && mismatches == 0,
                       std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches"};
    });

    report(2, "identity at unit rate", 1.0, [] {
        Rng rng(fixture_seed);
        std::size_t bad = 0;
        for (int s = 0; s < 50; ++s) {
            const Shape shape{1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(3)};
            const auto seq = real_valued_sequence(rng, 1 + rng.below(40), shape);
            bad += !bitwise_equal(resample_by_rate_indexed(seq, 1.0), seq);
            bad += !bitwise_equal(resample_by_rate_interpolated(seq, 1.0), seq);
        }
        return Verdict{bad == 0, "50 sequences, " + std::to_string(bad) + " differing outputs"};
    });

    report(3, "interpolation oracle", 1.0, [] {
        Rng rng(fixture_seed + 1);
        double worst = 0.0;
        for (int c = 0; c < 1000; ++c) {
            const Shape shape{1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(3)};
            const std::size_t n = 1 + rng.below(30);
            const auto seq = real_valued_sequence(rng, n, shape);
            // Every fifth case lands exactly on a frame.
            const double t = c % 5 == 0 ? static_cast<double>(1 + rng.below(n))
                                        : rng.uniform(1.0, static_cast<double>(n));
            const Frame got = interpolate_at(seq, t);
            const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(t), n);
            const std::size_t hi = std::min(lo + 1, n);
            const double w = t - static_cast<double>(lo);
            for (std::size_t y = 0; y < shape.height; ++y) {
                for (std::size_t x = 0; x < shape.width; ++x) {
                    for (std::size_t ch = 0; ch < shape.channels; ++ch) {
                        const double a = seq[lo - 1].at(y, x, ch);
                        const double b = seq[hi - 1].at(y, x, ch);
                        const double expect = a + w * (b - a);
                        worst = std::max(worst, std::abs(got.at(y, x, ch) - expect));
                    }
                }
            }
        }
        return Verdict{worst <= interp_tolerance, "1000 cases, max |err| " + fmt("%.3g", worst)};
    });

    report(4, "random rate distribution", 1.0, [] {
        auto draw = [](std::uint64_t seed) {
            auto s = random_schedule(seed);
            std::vector<double> out;
            for (int k = 0; k < 14000; ++k) {
                out.push_back(next_alpha(s));
            }
            return out;
        };
        const auto draws = draw(rr_seed);
        const auto counts = bin_draws(draws);
        const double sigma = std::sqrt(1000.0 * 13.0 / 14.0);
        double worst = 0.0;
        for (const auto c : counts) {
            worst = std::max(worst, std::abs(static_cast<double>(c) - 1000.0));
        }
        const bool deterministic = draw(rr_seed) == draws;
        const bool library_agrees = alpha_histogram(random_schedule(rr_seed), 14000, 14) == counts;
        return Verdict{worst <= 3.0 * sigma && deterministic && library_agrees,
                       "seed " + std::to_string(rr_seed) + ", max |count-1000| " + fmt("%.0f", worst) + " vs 3 sigma " +
                           fmt("%.1f", 3.0 * sigma) + (deterministic ? ", repeatable" : ", NOT repeatable") +
                           (library_agrees ? "" : ", library histogram disagrees")};
    });

    report(5, "sinusoidal bimodality", 1.0, [] {
        auto s = sinusoidal_schedule(sr_seed, SinusoidMode::normalized);
        std::vector<double> draws;
        for (int k = 0; k < 100000; ++k) {
            draws.push_back(next_alpha(s));
        }
        const auto counts = bin_draws(draws);
        // Fourteen bins have two middle bins; the larger of them is the reference.
        const auto centre = std::max(counts[6], counts[7]);
        const double low_ratio = static_cast<double>(counts[0]) / static_cast<double>(centre);
        const double high_ratio = static_cast<double>(counts[13]) / static_cast<double>(centre);
        return Verdict{low_ratio >= 2.0 && high_ratio >= 2.0,
                       "[0.2,0.4) " + std::to_string(counts[0]) + ", (2.8,3.0] " + std::to_string(counts[13]) +
                           ", centre " + std::to_string(centre) + ", ratios " + fmt("%.2f", low_ratio) + " / " +
                           fmt("%.2f", high_ratio)};
    });

    report(6, "rate dataset structure", 5.0, [] {
        TempDir tmp("acceptance");
        Rng rng(fixture_seed + 2);
        DatasetManifest m{"Three", {}};
        const std::vector<std::size_t> lengths{10, 13, 17};
        std::vector<FrameSequence> sources;
        for (std::size_t v = 0; v < 3; ++v) {
            const std::string id = "v" + std::to_string(v);
            sources.push_back(random_sequence(rng, lengths[v], {6, 8, 3}, id));
            write_sequence(tmp / "src" / id, sources.back(), FrameFormat::png);
            m.entries.push_back({id, tmp / "src" / id, "c" + std::to_string(v), Split::train, {}, {}});
        }
        std::vector<std::string> problems;
        const auto a = generate_rate_dataset(m, 5, tmp / "a");
        write_manifest(tmp / "a" / "ThreeRate.tsv", a.manifest);
        const auto b = generate_rate_dataset(m, 5, tmp / "b");
        write_manifest(tmp / "b" / "ThreeRate.tsv", b.manifest);
        if (a.manifest.entries.size() != 33 || !a.errors.empty()) {
            problems.push_back(std::to_string(a.manifest.entries.size()) + " entries");
        }
        for (std::size_t v = 0; v < 3 && a.manifest.entries.size() == 33; ++v) {
            std::size_t slow = 0;
            for (std::size_t k = 1; k <= 10; ++k) {
                const auto& e = a.manifest.entries[11 * v + k];
                const bool ok = e.rate && e.parent_id == m.entries[v].video_id && *e.rate >= 0.2 && *e.rate <= 3.0;
                if (!ok) {
                    problems.push_back("bad variant " + e.video_id);
                    continue;
                }
                slow += *e.rate <= 1.0;
                const auto len = static_cast<std::size_t>(std::floor(lengths[v] / *e.rate + 0.5));
                if (read_sequence(e.path, e.video_id).size() != std::max<std::size_t>(1, len)) {
                    problems.push_back("length of " + e.video_id);
                }
            }
            if (slow < 5) {
                problems.push_back("rate halves of v" + std::to_string(v));
            }
        }
        if (tree_bytes(tmp / "a") != tree_bytes(tmp / "b")) {
            problems.push_back("regeneration differs");
        }
        const auto grid = generate_rate_dataset(m, 5, tmp / "grid", RateOptions{true, 0.01});
        bool found = false;
        for (const auto& e : grid.manifest.entries) {
            if (e.parent_id == "v0" && e.rate && *e.rate == 2.0) {
                found = true;
                const auto got = read_sequence(e.path, e.video_id);
                bool same = got.size() == 5;
                for (std::size_t k = 0; same && k < 5; ++k) {
                    same = got[k] == sources[0].frame(2 * k + 1);
                }
                if (!same) {
                    problems.push_back("rate 2.0 variant is not frames 1,3,5,7,9");
                }
            }
        }
        if (!found) {
            problems.push_back("no rate 2.0 grid variant");
        }
        std::string detail = "33 entries, odd-frame rate-2 variant, byte-identical regeneration";
        if (!problems.empty()) {
            detail = problems.front() + (problems.size() > 1 ? " (+" + std::to_string(problems.size() - 1) + ")" : "");
        }
        return Verdict{problems.empty(), detail};
    });

    report(7, "gradient check", 10.0, [] {
        const SyntheticSpec spec;
        const SyntheticDataset data = generate_synthetic(spec);
        const PipelineSpec pipeline = toy_pipeline();
        auto examples = pipeline_examples(data.train, pipeline, Mode::test, 0);
        examples.resize(64);
        const ToyClassifier zero(data.num_classes, pipeline.model_input_len, spec.frame_dim);
        TrainHyper hyper;
        const auto trained = train_toy(data.train, data.num_classes, pipeline, random_schedule(rr_seed), hyper);
        const double at_init = worst_gradient_error(zero, examples, 200, 1);
        const double after = worst_gradient_error(trained.model, examples, 200, 2);
        return Verdict{at_init < gradient_tolerance && after < gradient_tolerance,
                       "max rel err " + fmt("%.2e", at_init) + " at init, " + fmt("%.2e", after) + " after " +
                           std::to_string(hyper.epochs) + " epochs"};
    });

    // Trained once inside criterion 8 so its timing covers the full run; 9 and 10 reuse it.
    CoreRun core;
    std::string core_error = "not run";
    const auto& base = core.baseline.report;
    const auto& rr = core.rr.report;

    report(8, "core effect (stability)", 300.0, [&] {
        try {
            core = run_core_effect();
            core_error.clear();
        } catch (const std::exception& e) {
            core_error = e.what();
            return Verdict{false, "run failed: " + core_error};
        }
        const double reduction = (base.std - rr.std) / base.std;
        const bool pass = rr.std < base.std && rr.acc_uniform >= base.acc_uniform - acc_slack_points &&
                          core.seconds < 300.0;
        return Verdict{pass, "Std " + fmt("%.3f", base.std) + " -> " + fmt("%.3f", rr.std) + " (" +
                                 fmt("%.1f", 100.0 * reduction) + "% reduction, target " +
                                 fmt("%.0f", 100.0 * std_reduction_target) + "% " +
                                 (reduction >= std_reduction_target ? "met" : "NOT met") + "), acc@1 " +
                                 fmt("%.2f", base.acc_uniform) + " -> " + fmt("%.2f", rr.acc_uniform) + ", run " +
                                 fmt("%.1f", core.seconds) + " s"};
    });

    report(9, "core effect (worst-case drop)", 300.0, [&] {
        if (!core_error.empty()) {
            return Verdict{false, "run failed: " + core_error};
        }
        const double rb = range_of(base.accuracy);
        const double rr_range = range_of(rr.accuracy);
        return Verdict{rr_range < rb, "max-min " + fmt("%.2f", rb) + " -> " + fmt("%.2f", rr_range) + " points"};
    });

    report(10, "report integrity", 5.0, [&] {
        if (!core_error.empty()) {
            return Verdict{false, "run failed: " + core_error};
        }
        for (const auto* out : {&core.baseline, &core.rr}) {
            const auto problem = audit_report(*out);
            if (!problem.empty()) {
                return Verdict{false, out->report.model_tag + ": " + problem};
            }
        }
        return Verdict{true, "2 reports, " + std::to_string(core.baseline.log.size() + core.rr.log.size()) +
                                 " log lines, 15 CSV rows each, types " +
                                 to_string(classify_temporal_type(base)) + " / " +
                                 to_string(classify_temporal_type(rr))};
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
