#pragma once

#include "trecs/format.hpp"
#include "trecs/frame_io.hpp"
#include "trecs/random.hpp"
#include "trecs/resample.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trecs {

enum class Split { train, val, test };

inline const char* to_string(Split s)
{
    switch (s) {
    case Split::train:
        return "train";
    case Split::val:
        return "val";
    case Split::test:
        return "test";
    }
    return "";
}

inline Split parse_split(std::string_view s)
{
    if (s == "train") {
        return Split::train;
    }
    if (s == "val") {
        return Split::val;
    }
    if (s == "test") {
        return Split::test;
    }
    throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

struct ManifestEntry {
    std::string video_id;
    std::filesystem::path path;
    std::string label;
    Split split = Split::train;
    std::optional<double> rate;
    std::optional<std::string> parent_id;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::string name;
    std::vector<ManifestEntry> entries;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// ---------------------------------------------------------------------------
// Rate bins
// ---------------------------------------------------------------------------

enum class RateBin { B1, B2, B3, B4 };
inline constexpr std::array<RateBin, 4> all_bins{RateBin::B1, RateBin::B2, RateBin::B3, RateBin::B4};

inline const char* to_string(RateBin b)
{
    constexpr std::array<const char*, 4> names{"B1", "B2", "B3", "B4"};
    return names[static_cast<std::size_t>(b)];
}

/// B1 [0.2, 0.6], B2 (0.6, 1.0], B3 (1.0, 2.0], B4 (2.0, 3.0].
inline RateBin bin_of_rate(double rate)
{
    if (!(rate >= 0.2 && rate <= 3.0)) {
        throw std::invalid_argument("rate " + format_real(rate) + " lies outside [0.2, 3.0]");
    }
    if (rate <= 0.6) {
        return RateBin::B1;
    }
    if (rate <= 1.0) {
        return RateBin::B2;
    }
    if (rate <= 2.0) {
        return RateBin::B3;
    }
    return RateBin::B4;
}

struct RateEntry {
    std::string parent_id;
    double rate = 1.0;
    RateBin bin = RateBin::B2;
};

inline RateEntry make_rate_entry(std::string parent_id, double rate)
{
    return RateEntry{std::move(parent_id), rate, bin_of_rate(rate)};
}

// ---------------------------------------------------------------------------
// Manifest files: video_id \t path \t label \t split [\t rate [\t parent_id]]
// ---------------------------------------------------------------------------

inline void validate(const DatasetManifest& m, bool check_paths = true)
{
    std::set<std::string> ids;
    for (const auto& e : m.entries) {
        if (e.video_id.empty()) {
            throw std::invalid_argument("manifest entry with an empty video id");
        }
        if (!ids.insert(e.video_id).second) {
            throw std::invalid_argument("duplicate video id '" + e.video_id + "'");
        }
        if (check_paths && !std::filesystem::exists(e.path)) {
            throw std::invalid_argument("path of '" + e.video_id + "' does not exist: " + e.path.string());
        }
    }
}

/// Relative paths are resolved against the manifest's directory.
inline DatasetManifest read_manifest(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open manifest '" + file.string() + "'");
    }
    DatasetManifest m;
    m.name = file.stem().string();
    const auto base = file.parent_path();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            const std::string_view body = trim(std::string_view(line).substr(1));
            if (body.starts_with("name=")) {
                m.name = std::string(trim(body.substr(5)));
            }
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) {
            fields.push_back(field);
        }
        if (fields.size() < 4 || fields.size() > 6) {
            throw std::invalid_argument("manifest line " + std::to_string(line_no) + " needs 4 to 6 tab-separated fields");
        }
        ManifestEntry e;
        e.video_id = fields[0];
        e.path = fields[1];
        if (e.path.is_relative()) {
            e.path = base / e.path;
        }
        e.label = fields[2];
        e.split = parse_split(fields[3]);
        if (fields.size() >= 5 && !fields[4].empty()) {
            const auto r = parse_real(fields[4]);
            if (!r) {
                throw std::invalid_argument("manifest line " + std::to_string(line_no) + " has a bad rate");
            }
            e.rate = *r;
        }
        if (fields.size() == 6 && !fields[5].empty()) {
            e.parent_id = fields[5];
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

/// Paths are written relative to the manifest's directory; rates at full precision.
inline void write_manifest(const std::filesystem::path& file, const DatasetManifest& m)
{
    namespace fs = std::filesystem;
    std::ostringstream os;
    os << "# name=" << m.name << '\n';
    const fs::path base = fs::absolute(file).parent_path().lexically_normal();
    for (const auto& e : m.entries) {
        fs::path p = fs::absolute(e.path).lexically_normal();
        const fs::path rel = p.lexically_relative(base);
        if (!rel.empty()) {
            p = rel;
        }
        os << e.video_id << '\t' << p.generic_string() << '\t' << e.label << '\t' << to_string(e.split);
        if (e.rate || e.parent_id) {
            os << '\t' << (e.rate ? format_real(*e.rate) : std::string());
        }
        if (e.parent_id) {
            os << '\t' << *e.parent_id;
        }
        os << '\n';
    }
    const auto text = os.str();
    detail::write_file(file, text.data(), text.size());
}

// ---------------------------------------------------------------------------
// Rate-modified corpus generation
// ---------------------------------------------------------------------------

struct RateOptions {
    /// Use the fixed rate set instead of seeded uniform draws.
    bool grid = false;
    double grid_epsilon = 0.01;
};

/// Five rates in [0.2, 1.0] followed by five in [1.0, 3.0].
inline std::vector<double> draw_rates(std::uint64_t seed, const std::string& video_id, const RateOptions& options = {})
{
    if (options.grid) {
        const double eps = options.grid_epsilon;
        return {0.2, 0.4, 0.6, 0.8, 1.0 - eps, 1.0 + eps, 1.5, 2.0, 2.5, 3.0};
    }
    Rng rng(mix_keys(seed, hash_string(video_id)));
    std::vector<double> rates;
    rates.reserve(10);
    for (int k = 0; k < 5; ++k) {
        rates.push_back(rng.uniform(0.2, 1.0));
    }
    for (int k = 0; k < 5; ++k) {
        rates.push_back(rng.uniform(1.0, 3.0));
    }
    return rates;
}

struct GenerationError {
    std::string video_id;
    std::string message;
};

struct GenerationResult {
    DatasetManifest manifest;
    std::vector<GenerationError> errors;
};

/// Writes ten interpolated speed variants per video under out_dir/<variant_id> and returns
/// "<name>Rate": every original followed by its variants ordered by rate, groups ordered
/// by parent id. Unreadable videos are left out and reported in `errors`.
inline GenerationResult generate_rate_dataset(const DatasetManifest& manifest, std::uint64_t seed,
                                              const std::filesystem::path& out_dir, const RateOptions& options = {})
{
    if (manifest.entries.empty()) {
        throw std::invalid_argument("cannot generate a rate dataset from an empty manifest");
    }
    validate(manifest, false);

    struct Group {
        ManifestEntry original;
        std::vector<ManifestEntry> variants;
    };
    std::vector<Group> groups;
    GenerationResult result;
    std::set<std::string> taken;
    for (const auto& e : manifest.entries) {
        taken.insert(e.video_id);
    }

    for (const auto& e : manifest.entries) {
        Group g{e, {}};
        try {
            const FrameSequence seq = read_sequence(e.path, e.video_id);
            const FrameFormat format = detect_format(e.path);
            for (const double rate : draw_rates(seed, e.video_id, options)) {
                std::string id = e.video_id + "_r" + format_fixed(rate, 2);
                for (int k = 2; taken.count(id) != 0; ++k) {
                    id = e.video_id + "_r" + format_fixed(rate, 2) + "_" + std::to_string(k);
                }
                taken.insert(id);
                const FrameSequence variant = resample_by_rate_interpolated(seq, rate);
                const auto dir = out_dir / id;
                std::filesystem::remove_all(dir);
                write_sequence(dir, variant, format);
                g.variants.push_back(ManifestEntry{id, dir, e.label, e.split, rate, e.video_id});
            }
        } catch (const std::exception& ex) {
            result.errors.push_back({e.video_id, ex.what()});
            continue;
        }
        std::stable_sort(g.variants.begin(), g.variants.end(),
                         [](const ManifestEntry& a, const ManifestEntry& b) { return *a.rate < *b.rate; });
        groups.push_back(std::move(g));
    }

    std::stable_sort(groups.begin(), groups.end(),
                     [](const Group& a, const Group& b) { return a.original.video_id < b.original.video_id; });
    result.manifest.name = manifest.name + "Rate";
    for (auto& g : groups) {
        result.manifest.entries.push_back(std::move(g.original));
        for (auto& v : g.variants) {
            result.manifest.entries.push_back(std::move(v));
        }
    }
    return result;
}

} // namespace trecs
