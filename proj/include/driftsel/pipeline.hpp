#ifndef DRIFTSEL_PIPELINE_HPP
#define DRIFTSEL_PIPELINE_HPP

// End-to-end run: ingest -> select -> merge -> bin -> FIT -> TSC, with reports
// and a manifest that reproduces the run when fed back as a config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <algorithm>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "driftsel/binning.hpp"
#include "driftsel/config.hpp"
#include "driftsel/error.hpp"
#include "driftsel/fit.hpp"
#include "driftsel/ingest.hpp"
#include "driftsel/tsc.hpp"

#ifndef DRIFTSEL_VERSION
#define DRIFTSEL_VERSION "0.0.0"
#endif

namespace driftsel {

/// Failure of one pipeline stage. `usage` marks configuration problems.
class StageError : public Error {
  public:
    StageError(std::string stage, const std::string& message, bool usage)
        : Error("[" + stage + "] " + message), stage_(std::move(stage)), usage_(usage) {}

    const std::string& stage() const { return stage_; }
    bool usage() const { return usage_; }

  private:
    std::string stage_;
    bool usage_;
};

struct PipelineConfig {
    std::string eebo_path;
    std::string coha_path;
    std::string gbooks_path;
    std::string intransitive_path;
    /// Optional extra verbs analysed as group B regardless of the thresholds.
    std::string group_b_path;
    std::string output_dir = "driftsel-out";

    SourceRanges ranges;
    YearRange overlap{1810, 2000};
    ScalingMode scaling_mode = ScalingMode::PooledPerYear;
    std::int64_t min_count = 200;
    double min_be_share = 0.5;
    BinningMode binning_mode = BinningMode::LogNBins;
    double alpha = 0.05;

    /// Trained model; when empty a model is trained from `training`.
    std::string tsc_model;
    TrainingConfig training;
    Hyperparams hyper;
    unsigned threads = 0;
};

/// Config keys holding file or directory paths.
inline const std::vector<std::string>& path_keys() {
    static const std::vector<std::string> keys{"eebo", "coha", "gbooks", "intransitive", "group_b", "output_dir", "tsc_model"};
    return keys;
}

/// Makes relative path values absolute against `base`.
inline void resolve_paths(KeyValueConfig& kv, const std::filesystem::path& base) {
    for (const auto& key : path_keys()) {
        if (const auto v = kv.get_string(key); !v.empty() && std::filesystem::path(v).is_relative()) {
            kv.set(key, (std::filesystem::absolute(base) / v).lexically_normal().string());
        }
    }
}

inline TrainingConfig training_config_from(const KeyValueConfig& kv, TrainingConfig c = {}) {
    c.n_range = {kv.get_number<std::int64_t>("tsc.n_min", c.n_range.lo), kv.get_number<std::int64_t>("tsc.n_max", c.n_range.hi)};
    c.s_range = {kv.get_number<double>("tsc.s_min", c.s_range.lo), kv.get_number<double>("tsc.s_max", c.s_range.hi)};
    c.t_range = {kv.get_number<std::int64_t>("tsc.t_min", c.t_range.lo), kv.get_number<std::int64_t>("tsc.t_max", c.t_range.hi)};
    c.x0_range = {kv.get_number<double>("tsc.x0_min", c.x0_range.lo), kv.get_number<double>("tsc.x0_max", c.x0_range.hi)};
    c.series_len = kv.get_number<std::size_t>("tsc.series_len", c.series_len);
    c.samples_per_class = kv.get_number<std::size_t>("tsc.samples_per_class", c.samples_per_class);
    c.seed = kv.get_number<std::uint64_t>("tsc.seed", c.seed);
    c.symmetric_sign = kv.get_bool("tsc.symmetric_sign", c.symmetric_sign);
    c.binning_mirror = kv.get_bool("tsc.binning_mirror", c.binning_mirror);
    c.mirror_tokens = {kv.get_number<std::int64_t>("tsc.mirror_tokens_min", c.mirror_tokens.lo),
                       kv.get_number<std::int64_t>("tsc.mirror_tokens_max", c.mirror_tokens.hi)};
    return c;
}

inline Hyperparams hyperparams_from(const KeyValueConfig& kv, Hyperparams h = {}) {
    h.epochs = kv.get_number<std::size_t>("tsc.epochs", h.epochs);
    h.batch_size = kv.get_number<std::size_t>("tsc.batch_size", h.batch_size);
    h.learning_rate = kv.get_number<double>("tsc.learning_rate", h.learning_rate);
    h.seed = kv.get_number<std::uint64_t>("tsc.train_seed", h.seed);
    return h;
}

inline void write_training_keys(KeyValueConfig& kv, const TrainingConfig& c, const Hyperparams& h) {
    kv.set("tsc.n_min", std::to_string(c.n_range.lo));
    kv.set("tsc.n_max", std::to_string(c.n_range.hi));
    kv.set("tsc.s_min", format_double(c.s_range.lo));
    kv.set("tsc.s_max", format_double(c.s_range.hi));
    kv.set("tsc.t_min", std::to_string(c.t_range.lo));
    kv.set("tsc.t_max", std::to_string(c.t_range.hi));
    kv.set("tsc.x0_min", format_double(c.x0_range.lo));
    kv.set("tsc.x0_max", format_double(c.x0_range.hi));
    kv.set("tsc.series_len", std::to_string(c.series_len));
    kv.set("tsc.samples_per_class", std::to_string(c.samples_per_class));
    kv.set("tsc.seed", std::to_string(c.seed));
    kv.set("tsc.symmetric_sign", c.symmetric_sign ? "true" : "false");
    kv.set("tsc.binning_mirror", c.binning_mirror ? "true" : "false");
    kv.set("tsc.mirror_tokens_min", std::to_string(c.mirror_tokens.lo));
    kv.set("tsc.mirror_tokens_max", std::to_string(c.mirror_tokens.hi));
    kv.set("tsc.epochs", std::to_string(h.epochs));
    kv.set("tsc.batch_size", std::to_string(h.batch_size));
    kv.set("tsc.learning_rate", format_double(h.learning_rate));
    kv.set("tsc.train_seed", std::to_string(h.seed));
}

inline PipelineConfig pipeline_config_from(const KeyValueConfig& kv) {
    PipelineConfig c;
    c.eebo_path = kv.get_string("eebo");
    c.coha_path = kv.get_string("coha");
    c.gbooks_path = kv.get_string("gbooks");
    c.intransitive_path = kv.get_string("intransitive");
    c.group_b_path = kv.get_string("group_b");
    c.output_dir = kv.get_string("output_dir", c.output_dir);
    c.ranges.eebo = kv.get_range("eebo_range", c.ranges.eebo);
    c.ranges.gbooks = kv.get_range("gbooks_range", c.ranges.gbooks);
    c.ranges.coha = kv.get_range("coha_range", c.ranges.coha);
    c.overlap = kv.get_range("overlap", c.overlap);
    const auto mode = kv.get_string("scaling_mode", "pooled");
    if (mode == "pooled") {
        c.scaling_mode = ScalingMode::PooledPerYear;
    } else if (mode == "per_verb") {
        c.scaling_mode = ScalingMode::PerVerb;
    } else {
        throw ConfigError("scaling_mode must be 'pooled' or 'per_verb', got '" + mode + "'");
    }
    c.min_count = kv.get_number<std::int64_t>("min_count", c.min_count);
    c.min_be_share = kv.get_number<double>("min_be_share", c.min_be_share);
    const auto binning = kv.get_string("binning", "log_n_bins");
    if (binning == "log_n_bins") {
        c.binning_mode = BinningMode::LogNBins;
    } else if (binning == "log_n_tokens") {
        c.binning_mode = BinningMode::LogNTokensPerBin;
    } else {
        throw ConfigError("binning must be 'log_n_bins' or 'log_n_tokens', got '" + binning + "'");
    }
    c.alpha = kv.get_number<double>("alpha", c.alpha);
    c.tsc_model = kv.get_string("tsc_model");
    c.training = training_config_from(kv);
    c.hyper = hyperparams_from(kv);
    c.threads = kv.get_number<unsigned>("threads", c.threads);
    return c;
}

inline KeyValueConfig to_key_values(const PipelineConfig& c) {
    KeyValueConfig kv;
    kv.set("eebo", c.eebo_path);
    kv.set("coha", c.coha_path);
    kv.set("gbooks", c.gbooks_path);
    kv.set("intransitive", c.intransitive_path);
    if (!c.group_b_path.empty()) {
        kv.set("group_b", c.group_b_path);
    }
    kv.set("output_dir", c.output_dir);
    kv.set("eebo_range", to_string(c.ranges.eebo));
    kv.set("gbooks_range", to_string(c.ranges.gbooks));
    kv.set("coha_range", to_string(c.ranges.coha));
    kv.set("overlap", to_string(c.overlap));
    kv.set("scaling_mode", c.scaling_mode == ScalingMode::PooledPerYear ? "pooled" : "per_verb");
    kv.set("min_count", std::to_string(c.min_count));
    kv.set("min_be_share", format_double(c.min_be_share));
    kv.set("binning", c.binning_mode == BinningMode::LogNBins ? "log_n_bins" : "log_n_tokens");
    kv.set("alpha", format_double(c.alpha));
    if (!c.tsc_model.empty()) {
        kv.set("tsc_model", c.tsc_model);
    }
    write_training_keys(kv, c.training, c.hyper);
    return kv;
}

/// Thresholds and paths within their documented bounds.
inline void validate(const PipelineConfig& c) {
    const std::vector<std::pair<std::string, std::string>> paths{
        {"eebo", c.eebo_path}, {"coha", c.coha_path}, {"gbooks", c.gbooks_path}, {"intransitive", c.intransitive_path}};
    std::set<std::string> seen;
    for (const auto& [key, path] : paths) {
        if (path.empty()) {
            throw ConfigError("missing required config key '" + key + "'");
        }
        if (!seen.insert(std::filesystem::weakly_canonical(path).string()).second) {
            throw ConfigError("input paths must be distinct; '" + key + "' repeats '" + path + "'");
        }
    }
    if (c.min_count < 1) {
        throw ConfigError("min_count must be at least 1");
    }
    if (!(c.min_be_share >= 0.0 && c.min_be_share <= 1.0)) {
        throw ConfigError("min_be_share must lie in [0, 1]");
    }
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) {
        throw ConfigError("alpha must lie in (0, 1)");
    }
    for (const auto* r : {&c.ranges.eebo, &c.ranges.gbooks, &c.ranges.coha, &c.overlap}) {
        if (r->empty()) {
            throw ConfigError("empty year range " + to_string(*r));
        }
    }
    if (!(c.ranges.eebo.last < c.ranges.gbooks.first && c.ranges.gbooks.last < c.ranges.coha.first)) {
        throw ConfigError("source ranges must be ordered and disjoint (EEBO < GBOOKS < COHA)");
    }
    if (c.output_dir.empty()) {
        throw ConfigError("output_dir must not be empty");
    }
    if (c.tsc_model.empty()) {
        validate(c.training);
    }
}

/// Exclusive claim on an output directory for the lifetime of the object.
class DirectoryLock {
  public:
    explicit DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".driftsel.lock") {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (f == nullptr) {
            throw Error("output directory '" + dir.string() + "' is locked by another run (" + path_.string() + ")");
        }
        std::fclose(f);
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;
    ~DirectoryLock() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }

  private:
    std::filesystem::path path_;
};

struct VerbResult {
    std::string verb;
    std::string group;
    BinnedSeries series;
    FitReport fit;
    Classification classification;
    bool classified = false;
};

struct PipelineResult {
    ScalingEstimate scaling;
    std::size_t dropped_rows = 0;
    std::vector<VerbResult> verbs;
    std::string model_hash;
};

namespace detail {

template <typename F>
auto run_stage(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const ConfigError& e) {
        throw StageError(stage, e.what(), true);
    } catch (const std::exception& e) {
        throw StageError(stage, e.what(), false);
    }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error("cannot write '" + path.string() + "'");
    }
    return os;
}

} // namespace detail

inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    auto note = [&](const std::string& msg) {
        if (log != nullptr) {
            *log << msg << '\n';
        }
    };
    detail::run_stage("config", [&] { validate(cfg); });

    const std::filesystem::path out_dir = cfg.output_dir;
    detail::run_stage("output", [&] { std::filesystem::create_directories(out_dir / "binned"); });
    std::optional<DirectoryLock> lock;
    detail::run_stage("output", [&] { lock.emplace(out_dir); });

    PipelineResult result;
    SourceRecords sources;
    std::vector<RelFreqRecord> ratio;
    std::set<std::string> intransitive;
    std::set<std::string> group_b;
    detail::run_stage("ingest", [&] {
        sources.eebo = load_counts(cfg.eebo_path).records;
        sources.coha = load_counts(cfg.coha_path).records;
        ratio = load_rel_freqs(cfg.gbooks_path).records;
        intransitive = load_word_list(cfg.intransitive_path);
        if (!cfg.group_b_path.empty()) {
            group_b = load_word_list(cfg.group_b_path);
        }
        result.scaling = estimate_scaling_constant(sources.coha, ratio, cfg.overlap, cfg.scaling_mode);
        YearRange all_years{std::numeric_limits<int>::min(), std::numeric_limits<int>::max()};
        sources.gbooks = scale_to_counts(ratio, result.scaling, all_years);
    });
    note("scaling constant C = " + format_double(result.scaling.constant) + " over " +
         std::to_string(result.scaling.n_years_used) + " overlap years");

    std::vector<std::string> group_a = detail::run_stage(
        "select", [&] { return select_target_verbs(sources, intransitive, cfg.min_count, cfg.min_be_share); });
    if (group_a.empty()) {
        throw StageError("select", "no target verbs remain after filtering (min_count=" + std::to_string(cfg.min_count) +
                                       ", min_be_share=" + format_double(cfg.min_be_share) + ")",
                         true);
    }
    std::vector<std::pair<std::string, std::string>> targets;
    for (const auto& v : group_a) {
        targets.emplace_back(v, "A");
    }
    for (const auto& v : group_b) {
        if (std::find(group_a.begin(), group_a.end(), v) == group_a.end()) {
            targets.emplace_back(v, "B");
        }
    }
    note("target verbs: " + std::to_string(group_a.size()) + " in group A, " +
         std::to_string(targets.size() - group_a.size()) + " in group B");

    MergeResult merged = detail::run_stage("merge", [&] {
        const YearRange keep = cfg.ranges.gbooks;
        return merge_sources(sources.eebo, scale_to_counts(ratio, result.scaling, keep), sources.coha, cfg.ranges);
    });
    result.dropped_rows = merged.dropped;
    if (merged.dropped > 0) {
        note("warning: " + std::to_string(merged.dropped) + " row(s) outside their source's range were dropped");
    }

    TscModel model = detail::run_stage("tsc", [&] {
        if (!cfg.tsc_model.empty()) {
            return load_model(cfg.tsc_model);
        }
        note("no tsc_model given; training a model from the tsc.* settings");
        auto trained = train_from_config(cfg.training, cfg.hyper, cfg.threads).model;
        save_model((out_dir / "model.tscm").string(), trained);
        return trained;
    });
    result.model_hash = model.meta.config_hash;

    for (const auto& [verb, group] : targets) {
        VerbResult vr;
        vr.verb = verb;
        vr.group = group;
        vr.series = detail::run_stage("bin", [&] {
            return bin_equal_count(records_for(merged.records, verb), BinningOptions{cfg.binning_mode});
        });
        vr.fit = detail::run_stage("fit", [&] {
            try {
                return fit_test(vr.series, cfg.alpha);
            } catch (const SeriesError& e) {
                note("fit: " + verb + ": " + e.what());
                FitReport r;
                r.verb = verb;
                r.alpha = cfg.alpha;
                r.t_stat = r.p_value = r.cohens_d = r.power = std::numeric_limits<double>::quiet_NaN();
                r.verdict = FitVerdict::Undefined;
                return r;
            }
        });
        if (vr.series.size() >= 2) {
            vr.classification = detail::run_stage("tsc", [&] { return classify(model, vr.series); });
            vr.classified = true;
        } else {
            note("tsc: " + verb + ": too few bins to classify");
        }
        result.verbs.push_back(std::move(vr));
    }

    detail::run_stage("report", [&] {
        for (const auto& vr : result.verbs) {
            auto os = detail::open_output(out_dir / "binned" / (vr.verb + ".tsv"));
            write_binned(os, vr.series);
        }
        {
            auto os = detail::open_output(out_dir / "fit_report.tsv");
            os << kFitHeader << '\n';
            for (const auto& vr : result.verbs) {
                write_fit_row(os, vr.fit);
            }
        }
        {
            auto os = detail::open_output(out_dir / "classification_report.tsv");
            os << kClassificationHeader << '\n';
            for (const auto& vr : result.verbs) {
                if (vr.classified) {
                    write_classification_row(os, vr.classification, vr.group);
                }
            }
        }
        {
            auto os = detail::open_output(out_dir / "manifest.txt");
            const KeyValueConfig kv = to_key_values(cfg);
            std::ostringstream body;
            kv.write(body);
            os << "# driftsel " << DRIFTSEL_VERSION << " run manifest; usable as --config to reproduce this run\n";
            os << "# config_hash = " << hex64(fnv1a(body.str())) << '\n';
            os << "# model_config_hash = " << result.model_hash << '\n';
            os << "# scaling_constant = " << format_double(result.scaling.constant) << '\n';
            os << "# scaling_years_used = " << result.scaling.n_years_used << '\n';
            os << "# volume_proxy = " << format_double(result.scaling.volume_proxy) << '\n';
            os << "# dropped_rows = " << result.dropped_rows << '\n';
            os << body.str();
        }
    });
    return result;
}

} // namespace driftsel

#endif
