#ifndef DRIFTSEL_TSC_HPP
#define DRIFTSEL_TSC_HPP

// Simulation-trained drift/selection time-series classifier.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "driftsel/binning.hpp"
#include "driftsel/error.hpp"
#include "driftsel/format.hpp"
#include "driftsel/model_wf.hpp"
#include "driftsel/nn.hpp"
#include "driftsel/parallel.hpp"
#include "driftsel/random.hpp"

namespace driftsel {

template <typename T>
struct Interval {
    T lo{};
    T hi{};
    bool valid() const { return lo <= hi; }
};

struct TrainingConfig {
    Interval<std::int64_t> n_range{100, 5000};
    Interval<double> s_range{0.005, 0.2};
    Interval<std::int64_t> t_range{50, 500};
    Interval<double> x0_range{0.1, 0.9};
    std::size_t series_len = 25;
    std::size_t samples_per_class = 25000;
    std::uint64_t seed = 20240611;
    /// Draw a random sign for s; otherwise selection always favours the focal variant.
    bool symmetric_sign = true;
    /// Pass simulations through token sampling and equal-count binning.
    bool binning_mirror = false;
    /// Token budget per simulated series when binning_mirror is on.
    Interval<std::int64_t> mirror_tokens{1000, 20000};
};

inline void validate(const TrainingConfig& c) {
    auto fail = [](const std::string& what) { throw ConfigError("training config: " + what); };
    if (!c.n_range.valid() || c.n_range.lo < 2) fail("population size range must satisfy 2 <= n_min <= n_max");
    if (!c.s_range.valid() || !(c.s_range.lo > 0.0) || !(c.s_range.hi < 1.0)) fail("|s| range must satisfy 0 < s_min <= s_max < 1");
    if (!c.t_range.valid() || c.t_range.lo < 1) fail("generation range must satisfy 1 <= t_min <= t_max");
    if (!c.x0_range.valid() || c.x0_range.lo < 0.0 || c.x0_range.hi > 1.0) fail("x0 range must lie within [0, 1]");
    if (c.series_len < 4) fail("series_len must be at least 4");
    if (c.samples_per_class < 1) fail("samples_per_class must be at least 1");
    if (c.binning_mirror && (!c.mirror_tokens.valid() || c.mirror_tokens.lo < 4)) fail("mirror token range must satisfy 4 <= min <= max");
}

/// Canonical text of a config; hashed into model metadata.
inline std::string describe(const TrainingConfig& c) {
    std::ostringstream os;
    os << "n=" << c.n_range.lo << ".." << c.n_range.hi << " s=" << format_double(c.s_range.lo) << ".."
       << format_double(c.s_range.hi) << " t=" << c.t_range.lo << ".." << c.t_range.hi
       << " x0=" << format_double(c.x0_range.lo) << ".." << format_double(c.x0_range.hi) << " len=" << c.series_len
       << " per_class=" << c.samples_per_class << " seed=" << c.seed << " symmetric=" << c.symmetric_sign
       << " mirror=" << c.binning_mirror;
    if (c.binning_mirror) {
        os << " tokens=" << c.mirror_tokens.lo << ".." << c.mirror_tokens.hi;
    }
    return os.str();
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    auto [p, ec] = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, p);
    return std::string(16 - s.size(), '0') + s;
}

// ---------------------------------------------------------------------------
// Resampling

/// Maps a series onto L equispaced points of its affinely normalized time
/// axis by linear interpolation; values are clamped to [0, 1].
inline std::vector<double> resample_to_length(std::span<const double> times, std::span<const double> values,
                                              std::size_t length) {
    if (times.size() != values.size()) {
        throw SeriesError("times and values differ in length");
    }
    if (times.size() < 2) {
        throw SeriesError("resampling needs at least 2 points, got " + std::to_string(times.size()));
    }
    if (length < 2) {
        throw SeriesError("target length must be at least 2");
    }
    const double t0 = times.front();
    const double span = times.back() - t0;
    if (!(span > 0.0)) {
        throw SeriesError("resampling needs a non-degenerate time axis");
    }
    std::vector<double> tn(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        tn[i] = (times[i] - t0) / span;
        if (i > 0 && tn[i] < tn[i - 1]) {
            throw SeriesError("times must be non-decreasing");
        }
    }
    std::vector<double> out(length);
    std::size_t seg = 0;
    for (std::size_t j = 0; j < length; ++j) {
        const double u = static_cast<double>(j) / static_cast<double>(length - 1);
        while (seg + 2 < tn.size() && tn[seg + 1] < u) {
            ++seg;
        }
        const double gap = tn[seg + 1] - tn[seg];
        const double w = gap > 0.0 ? std::clamp((u - tn[seg]) / gap, 0.0, 1.0) : 1.0;
        const double v = (1.0 - w) * values[seg] + w * values[seg + 1];
        out[j] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

inline std::vector<double> resample_to_length(const BinnedSeries& series, std::size_t length) {
    return resample_to_length(series.times, series.freq_have, length);
}

inline std::vector<double> resample_to_length(const Trajectory& traj, std::size_t length) {
    std::vector<double> times(traj.freqs.size());
    std::iota(times.begin(), times.end(), 0.0);
    return resample_to_length(times, traj.freqs, length);
}

// ---------------------------------------------------------------------------
// Training data

enum class SeriesClass : int { Drift = 0, Selection = 1 };

struct SampleInfo {
    std::int64_t population_size = 0;
    double selection_coeff = 0.0;
    std::int64_t generations = 0;
    double initial_freq = 0.0;
    double final_freq = 0.0;
};

struct Dataset {
    std::size_t length = 0;
    std::vector<double> series; // size() * length values, series after series
    std::vector<int> labels;
    std::vector<SampleInfo> info;
    /// Simulations discarded and redrawn because they carried no signal.
    std::size_t redraws = 0;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {series.data() + i * length, length}; }
};

namespace detail {

/// Token counts per generation drawn from a trajectory: each of `tokens`
/// tokens falls in a uniformly chosen generation and is HAVE with that
/// generation's frequency.
inline std::vector<CountRecord> sample_tokens(const Trajectory& traj, std::int64_t tokens, Rng& rng) {
    const auto last = static_cast<std::int64_t>(traj.freqs.size()) - 1;
    std::vector<std::int64_t> be(traj.freqs.size(), 0);
    std::vector<std::int64_t> have(traj.freqs.size(), 0);
    for (std::int64_t i = 0; i < tokens; ++i) {
        const auto g = static_cast<std::size_t>(uniform_int(rng, 0, last));
        if (uniform01(rng) < traj.freqs[g]) {
            ++have[g];
        } else {
            ++be[g];
        }
    }
    std::vector<CountRecord> out;
    for (std::size_t g = 0; g < traj.freqs.size(); ++g) {
        if (be[g] > 0) out.push_back({"simulated", Variant::Be, static_cast<int>(g), be[g], Source::Eebo});
        if (have[g] > 0) out.push_back({"simulated", Variant::Have, static_cast<int>(g), have[g], Source::Eebo});
    }
    return out;
}

struct DrawnSample {
    std::vector<double> series;
    SampleInfo info;
    std::size_t redraws = 0;
};

inline DrawnSample draw_sample(const TrainingConfig& c, SeriesClass cls, Rng& rng) {
    DrawnSample out;
    const double log_lo = std::log(c.s_range.lo);
    const double log_hi = std::log(c.s_range.hi);
    while (true) {
        WfParams p;
        p.population_size = uniform_int(rng, c.n_range.lo, c.n_range.hi);
        p.generations = uniform_int(rng, c.t_range.lo, c.t_range.hi);
        p.initial_freq = uniform(rng, c.x0_range.lo, c.x0_range.hi);
        if (cls == SeriesClass::Selection) {
            const double magnitude = std::exp(uniform(rng, log_lo, log_hi));
            const bool negative = c.symmetric_sign && uniform01(rng) < 0.5;
            p.selection_coeff = negative ? -magnitude : magnitude;
        }
        const Trajectory traj = simulate(p, rng);
        if (traj.absorbed_at && *traj.absorbed_at == 0) {
            ++out.redraws;
            continue;
        }
        if (c.binning_mirror) {
            const auto tokens = uniform_int(rng, c.mirror_tokens.lo, c.mirror_tokens.hi);
            const BinnedSeries binned = bin_equal_count(sample_tokens(traj, tokens, rng));
            if (binned.size() < 2) {
                ++out.redraws;
                continue;
            }
            out.series = resample_to_length(binned, c.series_len);
        } else {
            out.series = resample_to_length(traj, c.series_len);
        }
        out.info = {p.population_size, p.selection_coeff, p.generations, traj.freqs.front(), traj.freqs.back()};
        return out;
    }
}

} // namespace detail

/// Balanced drift/selection set: sample i (drift for i < samples_per_class,
/// selection after) is drawn from substream i of config.seed, so the result
/// does not depend on `threads`.
inline Dataset generate_dataset(const TrainingConfig& config, unsigned threads = 0) {
    validate(config);
    const std::size_t per_class = config.samples_per_class;
    const std::size_t total = 2 * per_class;
    std::vector<detail::DrawnSample> drawn(total);
    parallel_for(total, threads, [&](std::size_t i) {
        Rng rng = make_rng(config.seed, i);
        drawn[i] = detail::draw_sample(config, i < per_class ? SeriesClass::Drift : SeriesClass::Selection, rng);
    });
    Dataset ds;
    ds.length = config.series_len;
    ds.series.reserve(total * ds.length);
    for (std::size_t i = 0; i < total; ++i) {
        ds.series.insert(ds.series.end(), drawn[i].series.begin(), drawn[i].series.end());
        ds.labels.push_back(i < per_class ? 0 : 1);
        ds.info.push_back(drawn[i].info);
        ds.redraws += drawn[i].redraws;
    }
    return ds;
}

/// Copy of `ds` with labels permuted at random; a chance-level control.
inline Dataset shuffle_labels(Dataset ds, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x5eed);
    for (std::size_t i = ds.labels.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
        std::swap(ds.labels[i - 1], ds.labels[j]);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Model

struct ModelMeta {
    std::string config_hash;
    std::string config;
    std::size_t epochs = 0;
    std::size_t best_epoch = 0;
    double validation_accuracy = 0.0;
};

struct TscModel {
    nn::Network<float> network;
    /// Inputs are raw frequencies in [0, 1]; no further scaling is applied.
    std::string normalization = "raw";
    ModelMeta meta;

    std::size_t input_length() const { return network.architecture().input_length; }
};

struct Hyperparams {
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double validation_fraction = 0.2;
    std::uint64_t seed = 7;
    nn::Architecture architecture{};
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_accuracy = 0.0;
};

struct TrainResult {
    TscModel model;
    std::vector<EpochStats> history;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;
};

/// Per-series probability of the selection class for rows of `ds` selected by `indices`.
inline std::vector<double> predict_selection(nn::Network<float>& net, const Dataset& ds,
                                             const std::vector<std::size_t>& indices) {
    constexpr std::size_t chunk = 256;
    std::vector<double> out;
    out.reserve(indices.size());
    std::vector<float> buf;
    for (std::size_t start = 0; start < indices.size(); start += chunk) {
        const std::size_t count = std::min(chunk, indices.size() - start);
        buf.clear();
        for (std::size_t i = 0; i < count; ++i) {
            for (double v : ds.row(indices[start + i])) {
                buf.push_back(static_cast<float>(v));
            }
        }
        const auto probs = net.predict(buf, count);
        for (std::size_t i = 0; i < count; ++i) {
            out.push_back(probs[i * 2 + 1]);
        }
    }
    return out;
}

/// Fraction of rows whose 0.5-thresholded selection probability matches the label.
inline double accuracy(nn::Network<float>& net, const Dataset& ds, const std::vector<std::size_t>& indices) {
    if (indices.empty()) {
        return 0.0;
    }
    const auto p = predict_selection(net, ds, indices);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        correct += static_cast<std::size_t>((p[i] > 0.5 ? 1 : 0) == ds.labels[indices[i]]);
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

inline double accuracy(nn::Network<float>& net, const Dataset& ds) {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    return accuracy(net, ds, all);
}

/// Mini-batch Adam on softmax cross-entropy with a stratified hold-out set.
/// Returns the weights of the epoch with the best hold-out accuracy.
/// Deterministic in (dataset, hyperparams).
inline TrainResult train(const Dataset& ds, const Hyperparams& hp,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
    if (ds.size() == 0) {
        throw TrainingError("empty training set");
    }
    if (!(hp.learning_rate > 0.0) || hp.epochs < 1 || hp.batch_size < 1) {
        throw ParameterError("learning rate must be > 0, epochs and batch size >= 1");
    }
    if (!(hp.validation_fraction > 0.0 && hp.validation_fraction < 1.0)) {
        throw ParameterError("validation fraction must lie in (0, 1)");
    }
    if (ds.length != hp.architecture.input_length) {
        throw ParameterError("dataset series length " + std::to_string(ds.length) + " does not match network input " +
                             std::to_string(hp.architecture.input_length));
    }
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] != 0 && ds.labels[i] != 1) {
            throw TrainingError("labels must be 0 or 1");
        }
        by_class[ds.labels[i]].push_back(i);
    }
    if (by_class[0].empty() || by_class[1].empty()) {
        throw TrainingError("training set must contain both classes");
    }

    Rng split_rng = make_rng(hp.seed, 1);
    auto shuffle = [](std::vector<std::size_t>& v, Rng& rng) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    };
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    for (auto& cls : by_class) {
        shuffle(cls, split_rng);
        const auto n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(hp.validation_fraction * static_cast<double>(cls.size()))));
        if (n_val >= cls.size()) {
            throw TrainingError("each class needs at least 2 samples for a hold-out split");
        }
        val_idx.insert(val_idx.end(), cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_idx.insert(train_idx.end(), cls.begin() + static_cast<std::ptrdiff_t>(n_val), cls.end());
    }
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    TrainResult result;
    result.train_size = train_idx.size();
    result.validation_size = val_idx.size();

    nn::Network<float> net(hp.architecture, substream_seed(hp.seed, 2));
    nn::Network<float> best = net;
    double best_acc = -1.0;
    std::size_t best_epoch = 0;
    nn::Adam<float> opt(net.parameters(), hp.learning_rate);
    Rng order_rng = make_rng(hp.seed, 3);

    std::vector<float> batch_x;
    std::vector<int> batch_y;
    for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
        shuffle(train_idx, order_rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += hp.batch_size) {
            const std::size_t count = std::min(hp.batch_size, train_idx.size() - start);
            if (count < 2 && batches > 0) {
                break; // batch statistics are meaningless for a single series
            }
            batch_x.clear();
            batch_y.clear();
            for (std::size_t i = 0; i < count; ++i) {
                const auto idx = train_idx[start + i];
                for (double v : ds.row(idx)) {
                    batch_x.push_back(static_cast<float>(v));
                }
                batch_y.push_back(ds.labels[idx]);
            }
            net.zero_grad();
            nn::Tape<float> tape;
            const auto logits = net.forward(tape, batch_x, count, true);
            const auto loss = nn::softmax_cross_entropy<float>(tape, logits, batch_y);
            const double loss_value = tape[loss].value[0];
            if (!std::isfinite(loss_value)) {
                throw TrainingError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batches) + " (learning rate " +
                                    format_double(hp.learning_rate) + ")");
            }
            tape.backward(loss);
            opt.step();
            loss_sum += loss_value;
            ++batches;
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
        stats.validation_accuracy = accuracy(net, ds, val_idx);
        result.history.push_back(stats);
        if (on_epoch) {
            on_epoch(stats);
        }
        if (stats.validation_accuracy > best_acc) {
            best_acc = stats.validation_accuracy;
            best_epoch = epoch;
            best = net;
        }
    }
    result.model.network = best;
    result.model.meta.epochs = hp.epochs;
    result.model.meta.best_epoch = best_epoch;
    result.model.meta.validation_accuracy = best_acc;
    return result;
}

/// Simulates the training set for `config` and trains on it; the model's
/// metadata records the config and its hash.
inline TrainResult train_from_config(const TrainingConfig& config, Hyperparams hp, unsigned threads = 0,
                                     const std::function<void(const EpochStats&)>& on_epoch = {}) {
    validate(config);
    hp.architecture.input_length = config.series_len;
    const Dataset ds = generate_dataset(config, threads);
    TrainResult result = train(ds, hp, on_epoch);
    result.model.meta.config = describe(config);
    result.model.meta.config_hash = hex64(fnv1a(result.model.meta.config));
    return result;
}

enum class TscVerdict { Drift, Selection };

inline std::string_view to_string(TscVerdict v) {
    return v == TscVerdict::Selection ? "SELECTION" : "DRIFT";
}

/// Probability above this is reported as selection.
inline constexpr double kSelectionThreshold = 0.5;

struct Classification {
    std::string verb;
    double probability = 0.0;
    double drift_probability = 1.0;
    TscVerdict verdict = TscVerdict::Drift;
};

inline Classification classify_values(TscModel& model, std::string verb, const std::vector<double>& resampled) {
    std::vector<float> x(resampled.begin(), resampled.end());
    const auto p = model.network.predict(x, 1);
    Classification c;
    c.verb = std::move(verb);
    c.drift_probability = p[0];
    c.probability = p[1];
    c.verdict = c.probability > kSelectionThreshold ? TscVerdict::Selection : TscVerdict::Drift;
    return c;
}

inline Classification classify(TscModel& model, const BinnedSeries& series) {
    if (series.size() < 2) {
        throw SeriesError("series '" + series.verb + "' is too short to classify (" + std::to_string(series.size()) +
                          " point(s))");
    }
    return classify_values(model, series.verb, resample_to_length(series, model.input_length()));
}

inline constexpr std::string_view kClassificationHeader = "verb\tgroup\tprobability\tverdict";

inline void write_classification_row(std::ostream& os, const Classification& c, std::string_view group) {
    os << c.verb << '\t' << group << '\t' << format_fixed(c.probability, 4) << '\t' << to_string(c.verdict) << '\n';
}

// ---------------------------------------------------------------------------
// Model file
//
//   DRIFTSEL-TSC-MODEL 1
//   input_length <L>
//   classes <K>
//   normalization raw
//   block <channels> <kernel>        (one line per convolution block)
//   meta <key> <value...>
//   tensor <name> <count>
//   <count hexadecimal floats, one per line>
//   end

inline constexpr std::string_view kModelMagic = "DRIFTSEL-TSC-MODEL";
inline constexpr int kModelVersion = 1;

namespace detail {

inline std::string hexfloat(float v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
    return std::string(buf, p);
}

inline void write_tensor(std::ostream& os, const std::string& name, const std::vector<float>& values) {
    os << "tensor " << name << ' ' << values.size() << '\n';
    for (float v : values) {
        os << hexfloat(v) << '\n';
    }
}

} // namespace detail

inline void save_model(std::ostream& os, TscModel& model) {
    const auto& arch = model.network.architecture();
    os << kModelMagic << ' ' << kModelVersion << '\n';
    os << "input_length " << arch.input_length << '\n';
    os << "classes " << arch.classes << '\n';
    os << "normalization " << model.normalization << '\n';
    for (const auto& b : arch.blocks) {
        os << "block " << b.channels << ' ' << b.kernel << '\n';
    }
    os << "meta config_hash " << model.meta.config_hash << '\n';
    os << "meta config " << model.meta.config << '\n';
    os << "meta epochs " << model.meta.epochs << '\n';
    os << "meta best_epoch " << model.meta.best_epoch << '\n';
    os << "meta validation_accuracy " << format_double(model.meta.validation_accuracy) << '\n';
    for (auto* p : model.network.parameters()) {
        detail::write_tensor(os, p->name, p->value);
    }
    auto& norms = model.network.norms();
    for (std::size_t i = 0; i < norms.size(); ++i) {
        detail::write_tensor(os, "bn" + std::to_string(i) + ".running_mean", norms[i].running_mean);
        detail::write_tensor(os, "bn" + std::to_string(i) + ".running_var", norms[i].running_var);
    }
    os << "end\n";
}

inline void save_model(const std::string& path, TscModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error("cannot write model file '" + path + "'");
    }
    save_model(os, model);
}

inline TscModel load_model(std::istream& in) {
    auto fail = [](const std::string& what) -> TscModel { throw ModelFormatError("model file: " + what); };
    std::string line;
    if (!std::getline(in, line)) {
        return fail("empty file");
    }
    {
        std::istringstream head(line);
        std::string magic;
        int version = 0;
        head >> magic >> version;
        if (magic != kModelMagic) {
            return fail("bad magic header");
        }
        if (version != kModelVersion) {
            return fail("unsupported version " + std::to_string(version));
        }
    }
    nn::Architecture arch;
    arch.blocks.clear();
    TscModel model;
    std::vector<std::pair<std::string, std::vector<float>>> tensors;
    bool ended = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "input_length") {
            ls >> arch.input_length;
        } else if (key == "classes") {
            ls >> arch.classes;
        } else if (key == "normalization") {
            ls >> model.normalization;
            if (model.normalization != "raw") {
                return fail("unsupported normalization '" + model.normalization + "'");
            }
        } else if (key == "block") {
            nn::ConvBlockSpec b;
            ls >> b.channels >> b.kernel;
            arch.blocks.push_back(b);
        } else if (key == "meta") {
            std::string name;
            ls >> name;
            std::string rest;
            std::getline(ls >> std::ws, rest);
            if (name == "config_hash") model.meta.config_hash = rest;
            else if (name == "config") model.meta.config = rest;
            else if (name == "epochs") model.meta.epochs = static_cast<std::size_t>(std::stoull(rest));
            else if (name == "best_epoch") model.meta.best_epoch = static_cast<std::size_t>(std::stoull(rest));
            else if (name == "validation_accuracy") model.meta.validation_accuracy = std::stod(rest);
        } else if (key == "tensor") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            std::vector<float> values(count);
            for (std::size_t i = 0; i < count; ++i) {
                if (!std::getline(in, line)) {
                    return fail("truncated tensor " + name);
                }
                const auto t = trim(line);
                auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), values[i], std::chars_format::hex);
                if (ec != std::errc{} || p != t.data() + t.size() || !std::isfinite(values[i])) {
                    return fail("bad value in tensor " + name);
                }
            }
            tensors.emplace_back(name, std::move(values));
        } else if (key == "end") {
            ended = true;
            break;
        } else if (!key.empty()) {
            return fail("unknown record '" + key + "'");
        }
    }
    if (!ended) {
        return fail("missing end marker");
    }
    if (arch.blocks.empty()) {
        return fail("no convolution blocks");
    }
    model.network = nn::Network<float>(arch, 0);
    auto take = [&](const std::string& name, std::vector<float>& dst) {
        for (auto& [n, v] : tensors) {
            if (n == name) {
                if (v.size() != dst.size()) {
                    fail("tensor " + name + " has " + std::to_string(v.size()) + " values, expected " +
                         std::to_string(dst.size()));
                }
                dst = v;
                return;
            }
        }
        fail("missing tensor " + name);
    };
    for (auto* p : model.network.parameters()) {
        take(p->name, p->value);
    }
    auto& norms = model.network.norms();
    for (std::size_t i = 0; i < norms.size(); ++i) {
        take("bn" + std::to_string(i) + ".running_mean", norms[i].running_mean);
        take("bn" + std::to_string(i) + ".running_var", norms[i].running_var);
    }
    return model;
}

inline TscModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ModelFormatError("cannot open model file '" + path + "'");
    }
    return load_model(in);
}

} // namespace driftsel

#endif
