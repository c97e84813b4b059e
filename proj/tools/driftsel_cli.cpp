#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "driftsel.hpp"

namespace fs = std::filesystem;
using namespace driftsel;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::ofstream open_out(const std::string& path) {
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error("cannot write '" + path + "'");
    }
    return os;
}

// Writes to `path`, or stdout when it is empty or "-".
template <typename F>
void emit(const std::string& path, F&& body) {
    if (path.empty() || path == "-") {
        body(std::cout);
        std::cout.flush();
    } else {
        auto os = open_out(path);
        body(os);
    }
}

// Relative paths in the file are taken from the file's directory, those in
// overrides from the working directory.
KeyValueConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    KeyValueConfig kv;
    if (!path.empty()) {
        kv = KeyValueConfig::load(path);
        resolve_paths(kv, fs::path(path).parent_path());
    }
    KeyValueConfig extra;
    for (const auto& o : overrides) {
        extra.apply_override(o);
    }
    resolve_paths(extra, fs::current_path());
    for (const auto& [k, v] : extra.values()) {
        kv.set(k, v);
    }
    return kv;
}

YearRange parse_range(const std::string& key, const std::string& text) {
    KeyValueConfig kv;
    kv.set(key, text);
    return kv.get_range(key, {});
}

BinningMode parse_binning(const std::string& text) {
    if (text == "log_n_bins") return BinningMode::LogNBins;
    if (text == "log_n_tokens") return BinningMode::LogNTokensPerBin;
    throw ConfigError("--binning must be 'log_n_bins' or 'log_n_tokens'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Drift versus selection analysis of variant frequency series"};
    app.set_version_flag("--version", std::string(DRIFTSEL_VERSION));
    app.require_subcommand(1);

    // simulate
    WfParams sim;
    sim.population_size = 100;
    sim.selection_coeff = 0.0;
    sim.initial_freq = 0.5;
    sim.generations = 100;
    sim.seed = 1;
    std::string sim_out;
    std::size_t sim_replicates = 1;
    auto* simulate = app.add_subcommand("simulate", "Simulate Wright-Fisher trajectories");
    simulate->add_option("--n", sim.population_size, "Population size")->capture_default_str();
    simulate->add_option("--s", sim.selection_coeff, "Selection coefficient")->capture_default_str();
    simulate->add_option("--x0", sim.initial_freq, "Initial frequency of the focal variant")->capture_default_str();
    simulate->add_option("--t", sim.generations, "Generations")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    simulate->add_option("--replicates", sim_replicates, "Replicates; each is written to its own file")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    simulate->add_option("--out", sim_out, "Output file (stdout if omitted); with replicates, a file prefix");

    // ingest
    std::string ing_eebo, ing_coha, ing_gbooks, ing_out, ing_eebo_range = "1473-1700", ing_gbooks_range = "1701-1810",
                                                         ing_coha_range = "1811-2009", ing_overlap = "1810-2000";
    bool ing_per_verb = false;
    auto* ingest = app.add_subcommand("ingest", "Scale the ratio source and merge all sources into one count table");
    ingest->add_option("--eebo", ing_eebo, "Early count source (TSV)")->required();
    ingest->add_option("--coha", ing_coha, "Late count source (TSV)")->required();
    ingest->add_option("--gbooks", ing_gbooks, "Relative-frequency source (TSV)")->required();
    ingest->add_option("--eebo-range", ing_eebo_range)->capture_default_str();
    ingest->add_option("--gbooks-range", ing_gbooks_range)->capture_default_str();
    ingest->add_option("--coha-range", ing_coha_range)->capture_default_str();
    ingest->add_option("--overlap", ing_overlap, "Years used to estimate the scaling constant")->capture_default_str();
    ingest->add_flag("--per-verb", ing_per_verb, "Average per-verb ratios instead of pooling per year");
    ingest->add_option("--out", ing_out, "Merged count table (stdout if omitted)");

    // bin
    std::string bin_in, bin_out, bin_mode = "log_n_bins";
    std::vector<std::string> bin_verbs;
    auto* bin = app.add_subcommand("bin", "Equal-count binning of merged counts");
    bin->add_option("--input", bin_in, "Merged count table")->required();
    bin->add_option("--verb", bin_verbs, "Verb(s) to bin; all verbs if omitted");
    bin->add_option("--binning", bin_mode, "log_n_bins or log_n_tokens")->capture_default_str();
    bin->add_option("--out", bin_out, "Binned series TSV (stdout if omitted)");

    // fit
    std::string fit_in, fit_out;
    double fit_alpha = 0.05;
    auto* fit = app.add_subcommand("fit", "Frequency increment test on binned series");
    fit->add_option("--input", fit_in, "Binned series TSV")->required();
    fit->add_option("--alpha", fit_alpha)->capture_default_str();
    fit->add_option("--out", fit_out, "Report (stdout if omitted)");

    // tsc-train
    std::string tr_config, tr_model, tr_metrics;
    std::vector<std::string> tr_set;
    unsigned tr_threads = 0;
    bool tr_quiet = false;
    auto* tsc_train = app.add_subcommand("tsc-train", "Simulate a training set and train the series classifier");
    tsc_train->add_option("--config", tr_config, "Config file with tsc.* keys");
    tsc_train->add_option("--set", tr_set, "Override a config key (key=value)");
    tsc_train->add_option("--model", tr_model, "Output model file")->required();
    tsc_train->add_option("--metrics", tr_metrics, "Output metrics (JSON)");
    tsc_train->add_option("--threads", tr_threads, "Simulation threads (0 = all cores)");
    tsc_train->add_flag("--quiet", tr_quiet, "No per-epoch progress");

    // classify
    std::string cl_model, cl_in, cl_out, cl_group = "A";
    auto* classify_cmd = app.add_subcommand("classify", "Classify binned series as drift or selection");
    classify_cmd->add_option("--model", cl_model, "Trained model file")->required();
    classify_cmd->add_option("--input", cl_in, "Binned series TSV")->required();
    classify_cmd->add_option("--group", cl_group, "Group label written to the report")->capture_default_str();
    classify_cmd->add_option("--out", cl_out, "Report (stdout if omitted)");

    // pipeline
    std::string pl_config;
    std::vector<std::string> pl_set;
    bool pl_quiet = false;
    auto* pipeline = app.add_subcommand("pipeline", "Run ingest, selection, binning, FIT and TSC end to end");
    pipeline->add_option("--config", pl_config, "Pipeline config file")->required();
    pipeline->add_option("--set", pl_set, "Override a config key (key=value)");
    pipeline->add_flag("--quiet", pl_quiet, "Suppress progress notes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*simulate) {
            validate(sim);
            if (sim_replicates == 1) {
                const auto traj = driftsel::simulate(sim);
                emit(sim_out, [&](std::ostream& os) { write_trajectory(os, traj); });
            } else {
                if (sim_out.empty()) {
                    throw ConfigError("--out prefix is required with --replicates > 1");
                }
                const auto ensemble = simulate_ensemble(sim, sim_replicates);
                for (std::size_t i = 0; i < ensemble.size(); ++i) {
                    auto os = open_out(sim_out + "." + std::to_string(i) + ".tsv");
                    write_trajectory(os, ensemble[i]);
                }
            }
        } else if (*ingest) {
            SourceRanges ranges{parse_range("eebo-range", ing_eebo_range), parse_range("gbooks-range", ing_gbooks_range),
                                parse_range("coha-range", ing_coha_range)};
            const auto eebo = load_counts(ing_eebo).records;
            const auto coha = load_counts(ing_coha).records;
            const auto ratio = load_rel_freqs(ing_gbooks).records;
            const auto est = estimate_scaling_constant(coha, ratio, parse_range("overlap", ing_overlap),
                                                       ing_per_verb ? ScalingMode::PerVerb : ScalingMode::PooledPerYear);
            const auto merged = merge_sources(eebo, scale_to_counts(ratio, est, ranges.gbooks), coha, ranges);
            std::cerr << "scaling constant C = " << format_double(est.constant) << " (" << est.n_years_used
                      << " overlap years, volume proxy " << format_double(est.volume_proxy) << ")\n";
            if (merged.dropped > 0) {
                std::cerr << "warning: dropped " << merged.dropped << " row(s) outside their source's range\n";
            }
            emit(ing_out, [&](std::ostream& os) { write_counts(os, merged.records); });
        } else if (*bin) {
            const auto records = load_counts(bin_in).records;
            std::vector<std::string> verbs = bin_verbs;
            if (verbs.empty()) {
                for (const auto& r : records) {
                    if (verbs.empty() || verbs.back() != r.verb) {
                        verbs.push_back(r.verb);
                    }
                }
            }
            const BinningOptions options{parse_binning(bin_mode)};
            std::vector<BinnedSeries> out;
            for (const auto& v : verbs) {
                const auto rows = records_for(records, v);
                if (rows.empty()) {
                    throw LoadError("verb '" + v + "' does not occur in " + bin_in);
                }
                out.push_back(bin_equal_count(rows, options));
            }
            emit(bin_out, [&](std::ostream& os) {
                os << kBinnedHeader << '\n';
                for (const auto& s : out) {
                    write_binned(os, s, false);
                }
            });
        } else if (*fit) {
            std::ifstream in(fit_in);
            if (!in) {
                throw LoadError("cannot open '" + fit_in + "'");
            }
            const auto series = load_binned(in);
            std::vector<FitReport> reports;
            for (const auto& s : series) {
                reports.push_back(fit_test(s, fit_alpha));
            }
            emit(fit_out, [&](std::ostream& os) {
                os << kFitHeader << '\n';
                for (const auto& r : reports) {
                    write_fit_row(os, r);
                }
            });
        } else if (*tsc_train) {
            const auto kv = load_config(tr_config, tr_set);
            const auto config = training_config_from(kv);
            const auto hp = hyperparams_from(kv);
            validate(config);
            auto result = train_from_config(config, hp, tr_threads, [&](const EpochStats& e) {
                if (!tr_quiet) {
                    std::cerr << "epoch " << e.epoch << " loss " << format_fixed(e.train_loss, 4) << " validation accuracy "
                              << format_fixed(e.validation_accuracy, 4) << '\n';
                }
            });
            save_model(tr_model, result.model);
            if (!tr_metrics.empty()) {
                nlohmann::json m;
                m["config_hash"] = result.model.meta.config_hash;
                m["train_size"] = result.train_size;
                m["validation_size"] = result.validation_size;
                m["best_epoch"] = result.model.meta.best_epoch;
                m["validation_accuracy"] = result.model.meta.validation_accuracy;
                m["history"] = nlohmann::json::array();
                for (const auto& e : result.history) {
                    m["history"].push_back(
                        {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_accuracy", e.validation_accuracy}});
                }
                auto os = open_out(tr_metrics);
                os << m.dump(2) << '\n';
            }
        } else if (*classify_cmd) {
            auto model = load_model(cl_model);
            std::ifstream in(cl_in);
            if (!in) {
                throw LoadError("cannot open '" + cl_in + "'");
            }
            const auto series = load_binned(in);
            std::vector<Classification> out;
            for (const auto& s : series) {
                out.push_back(driftsel::classify(model, s));
            }
            emit(cl_out, [&](std::ostream& os) {
                os << kClassificationHeader << '\n';
                for (const auto& c : out) {
                    write_classification_row(os, c, cl_group);
                }
            });
        } else if (*pipeline) {
            const auto kv = load_config(pl_config, pl_set);
            const auto cfg = pipeline_config_from(kv);
            const auto result = run_pipeline(cfg, pl_quiet ? nullptr : &std::cerr);
            if (!pl_quiet) {
                std::cerr << "wrote reports for " << result.verbs.size() << " verb(s) to " << cfg.output_dir << '\n';
            }
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.usage() ? kExitUsage : kExitRuntime;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
