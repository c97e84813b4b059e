// Writes the synthetic corpus used by the pipeline tests and examples.
//
// Every verb follows one Wright-Fisher trajectory for the HAVE variant over
// 1473-2009, one generation per five years. Each source then samples tokens
// from that trajectory year by year.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "driftsel.hpp"

namespace fs = std::filesystem;
using namespace driftsel;

namespace {

constexpr int kFirstYear = 1473;
constexpr int kLastYear = 2009;
constexpr int kYearsPerGeneration = 5;
constexpr double kRatioDenominator = 1e7;

struct VerbSpec {
    std::string name;
    WfParams params;
    double eebo_per_year;
    double gbooks_per_year;
    double coha_per_year;
};

std::int64_t draw_total(double mean, Rng& rng) {
    std::poisson_distribution<std::int64_t> d(mean);
    return d(rng);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic fixture corpus"};
    std::string out_dir = "data/fixtures";
    std::uint64_t seed = 1859;
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", seed, "Corpus seed")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    const std::int64_t generations = (kLastYear - kFirstYear) / kYearsPerGeneration;
    auto wf = [&](std::int64_t n, double s, double x0, std::uint64_t stream) {
        return WfParams{n, s, x0, generations, substream_seed(seed, stream)};
    };
    const std::vector<VerbSpec> verbs{
        {"arrive", wf(10000, 0.1, 0.005, 1), 20, 40, 30},
        {"linger", wf(20000, 0.0, 0.3, 2), 20, 40, 30},
        // transitive, so never a target
        {"eat", wf(5000, 0.0, 0.5, 3), 25, 50, 40},
        // HAVE already dominant in the early source
        {"grow", wf(5000, 0.0, 0.8, 4), 20, 40, 30},
        // too rare for the strict count threshold
        {"wander", wf(5000, 0.02, 0.2, 5), 0.6, 1.2, 1.0},
    };

    try {
        fs::create_directories(out_dir);
        std::vector<CountRecord> eebo;
        std::vector<CountRecord> coha;
        std::vector<CountRecord> gbooks_counts;
        const SourceRanges ranges;
        for (std::size_t v = 0; v < verbs.size(); ++v) {
            const auto& spec = verbs[v];
            const auto traj = simulate(spec.params);
            Rng rng = make_rng(seed, 100 + v);
            for (int year = kFirstYear; year <= kLastYear; ++year) {
                const auto g = std::min<std::size_t>(static_cast<std::size_t>((year - kFirstYear) / kYearsPerGeneration),
                                                     traj.freqs.size() - 1);
                const double x = traj.freqs[g];
                auto sample = [&](double mean, Source source, std::vector<CountRecord>& into) {
                    const auto total = draw_total(mean, rng);
                    std::binomial_distribution<std::int64_t> have(total, x);
                    const auto h = have(rng);
                    into.push_back({spec.name, Variant::Be, year, total - h, source});
                    into.push_back({spec.name, Variant::Have, year, h, source});
                };
                if (ranges.eebo.contains(year)) {
                    sample(spec.eebo_per_year, Source::Eebo, eebo);
                }
                if (year >= 1700) {
                    sample(spec.gbooks_per_year, Source::GbooksScaled, gbooks_counts);
                }
                if (year >= 1810) {
                    sample(spec.coha_per_year, Source::Coha, coha);
                }
            }
        }
        std::vector<RelFreqRecord> gbooks;
        for (const auto& r : gbooks_counts) {
            gbooks.push_back({r.verb, r.variant, r.year, static_cast<double>(r.count) / kRatioDenominator, "GBOOKS"});
        }
        sort_canonical(eebo);
        sort_canonical(coha);
        sort_canonical(gbooks);

        const fs::path dir = out_dir;
        {
            std::ofstream os(dir / "eebo.tsv", std::ios::binary);
            write_counts(os, eebo);
        }
        {
            std::ofstream os(dir / "coha.tsv", std::ios::binary);
            write_counts(os, coha);
        }
        {
            std::ofstream os(dir / "gbooks.tsv", std::ios::binary);
            write_rel_freqs(os, gbooks);
        }
        {
            std::ofstream os(dir / "intransitive.txt", std::ios::binary);
            os << "# intransitive verbs\narrive\nlinger\ngrow\nwander\n";
        }
        {
            std::ofstream os(dir / "group_b.txt", std::ios::binary);
            os << "wander\n";
        }
        {
            std::ofstream os(dir / "pipeline.cfg", std::ios::binary);
            os << "# synthetic corpus: 'arrive' has s = 0.1, 'linger' is neutral\n"
               << "eebo = eebo.tsv\n"
               << "coha = coha.tsv\n"
               << "gbooks = gbooks.tsv\n"
               << "intransitive = intransitive.txt\n"
               << "group_b = group_b.txt\n"
               << "tsc_model = ../models/default.tscm\n"
               << "output_dir = out\n"
               << "min_count = 200\n"
               << "min_be_share = 0.5\n"
               << "alpha = 0.05\n";
        }
        std::cout << "wrote fixtures to " << out_dir << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
