#ifndef DRIFTSEL_BINNING_HPP
#define DRIFTSEL_BINNING_HPP

// Equal-count binning of a verb's token stream into a short HAVE-share series.

#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "driftsel/error.hpp"
#include "driftsel/format.hpp"
#include "driftsel/ingest.hpp"
#include "driftsel/model_wf.hpp"

namespace driftsel {

struct BinnedSeries {
    std::string verb;
    std::vector<double> times;       // median year of the tokens in each bin
    std::vector<double> freq_have;   // share of HAVE tokens in each bin
    std::vector<std::int64_t> bin_sizes;
    std::vector<std::int64_t> have_counts;
    std::int64_t total_tokens = 0;
    /// All tokens fell in a single year; the series has one bin.
    bool degenerate = false;

    std::size_t size() const { return times.size(); }
};

enum class BinningMode {
    /// B = max(2, round(ln N)) bins of about N/B tokens each.
    LogNBins,
    /// Bins of about max(2, round(ln N)) tokens each.
    LogNTokensPerBin,
};

struct BinningOptions {
    BinningMode mode = BinningMode::LogNBins;
};

/// Number of bins requested for N tokens, before year-tie adjustment.
inline std::int64_t target_bin_count(std::int64_t total_tokens, BinningMode mode) {
    const auto log_n = static_cast<std::int64_t>(std::llround(std::log(static_cast<double>(total_tokens))));
    if (mode == BinningMode::LogNBins) {
        return std::max<std::int64_t>(2, log_n);
    }
    const std::int64_t per_bin = std::max<std::int64_t>(2, log_n);
    return std::max<std::int64_t>(2, total_tokens / per_bin);
}

namespace detail {

struct YearGroup {
    int year = 0;
    std::int64_t be = 0;
    std::int64_t have = 0;
    std::int64_t size() const { return be + have; }
};

/// Picks bin boundaries among the cumulative token counts at year breaks.
/// Each ideal boundary j·N/B snaps to the nearest unused break after the
/// previous one; a tie between two breaks goes to the earlier one.
inline std::vector<std::size_t> choose_breaks(const std::vector<std::int64_t>& cum, std::int64_t bins) {
    // cum[g] = tokens in groups [0, g); candidate break indices are 1..G-1.
    const std::size_t groups = cum.size() - 1;
    const double total = static_cast<double>(cum.back());
    std::vector<std::size_t> breaks{0};
    std::size_t next = 1;
    for (std::int64_t j = 1; j < bins && next < groups; ++j) {
        const double ideal = total * static_cast<double>(j) / static_cast<double>(bins);
        // first candidate at or beyond the ideal position
        auto it = std::lower_bound(cum.begin() + static_cast<std::ptrdiff_t>(next),
                                   cum.begin() + static_cast<std::ptrdiff_t>(groups), ideal,
                                   [](std::int64_t c, double v) { return static_cast<double>(c) < v; });
        std::size_t pick = static_cast<std::size_t>(it - cum.begin());
        if (pick > next && (pick == groups || ideal - static_cast<double>(cum[pick - 1]) <=
                                                  static_cast<double>(cum[pick]) - ideal)) {
            --pick;
        }
        if (pick >= groups) {
            break;
        }
        breaks.push_back(pick);
        next = pick + 1;
    }
    breaks.push_back(groups);
    return breaks;
}

} // namespace detail

/// Bins one verb's records into equal-count groups of tokens ordered by year.
/// Tokens of one year never straddle a boundary. Each bin reports the lower
/// median year of its tokens, its HAVE share and its size.
inline BinnedSeries bin_equal_count(const std::vector<CountRecord>& records, const BinningOptions& options = {}) {
    BinnedSeries out;
    std::map<int, detail::YearGroup> by_year;
    for (const auto& r : records) {
        if (out.verb.empty()) {
            out.verb = r.verb;
        } else if (r.verb != out.verb) {
            throw SeriesError("bin_equal_count expects a single verb, got '" + out.verb + "' and '" + r.verb + "'");
        }
        if (r.count < 0) {
            throw SeriesError("negative count for '" + r.verb + "' in " + std::to_string(r.year));
        }
        auto& g = by_year[r.year];
        g.year = r.year;
        (r.variant == Variant::Be ? g.be : g.have) += r.count;
        out.total_tokens += r.count;
    }
    if (out.total_tokens < 4) {
        throw SeriesError("series too small: " + std::to_string(out.total_tokens) + " token(s), need at least 4");
    }

    std::vector<detail::YearGroup> groups;
    for (const auto& [year, g] : by_year) {
        if (g.size() > 0) {
            groups.push_back(g);
        }
    }
    std::vector<std::int64_t> cum{0};
    for (const auto& g : groups) {
        cum.push_back(cum.back() + g.size());
    }

    out.degenerate = groups.size() == 1;
    const auto bins = target_bin_count(out.total_tokens, options.mode);
    const auto breaks = detail::choose_breaks(cum, bins);

    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
        const std::size_t lo = breaks[b];
        const std::size_t hi = breaks[b + 1];
        std::int64_t size = cum[hi] - cum[lo];
        std::int64_t have = 0;
        for (std::size_t g = lo; g < hi; ++g) {
            have += groups[g].have;
        }
        // lower median: token at offset (size - 1) / 2 within the bin
        const std::int64_t target = cum[lo] + (size - 1) / 2;
        std::size_t g = lo;
        while (cum[g + 1] <= target) {
            ++g;
        }
        out.times.push_back(static_cast<double>(groups[g].year));
        out.freq_have.push_back(static_cast<double>(have) / static_cast<double>(size));
        out.bin_sizes.push_back(size);
        out.have_counts.push_back(have);
    }
    return out;
}

/// Reads a trajectory at `points` equispaced generations (rounded to the
/// nearest generation). Each point stands for a sample of N individuals.
inline BinnedSeries sample_trajectory(const Trajectory& traj, std::size_t points, std::string verb = "simulated") {
    if (points < 2) {
        throw SeriesError("need at least 2 sample points");
    }
    const auto last = static_cast<std::int64_t>(traj.freqs.size()) - 1;
    if (last < static_cast<std::int64_t>(points) - 1) {
        throw SeriesError("trajectory has fewer generations than requested points");
    }
    BinnedSeries out;
    out.verb = std::move(verb);
    const auto n = traj.params.population_size;
    for (std::size_t i = 0; i < points; ++i) {
        const auto g = static_cast<std::size_t>(
            std::llround(static_cast<double>(i) * static_cast<double>(last) / static_cast<double>(points - 1)));
        out.times.push_back(static_cast<double>(g));
        out.freq_have.push_back(traj.freqs[g]);
        out.bin_sizes.push_back(n);
        out.have_counts.push_back(std::llround(traj.freqs[g] * static_cast<double>(n)));
        out.total_tokens += n;
    }
    return out;
}

inline constexpr std::string_view kBinnedHeader = "verb\tbin_index\tmedian_year\tfreq_have\tbin_size";

inline void write_binned(std::ostream& os, const BinnedSeries& s, bool header = true) {
    if (header) {
        os << kBinnedHeader << '\n';
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        os << s.verb << '\t' << i << '\t' << format_double(s.times[i]) << '\t' << format_double(s.freq_have[i]) << '\t'
           << s.bin_sizes[i] << '\n';
    }
}

/// Reads the series of one or more verbs back from the TSV export, keyed by verb
/// in order of first appearance.
inline std::vector<BinnedSeries> load_binned(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kBinnedHeader) {
        throw LoadError("binned series file: expected header '" + std::string(kBinnedHeader) + "'");
    }
    std::vector<BinnedSeries> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        const auto f = split(trim(line), '\t');
        const auto year = f.size() == 5 ? parse_number<double>(f[2]) : std::nullopt;
        const auto freq = f.size() == 5 ? parse_number<double>(f[3]) : std::nullopt;
        const auto size = f.size() == 5 ? parse_number<std::int64_t>(f[4]) : std::nullopt;
        if (!year || !freq || !size || *size <= 0 || *freq < 0.0 || *freq > 1.0) {
            throw LoadError("binned series file: malformed row at line " + std::to_string(lineno));
        }
        if (out.empty() || out.back().verb != f[0]) {
            out.push_back(BinnedSeries{});
            out.back().verb = std::string(f[0]);
        }
        auto& s = out.back();
        s.times.push_back(*year);
        s.freq_have.push_back(*freq);
        s.bin_sizes.push_back(*size);
        s.have_counts.push_back(std::llround(*freq * static_cast<double>(*size)));
        s.total_tokens += *size;
    }
    return out;
}

} // namespace driftsel

#endif
