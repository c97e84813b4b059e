#ifndef DRIFTSEL_TESTING_ORACLES_HPP
#define DRIFTSEL_TESTING_ORACLES_HPP

// Brute-force reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "driftsel/binning.hpp"
#include "driftsel/random.hpp"

namespace testing_oracles {

using namespace driftsel;

struct Token {
    int year;
    bool have;
};

inline std::vector<Token> expand(const std::vector<CountRecord>& records) {
    std::vector<Token> tokens;
    for (const auto& r : records) {
        for (std::int64_t i = 0; i < r.count; ++i) {
            tokens.push_back({r.year, r.variant == Variant::Have});
        }
    }
    std::stable_sort(tokens.begin(), tokens.end(), [](const Token& a, const Token& b) {
        return a.year != b.year ? a.year < b.year : a.have < b.have;
    });
    return tokens;
}

/// Recounts every bin from the expanded token list. Returns an empty string
/// when the series matches, otherwise a description of the first mismatch.
inline std::string recount_mismatch(const std::vector<CountRecord>& records, const BinnedSeries& s) {
    const auto tokens = expand(records);
    if (s.times.size() != s.freq_have.size() || s.times.size() != s.bin_sizes.size()) {
        return "field lengths differ";
    }
    std::size_t pos = 0;
    for (std::size_t b = 0; b < s.size(); ++b) {
        if (s.bin_sizes[b] <= 0 || pos + static_cast<std::size_t>(s.bin_sizes[b]) > tokens.size()) {
            return "bin " + std::to_string(b) + " size out of range";
        }
        const std::size_t end = pos + static_cast<std::size_t>(s.bin_sizes[b]);
        if (pos > 0 && tokens[pos - 1].year == tokens[pos].year) {
            return "bin " + std::to_string(b) + " splits year " + std::to_string(tokens[pos].year);
        }
        std::int64_t have = 0;
        for (std::size_t i = pos; i < end; ++i) {
            have += tokens[i].have ? 1 : 0;
        }
        const double freq = static_cast<double>(have) / static_cast<double>(s.bin_sizes[b]);
        if (freq != s.freq_have[b]) {
            return "bin " + std::to_string(b) + " frequency " + std::to_string(s.freq_have[b]) + " vs recount " +
                   std::to_string(freq);
        }
        const auto median = tokens[pos + (end - pos - 1) / 2].year;
        if (static_cast<double>(median) != s.times[b]) {
            return "bin " + std::to_string(b) + " median year mismatch";
        }
        if (b > 0 && !(s.times[b - 1] <= s.times[b])) {
            return "timestamps not monotone at bin " + std::to_string(b);
        }
        pos = end;
    }
    if (pos != tokens.size()) {
        return "bins cover " + std::to_string(pos) + " of " + std::to_string(tokens.size()) + " tokens";
    }
    return {};
}

/// Size balance allowing for whole year groups: every bin is within half of
/// each neighbouring boundary's largest adjacent year group of N/B. When no
/// year holds more than one token this reduces to max - min <= 1.
inline bool balance_ok(const std::vector<CountRecord>& records, const BinnedSeries& s) {
    std::map<int, std::int64_t> by_year;
    for (const auto& r : records) {
        if (r.count > 0) {
            by_year[r.year] += r.count;
        }
    }
    std::vector<std::int64_t> groups;
    std::int64_t largest = 0;
    for (const auto& [y, c] : by_year) {
        groups.push_back(c);
        largest = std::max(largest, c);
    }
    if (largest == 1) {
        const auto [lo, hi] = std::minmax_element(s.bin_sizes.begin(), s.bin_sizes.end());
        return *hi - *lo <= 1;
    }
    const double ideal = static_cast<double>(s.total_tokens) / static_cast<double>(s.size());
    // group index at which each bin starts
    std::vector<std::size_t> starts;
    std::size_t g = 0;
    for (auto size : s.bin_sizes) {
        starts.push_back(g);
        std::int64_t need = size;
        while (need > 0) {
            need -= groups[g];
            ++g;
        }
    }
    starts.push_back(groups.size());
    auto slack = [&](std::size_t brk) -> double {
        if (brk == 0 || brk >= groups.size()) {
            return 0.0;
        }
        return 0.5 * static_cast<double>(std::max(groups[brk - 1], groups[brk]));
    };
    for (std::size_t b = 0; b < s.size(); ++b) {
        const double dev = std::abs(static_cast<double>(s.bin_sizes[b]) - ideal);
        if (dev > slack(starts[b]) + slack(starts[b + 1]) + 1e-9) {
            return false;
        }
    }
    return true;
}

/// A verb with a random year span and random per-year counts. About a third
/// of the verbs have at most one token per year.
inline std::vector<CountRecord> random_verb(Rng& rng, const std::string& verb) {
    const int first = static_cast<int>(uniform_int(rng, 1473, 1800));
    const int span = static_cast<int>(uniform_int(rng, 30, 400));
    const bool sparse = uniform01(rng) < 0.35;
    const std::int64_t max_count = sparse ? 1 : uniform_int(rng, 1, 25);
    const double trend = uniform01(rng);
    std::vector<CountRecord> out;
    for (int y = first; y < first + span; ++y) {
        if (uniform01(rng) < 0.2) {
            continue;
        }
        const double p = std::clamp(trend + 0.3 * (uniform01(rng) - 0.5), 0.0, 1.0);
        std::int64_t be = 0;
        std::int64_t have = 0;
        if (sparse) {
            (uniform01(rng) < p ? have : be) = 1;
        } else {
            const auto n = uniform_int(rng, 0, max_count);
            for (std::int64_t i = 0; i < n; ++i) {
                (uniform01(rng) < p ? have : be) += 1;
            }
        }
        out.push_back({verb, Variant::Be, y, be, Source::Eebo});
        out.push_back({verb, Variant::Have, y, have, Source::Eebo});
    }
    if (out.size() < 8) {
        out.push_back({verb, Variant::Have, first + span, 5, Source::Coha});
        out.push_back({verb, Variant::Be, first + span + 1, 5, Source::Coha});
    }
    return out;
}

} // namespace testing_oracles

#endif
