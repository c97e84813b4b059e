#ifndef DRIFTSEL_INGEST_HPP
#define DRIFTSEL_INGEST_HPP

// Corpus record loading, cross-corpus scaling, source merging and target-verb
// selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "driftsel/error.hpp"
#include "driftsel/format.hpp"

namespace driftsel {

enum class Variant { Be, Have };

/// Ordered EEBO < GBOOKS_SCALED < COHA, the canonical tie-break order.
enum class Source { Eebo, GbooksScaled, Coha };

inline std::string_view to_string(Variant v) {
    return v == Variant::Be ? "BE" : "HAVE";
}

inline std::string_view to_string(Source s) {
    switch (s) {
    case Source::Eebo: return "EEBO";
    case Source::GbooksScaled: return "GBOOKS_SCALED";
    case Source::Coha: return "COHA";
    }
    return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
    if (s == "BE") return Variant::Be;
    if (s == "HAVE") return Variant::Have;
    return std::nullopt;
}

inline std::optional<Source> parse_source(std::string_view s) {
    if (s == "EEBO") return Source::Eebo;
    if (s == "GBOOKS_SCALED") return Source::GbooksScaled;
    if (s == "COHA") return Source::Coha;
    return std::nullopt;
}

/// Inclusive year interval.
struct YearRange {
    int first = 0;
    int last = 0;

    bool contains(int year) const { return year >= first && year <= last; }
    bool empty() const { return last < first; }
    bool operator==(const YearRange&) const = default;
};

inline std::string to_string(const YearRange& r) {
    return std::to_string(r.first) + "-" + std::to_string(r.last);
}

/// Declared year coverage of the merged sources. Boundary years belong to
/// exactly one source so the merged ranges are disjoint.
struct SourceRanges {
    YearRange eebo{1473, 1700};
    YearRange gbooks{1701, 1810};
    YearRange coha{1811, 2009};

    const YearRange& of(Source s) const {
        switch (s) {
        case Source::Eebo: return eebo;
        case Source::GbooksScaled: return gbooks;
        case Source::Coha: return coha;
        }
        return eebo;
    }
};

struct CountRecord {
    std::string verb;
    Variant variant = Variant::Be;
    int year = 0;
    std::int64_t count = 0;
    Source source = Source::Eebo;

    bool operator==(const CountRecord&) const = default;
};

struct RelFreqRecord {
    std::string verb;
    Variant variant = Variant::Be;
    int year = 0;
    double rel_freq = 0.0;
    std::string source = "GBOOKS";

    bool operator==(const RelFreqRecord&) const = default;
};

/// Canonical (verb, year, variant, source) order.
inline bool canonical_less(const CountRecord& a, const CountRecord& b) {
    return std::tie(a.verb, a.year, a.variant, a.source) < std::tie(b.verb, b.year, b.variant, b.source);
}

inline void sort_canonical(std::vector<CountRecord>& records) {
    std::stable_sort(records.begin(), records.end(), canonical_less);
}

inline void sort_canonical(std::vector<RelFreqRecord>& records) {
    std::stable_sort(records.begin(), records.end(), [](const RelFreqRecord& a, const RelFreqRecord& b) {
        return std::tie(a.verb, a.year, a.variant) < std::tie(b.verb, b.year, b.variant);
    });
}

template <typename Record>
struct Loaded {
    std::vector<Record> records;
    /// One "line N: reason" entry per rejected row.
    std::vector<std::string> rejected;
};

inline constexpr std::string_view kCountHeader = "verb\tvariant\tyear\tcount\tsource";
inline constexpr std::string_view kRelFreqHeader = "verb\tvariant\tyear\trel_freq\tsource";

namespace detail {

inline std::string join_lines(const std::vector<std::string>& lines, std::size_t limit = 20) {
    std::string out;
    for (std::size_t i = 0; i < lines.size() && i < limit; ++i) {
        out += "\n  " + lines[i];
    }
    if (lines.size() > limit) {
        out += "\n  ... " + std::to_string(lines.size() - limit) + " more";
    }
    return out;
}

template <typename Record, typename ParseRow>
Loaded<Record> load_tsv(std::istream& in, std::string_view header, std::string_view what, bool strict,
                        ParseRow&& parse_row) {
    Loaded<Record> out;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw LoadError(std::string(what) + ": missing header line");
    }
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != header) {
        throw LoadError(std::string(what) + ": expected header '" + std::string(header) + "'");
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split(line, '\t');
        std::string reason;
        if (fields.size() != 5) {
            reason = "expected 5 tab-separated fields, got " + std::to_string(fields.size());
        } else {
            Record rec;
            reason = parse_row(fields, rec);
            if (reason.empty()) {
                out.records.push_back(std::move(rec));
                continue;
            }
        }
        out.rejected.push_back("line " + std::to_string(lineno) + ": " + reason);
    }
    if (strict && !out.rejected.empty()) {
        throw LoadError(std::string(what) + ": " + std::to_string(out.rejected.size()) + " malformed row(s)" +
                        join_lines(out.rejected));
    }
    return out;
}

inline std::string parse_common(const std::vector<std::string_view>& f, std::string& verb, Variant& variant,
                                int& year) {
    if (f[0].empty()) {
        return "empty verb";
    }
    verb = std::string(f[0]);
    const auto v = parse_variant(f[1]);
    if (!v) {
        return "unknown variant '" + std::string(f[1]) + "'";
    }
    variant = *v;
    const auto y = parse_number<int>(f[2]);
    if (!y) {
        return "malformed year '" + std::string(f[2]) + "'";
    }
    year = *y;
    return {};
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open '" + path + "'");
    }
    return in;
}

} // namespace detail

/// Parses a count TSV stream. Rows with an unknown variant or source, a
/// malformed year or a negative count are rejected; in strict mode any
/// rejection raises LoadError listing the offending lines. Output is in
/// canonical order.
inline Loaded<CountRecord> load_counts(std::istream& in, bool strict = true) {
    auto out = detail::load_tsv<CountRecord>(
        in, kCountHeader, "count file", strict, [](const std::vector<std::string_view>& f, CountRecord& rec) {
            if (auto err = detail::parse_common(f, rec.verb, rec.variant, rec.year); !err.empty()) {
                return err;
            }
            const auto c = parse_number<std::int64_t>(f[3]);
            if (!c) {
                return "malformed count '" + std::string(f[3]) + "'";
            }
            if (*c < 0) {
                return "negative count " + std::string(f[3]);
            }
            rec.count = *c;
            const auto s = parse_source(f[4]);
            if (!s) {
                return "unknown source '" + std::string(f[4]) + "'";
            }
            rec.source = *s;
            return std::string{};
        });
    sort_canonical(out.records);
    return out;
}

inline Loaded<CountRecord> load_counts(const std::string& path, bool strict = true) {
    auto in = detail::open_input(path);
    try {
        return load_counts(in, strict);
    } catch (const LoadError& e) {
        throw LoadError(path + ": " + e.what());
    }
}

inline Loaded<RelFreqRecord> load_rel_freqs(std::istream& in, bool strict = true) {
    auto out = detail::load_tsv<RelFreqRecord>(
        in, kRelFreqHeader, "relative-frequency file", strict,
        [](const std::vector<std::string_view>& f, RelFreqRecord& rec) {
            if (auto err = detail::parse_common(f, rec.verb, rec.variant, rec.year); !err.empty()) {
                return err;
            }
            const auto r = parse_number<double>(f[3]);
            if (!r || !std::isfinite(*r)) {
                return "malformed rel_freq '" + std::string(f[3]) + "'";
            }
            if (*r < 0.0) {
                return "negative rel_freq " + std::string(f[3]);
            }
            rec.rel_freq = *r;
            rec.source = std::string(f[4]);
            return std::string{};
        });
    sort_canonical(out.records);
    return out;
}

inline Loaded<RelFreqRecord> load_rel_freqs(const std::string& path, bool strict = true) {
    auto in = detail::open_input(path);
    try {
        return load_rel_freqs(in, strict);
    } catch (const LoadError& e) {
        throw LoadError(path + ": " + e.what());
    }
}

inline void write_counts(std::ostream& os, const std::vector<CountRecord>& records) {
    os << kCountHeader << '\n';
    for (const auto& r : records) {
        os << r.verb << '\t' << to_string(r.variant) << '\t' << r.year << '\t' << r.count << '\t'
           << to_string(r.source) << '\n';
    }
}

inline void write_rel_freqs(std::ostream& os, const std::vector<RelFreqRecord>& records) {
    os << kRelFreqHeader << '\n';
    for (const auto& r : records) {
        os << r.verb << '\t' << to_string(r.variant) << '\t' << r.year << '\t' << format_double(r.rel_freq) << '\t'
           << r.source << '\n';
    }
}

/// One lowercase lemma per line; blank lines and `#` comments are ignored.
inline std::set<std::string> load_word_list(std::istream& in) {
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view v = line;
        if (const auto hash = v.find('#'); hash != std::string_view::npos) {
            v = v.substr(0, hash);
        }
        v = trim(v);
        if (!v.empty()) {
            out.emplace(v);
        }
    }
    return out;
}

inline std::set<std::string> load_word_list(const std::string& path) {
    auto in = detail::open_input(path);
    return load_word_list(in);
}

// ---------------------------------------------------------------------------
// Scaling

/// How f_C and f_G are averaged.
enum class ScalingMode {
    /// Pool all verbs per year, then average over years.
    PooledPerYear,
    /// Average each verb over years, then average over verbs.
    PerVerb,
};

struct ScalingEstimate {
    double constant = 1.0;
    YearRange overlap_range;
    double f_count_source = 0.0;
    double f_ratio_source = 0.0;
    int n_years_used = 0;
    /// Mean yearly total of tracked-construction tokens in the count source over
    /// the years used; converts scaled relative frequencies into pseudo-counts.
    double volume_proxy = 0.0;
};

/// Estimates C = f_C / f_G over the overlap years present in both sources.
///
/// The count source is normalized per year by that year's total of tracked
/// tokens (all verbs, both variants), so a count-source "frequency" is a share
/// of the year's tracked constructions. f_G is the same summary of the
/// ratio source's reported relative frequencies.
inline ScalingEstimate estimate_scaling_constant(const std::vector<CountRecord>& count_src,
                                                 const std::vector<RelFreqRecord>& ratio_src, YearRange overlap,
                                                 ScalingMode mode = ScalingMode::PooledPerYear) {
    if (overlap.empty()) {
        throw EstimationError("empty overlap range " + to_string(overlap));
    }
    std::map<int, double> count_total;
    std::map<std::pair<std::string, int>, double> count_verb;
    for (const auto& r : count_src) {
        if (overlap.contains(r.year)) {
            count_total[r.year] += static_cast<double>(r.count);
            count_verb[{r.verb, r.year}] += static_cast<double>(r.count);
        }
    }
    std::map<int, double> ratio_total;
    std::map<std::pair<std::string, int>, double> ratio_verb;
    for (const auto& r : ratio_src) {
        if (overlap.contains(r.year)) {
            ratio_total[r.year] += r.rel_freq;
            ratio_verb[{r.verb, r.year}] += r.rel_freq;
        }
    }

    std::vector<int> years;
    for (const auto& [year, total] : count_total) {
        if (total > 0.0 && ratio_total.count(year) != 0) {
            years.push_back(year);
        }
    }
    if (years.empty()) {
        throw EstimationError("no year in " + to_string(overlap) + " has data in both sources");
    }

    ScalingEstimate est;
    est.overlap_range = overlap;
    est.n_years_used = static_cast<int>(years.size());
    for (int y : years) {
        est.volume_proxy += count_total[y];
    }
    est.volume_proxy /= static_cast<double>(years.size());

    if (mode == ScalingMode::PooledPerYear) {
        double fc = 0.0;
        double fg = 0.0;
        for (int y : years) {
            fc += 1.0; // a year's shares of its own total sum to one
            fg += ratio_total[y];
        }
        est.f_count_source = fc / static_cast<double>(years.size());
        est.f_ratio_source = fg / static_cast<double>(years.size());
    } else {
        std::set<std::string> verbs;
        for (const auto& [key, c] : count_verb) {
            verbs.insert(key.first);
        }
        for (const auto& [key, g] : ratio_verb) {
            verbs.insert(key.first);
        }
        double fc = 0.0;
        double fg = 0.0;
        for (const auto& v : verbs) {
            double vc = 0.0;
            double vg = 0.0;
            for (int y : years) {
                if (auto it = count_verb.find({v, y}); it != count_verb.end()) {
                    vc += it->second / count_total[y];
                }
                if (auto it = ratio_verb.find({v, y}); it != ratio_verb.end()) {
                    vg += it->second;
                }
            }
            fc += vc / static_cast<double>(years.size());
            fg += vg / static_cast<double>(years.size());
        }
        est.f_count_source = fc / static_cast<double>(verbs.size());
        est.f_ratio_source = fg / static_cast<double>(verbs.size());
    }
    if (!(est.f_ratio_source > 0.0)) {
        throw EstimationError("ratio-source mean frequency is zero over " + to_string(overlap));
    }
    est.constant = est.f_count_source / est.f_ratio_source;
    return est;
}

/// Pseudo-counts round(rel_freq · C · volume_proxy), half away from zero, for
/// every record inside keep_range. Output is in canonical order.
inline std::vector<CountRecord> scale_to_counts(const std::vector<RelFreqRecord>& ratio_src,
                                                const ScalingEstimate& est, YearRange keep_range) {
    if (!(est.constant > 0.0) || !std::isfinite(est.constant)) {
        throw ParameterError("scaling constant must be positive, got " + format_double(est.constant));
    }
    if (!(est.volume_proxy >= 0.0) || !std::isfinite(est.volume_proxy)) {
        throw ParameterError("volume proxy must be non-negative, got " + format_double(est.volume_proxy));
    }
    std::vector<CountRecord> out;
    for (const auto& r : ratio_src) {
        if (!keep_range.contains(r.year)) {
            continue;
        }
        out.push_back(CountRecord{r.verb, r.variant, r.year,
                                  static_cast<std::int64_t>(std::llround(r.rel_freq * est.constant * est.volume_proxy)),
                                  Source::GbooksScaled});
    }
    sort_canonical(out);
    return out;
}

struct MergeResult {
    std::vector<CountRecord> records;
    /// Rows outside their source's declared range.
    std::size_t dropped = 0;
};

/// Concatenates the three sources, keeping each row only if it lies in its
/// own source's declared range.
inline MergeResult merge_sources(const std::vector<CountRecord>& eebo, const std::vector<CountRecord>& gbooks_scaled,
                                 const std::vector<CountRecord>& coha, const SourceRanges& ranges = {}) {
    MergeResult out;
    out.records.reserve(eebo.size() + gbooks_scaled.size() + coha.size());
    for (const auto* part : {&eebo, &gbooks_scaled, &coha}) {
        for (const auto& r : *part) {
            if (ranges.of(r.source).contains(r.year)) {
                out.records.push_back(r);
            } else {
                ++out.dropped;
            }
        }
    }
    sort_canonical(out.records);
    return out;
}

struct SourceRecords {
    std::vector<CountRecord> eebo;
    std::vector<CountRecord> gbooks;
    std::vector<CountRecord> coha;
};

/// Verbs that are on the intransitive list, occur more than `min_count` times
/// in every source separately, and have a BE share of at least `min_be_share`
/// among their EEBO tokens. Sorted alphabetically.
inline std::vector<std::string> select_target_verbs(const SourceRecords& records,
                                                    const std::set<std::string>& intransitive_list,
                                                    std::int64_t min_count, double min_be_share) {
    if (intransitive_list.empty()) {
        throw ConfigError("intransitive verb list is empty");
    }
    if (min_count < 1) {
        throw ConfigError("min_count must be at least 1, got " + std::to_string(min_count));
    }
    if (!(min_be_share >= 0.0 && min_be_share <= 1.0)) {
        throw ConfigError("min_be_share must lie in [0, 1], got " + format_double(min_be_share));
    }
    auto totals = [](const std::vector<CountRecord>& src) {
        std::map<std::string, std::int64_t> t;
        for (const auto& r : src) {
            t[r.verb] += r.count;
        }
        return t;
    };
    const auto eebo = totals(records.eebo);
    const auto gbooks = totals(records.gbooks);
    const auto coha = totals(records.coha);
    std::map<std::string, std::int64_t> eebo_be;
    for (const auto& r : records.eebo) {
        if (r.variant == Variant::Be) {
            eebo_be[r.verb] += r.count;
        }
    }
    auto above = [min_count](const std::map<std::string, std::int64_t>& t, const std::string& v) {
        const auto it = t.find(v);
        return it != t.end() && it->second > min_count;
    };

    std::vector<std::string> out;
    for (const auto& verb : intransitive_list) {
        if (!above(eebo, verb) || !above(gbooks, verb) || !above(coha, verb)) {
            continue;
        }
        const auto be_it = eebo_be.find(verb);
        const double be = be_it == eebo_be.end() ? 0.0 : static_cast<double>(be_it->second);
        if (be / static_cast<double>(eebo.at(verb)) >= min_be_share) {
            out.push_back(verb);
        }
    }
    return out; // std::set iteration is already alphabetical
}

/// Records of a single verb, preserving order.
inline std::vector<CountRecord> records_for(const std::vector<CountRecord>& records, const std::string& verb) {
    std::vector<CountRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [&](const CountRecord& r) { return r.verb == verb; });
    return out;
}

} // namespace driftsel

#endif
