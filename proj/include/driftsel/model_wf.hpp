#ifndef DRIFTSEL_MODEL_WF_HPP
#define DRIFTSEL_MODEL_WF_HPP

// Haploid two-variant Wright-Fisher model with selection on the focal variant.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "driftsel/error.hpp"
#include "driftsel/format.hpp"
#include "driftsel/parallel.hpp"
#include "driftsel/random.hpp"

namespace driftsel {

struct WfParams {
    std::int64_t population_size = 100;
    double selection_coeff = 0.0;
    double initial_freq = 0.5;
    std::int64_t generations = 100;
    std::uint64_t seed = 0;
};

struct Trajectory {
    WfParams params;
    std::vector<double> freqs; // index = generation, length generations + 1
    std::optional<std::int64_t> absorbed_at;
};

inline void validate_step_params(std::int64_t population_size, double selection_coeff) {
    if (population_size < 2) {
        throw ParameterError("population size must be at least 2, got " + std::to_string(population_size));
    }
    if (!(selection_coeff > -1.0) || !std::isfinite(selection_coeff)) {
        throw ParameterError("selection coefficient must be finite and > -1, got " + format_double(selection_coeff));
    }
}

inline void validate(const WfParams& p) {
    validate_step_params(p.population_size, p.selection_coeff);
    if (p.generations < 1) {
        throw ParameterError("generations must be at least 1, got " + std::to_string(p.generations));
    }
    if (!(p.initial_freq >= 0.0 && p.initial_freq <= 1.0)) {
        throw ParameterError("initial frequency must lie in [0, 1], got " + format_double(p.initial_freq));
    }
}

/// Probability that an offspring carries the focal variant when its parental
/// frequency is x and its relative fitness is 1 + s.
inline double selected_probability(double x, double s) {
    return x * (1.0 + s) / (1.0 + s * x);
}

namespace detail {

inline std::int64_t step_count(std::int64_t k, std::int64_t n, double s, Rng& rng) {
    if (k == 0 || k == n) {
        return k;
    }
    const double x = static_cast<double>(k) / static_cast<double>(n);
    std::binomial_distribution<std::int64_t> draw(n, selected_probability(x, s));
    return draw(rng);
}

inline std::int64_t initial_count(const WfParams& p) {
    return std::llround(p.initial_freq * static_cast<double>(p.population_size));
}

inline double as_freq(std::int64_t k, std::int64_t n) {
    return static_cast<double>(k) / static_cast<double>(n);
}

} // namespace detail

/// One generation of resampling: returns k/N with k ~ Binomial(N, p'),
/// p' = x(1+s)/(1+s·x). Frequencies 0 and 1 are absorbing.
inline double wf_step(double x, std::int64_t population_size, double selection_coeff, Rng& rng) {
    validate_step_params(population_size, selection_coeff);
    if (!(x >= 0.0 && x <= 1.0)) {
        throw ParameterError("frequency must lie in [0, 1], got " + format_double(x));
    }
    if (x == 0.0 || x == 1.0) {
        return x;
    }
    std::binomial_distribution<std::int64_t> draw(population_size, selected_probability(x, selection_coeff));
    return detail::as_freq(draw(rng), population_size);
}

/// Simulates one trajectory on an explicit random stream.
inline Trajectory simulate(const WfParams& params, Rng& rng) {
    validate(params);
    const auto n = params.population_size;
    Trajectory out;
    out.params = params;
    out.freqs.reserve(static_cast<std::size_t>(params.generations) + 1);

    // Initial frequencies off the 1/N grid are rounded onto it.
    std::int64_t k = detail::initial_count(params);
    out.freqs.push_back(detail::as_freq(k, n));
    if (k == 0 || k == n) {
        out.absorbed_at = 0;
    }
    for (std::int64_t g = 1; g <= params.generations; ++g) {
        k = detail::step_count(k, n, params.selection_coeff, rng);
        out.freqs.push_back(detail::as_freq(k, n));
        if (!out.absorbed_at && (k == 0 || k == n)) {
            out.absorbed_at = g;
        }
    }
    return out;
}

/// Simulates substream `replicate` of params.seed.
inline Trajectory simulate_replicate(const WfParams& params, std::uint64_t replicate) {
    Rng rng = make_rng(params.seed, replicate);
    return simulate(params, rng);
}

/// Deterministic in (params, seed): equal inputs give bit-identical trajectories.
inline Trajectory simulate(const WfParams& params) {
    return simulate_replicate(params, 0);
}

/// Replicate i always uses substream i, so the ensemble does not depend on `threads`.
inline std::vector<Trajectory> simulate_ensemble(const WfParams& params, std::size_t replicates, unsigned threads = 0) {
    validate(params);
    std::vector<Trajectory> out(replicates);
    parallel_for(replicates, threads, [&](std::size_t i) { out[i] = simulate_replicate(params, i); });
    return out;
}

/// Final frequency of every replicate without keeping whole paths.
inline std::vector<double> final_frequencies(const WfParams& params, std::size_t replicates, unsigned threads = 0) {
    validate(params);
    std::vector<double> out(replicates);
    parallel_for(replicates, threads, [&](std::size_t i) {
        Rng rng = make_rng(params.seed, i);
        const auto n = params.population_size;
        std::int64_t k = detail::initial_count(params);
        for (std::int64_t g = 0; g < params.generations && k != 0 && k != n; ++g) {
            k = detail::step_count(k, n, params.selection_coeff, rng);
        }
        out[i] = detail::as_freq(k, n);
    });
    return out;
}

struct FixationOptions {
    /// Generation cap per replicate; 0 selects 100·N.
    std::int64_t generation_cap = 0;
    unsigned threads = 0;
    /// Fraction of capped replicates above which `cap_warning` is raised.
    double warning_fraction = 0.10;
};

struct FixationEstimate {
    /// fixed / (fixed + lost); NaN when no replicate was absorbed.
    double probability = 0.0;
    std::size_t replicates = 0;
    std::size_t fixed = 0;
    std::size_t lost = 0;
    /// Runs that hit the generation cap; excluded from `probability`.
    std::size_t unabsorbed = 0;
    bool cap_warning = false;
};

/// Fraction of replicates absorbed at 1. Each run is extended past
/// params.generations until absorption or the cap; capped runs are excluded
/// and reported rather than rounded to either boundary.
inline FixationEstimate estimate_fixation_prob(const WfParams& params, std::size_t replicates,
                                               const FixationOptions& options = {}) {
    validate(params);
    if (replicates < 1) {
        throw ParameterError("replicates must be at least 1");
    }
    const auto n = params.population_size;
    const std::int64_t cap = options.generation_cap > 0 ? options.generation_cap : 100 * n;

    // 0 = lost, 1 = fixed, 2 = unabsorbed
    std::vector<unsigned char> outcome(replicates);
    parallel_for(replicates, options.threads, [&](std::size_t i) {
        Rng rng = make_rng(params.seed, i);
        std::int64_t k = detail::initial_count(params);
        for (std::int64_t g = 0; g < cap && k != 0 && k != n; ++g) {
            k = detail::step_count(k, n, params.selection_coeff, rng);
        }
        outcome[i] = k == n ? 1 : (k == 0 ? 0 : 2);
    });

    FixationEstimate est;
    est.replicates = replicates;
    for (auto o : outcome) {
        if (o == 1) {
            ++est.fixed;
        } else if (o == 0) {
            ++est.lost;
        } else {
            ++est.unabsorbed;
        }
    }
    const std::size_t absorbed = est.fixed + est.lost;
    est.probability = absorbed == 0 ? std::numeric_limits<double>::quiet_NaN()
                                    : static_cast<double>(est.fixed) / static_cast<double>(absorbed);
    est.cap_warning = static_cast<double>(est.unabsorbed) > options.warning_fraction * static_cast<double>(replicates);
    return est;
}

/// Diffusion approximation of the fixation probability,
/// (1 - exp(-2Ns·x0)) / (1 - exp(-2Ns)), with the neutral limit x0.
inline double diffusion_fixation_probability(std::int64_t population_size, double selection_coeff, double initial_freq) {
    const double a = 2.0 * static_cast<double>(population_size) * selection_coeff;
    if (std::abs(a) < 1e-12) {
        return initial_freq;
    }
    return -std::expm1(-a * initial_freq) / -std::expm1(-a);
}

/// `# N=<N> s=<s> x0=<x0> seed=<seed>` followed by `generation<TAB>frequency` rows.
inline void write_trajectory(std::ostream& os, const Trajectory& traj) {
    const auto& p = traj.params;
    os << "# N=" << p.population_size << " s=" << format_double(p.selection_coeff)
       << " x0=" << format_double(p.initial_freq) << " seed=" << p.seed << '\n';
    for (std::size_t g = 0; g < traj.freqs.size(); ++g) {
        os << g << '\t' << format_double(traj.freqs[g]) << '\n';
    }
}

} // namespace driftsel

#endif
