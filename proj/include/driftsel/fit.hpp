#ifndef DRIFTSEL_FIT_HPP
#define DRIFTSEL_FIT_HPP

// Frequency Increment Test with boundary correction and post-hoc power.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "driftsel/binning.hpp"
#include "driftsel/error.hpp"
#include "driftsel/format.hpp"

namespace driftsel {

enum class FitVerdict { Selection, DriftNotRejected, Underpowered, Undefined };

inline std::string_view to_string(FitVerdict v) {
    switch (v) {
    case FitVerdict::Selection: return "SELECTION";
    case FitVerdict::DriftNotRejected: return "DRIFT_NOT_REJECTED";
    case FitVerdict::Underpowered: return "UNDERPOWERED";
    case FitVerdict::Undefined: return "UNDEFINED";
    }
    return "?";
}

/// Power below which a test result is reported as UNDERPOWERED.
inline constexpr double kPowerGate = 0.8;

struct FitReport {
    std::string verb;
    std::vector<double> increments;
    double t_stat = 0.0;
    double p_value = 1.0;
    std::int64_t dof = 0;
    double cohens_d = 0.0;
    double power = 0.0;
    double alpha = 0.05;
    FitVerdict verdict = FitVerdict::Undefined;
};

struct PowerResult {
    double cohens_d = 0.0;
    double power = 0.0;
};

/// Frequency with 0 and 1 moved to 1/(2n) and 1 - 1/(2n) for a bin of n tokens.
inline double boundary_corrected(double x, std::int64_t bin_size) {
    const double half = 0.5 / static_cast<double>(bin_size);
    if (x <= 0.0) {
        return half;
    }
    if (x >= 1.0) {
        return 1.0 - half;
    }
    return x;
}

/// Y_i = (x_i - x_{i-1}) / sqrt(2 x_{i-1} (1 - x_{i-1}) (t_i - t_{i-1})) on
/// boundary-corrected frequencies.
inline std::vector<double> rescaled_increments(const BinnedSeries& series) {
    const std::size_t k = series.size();
    if (k < 2 || series.freq_have.size() != k || series.bin_sizes.size() != k) {
        throw SeriesError("rescaled increments need at least 2 consistent bins, got " + std::to_string(k));
    }
    std::vector<double> x(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (series.bin_sizes[i] <= 0) {
            throw SeriesError("bin " + std::to_string(i) + " has no tokens");
        }
        x[i] = boundary_corrected(series.freq_have[i], series.bin_sizes[i]);
    }
    std::vector<double> y;
    y.reserve(k - 1);
    for (std::size_t i = 1; i < k; ++i) {
        const double dt = series.times[i] - series.times[i - 1];
        if (!(dt > 0.0)) {
            throw SeriesError("degenerate series '" + series.verb + "': timestamps " + format_double(series.times[i - 1]) +
                              " and " + format_double(series.times[i]) + " are not increasing");
        }
        y.push_back((x[i] - x[i - 1]) / std::sqrt(2.0 * x[i - 1] * (1.0 - x[i - 1]) * dt));
    }
    return y;
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

/// Sample standard deviation (k - 1 denominator).
inline double sd_of(const std::vector<double>& v, double mean) {
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ParameterError("alpha must lie in (0, 1), got " + format_double(alpha));
    }
}

} // namespace detail

inline double student_t_two_sided_p(double t, double dof) {
    boost::math::students_t dist(dof);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

inline double student_t_critical(double alpha, double dof) {
    boost::math::students_t dist(dof);
    return boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
}

/// P(|T'| > c) for T' noncentral t with `dof` degrees of freedom and
/// noncentrality `ncp`.
///
/// T' = (Z + ncp) / U with U = sqrt(V / dof), V ~ chi-square(dof), so
///   P(|T'| > c) = ∫ [Q(c·u - ncp) + Φ(-c·u - ncp)] f_U(u) du,
/// integrated with adaptive Gauss-Kronrod over the effective support of U.
inline double noncentral_t_two_sided_tail(double c, double dof, double ncp, double tolerance = 1e-10) {
    if (!(dof > 0.0)) {
        throw ParameterError("degrees of freedom must be positive");
    }
    const double log_norm = std::log(2.0) + 0.5 * dof * std::log(dof) - 0.5 * dof * std::log(2.0) - std::lgamma(0.5 * dof);
    auto density_u = [&](double u) {
        if (u <= 0.0) {
            return dof == 1.0 ? std::exp(log_norm) : 0.0;
        }
        return std::exp(log_norm + (dof - 1.0) * std::log(u) - 0.5 * dof * u * u);
    };
    auto integrand = [&](double u) {
        const double upper = 1.0 - detail::normal_cdf(c * u - ncp);
        const double lower = detail::normal_cdf(-c * u - ncp);
        return (upper + lower) * density_u(u);
    };
    // chi-square(dof) has mean dof and sd sqrt(2 dof); beyond this bound the
    // remaining mass is far below the tolerance.
    const double v_hi = dof + 14.0 * std::sqrt(2.0 * dof) + 80.0;
    const double u_hi = std::sqrt(v_hi / dof);
    // The tail probability is at least alpha/2, so a relative tolerance is
    // also a tight absolute one.
    double err = 0.0;
    const double p = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, u_hi, 15, tolerance, &err);
    return std::clamp(p, 0.0, 1.0);
}

/// Power of a two-sided one-sample t-test on `k` observations at level alpha
/// for standardized effect size d (noncentrality d·sqrt(k), k - 1 dof).
inline double t_test_power(std::int64_t k, double cohens_d, double alpha) {
    detail::check_alpha(alpha);
    if (k < 2) {
        throw ParameterError("power needs at least 2 observations");
    }
    const double dof = static_cast<double>(k - 1);
    const double crit = student_t_critical(alpha, dof);
    return noncentral_t_two_sided_tail(crit, dof, cohens_d * std::sqrt(static_cast<double>(k)));
}

/// Cohen's d = |mean| / sd of the increments and the matching post-hoc power.
inline PowerResult post_hoc_power(const std::vector<double>& increments, double alpha) {
    detail::check_alpha(alpha);
    if (increments.size() < 2) {
        throw SeriesError("post-hoc power needs at least 2 increments");
    }
    const double mean = detail::mean_of(increments);
    const double sd = detail::sd_of(increments, mean);
    if (!(sd > 0.0)) {
        throw SeriesError("power undefined: increments have zero variance");
    }
    PowerResult out;
    out.cohens_d = std::abs(mean) / sd;
    out.power = t_test_power(static_cast<std::int64_t>(increments.size()), out.cohens_d, alpha);
    return out;
}

/// Two-sided one-sample t-test of mean(Y) = 0 on the rescaled increments.
/// Verdicts are gated on post-hoc power: below kPowerGate the result is
/// UNDERPOWERED whatever the p-value.
inline FitReport fit_test(const BinnedSeries& series, double alpha = 0.05) {
    detail::check_alpha(alpha);
    if (series.size() < 3) {
        throw SeriesError("FIT needs at least 3 bins, '" + series.verb + "' has " + std::to_string(series.size()));
    }
    FitReport r;
    r.verb = series.verb;
    r.alpha = alpha;
    r.increments = rescaled_increments(series);
    const auto k = static_cast<std::int64_t>(r.increments.size());
    r.dof = k - 1;

    const double mean = detail::mean_of(r.increments);
    const double sd = detail::sd_of(r.increments, mean);
    if (!(sd > 0.0)) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        r.t_stat = r.p_value = r.cohens_d = r.power = nan;
        r.verdict = FitVerdict::Undefined;
        return r;
    }
    r.t_stat = mean / (sd / std::sqrt(static_cast<double>(k)));
    r.p_value = student_t_two_sided_p(r.t_stat, static_cast<double>(r.dof));
    const auto power = post_hoc_power(r.increments, alpha);
    r.cohens_d = power.cohens_d;
    r.power = power.power;
    if (r.power < kPowerGate) {
        r.verdict = FitVerdict::Underpowered;
    } else if (r.p_value < alpha) {
        r.verdict = FitVerdict::Selection;
    } else {
        r.verdict = FitVerdict::DriftNotRejected;
    }
    return r;
}

inline constexpr std::string_view kFitHeader = "verb\tk\tt_stat\tp_value\tcohens_d\tpower\tverdict";

namespace detail {
inline std::string report_number(double v) {
    return std::isnan(v) ? std::string("NA") : format_fixed(v, 6);
}
} // namespace detail

/// One report row; k is the number of increments.
inline void write_fit_row(std::ostream& os, const FitReport& r) {
    os << r.verb << '\t' << r.increments.size() << '\t' << detail::report_number(r.t_stat) << '\t'
       << detail::report_number(r.p_value) << '\t' << detail::report_number(r.cohens_d) << '\t'
       << detail::report_number(r.power) << '\t' << to_string(r.verdict) << '\n';
}

} // namespace driftsel

#endif
