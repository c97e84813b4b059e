#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "driftsel/model_wf.hpp"

using namespace driftsel;
using Catch::Approx;

TEST_CASE("wf_step keeps absorbing states") {
    Rng rng = make_rng(3);
    for (double s : {-0.5, 0.0, 0.3}) {
        CHECK(wf_step(0.0, 50, s, rng) == 0.0);
        CHECK(wf_step(1.0, 50, s, rng) == 1.0);
    }
}

TEST_CASE("wf_step rejects bad parameters") {
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(wf_step(0.5, 1, 0.0, rng), ParameterError);
    CHECK_THROWS_AS(wf_step(0.5, 100, -1.0, rng), ParameterError);
    CHECK_THROWS_AS(wf_step(0.5, 100, -1.5, rng), ParameterError);
}

TEST_CASE("wf_step neutral mean over many draws") {
    Rng rng = make_rng(11);
    const int draws = 100000;
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) {
        sum += wf_step(0.5, 100, 0.0, rng);
    }
    // per-draw sd is sqrt(0.25 / 100)
    CHECK(std::abs(sum / draws - 0.5) <= 3.0 * 0.05 / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("selected_probability follows the relative fitness form") {
    CHECK(selected_probability(0.5, 0.0) == 0.5);
    CHECK(selected_probability(0.5, 0.2) == Approx(0.6 / 1.1));
    CHECK(selected_probability(0.25, -0.5) == Approx(0.125 / 0.875));
}

TEST_CASE("simulate from a fixed state stays there") {
    const auto traj = simulate(WfParams{100, 0.0, 1.0, 50, 7});
    REQUIRE(traj.freqs.size() == 51);
    for (double x : traj.freqs) {
        CHECK(x == 1.0);
    }
    REQUIRE(traj.absorbed_at.has_value());
    CHECK(*traj.absorbed_at == 0);
}

TEST_CASE("simulate is deterministic per seed") {
    const WfParams p{100, 0.0, 0.5, 10, 42};
    CHECK(simulate(p).freqs == simulate(p).freqs);
    const WfParams long_p{100, 0.0, 0.5, 200, 42};
    WfParams long_q = long_p;
    long_q.seed = 43;
    CHECK(simulate(long_p).freqs != simulate(long_q).freqs);
}

TEST_CASE("trajectory invariants") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const WfParams p{37, seed % 2 == 0 ? 0.0 : 0.05, 0.3, 300, seed};
        const auto traj = simulate(p);
        REQUIRE(traj.freqs.size() == 301);
        CHECK(traj.freqs[0] == Approx(0.3).margin(1.0 / 37));
        for (double x : traj.freqs) {
            const double k = x * 37.0;
            CHECK(k == std::round(k));
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
        }
        if (traj.absorbed_at) {
            const double v = traj.freqs[*traj.absorbed_at];
            CHECK((v == 0.0 || v == 1.0));
            for (std::size_t g = *traj.absorbed_at; g < traj.freqs.size(); ++g) {
                CHECK(traj.freqs[g] == v);
            }
            if (*traj.absorbed_at > 0) {
                const double prev = traj.freqs[*traj.absorbed_at - 1];
                CHECK((prev > 0.0 && prev < 1.0));
            }
        } else {
            for (double x : traj.freqs) {
                CHECK((x > 0.0 && x < 1.0));
            }
        }
    }
}

TEST_CASE("initial frequency on the population grid is kept exactly") {
    CHECK(simulate(WfParams{100, 0.0, 0.37, 1, 1}).freqs[0] == 0.37);
    CHECK(simulate(WfParams{8, 0.0, 0.375, 1, 1}).freqs[0] == 0.375);
}

TEST_CASE("validate rejects out-of-range params") {
    CHECK_THROWS_AS(validate(WfParams{1, 0.0, 0.5, 10, 0}), ParameterError);
    CHECK_THROWS_AS(validate(WfParams{10, 0.0, 1.5, 10, 0}), ParameterError);
    CHECK_THROWS_AS(validate(WfParams{10, 0.0, -0.1, 10, 0}), ParameterError);
    CHECK_THROWS_AS(validate(WfParams{10, 0.0, 0.5, 0, 0}), ParameterError);
    CHECK_THROWS_AS(validate(WfParams{10, -1.0, 0.5, 10, 0}), ParameterError);
    CHECK_NOTHROW(validate(WfParams{2, -0.99, 0.0, 1, 0}));
}

TEST_CASE("ensembles do not depend on thread count") {
    const WfParams p{200, 0.01, 0.4, 80, 5};
    CHECK(final_frequencies(p, 257, 1) == final_frequencies(p, 257, 4));
    const auto ens = simulate_ensemble(p, 9, 3);
    for (std::size_t i = 0; i < ens.size(); ++i) {
        CHECK(ens[i].freqs == simulate_replicate(p, i).freqs);
    }
}

TEST_CASE("neutral fixation probability equals the initial frequency") {
    const auto est = estimate_fixation_prob(WfParams{100, 0.0, 0.3, 1, 17}, 10000);
    CHECK(est.unabsorbed == 0);
    CHECK_FALSE(est.cap_warning);
    CHECK(est.probability == Approx(0.3).margin(0.015));
}

TEST_CASE("fixation from zero is exactly zero") {
    const auto est = estimate_fixation_prob(WfParams{100, 0.0, 0.0, 1, 1}, 500);
    CHECK(est.probability == 0.0);
    CHECK(est.lost == 500);
}

TEST_CASE("strong selection fixes at the diffusion rate") {
    const WfParams p{1000, 0.1, 0.1, 500, 23};
    const double oracle = -std::expm1(-2.0 * 1000 * 0.1 * 0.1) / -std::expm1(-2.0 * 1000 * 0.1);
    const auto finals = final_frequencies(p, 10000);
    std::size_t fixed = 0;
    for (double x : finals) {
        fixed += x == 1.0 ? 1 : 0;
    }
    CHECK(static_cast<double>(fixed) / 10000.0 == Approx(oracle).margin(0.02));
}

TEST_CASE("generation cap excludes and flags unabsorbed runs") {
    FixationOptions opt;
    opt.generation_cap = 5;
    const auto est = estimate_fixation_prob(WfParams{10000, 0.0, 0.5, 1, 2}, 200, opt);
    CHECK(est.unabsorbed == 200);
    CHECK(est.cap_warning);
    CHECK(std::isnan(est.probability));
}

TEST_CASE("diffusion formula") {
    CHECK(diffusion_fixation_probability(1000, 0.01, 0.1) ==
          Approx((1.0 - std::exp(-2.0)) / (1.0 - std::exp(-20.0))).epsilon(1e-12));
    CHECK(diffusion_fixation_probability(1000, 0.0, 0.42) == 0.42);
}

TEST_CASE("trajectory export format") {
    std::ostringstream os;
    write_trajectory(os, simulate(WfParams{4, 0.0, 0.5, 2, 9}));
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "# N=4 s=0 x0=0.5 seed=9");
    std::getline(in, line);
    CHECK(line == "0\t0.5");
    int rows = 1;
    while (std::getline(in, line)) {
        ++rows;
    }
    CHECK(rows == 3);
}
