#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "driftsel/binning.hpp"
#include "driftsel/model_wf.hpp"
#include "driftsel/random.hpp"
#include "testing_oracles.hpp"

using namespace driftsel;

namespace {

std::vector<CountRecord> rec(int year, std::int64_t be, std::int64_t have) {
    return {{"go", Variant::Be, year, be, Source::Eebo}, {"go", Variant::Have, year, have, Source::Eebo}};
}

std::vector<CountRecord> concat(std::initializer_list<std::vector<CountRecord>> parts) {
    std::vector<CountRecord> out;
    for (const auto& p : parts) {
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

void check_recount(const std::vector<CountRecord>& records, const BinnedSeries& s) {
    const auto why = testing_oracles::recount_mismatch(records, s);
    INFO(why);
    CHECK(why.empty());
}

} // namespace

TEST_CASE("eight tokens in two years") {
    const auto s = bin_equal_count(concat({rec(1700, 4, 0), rec(1800, 0, 4)}));
    CHECK(s.times == std::vector<double>{1700, 1800});
    CHECK(s.freq_have == std::vector<double>{0.0, 1.0});
    CHECK(s.bin_sizes == std::vector<std::int64_t>{4, 4});
    CHECK(s.total_tokens == 8);
    CHECK_FALSE(s.degenerate);
}

TEST_CASE("all-HAVE input gives frequency one everywhere") {
    std::vector<CountRecord> r;
    for (int y = 1600; y < 1700; ++y) {
        auto part = rec(y, 0, 1 + y % 7);
        r.insert(r.end(), part.begin(), part.end());
    }
    const auto s = bin_equal_count(r);
    for (double f : s.freq_have) {
        CHECK(f == 1.0);
    }
}

TEST_CASE("148 single-token years alternate variants") {
    std::vector<CountRecord> r;
    for (int y = 1500; y <= 1647; ++y) {
        auto part = y % 2 == 0 ? rec(y, 1, 0) : rec(y, 0, 1);
        r.insert(r.end(), part.begin(), part.end());
    }
    const auto s = bin_equal_count(r);
    REQUIRE(s.size() == 5);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK((s.bin_sizes[i] == 29 || s.bin_sizes[i] == 30));
        CHECK(s.freq_have[i] >= 0.45);
        CHECK(s.freq_have[i] <= 0.55);
    }
    check_recount(r, s);
}

TEST_CASE("too few tokens and single-year input") {
    CHECK_THROWS_AS(bin_equal_count(rec(1700, 1, 2)), SeriesError);
    CHECK_THROWS_AS(bin_equal_count({}), SeriesError);
    const auto s = bin_equal_count(rec(1700, 10, 30));
    CHECK(s.degenerate);
    REQUIRE(s.size() == 1);
    CHECK(s.freq_have[0] == 0.75);
    CHECK(s.times[0] == 1700);
}

TEST_CASE("mixed verbs are rejected") {
    auto r = rec(1700, 3, 3);
    r.push_back({"come", Variant::Be, 1701, 3, Source::Eebo});
    CHECK_THROWS_AS(bin_equal_count(r), SeriesError);
}

TEST_CASE("bin count choice") {
    CHECK(target_bin_count(8, BinningMode::LogNBins) == 2);
    CHECK(target_bin_count(148, BinningMode::LogNBins) == 5);
    CHECK(target_bin_count(4, BinningMode::LogNBins) == 2);
    CHECK(target_bin_count(22026, BinningMode::LogNBins) == 10);
    // ln(1000) = 6.9, so 7 tokens per bin
    CHECK(target_bin_count(1000, BinningMode::LogNTokensPerBin) == 142);
}

TEST_CASE("tokens-per-bin mode yields many small bins") {
    std::vector<CountRecord> r;
    for (int y = 1000; y < 2000; ++y) {
        auto part = rec(y, y % 3 == 0 ? 0 : 1, y % 3 == 0 ? 1 : 0);
        r.insert(r.end(), part.begin(), part.end());
    }
    const auto s = bin_equal_count(r, {BinningMode::LogNTokensPerBin});
    CHECK(s.size() == 142);
    check_recount(r, s);
}

TEST_CASE("year groups are never split") {
    // one heavy year in the middle
    const auto r = concat({rec(1600, 5, 5), rec(1601, 5, 5), rec(1602, 50, 10), rec(1603, 5, 5), rec(1604, 5, 5)});
    const auto s = bin_equal_count(r);
    check_recount(r, s);
    std::int64_t sum = 0;
    for (auto b : s.bin_sizes) {
        sum += b;
    }
    CHECK(sum == 100);
}

TEST_CASE("binning is invariant to input order") {
    Rng rng = make_rng(8);
    const auto r = testing_oracles::random_verb(rng, "go");
    auto shuffled = r;
    for (std::size_t i = shuffled.size(); i > 1; --i) {
        std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1))]);
    }
    const auto a = bin_equal_count(r);
    const auto b = bin_equal_count(shuffled);
    CHECK(a.times == b.times);
    CHECK(a.freq_have == b.freq_have);
    CHECK(a.bin_sizes == b.bin_sizes);
}

TEST_CASE("randomized verbs satisfy the recount oracle") {
    Rng rng = make_rng(2024);
    for (int i = 0; i < 50; ++i) {
        const auto r = testing_oracles::random_verb(rng, "v" + std::to_string(i));
        const auto s = bin_equal_count(r);
        check_recount(r, s);
        CHECK(testing_oracles::balance_ok(r, s));
    }
}

TEST_CASE("equispaced sampling of a trajectory") {
    const auto traj = simulate(WfParams{50, 0.0, 0.5, 100, 3});
    const auto s = sample_trajectory(traj, 11, "sim");
    REQUIRE(s.size() == 11);
    for (std::size_t i = 0; i < 11; ++i) {
        CHECK(s.times[i] == 10.0 * static_cast<double>(i));
        CHECK(s.freq_have[i] == traj.freqs[10 * i]);
        CHECK(s.bin_sizes[i] == 50);
    }
    CHECK_THROWS_AS(sample_trajectory(traj, 1), SeriesError);
    CHECK_THROWS_AS(sample_trajectory(traj, 200), SeriesError);
}

TEST_CASE("binned TSV round-trip") {
    const auto a = bin_equal_count(concat({rec(1700, 4, 1), rec(1750, 2, 2), rec(1800, 1, 6)}));
    BinnedSeries b = a;
    b.verb = "come";
    std::ostringstream os;
    write_binned(os, a);
    write_binned(os, b, false);
    CHECK(os.str().rfind(std::string(kBinnedHeader) + "\ngo\t0\t", 0) == 0);
    std::istringstream in(os.str());
    const auto back = load_binned(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].verb == "go");
    CHECK(back[1].verb == "come");
    CHECK(back[0].times == a.times);
    CHECK(back[0].freq_have == a.freq_have);
    CHECK(back[0].bin_sizes == a.bin_sizes);

    std::istringstream bad(std::string(kBinnedHeader) + "\ngo\t0\t1700\t1.5\t4\n");
    CHECK_THROWS_AS(load_binned(bad), LoadError);
}
