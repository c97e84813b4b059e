#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "driftsel/tsc.hpp"

using namespace driftsel;
using Catch::Approx;

namespace {

TrainingConfig small_config(std::size_t per_class) {
    TrainingConfig c;
    c.samples_per_class = per_class;
    return c;
}

TscModel& shipped_model() {
    static TscModel model = load_model(std::string(DRIFTSEL_DATA_DIR) + "/models/default.tscm");
    return model;
}

std::vector<double> logistic(std::size_t n, double steepness, double mid = 0.5) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(n - 1);
        v[i] = 1.0 / (1.0 + std::exp(-steepness * (u - mid)));
    }
    return v;
}

} // namespace

TEST_CASE("resampling an equispaced series of the target length is the identity") {
    const std::vector<double> t{0, 1, 2, 3, 4};
    const std::vector<double> v{0.1, 0.4, 0.2, 0.9, 0.5};
    const auto out = resample_to_length(t, v, 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(out[i] == Approx(v[i]).margin(1e-15));
    }
}

TEST_CASE("resampling two points is linear") {
    const auto out = resample_to_length(std::vector<double>{0, 1}, std::vector<double>{0.0, 1.0}, 5);
    CHECK(out == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("resampling stays within the input range") {
    Rng rng = make_rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<std::size_t>(uniform_int(rng, 2, 30));
        std::vector<double> t(n);
        std::vector<double> v(n);
        double now = uniform(rng, 1400, 1600);
        for (std::size_t i = 0; i < n; ++i) {
            now += uniform(rng, 0.5, 40.0);
            t[i] = now;
            v[i] = uniform01(rng);
        }
        const auto out = resample_to_length(t, v, static_cast<std::size_t>(uniform_int(rng, 2, 60)));
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        for (double x : out) {
            CHECK(x >= *lo - 1e-15);
            CHECK(x <= *hi + 1e-15);
        }
        CHECK(out.front() == Approx(v.front()));
        CHECK(out.back() == Approx(v.back()));
    }
}

TEST_CASE("resampling rejects short input") {
    CHECK_THROWS_AS(resample_to_length(std::vector<double>{1.0}, std::vector<double>{0.5}, 5), SeriesError);
    CHECK_THROWS_AS(resample_to_length(std::vector<double>{1, 1}, std::vector<double>{0.5, 0.6}, 5), SeriesError);
}

TEST_CASE("training config validation") {
    CHECK_THROWS_AS(validate(small_config(0)), ConfigError);
    auto c = small_config(10);
    c.n_range = {500, 100};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small_config(10);
    c.series_len = 3;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small_config(10);
    c.s_range = {0.0, 0.1};
    CHECK_THROWS_AS(validate(c), ConfigError);
    CHECK_THROWS_AS(generate_dataset(small_config(0)), ConfigError);
    CHECK_NOTHROW(validate(TrainingConfig{}));
}

TEST_CASE("datasets are reproducible and thread independent") {
    const auto c = small_config(200);
    const auto a = generate_dataset(c, 1);
    const auto b = generate_dataset(c, 3);
    CHECK(a.series == b.series);
    CHECK(a.labels == b.labels);
    CHECK(a.size() == 400);
    CHECK(std::count(a.labels.begin(), a.labels.end(), 1) == 200);
    auto other = c;
    other.seed += 1;
    CHECK(generate_dataset(other).series != a.series);
}

TEST_CASE("dataset samples respect the configured ranges") {
    auto c = small_config(300);
    c.symmetric_sign = true;
    const auto ds = generate_dataset(c);
    bool negative = false;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& info = ds.info[i];
        CHECK(info.population_size >= 100);
        CHECK(info.population_size <= 5000);
        CHECK(info.generations >= 50);
        CHECK(info.generations <= 500);
        if (ds.labels[i] == 0) {
            CHECK(info.selection_coeff == 0.0);
        } else {
            CHECK(std::abs(info.selection_coeff) >= 0.005 * (1 - 1e-12));
            CHECK(std::abs(info.selection_coeff) <= 0.2 * (1 + 1e-12));
            negative = negative || info.selection_coeff < 0.0;
        }
        for (double v : ds.row(i)) {
            CHECK((v >= 0.0 && v <= 1.0));
        }
    }
    CHECK(negative);
}

TEST_CASE("drift samples are a martingale") {
    const auto ds = generate_dataset(small_config(10000));
    double sum = 0.0;
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] == 0) {
            const double d = ds.info[i].final_freq - ds.info[i].initial_freq;
            sum += d;
            sq += d * d;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    CHECK(std::abs(mean) <= 4.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("binning-mirrored datasets") {
    auto c = small_config(50);
    c.binning_mirror = true;
    const auto ds = generate_dataset(c);
    CHECK(ds.size() == 100);
    for (double v : ds.series) {
        CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("label shuffling keeps class balance") {
    const auto ds = generate_dataset(small_config(100));
    const auto sh = shuffle_labels(ds, 3);
    CHECK(std::count(sh.labels.begin(), sh.labels.end(), 1) == 100);
    CHECK(sh.labels != ds.labels);
    CHECK(sh.series == ds.series);
}

TEST_CASE("a separable toy set is learned perfectly") {
    Dataset ds;
    ds.length = 25;
    for (int i = 0; i < 200; ++i) {
        const int label = i % 2;
        for (int t = 0; t < 25; ++t) {
            ds.series.push_back(label == 1 ? 1.0 : 0.0);
        }
        ds.labels.push_back(label);
        ds.info.push_back({});
    }
    Hyperparams hp;
    hp.epochs = 50;
    hp.batch_size = 16;
    const auto r = train(ds, hp);
    CHECK(r.model.meta.validation_accuracy == 1.0);
    CHECK(r.validation_size == 40);
    CHECK(r.train_size == 160);
}

TEST_CASE("training is deterministic") {
    const auto ds = generate_dataset(small_config(150));
    Hyperparams hp;
    hp.epochs = 2;
    auto a = train(ds, hp);
    auto b = train(ds, hp);
    auto pa = a.model.network.parameters();
    auto pb = b.model.network.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->value == pb[i]->value);
    }
    CHECK(a.history.size() == 2);
    for (const auto& e : a.history) {
        CHECK((e.validation_accuracy >= 0.0 && e.validation_accuracy <= 1.0));
    }
}

TEST_CASE("training input errors") {
    Dataset ds;
    ds.length = 25;
    Hyperparams hp;
    CHECK_THROWS_AS(train(ds, hp), TrainingError);
    ds.series.assign(25 * 4, 0.5);
    ds.labels = {0, 0, 0, 0};
    ds.info.resize(4);
    CHECK_THROWS_AS(train(ds, hp), TrainingError);
    ds.labels = {0, 1, 0, 1};
    hp.learning_rate = 0.0;
    CHECK_THROWS_AS(train(ds, hp), ParameterError);
    hp.learning_rate = 1e30;
    ds.series.clear();
    for (int i = 0; i < 4; ++i) {
        for (int t = 0; t < 25; ++t) {
            ds.series.push_back((i * 7 + t * 3) % 10 / 10.0);
        }
    }
    hp.epochs = 20;
    CHECK_THROWS_AS(train(ds, hp), TrainingError);
}

TEST_CASE("model files round-trip exactly") {
    const auto ds = generate_dataset(small_config(40));
    Hyperparams hp;
    hp.epochs = 1;
    auto model = train(ds, hp).model;
    model.meta.config = describe(small_config(40));
    model.meta.config_hash = hex64(fnv1a(model.meta.config));
    std::stringstream first;
    save_model(first, model);
    auto loaded = load_model(first);
    std::stringstream second;
    save_model(second, loaded);
    CHECK(first.str() == second.str());
    CHECK(loaded.meta.config_hash == model.meta.config_hash);
    CHECK(loaded.input_length() == 25);
    std::vector<float> x(25 * 3);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<float>(i % 11) / 11.0f;
    }
    CHECK(model.network.predict(x, 3) == loaded.network.predict(x, 3));
}

TEST_CASE("malformed model files are rejected") {
    std::istringstream bad("NOT-A-MODEL 1\n");
    CHECK_THROWS_AS(load_model(bad), ModelFormatError);
    std::istringstream truncated(std::string(kModelMagic) + " 1\ninput_length 25\n");
    CHECK_THROWS_AS(load_model(truncated), ModelFormatError);
    std::istringstream future(std::string(kModelMagic) + " 99\n");
    CHECK_THROWS_AS(load_model(future), ModelFormatError);
    CHECK_THROWS_AS(load_model(std::string("/nonexistent/model")), ModelFormatError);
}

TEST_CASE("classification rows and the 0.5 rule") {
    auto& model = shipped_model();
    BinnedSeries s;
    s.verb = "arrive";
    s.times = {0, 1, 2, 3};
    s.freq_have = {0.01, 0.2, 0.8, 0.99};
    s.bin_sizes = {10, 10, 10, 10};
    const auto c = classify(model, s);
    CHECK(c.probability + c.drift_probability == Approx(1.0).margin(1e-6));
    CHECK((c.verdict == TscVerdict::Selection) == (c.probability > 0.5));
    std::ostringstream os;
    Classification fixed{"arrive", 0.97, 0.03, TscVerdict::Selection};
    write_classification_row(os, fixed, "A");
    CHECK(os.str() == "arrive\tA\t0.9700\tSELECTION\n");

    BinnedSeries one;
    one.verb = "x";
    one.times = {1700};
    one.freq_have = {0.5};
    one.bin_sizes = {10};
    CHECK_THROWS_AS(classify(model, one), SeriesError);
}

TEST_CASE("shipped model: sharp logistic series read as selection") {
    auto& model = shipped_model();
    for (double k : {10.0, 15.0, 25.0}) {
        for (double mid : {0.4, 0.5, 0.6}) {
            const auto c = classify_values(model, "rise", logistic(25, k, mid));
            CHECK(c.probability > 0.5);
        }
    }
}

TEST_CASE("shipped model: flat noisy series read as drift on average") {
    auto& model = shipped_model();
    Rng rng = make_rng(404);
    double sum = 0.0;
    const int draws = 200;
    for (int d = 0; d < draws; ++d) {
        std::vector<double> v(25);
        for (auto& x : v) {
            x = 0.5 + uniform(rng, -0.02, 0.02);
        }
        sum += classify_values(model, "flat", v).probability;
    }
    CHECK(sum / draws < 0.5);
}

TEST_CASE("shipped model: a series and its reversal agree") {
    auto& model = shipped_model();
    for (double k : {10.0, 20.0}) {
        auto up = logistic(25, k);
        auto down = up;
        std::reverse(down.begin(), down.end());
        CHECK(classify_values(model, "up", up).verdict == classify_values(model, "down", down).verdict);
    }
    const auto flat = std::vector<double>(25, 0.3);
    auto c = classify_values(model, "flat", flat);
    CHECK(c.probability >= 0.0);
    CHECK(c.probability <= 1.0);
}

TEST_CASE("shipped model metadata") {
    auto& model = shipped_model();
    CHECK(model.normalization == "raw");
    CHECK(model.meta.config == describe(TrainingConfig{}));
    CHECK(model.meta.config_hash == hex64(fnv1a(describe(TrainingConfig{}))));
    CHECK(model.meta.validation_accuracy >= 0.85);
}
