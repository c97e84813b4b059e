#include <catch_amalgamated.hpp>

#include <cmath>

#include "driftsel/nn.hpp"
#include "gradient_check.hpp"

using namespace driftsel;
using namespace driftsel::nn;
using Catch::Approx;

TEST_CASE("analytic gradients match central differences") {
    const auto r = gradient_check::run(12345, 100);
    INFO("worst relative error " << r.worst << ", kink probes skipped " << r.kinks);
    CHECK(r.passed == r.probes);
    CHECK(r.kinks < 10);
}

TEST_CASE("gradients with a single block and a longer input") {
    Architecture arch;
    arch.blocks = {{8, 5}};
    arch.input_length = 40;
    const auto r = gradient_check::run(7, 60, 1e-4, 3, arch);
    INFO("worst relative error " << r.worst);
    CHECK(r.passed == r.probes);
}

TEST_CASE("convolution matches a direct sum") {
    Tape<double> tape;
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8}; // [1][2][4]
    const auto xi = tape.leaf({1, 2, 4}, x);
    Parameter<double> w{"w", {0.5, -1.0, 2.0, 1.0, 0.0, -0.5}, std::vector<double>(6, 0.0)}; // 2 out, kernel 3
    const auto yi = conv1d(tape, xi, w, 2, 3);
    const auto& y = tape[yi];
    REQUIRE(y.shape == Shape{2, 2, 4});
    for (std::size_t co = 0; co < 2; ++co) {
        for (std::size_t b = 0; b < 2; ++b) {
            for (int t = 0; t < 4; ++t) {
                double expect = 0.0;
                for (int k = 0; k < 3; ++k) {
                    const int src = t + k - 1;
                    if (src >= 0 && src < 4) {
                        expect += w.value[co * 3 + static_cast<std::size_t>(k)] * x[b * 4 + static_cast<std::size_t>(src)];
                    }
                }
                CHECK(y.value[(co * 2 + b) * 4 + static_cast<std::size_t>(t)] == Approx(expect));
            }
        }
    }
}

TEST_CASE("batch norm normalizes each channel in training mode") {
    Tape<double> tape;
    std::vector<double> x;
    for (int i = 0; i < 12; ++i) {
        x.push_back(i * i * 0.1);
    }
    const auto xi = tape.leaf({2, 2, 3}, x);
    BatchNorm<double> bn;
    bn.gamma = {"g", {1.0, 1.0}, {0.0, 0.0}};
    bn.beta = {"b", {0.0, 0.0}, {0.0, 0.0}};
    bn.running_mean = {0.0, 0.0};
    bn.running_var = {1.0, 1.0};
    const auto yi = batch_norm(tape, xi, bn, true);
    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0.0;
        double v = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            m += tape[yi].value[c * 6 + i];
        }
        m /= 6.0;
        for (std::size_t i = 0; i < 6; ++i) {
            v += std::pow(tape[yi].value[c * 6 + i] - m, 2);
        }
        CHECK(m == Approx(0.0).margin(1e-12));
        CHECK(v / 6.0 == Approx(1.0).epsilon(1e-4));
        CHECK(bn.running_mean[c] != 0.0);
    }
}

TEST_CASE("softmax rows sum to one") {
    Network<double> net(Architecture{}, 3);
    std::vector<double> x(5 * 25);
    Rng rng = make_rng(4);
    for (auto& v : x) {
        v = uniform01(rng);
    }
    const auto p = net.predict(x, 5);
    REQUIRE(p.size() == 10);
    for (std::size_t b = 0; b < 5; ++b) {
        CHECK(p[2 * b] + p[2 * b + 1] == Approx(1.0).margin(1e-12));
        CHECK(p[2 * b] >= 0.0);
        CHECK(p[2 * b + 1] >= 0.0);
    }
}

TEST_CASE("inference does not depend on batch composition") {
    Network<float> net(Architecture{}, 9);
    std::vector<float> x(3 * 25);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<float>(i % 25) / 25.0f;
    }
    const auto all = net.predict(x, 3);
    const auto one = net.predict(std::span<const float>(x.data() + 25, 25), 1);
    CHECK(all[2] == Approx(one[0]).margin(1e-6));
    CHECK(all[3] == Approx(one[1]).margin(1e-6));
}

TEST_CASE("network rejects bad shapes") {
    CHECK_THROWS_AS(Network<float>(Architecture{{}, 25, 2}, 1), ParameterError);
    Network<float> net(Architecture{}, 1);
    std::vector<float> x(24);
    CHECK_THROWS_AS(net.predict(x, 1), ParameterError);
}

TEST_CASE("initialization is seeded") {
    Network<float> a(Architecture{}, 5);
    Network<float> b(Architecture{}, 5);
    Network<float> c(Architecture{}, 6);
    CHECK(a.parameters()[0]->value == b.parameters()[0]->value);
    CHECK(a.parameters()[0]->value != c.parameters()[0]->value);
}

TEST_CASE("adam moves a quadratic toward its minimum") {
    Parameter<double> p{"p", {3.0, -2.0}, {0.0, 0.0}};
    Adam<double> opt({&p}, 0.1);
    for (int i = 0; i < 500; ++i) {
        p.grad = {2.0 * p.value[0], 2.0 * p.value[1]};
        opt.step();
    }
    CHECK(std::abs(p.value[0]) < 0.05);
    CHECK(std::abs(p.value[1]) < 0.05);
}
