#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ntkspec/error.hpp"
#include "ntkspec/network.hpp"
#include "oracles.hpp"

using namespace ntkspec;

namespace {

const Activation kCos{ActivationKind::Cosine, 2.0};
const Activation kSin{ActivationKind::Sine, 1.5};
const Activation kRelu{ActivationKind::Relu, 1.0};
const Activation kId{ActivationKind::Identity, 1.0};

ArchitectureSpec arch(std::vector<std::size_t> widths, Activation act, double beta) {
    ArchitectureSpec a;
    a.widths = std::move(widths);
    a.activation = act;
    a.init_scales.assign(a.widths.size() - 1, beta);
    return a;
}

}  // namespace

TEST_CASE("activation values and derivatives") {
    CHECK(kCos.value(0.0) == 1.0);
    CHECK(kCos.derivative(0.0) == 0.0);
    CHECK(kCos.derivative(std::numbers::pi / 4) == doctest::Approx(-2.0));
    CHECK(kSin.derivative(0.0) == doctest::Approx(1.5));
    CHECK(kRelu.value(-3.0) == 0.0);
    CHECK(kRelu.value(3.0) == 3.0);
    CHECK(kRelu.derivative(0.0) == 0.0);
    CHECK(kRelu.derivative(1e-300) == 1.0);
    CHECK(kId.derivative(-5.0) == 1.0);
    CHECK(kCos.derivative_bound() == 2.0);
    CHECK(kRelu.derivative_bound() == 1.0);
    CHECK(parse_activation("relu") == ActivationKind::Relu);
    CHECK(to_string(ActivationKind::Sine) == "sine");
    CHECK_THROWS_AS(parse_activation("tanh"), Error);
}

TEST_CASE("architecture validation") {
    CHECK(arch({3, 4, 1}, kCos, 0.5).validate().empty());
    CHECK(arch({3, 4, 1}, kCos, 0.5).parameter_count() == 16);
    CHECK_THROWS_AS(arch({3, 4, 2}, kCos, 0.5).validate(), Error);
    CHECK_THROWS_AS(arch({3}, kCos, 0.5).validate(), Error);
    CHECK_THROWS_AS(arch({3, 0, 1}, kCos, 0.5).validate(), Error);
    CHECK_THROWS_AS(arch({3, 4, 1}, Activation{ActivationKind::Cosine, 0.0}, 0.5).validate(), Error);
    auto bad = arch({3, 4, 1}, kCos, 0.5);
    bad.init_scales.pop_back();
    CHECK_THROWS_AS(bad.validate(), Error);
    // He init on fan-in 1 gives beta = sqrt(2) > 1, tolerated with a warning.
    const auto he = make_he_architecture({1, 4, 1}, kCos);
    CHECK(he.init_scales[0] == doctest::Approx(std::sqrt(2.0)));
    CHECK(he.init_scales[1] == doctest::Approx(std::sqrt(0.5)));
    CHECK(he.validate().size() == 1);
}

TEST_CASE("init_network") {
    SUBCASE("zero scales give zero weights") {
        const NetworkState s = init_network(arch({3, 5, 4, 1}, kCos, 0.0), 1);
        for (const auto& w : s.weights) CHECK(w.max_abs() == 0.0);
    }
    SUBCASE("shapes and determinism") {
        const auto a = make_he_architecture({3, 5, 4, 1}, kCos);
        const NetworkState s1 = init_network(a, 42), s2 = init_network(a, 42), s3 = init_network(a, 43);
        REQUIRE(s1.depth() == 3);
        CHECK(s1.layer(1).rows() == 3);
        CHECK(s1.layer(1).cols() == 5);
        CHECK(s1.layer(3).cols() == 1);
        CHECK(flatten_parameters(s1) == flatten_parameters(s2));
        CHECK(flatten_parameters(s1) != flatten_parameters(s3));
    }
    SUBCASE("sample variance matches beta^2") {
        const NetworkState s = init_network(arch({1000, 1000, 1}, kCos, 0.7), 5);
        double sum = 0.0, sq = 0.0;
        for (double v : s.layer(1).data()) {
            sum += v;
            sq += v * v;
        }
        const double n = 1e6;
        const double var = sq / n - (sum / n) * (sum / n);
        CHECK(std::abs(var - 0.49) <= 0.01 * 0.49);
    }
}

TEST_CASE("parameter vectorization round trip") {
    const auto a = make_he_architecture({3, 4, 2, 1}, kCos);
    const NetworkState s = init_network(a, 8);
    const auto theta = flatten_parameters(s);
    REQUIRE(theta.size() == a.parameter_count());
    for (std::size_t k = 1; k <= 3; ++k)
        for (std::size_t r = 0; r < s.layer(k).rows(); ++r)
            for (std::size_t c = 0; c < s.layer(k).cols(); ++c)
                CHECK(theta[parameter_index(a, k, r, c)] == s.layer(k)(r, c));
    CHECK(parameter_index(a, 1, 1, 0) == 1);  // columns are stacked
    CHECK(parameter_index(a, 2, 0, 0) == 12);
    const NetworkState back = with_parameters(s, theta);
    CHECK(flatten_parameters(back) == theta);
    CHECK_THROWS_AS(with_parameters(s, std::vector<double>(3)), Error);
}

TEST_CASE("forward: hand examples") {
    SUBCASE("[1,1,1] cosine") {
        NetworkState s;
        s.arch = arch({1, 1, 1}, kCos, 1.0);
        s.weights = {DenseMatrix{{0.5}}, DenseMatrix{{3.0}}};
        const std::vector<double> x{std::numbers::pi};
        const ForwardTrace t = forward(s, x);
        CHECK(t.preactivations[1][0] == doctest::Approx(std::numbers::pi / 2));
        CHECK(t.features[1][0] == doctest::Approx(-1.0));
        CHECK(t.output() == doctest::Approx(-3.0));
        CHECK(std::abs(t.derivatives[1][0]) <= 1e-12);  // -2 sin(pi)
    }
    SUBCASE("zero weights, cosine") {
        const NetworkState s = init_network(arch({3, 4, 5, 1}, kCos, 0.0), 0);
        const ForwardTrace t = forward(s, std::vector<double>{1, 2, 3});
        for (std::size_t k = 1; k <= 2; ++k) {
            for (double v : t.features[k]) CHECK(v == 1.0);
            for (double v : t.derivatives[k]) CHECK(v == 0.0);
        }
        CHECK(t.output() == 0.0);
    }
    SUBCASE("L = 1 is linear") {
        const NetworkState s = init_network(arch({3, 1}, kCos, 1.0), 2);
        const std::vector<double> x{0.3, -1.0, 2.0};
        double want = 0.0;
        for (std::size_t a = 0; a < 3; ++a) want += s.layer(1)(a, 0) * x[a];
        CHECK(forward_output(s, x) == want);
    }
    SUBCASE("dimension mismatch") {
        const NetworkState s = init_network(arch({3, 2, 1}, kCos, 1.0), 2);
        CHECK_THROWS_AS(forward(s, std::vector<double>{1, 2}), Error);
    }
}

TEST_CASE("forward: derivative diagonal matches finite differences") {
    const double h = 1e-5;
    for (const Activation& act : {kCos, kSin, kRelu, kId}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto a = make_he_architecture({4, 6, 5, 1}, act);
            const NetworkState s = init_network(a, seed);
            const Dataset d = sample_dataset(4, 1, SamplerKind::GaussianIid, seed);
            const ForwardTrace t = forward(s, d.sample(0));
            for (std::size_t k = 1; k < 3; ++k)
                for (std::size_t j = 0; j < t.derivatives[k].size(); ++j) {
                    const double g = t.preactivations[k][j];
                    if (act.kind == ActivationKind::Relu && std::abs(g) <= 1e-3) continue;
                    const double fd = (act.value(g + h) - act.value(g - h)) / (2 * h);
                    CHECK(std::abs(fd - t.derivatives[k][j]) <= 1e-6);
                }
        }
    }
}

TEST_CASE("forward: purity and boundedness") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = make_he_architecture({5, 16, 9, 1}, Activation{ActivationKind::Cosine, 7.0});
        const NetworkState s = init_network(a, seed);
        const Dataset d = sample_dataset(5, 4, SamplerKind::GaussianIid, seed);
        for (std::size_t i = 0; i < 4; ++i) {
            const ForwardTrace t1 = forward(s, d.sample(i));
            const ForwardTrace t2 = forward(s, d.sample(i));
            CHECK(t1.features == t2.features);
            CHECK(t1.derivatives == t2.derivatives);
            for (std::size_t k = 1; k < 3; ++k) {
                double sq = 0.0;
                for (double v : t1.features[k]) sq += v * v;
                CHECK(sq <= static_cast<double>(a.widths[k]));
                for (double v : t1.derivatives[k]) CHECK(std::abs(v) <= 7.0);
            }
        }
    }
}

TEST_CASE("sample_dataset") {
    SUBCASE("sphere rows have norm sqrt(n0)") {
        const Dataset d = sample_dataset(17, 50, SamplerKind::SphereUniform, 3);
        for (std::size_t i = 0; i < 50; ++i)
            CHECK(std::abs(norm2(d.sample(i)) - std::sqrt(17.0)) <= 1e-12);
    }
    SUBCASE("gaussian squared norms average n0") {
        const Dataset d = sample_dataset(60, 10000, SamplerKind::GaussianIid, 4);
        double sq = 0.0, nrm = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double r = norm2(d.sample(i));
            sq += r * r;
            nrm += r;
        }
        CHECK(std::abs(sq / 1e4 - 60.0) <= 0.03 * 60.0);
        CHECK(std::abs(nrm / 1e4 - std::sqrt(59.5)) <= 0.03 * std::sqrt(59.5));
    }
    SUBCASE("deterministic per seed") {
        const Dataset a = sample_dataset(3, 5, SamplerKind::GaussianIid, 11);
        const Dataset b = sample_dataset(3, 5, SamplerKind::GaussianIid, 11);
        CHECK(std::vector<double>(a.samples.data().begin(), a.samples.data().end()) ==
              std::vector<double>(b.samples.data().begin(), b.samples.data().end()));
    }
    CHECK_THROWS_AS(sample_dataset(0, 3, SamplerKind::GaussianIid, 1), Error);
    CHECK_THROWS_AS(sample_dataset(3, 0, SamplerKind::GaussianIid, 1), Error);
}
