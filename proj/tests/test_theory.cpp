#include <cmath>

#include "doctest.h"
#include "ntkspec/error.hpp"
#include "ntkspec/rng.hpp"
#include "ntkspec/theory.hpp"

using namespace ntkspec;

namespace {

ArchitectureSpec unit_arch(std::vector<std::size_t> widths) {
    ArchitectureSpec a;
    a.widths = std::move(widths);
    a.activation = Activation{ActivationKind::Cosine, 1.0};
    a.init_scales.assign(a.widths.size() - 1, 1.0);
    return a;
}

}  // namespace

TEST_CASE("gaussian_activation_moments") {
    const auto zero_s = gaussian_activation_moments(0.0, 3.0);
    CHECK(zero_s.mean_cos_sq == 1.0);
    CHECK(zero_s.mean_sin_sq == 0.0);
    const auto zero_sigma = gaussian_activation_moments(2.0, 0.0);
    CHECK(zero_sigma.mean_cos_sq == 1.0);

    const auto m = gaussian_activation_moments(1.0, 1.0);
    CHECK(m.mean_cos_sq == doctest::Approx(0.56767).epsilon(1e-5));
    CHECK(m.mean_sin_sq == doctest::Approx(0.43233).epsilon(1e-5));
    CHECK_THROWS_AS(gaussian_activation_moments(-1.0, 1.0), Error);

    double previous = 1.0;
    for (double t = 0.1; t < 5.0; t += 0.1) {
        const auto p = gaussian_activation_moments(t, 1.0);
        CHECK(p.mean_cos_sq + p.mean_sin_sq == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(p.mean_cos_sq <= previous);
        previous = p.mean_cos_sq;
    }
}

TEST_CASE("gaussian_activation_moments: Monte Carlo") {
    Rng rng(2024);
    const double s = 1.0, sigma = 1.0;
    const int draws = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double c = std::cos(s * rng.normal(0.0, sigma));
        sum += c * c;
        sq += c * c * c * c;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sq / draws - mean * mean) / draws);
    CHECK(std::abs(mean - gaussian_activation_moments(s, sigma).mean_cos_sq) <= 3.0 * se);
}

TEST_CASE("wide layer flags") {
    CHECK(wide_layer_flags(unit_arch({4, 64, 8, 1}), 16) == std::vector<int>{1, 0});
    // Layer 2 is wide but log(64) = 4.16 is not below min(n_0, n_1, n_2) = 4.
    CHECK(wide_layer_flags(unit_arch({4, 64, 32, 1}), 16) == std::vector<int>{1, 0});
    CHECK(wide_layer_flags(unit_arch({8, 64, 32, 1}), 16) == std::vector<int>{1, 1});
    CHECK(wide_layer_flags(unit_arch({8, 1}), 16).empty());
}

TEST_CASE("theorem31_lower") {
    const auto a = unit_arch({2, 8, 1});
    const BoundEvaluation zero = theorem31_lower(a, 1.0, 0.0, 16);  // 8 < 16: a_1 = 0
    CHECK(zero.a_flags == std::vector<int>{0});
    CHECK(zero.lower_bound_value == 0.0);

    const BoundEvaluation e = theorem31_lower(a, 1.0, 0.0, 4);
    CHECK(e.a_flags == std::vector<int>{1});
    CHECK(e.lower_bound_value == doctest::Approx((1.0 - std::exp(-1.0)) * std::pow(8.0, 1.5)));
    CHECK(e.lower_bound_value == doctest::Approx(14.303).epsilon(1e-4));

    SUBCASE("data term") {
        // lambda_min(XX^T) s^2 (1 - e^{-b1^2 s^2}) b1 n1 b2 n2 with s = 2
        const BoundEvaluation d = theorem31_lower(a, 2.0, 3.0, 16);
        CHECK(d.data_term == doctest::Approx(3.0 * 4.0 * (1.0 - std::exp(-4.0)) * 8.0));
        CHECK(d.lower_bound_value == doctest::Approx(d.data_term));
    }

    SUBCASE("monotone in widths and lambda_min(XX^T)") {
        double previous = 0.0;
        for (std::size_t n1 : {16u, 32u, 64u, 128u}) {
            const double v = theorem31_lower(unit_arch({8, n1, 16, 1}), 1.5, 0.5, 16).lower_bound_value;
            CHECK(v >= previous);
            previous = v;
        }
        const auto b = unit_arch({8, 32, 16, 1});
        CHECK(theorem31_lower(b, 1.0, 2.0, 16).lower_bound_value >=
              theorem31_lower(b, 1.0, 1.0, 16).lower_bound_value);
    }
}

TEST_CASE("theorem31_upper") {
    CHECK(theorem31_upper(unit_arch({2, 8, 1}), 1e-8, 4).value <= 1e-30);

    const double base = theorem31_upper(unit_arch({3, 8, 5, 1}), 1.3, 4).terms[0];
    const double doubled = theorem31_upper(unit_arch({3, 16, 5, 1}), 1.3, 4).terms[0];
    CHECK(doubled / base == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-12));

    SUBCASE("upper dominates lower across a sweep") {
        // Ratio per term is s * sqrt(n0); lambda_min(XX^T) = 0 isolates the
        // shared terms.
        int violations = 0;
        for (std::size_t n0 : {1u, 2u, 5u, 10u})
            for (double s : {1.0, 2.0, 3.5, 10.0, 30.0})
                for (std::size_t n1 : {8u, 16u, 64u, 256u, 1024u}) {
                    const auto a = unit_arch({n0, n1, 1});
                    const auto lower = theorem31_lower(a, s, 0.0, 4);
                    if (lower.upper_bound_value < lower.lower_bound_value) ++violations;
                }
        CHECK(violations == 0);
    }
}

TEST_CASE("lemma_scaling_prediction") {
    const auto a = unit_arch({4, 8, 6, 1});
    CHECK(lemma_scaling_prediction(a, 1.0, ScalingLaw::FeatureSigmaMin, 1) == doctest::Approx(16.0));
    CHECK(lemma_scaling_prediction(a, 2.0, ScalingLaw::FeatureNorm, 1) == doctest::Approx(2.0 * 2.0 * 8.0));

    ArchitectureSpec two = unit_arch({5, 12, 1});
    two.init_scales[0] = 0.5;
    CHECK(lemma_scaling_prediction(two, 3.0, ScalingLaw::LipschitzAssumption, 1) ==
          doctest::Approx(3.0 * 0.5 * 12.0 / 5.0));

    SUBCASE("chain product at p = k") {
        // Evaluating the chain expression with p = k multiplies the Sigma
        // Frobenius expression by s^2 beta_k n_k.
        const double s = 1.7;
        const double chain = lemma_scaling_prediction(a, s, ScalingLaw::ChainProduct, 2, 2);
        const double sigma = lemma_scaling_prediction(a, s, ScalingLaw::SigmaFrobenius, 2);
        CHECK(chain == doctest::Approx(sigma * s * s * 6.0));
    }

    CHECK_THROWS_AS(lemma_scaling_prediction(a, 1.0, ScalingLaw::FeatureNorm, 3), Error);
    CHECK_THROWS_AS(lemma_scaling_prediction(a, 1.0, ScalingLaw::ChainProduct, 2, 1), Error);
    CHECK(parse_scaling_law("g_row_norm") == ScalingLaw::GRowNorm);
    CHECK_THROWS_AS(parse_scaling_law("nope"), Error);
}
