#include "ntkspec/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ntkspec/error.hpp"

namespace ntkspec {

MomentPrediction gaussian_activation_moments(double s, double sigma) {
    require(s >= 0.0 && sigma >= 0.0, ErrorKind::InvalidInput,
            "gaussian_activation_moments: s and sigma must be non-negative");
    // E[cos(t z)] = exp(-t^2 sigma^2 / 2) with t = 2s.
    const double decay = std::exp(-2.0 * s * s * sigma * sigma);
    MomentPrediction m;
    m.mean_cos_sq = 0.5 * (1.0 + decay);
    m.mean_sin_sq = 0.5 * (1.0 - decay);
    m.sigma = sigma;
    m.frequency = s;
    return m;
}

namespace {

double n_at(const ArchitectureSpec& arch, std::size_t l) { return static_cast<double>(arch.widths[l]); }
double beta_at(const ArchitectureSpec& arch, std::size_t l) { return arch.init_scales[l - 1]; }

// prod_{l=first}^{last} beta_l n_l (empty product = 1)
double linear_product(const ArchitectureSpec& arch, std::size_t first, std::size_t last) {
    double p = 1.0;
    for (std::size_t l = first; l <= last && l >= 1; ++l) p *= beta_at(arch, l) * n_at(arch, l);
    return p;
}

// prod_{l=first}^{last}, l != skip, sqrt(beta_l n_l)
double sqrt_product(const ArchitectureSpec& arch, std::size_t first, std::size_t last,
                    std::size_t skip = 0) {
    double p = 1.0;
    for (std::size_t l = first; l <= last && l >= 1; ++l)
        if (l != skip) p *= std::sqrt(beta_at(arch, l) * n_at(arch, l));
    return p;
}

double saturation(double beta, double s) { return 1.0 - std::exp(-beta * beta * s * s); }

// Shared body of the k-th term of both bounds, without the s-power and the
// sqrt(n_0) factor that distinguish them.
double wide_layer_term(const ArchitectureSpec& arch, double s, std::size_t k) {
    const std::size_t depth = arch.depth();
    const double bk = beta_at(arch, k);
    const double nk = n_at(arch, k);
    return saturation(beta_at(arch, k + 1), s) * std::pow(bk, 1.5) * std::pow(nk, 1.5) *
           linear_product(arch, 1, k - 1) * beta_at(arch, k + 1) * n_at(arch, k + 1) *
           sqrt_product(arch, k + 2, depth - 1) * beta_at(arch, depth) * n_at(arch, depth);
}

}  // namespace

std::vector<int> wide_layer_flags(const ArchitectureSpec& arch, std::size_t n_samples) {
    std::vector<int> flags;
    const std::size_t depth = arch.depth();
    for (std::size_t k = 1; k < depth; ++k) {
        double log_product = 1.0;
        for (std::size_t l = 1; l < k; ++l) log_product *= std::log(n_at(arch, l));
        double min_width = n_at(arch, 0);
        for (std::size_t l = 1; l <= k; ++l) min_width = std::min(min_width, n_at(arch, l));
        const bool wide = arch.widths[k] >= n_samples;
        flags.push_back(wide && log_product < min_width ? 1 : 0);
    }
    return flags;
}

BoundEvaluation theorem31_lower(const ArchitectureSpec& arch, double s, double lambda_min_xxt,
                                std::size_t n_samples) {
    arch.validate();
    require(n_samples >= 1, ErrorKind::InvalidInput, "theorem31_lower: N must be >= 1");
    const std::size_t depth = arch.depth();

    BoundEvaluation eval;
    eval.lambda_min_xxt = lambda_min_xxt;
    eval.a_flags = wide_layer_flags(arch, n_samples);
    for (std::size_t k = 1; k < depth; ++k) {
        const double term = s * s * wide_layer_term(arch, s, k);
        eval.lower_terms.push_back(term);
        if (eval.a_flags[k - 1]) eval.lower_bound_value += term;
    }
    eval.data_term = lambda_min_xxt * s * s * saturation(beta_at(arch, 1), s) * beta_at(arch, 1) *
                     n_at(arch, 1) * sqrt_product(arch, 2, depth - 1) * beta_at(arch, depth) *
                     n_at(arch, depth);
    eval.lower_bound_value += eval.data_term;
    eval.upper_bound_value = theorem31_upper(arch, s, n_samples).value;
    return eval;
}

UpperBoundEvaluation theorem31_upper(const ArchitectureSpec& arch, double s,
                                     [[maybe_unused]] std::size_t n_samples) {
    arch.validate();
    const std::size_t depth = arch.depth();
    const double sqrt_n0 = std::sqrt(n_at(arch, 0));
    UpperBoundEvaluation up;
    // The k = L term would reference a layer L+1 and is not evaluated.
    for (std::size_t k = 1; k < depth; ++k) {
        const double term = s * s * s * sqrt_n0 * wide_layer_term(arch, s, k);
        up.terms.push_back(term);
        up.value += term;
    }
    return up;
}

std::string_view to_string(ScalingLaw law) {
    switch (law) {
        case ScalingLaw::FeatureNorm: return "feature_norm";
        case ScalingLaw::SigmaFrobenius: return "sigma_frobenius";
        case ScalingLaw::ChainProduct: return "chain_product";
        case ScalingLaw::GRowNorm: return "g_row_norm";
        case ScalingLaw::FeatureSigmaMin: return "feature_sigma_min";
        case ScalingLaw::LipschitzAssumption: return "lipschitz_assumption";
    }
    return "unknown";
}

ScalingLaw parse_scaling_law(std::string_view name) {
    for (ScalingLaw law : {ScalingLaw::FeatureNorm, ScalingLaw::SigmaFrobenius,
                           ScalingLaw::ChainProduct, ScalingLaw::GRowNorm,
                           ScalingLaw::FeatureSigmaMin, ScalingLaw::LipschitzAssumption})
        if (to_string(law) == name) return law;
    fail(ErrorKind::InvalidInput, "unknown scaling law '" + std::string(name) + "'");
}

double lemma_scaling_prediction(const ArchitectureSpec& arch, double s, ScalingLaw law,
                                std::size_t k, std::size_t p) {
    const std::size_t depth = arch.depth();
    require(k >= 1 && k < depth, ErrorKind::InvalidInput,
            "lemma_scaling_prediction: layer must lie in [1, L-1]");
    const double sqrt_n0 = std::sqrt(n_at(arch, 0));
    const double bk = beta_at(arch, k);
    const double nk = n_at(arch, k);
    const double hidden_before = sqrt_product(arch, 1, k - 1);

    switch (law) {
        case ScalingLaw::FeatureNorm:
            return s * sqrt_n0 * hidden_before * bk * nk;
        case ScalingLaw::SigmaFrobenius:
            return saturation(bk, s) * sqrt_n0 * bk * nk * hidden_before;
        case ScalingLaw::ChainProduct: {
            require(p >= k && p < depth, ErrorKind::InvalidInput,
                    "lemma_scaling_prediction: chain end p must lie in [k, L-1]");
            return s * s * saturation(bk, s) * sqrt_n0 * bk * nk * beta_at(arch, p) * n_at(arch, p) *
                   sqrt_product(arch, 1, p - 1, k);
        }
        case ScalingLaw::GRowNorm:
            return s * s * saturation(bk, s) * sqrt_n0 * bk * nk * beta_at(arch, depth) *
                   n_at(arch, depth) * sqrt_product(arch, 1, depth - 1, k);
        case ScalingLaw::FeatureSigmaMin:
            return sqrt_n0 * bk * nk * hidden_before;
        case ScalingLaw::LipschitzAssumption: {
            double min_width = n_at(arch, 0);
            double log_product = 1.0;
            for (std::size_t l = 1; l <= k; ++l) min_width = std::min(min_width, n_at(arch, l));
            for (std::size_t l = 1; l < k; ++l) log_product *= std::log(n_at(arch, l));
            return std::pow(s, static_cast<double>(k)) * bk * nk / min_width * hidden_before *
                   log_product;
        }
    }
    return 0.0;
}

}  // namespace ntkspec
