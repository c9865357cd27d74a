#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "ntkspec/network.hpp"

namespace ntkspec {

// Second moments of cos(s z) and sin(s z) for z ~ N(0, sigma^2).
struct MomentPrediction {
    double mean_cos_sq = 1.0;
    double mean_sin_sq = 0.0;
    double sigma = 0.0;
    double frequency = 0.0;
};

MomentPrediction gaussian_activation_moments(double s, double sigma);

// Constant-free evaluation of the minimum-eigenvalue lower bound. All
// absolute constants hidden in Omega(.) are set to 1.
struct BoundEvaluation {
    double lower_bound_value = 0.0;
    double upper_bound_value = 0.0;
    std::vector<int> a_flags;          // layers 1 .. L-1
    std::vector<double> lower_terms;   // per wide-layer term, before a_k weighting
    double data_term = 0.0;            // lambda_min(X X^T) contribution
    double lambda_min_xxt = 0.0;
};

// a_k = 1 iff n_k >= N and prod_{l<k} log(n_l) < min_{l<=k} n_l.
std::vector<int> wide_layer_flags(const ArchitectureSpec& arch, std::size_t n_samples);

BoundEvaluation theorem31_lower(const ArchitectureSpec& arch, double s, double lambda_min_xxt,
                                std::size_t n_samples);

struct UpperBoundEvaluation {
    double value = 0.0;
    std::vector<double> terms;  // one per layer k in [1, L-1]
};

UpperBoundEvaluation theorem31_upper(const ArchitectureSpec& arch, double s,
                                     std::size_t n_samples);

enum class ScalingLaw {
    FeatureNorm,         // ||f_k(x)||^2
    SigmaFrobenius,      // ||Sigma_k(x)||_F^2
    ChainProduct,        // ||Sigma_k prod_{l=k+1}^p W_l Sigma_l||_F^2
    GRowNorm,            // ||(G_k)_i||^2
    FeatureSigmaMin,     // sigma_min(F_k)^2
    LipschitzAssumption, // ||f_k||_Lip^2 upper envelope
};

std::string_view to_string(ScalingLaw law);
ScalingLaw parse_scaling_law(std::string_view name);

// Constant-free value of the predicted Theta/O expression for layer k. `p` is
// only read by ChainProduct.
double lemma_scaling_prediction(const ArchitectureSpec& arch, double s, ScalingLaw law,
                                std::size_t k, std::size_t p = 0);

}  // namespace ntkspec
