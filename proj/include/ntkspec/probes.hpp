#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ntkspec/audit.hpp"
#include "ntkspec/linalg.hpp"
#include "ntkspec/network.hpp"

namespace ntkspec {

enum class ProbeQuantity {
    FeatureNorm,
    SigmaFrobenius,
    ChainProduct,
    GRowNorm,
    OperatorNormChain,
    FeatureSigmaMin,
    CentredFeatures,
    EmpiricalLipschitz,
};

std::string_view to_string(ProbeQuantity q);

// Sweep over one entry of the width list; widths[layer] takes each value.
struct WidthSweep {
    std::size_t layer = 1;
    std::vector<std::size_t> values;
};

struct ProbeSetup {
    std::vector<std::size_t> widths;  // template, n_L must be 1
    Activation activation;
    InitRule init;
    WidthSweep sweep;
    std::size_t trials = 10;
    std::size_t samples_per_trial = 8;  // inputs per trial (N for sigma_min)
    SamplerKind sampler = SamplerKind::GaussianIid;
    std::uint64_t seed = 0;

    std::vector<std::size_t> widths_at(std::size_t point) const;
    ArchitectureSpec architecture_at(std::size_t point) const;
};

struct ProbeResult {
    ProbeQuantity quantity = ProbeQuantity::FeatureNorm;
    std::size_t layer = 0;
    std::string sweep_variable;
    std::vector<double> sweep_values;
    std::vector<double> measured;   // trial means
    std::vector<double> trial_std;
    std::vector<double> predicted;  // constant-free theory expression
    std::optional<SlopeFit> fit;    // log measured vs log sweep value
    InequalityAudit audit;
};

// True iff every Sigma_k entry of the trace lies within the activation's
// derivative bound.
bool derivative_bound_holds(const ForwardTrace& trace, const Activation& activation);

ProbeResult probe_feature_norm(const ProbeSetup& setup, std::size_t k);
ProbeResult probe_sigma_frobenius(const ProbeSetup& setup, std::size_t k);

// Sigma_k prod_{l=k+1}^p W_l Sigma_l as an n_k x n_p matrix.
DenseMatrix chain_product(const NetworkState& state, const ForwardTrace& trace, std::size_t k,
                          std::size_t p);

struct ChainProbeResult {
    ProbeResult chain;  // ||Sigma_k prod W_l Sigma_l||_F^2
    ProbeResult g_row;  // ||(G_k)_i||^2, the chain with trailing W_L
};

ChainProbeResult probe_chain_product(const ProbeSetup& setup, std::size_t k, std::size_t p);
// ||Sigma_k prod_{l>k} W_l Sigma_l||_op^2, checking ||Sigma_k||_op <= s and
// op <= Frobenius on every instance.
ProbeResult probe_operator_norm_chain(const ProbeSetup& setup, std::size_t k);
// sigma_min(F_k)^2 with N = samples_per_trial; requires n_k >= N everywhere.
ProbeResult probe_feature_sigma_min(const ProbeSetup& setup, std::size_t k);

struct CentredFeatureProbe {
    std::vector<double> mu;           // Monte Carlo estimate of E_x f_k(x)
    std::vector<double> lambda_diag;  // <f_k(x_i), mu> - ||mu||^2
    DenseMatrix feature_gram;         // F_k F_k^T
    DenseMatrix centred_gram;         // Ft_k Ft_k^T
    DenseMatrix difference;           // F F^T - (Ft Ft^T - L 1 1^T L / ||mu||^2)
    double difference_min_eigenvalue = 0.0;
    double tolerance = 0.0;           // 1e-6 * trace(F F^T)
    bool degenerate = false;          // ||mu|| < 1e-12, inequality undefined
    bool holds = false;
};

inline constexpr std::size_t kDefaultMeanSamples = 4096;

CentredFeatureProbe probe_centred_features(const NetworkState& state, const Dataset& data,
                                           std::size_t k,
                                           std::size_t mc_mean_samples = kDefaultMeanSamples,
                                           std::uint64_t seed = 0);

// Input Jacobian of f_k at x, n_k x n_0.
DenseMatrix input_jacobian(const NetworkState& state, std::span<const double> x, std::size_t k);
// max over samples of ||J(f_k)(x)||_op
double empirical_lipschitz(const NetworkState& state, const Dataset& data, std::size_t k);

struct GershgorinBounds {
    double lower = 0.0;
    double upper = 0.0;
};

GershgorinBounds gershgorin_bounds(const DenseMatrix& gram);

}  // namespace ntkspec
