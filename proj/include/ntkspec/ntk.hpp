#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ntkspec/linalg.hpp"
#include "ntkspec/network.hpp"

namespace ntkspec {

// Backward sensitivity matrices. g[k-1] is G_k (N x n_k) for k in [1, L];
// row i of G_k is d f_L(x_i) / d g_k, so G_L is a column of ones.
struct GMatrixSet {
    std::vector<DenseMatrix> g;

    std::size_t depth() const { return g.size(); }
    const DenseMatrix& layer(std::size_t k) const { return g[k - 1]; }
};

GMatrixSet build_g_matrices(const NetworkState& state, std::span<const ForwardTrace> traces);

struct NtkResult {
    DenseMatrix kernel;
    // layer_terms[k] = (F_k F_k^T) o (G_{k+1} G_{k+1}^T), k in [0, L-1]
    std::vector<DenseMatrix> layer_terms;
    std::vector<DenseMatrix> feature_grams;      // F_k F_k^T
    std::vector<DenseMatrix> sensitivity_grams;  // G_{k+1} G_{k+1}^T
    Spectrum spectrum;
    double lambda_min = 0.0;
    double lambda_min_clamped = 0.0;

    // Negative eigenvalues above -1e-8 * lambda_max are round-off.
    bool psd_within_tolerance() const;
};

inline constexpr double kPsdTolerance = 1e-8;

NtkResult assemble_ntk(std::span<const ForwardTrace> traces, const GMatrixSet& g);
NtkResult compute_ntk(const NetworkState& state, const Dataset& data);

// N x p Jacobian of [f_L(x_1), ..., f_L(x_N)] with respect to theta, built by
// an independent reverse-mode pass.
DenseMatrix jacobian(const NetworkState& state, const Dataset& data);
DenseMatrix jacobian_gram(const NetworkState& state, const Dataset& data);

inline constexpr std::size_t kMaxOracleParameters = 10'000'000;

struct NtkDiagnostics {
    double lambda_min = 0.0;
    std::vector<double> term_lambda_min;
    std::vector<double> schur_bounds;  // lambda_min(F_k F_k^T) * min_i ||(G_{k+1})_i||^2
    double weyl_sum = 0.0;
    double schur_sum = 0.0;
    double slack = 0.0;
    bool weyl_holds = false;   // lambda_min >= sum of term minima
    bool schur_holds = false;  // every term minimum >= its Schur bound
};

NtkDiagnostics ntk_diagnostics(const NtkResult& result);

}  // namespace ntkspec
