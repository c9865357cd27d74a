#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ntkspec/linalg.hpp"

namespace ntkspec {

enum class ActivationKind { Cosine, Sine, Relu, Identity };

std::string_view to_string(ActivationKind kind);
ActivationKind parse_activation(std::string_view name);

struct Activation {
    ActivationKind kind = ActivationKind::Cosine;
    double frequency = 1.0;  // s; ignored for relu and identity

    bool periodic() const {
        return kind == ActivationKind::Cosine || kind == ActivationKind::Sine;
    }
    double value(double t) const;
    // relu'(0) is taken to be 0.
    double derivative(double t) const;
    // Supremum of |phi'| over the real line.
    double derivative_bound() const;
};

struct ArchitectureSpec {
    std::vector<std::size_t> widths;  // n_0 .. n_L, n_L == 1
    Activation activation;
    std::vector<double> init_scales;  // beta_1 .. beta_L (standard deviations)

    std::size_t depth() const { return widths.size() - 1; }
    std::size_t parameter_count() const;

    // Throws on structural problems. Returns human-readable warnings for
    // conditions that are tolerated, e.g. beta_k > 1 from He init.
    std::vector<std::string> validate() const;
};

// beta_k = sqrt(2 / n_{k-1})
std::vector<double> he_scales(std::span<const std::size_t> widths);
ArchitectureSpec make_he_architecture(std::vector<std::size_t> widths, Activation activation);

// Either He scaling, re-derived for every width configuration, or a fixed
// list of per-layer standard deviations.
struct InitRule {
    bool he = true;
    std::vector<double> scales;

    static InitRule he_init() { return {}; }
    static InitRule explicit_scales(std::vector<double> s) { return {false, std::move(s)}; }

    ArchitectureSpec apply(std::vector<std::size_t> widths, Activation activation) const;
};

struct NetworkState {
    ArchitectureSpec arch;
    std::vector<DenseMatrix> weights;  // W_k is n_{k-1} x n_k, stored at index k-1

    std::size_t depth() const { return weights.size(); }
    std::size_t parameter_count() const { return arch.parameter_count(); }
    const DenseMatrix& layer(std::size_t k) const { return weights[k - 1]; }
};

// Each W_k entry drawn i.i.d. N(0, beta_k^2).
NetworkState init_network(const ArchitectureSpec& arch, std::uint64_t seed);

// theta = [vec(W_1), ..., vec(W_L)], vec stacking columns of each W_k.
std::vector<double> flatten_parameters(const NetworkState& state);
NetworkState with_parameters(const NetworkState& state, std::span<const double> theta);
// Offset of W_k(a, b) inside theta.
std::size_t parameter_index(const ArchitectureSpec& arch, std::size_t k, std::size_t a,
                            std::size_t b);

// Per-layer quantities of one forward pass. features[k] holds f_k for
// k in [0, L]; preactivations[k] and derivatives[k] hold g_k and the diagonal
// of Sigma_k for k in [1, L-1] and are empty elsewhere.
struct ForwardTrace {
    std::vector<std::vector<double>> features;
    std::vector<std::vector<double>> preactivations;
    std::vector<std::vector<double>> derivatives;

    std::size_t depth() const { return features.size() - 1; }
    double output() const { return features.back().front(); }
};

ForwardTrace forward(const NetworkState& state, std::span<const double> x);
double forward_output(const NetworkState& state, std::span<const double> x);

enum class SamplerKind { GaussianIid, SphereUniform };

std::string_view to_string(SamplerKind kind);
SamplerKind parse_sampler(std::string_view name);

struct Dataset {
    DenseMatrix samples;  // N x n_0, row i is x_i
    SamplerKind kind = SamplerKind::GaussianIid;
    std::uint64_t seed = 0;

    std::size_t size() const { return samples.rows(); }
    std::span<const double> sample(std::size_t i) const { return samples.row(i); }
};

Dataset sample_dataset(std::size_t n0, std::size_t n_samples, SamplerKind kind, std::uint64_t seed);

std::vector<ForwardTrace> forward_all(const NetworkState& state, const Dataset& data);

// N x n_k matrix stacking f_k(x_i) as rows.
DenseMatrix feature_matrix(std::span<const ForwardTrace> traces, std::size_t k);

}  // namespace ntkspec
