#include "ntkspec/probes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "ntkspec/error.hpp"
#include "ntkspec/ntk.hpp"
#include "ntkspec/theory.hpp"

namespace ntkspec {

std::string_view to_string(ProbeQuantity q) {
    switch (q) {
        case ProbeQuantity::FeatureNorm: return "feature_norm";
        case ProbeQuantity::SigmaFrobenius: return "sigma_frobenius";
        case ProbeQuantity::ChainProduct: return "chain_product";
        case ProbeQuantity::GRowNorm: return "g_row_norm";
        case ProbeQuantity::OperatorNormChain: return "operator_norm_chain";
        case ProbeQuantity::FeatureSigmaMin: return "feature_sigma_min";
        case ProbeQuantity::CentredFeatures: return "centred_features";
        case ProbeQuantity::EmpiricalLipschitz: return "empirical_lipschitz";
    }
    return "unknown";
}

std::vector<std::size_t> ProbeSetup::widths_at(std::size_t point) const {
    require(sweep.layer < widths.size(), ErrorKind::InvalidInput, "sweep layer out of range");
    std::vector<std::size_t> w = widths;
    w[sweep.layer] = sweep.values.at(point);
    return w;
}

ArchitectureSpec ProbeSetup::architecture_at(std::size_t point) const {
    return init.apply(widths_at(point), activation);
}

bool derivative_bound_holds(const ForwardTrace& trace, const Activation& activation) {
    const double bound = activation.derivative_bound();
    for (const auto& d : trace.derivatives)
        for (double v : d)
            if (!(std::abs(v) <= bound)) return false;
    return true;
}

namespace {

double square_sum(std::span<const double> v) { return dot(v, v); }

// Per-trial measurement: receives the network, the trial's inputs, their
// traces and the audit to update; returns one scalar.
using TrialMeasure = std::function<double(const NetworkState&, const Dataset&,
                                          const std::vector<ForwardTrace>&, InequalityAudit&)>;
using Prediction = std::function<double(const ArchitectureSpec&)>;

ProbeResult run_sweep(const ProbeSetup& setup, ProbeQuantity quantity, std::size_t k,
                      const Prediction& predict, const TrialMeasure& measure) {
    require(setup.trials >= 1, ErrorKind::InvalidInput, "probe: trials must be >= 1");
    require(setup.samples_per_trial >= 1, ErrorKind::InvalidInput,
            "probe: samples_per_trial must be >= 1");
    require(!setup.sweep.values.empty(), ErrorKind::InvalidInput, "probe: empty sweep");

    ProbeResult out;
    out.quantity = quantity;
    out.layer = k;
    out.sweep_variable = "n" + std::to_string(setup.sweep.layer);
    for (std::size_t point = 0; point < setup.sweep.values.size(); ++point) {
        const ArchitectureSpec arch = setup.architecture_at(point);
        require(k <= arch.depth(), ErrorKind::InvalidInput, "probe: layer out of range");
        std::vector<double> values;
        for (std::size_t t = 0; t < setup.trials; ++t) {
            const std::uint64_t seed = setup.seed + t;
            const NetworkState state = init_network(arch, seed);
            const Dataset data = sample_dataset(arch.widths[0], setup.samples_per_trial,
                                                setup.sampler, seed);
            const std::vector<ForwardTrace> traces = forward_all(state, data);
            for (const ForwardTrace& tr : traces)
                out.audit.derivative_bound.record(derivative_bound_holds(tr, arch.activation));
            values.push_back(measure(state, data, traces, out.audit));
        }
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var = values.size() > 1 ? var / static_cast<double>(values.size() - 1) : 0.0;

        out.sweep_values.push_back(static_cast<double>(setup.sweep.values[point]));
        out.measured.push_back(mean);
        out.trial_std.push_back(std::sqrt(var));
        out.predicted.push_back(predict(arch));
    }

    const bool positive = std::all_of(out.measured.begin(), out.measured.end(),
                                      [](double v) { return v > 0.0; });
    const bool spread = std::adjacent_find(out.sweep_values.begin(), out.sweep_values.end(),
                                           std::not_equal_to<>()) != out.sweep_values.end();
    if (positive && spread && out.measured.size() >= 2)
        out.fit = loglog_slope(out.sweep_values, out.measured);
    return out;
}

double mean_over_traces(const std::vector<ForwardTrace>& traces,
                        const std::function<double(const ForwardTrace&)>& f) {
    double s = 0.0;
    for (const ForwardTrace& t : traces) s += f(t);
    return s / static_cast<double>(traces.size());
}

void require_hidden_layer(const ProbeSetup& setup, std::size_t k) {
    require(k >= 1 && k + 1 < setup.widths.size(), ErrorKind::InvalidInput,
            "probe: layer must be a hidden layer in [1, L-1]");
}

}  // namespace

ProbeResult probe_feature_norm(const ProbeSetup& setup, std::size_t k) {
    require_hidden_layer(setup, k);
    const double s = setup.activation.frequency;
    return run_sweep(
        setup, ProbeQuantity::FeatureNorm, k,
        [&](const ArchitectureSpec& a) {
            return lemma_scaling_prediction(a, s, ScalingLaw::FeatureNorm, k);
        },
        [&](const NetworkState&, const Dataset&, const std::vector<ForwardTrace>& traces,
            InequalityAudit&) {
            return mean_over_traces(traces,
                                    [&](const ForwardTrace& t) { return square_sum(t.features[k]); });
        });
}

ProbeResult probe_sigma_frobenius(const ProbeSetup& setup, std::size_t k) {
    require_hidden_layer(setup, k);
    const double s = setup.activation.frequency;
    return run_sweep(
        setup, ProbeQuantity::SigmaFrobenius, k,
        [&](const ArchitectureSpec& a) {
            return lemma_scaling_prediction(a, s, ScalingLaw::SigmaFrobenius, k);
        },
        [&](const NetworkState&, const Dataset&, const std::vector<ForwardTrace>& traces,
            InequalityAudit&) {
            return mean_over_traces(
                traces, [&](const ForwardTrace& t) { return square_sum(t.derivatives[k]); });
        });
}

DenseMatrix chain_product(const NetworkState& state, const ForwardTrace& trace, std::size_t k,
                          std::size_t p) {
    const std::size_t depth = state.depth();
    require(k >= 1 && k <= p && p < depth, ErrorKind::InvalidInput,
            "chain_product: need 1 <= k <= p <= L-1");
    DenseMatrix a = DenseMatrix::diagonal(trace.derivatives[k]);
    for (std::size_t l = k + 1; l <= p; ++l) {
        a = multiply(a, state.layer(l));
        const auto& d = trace.derivatives[l];
        for (std::size_t i = 0; i < a.rows(); ++i) {
            auto row = a.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) row[j] *= d[j];
        }
    }
    return a;
}

ChainProbeResult probe_chain_product(const ProbeSetup& setup, std::size_t k, std::size_t p) {
    require(k >= 1 && k <= p && p + 1 < setup.widths.size(), ErrorKind::InvalidInput,
            "probe_chain_product: need 1 <= k <= p <= L-1");
    const double s = setup.activation.frequency;
    ChainProbeResult out;
    out.chain = run_sweep(
        setup, ProbeQuantity::ChainProduct, k,
        [&](const ArchitectureSpec& a) {
            return lemma_scaling_prediction(a, s, ScalingLaw::ChainProduct, k, p);
        },
        [&](const NetworkState& state, const Dataset&, const std::vector<ForwardTrace>& traces,
            InequalityAudit&) {
            return mean_over_traces(traces, [&](const ForwardTrace& t) {
                const double f = chain_product(state, t, k, p).frobenius_norm();
                return f * f;
            });
        });
    out.g_row = run_sweep(
        setup, ProbeQuantity::GRowNorm, k,
        [&](const ArchitectureSpec& a) {
            return lemma_scaling_prediction(a, s, ScalingLaw::GRowNorm, k);
        },
        [&](const NetworkState& state, const Dataset&, const std::vector<ForwardTrace>& traces,
            InequalityAudit&) {
            const GMatrixSet g = build_g_matrices(state, traces);
            const DenseMatrix& gk = g.layer(k);
            double sum = 0.0;
            for (std::size_t i = 0; i < gk.rows(); ++i) sum += square_sum(gk.row(i));
            return sum / static_cast<double>(gk.rows());
        });
    return out;
}

ProbeResult probe_operator_norm_chain(const ProbeSetup& setup, std::size_t k) {
    require_hidden_layer(setup, k);
    const std::size_t last = setup.widths.size() - 2;
    return run_sweep(
        setup, ProbeQuantity::OperatorNormChain, k,
        [&](const ArchitectureSpec& a) {
            // sn_k / min_{l in [k, L-1]} n_l * prod_{l>k} n_l beta_l^2
            double min_width = std::numeric_limits<double>::infinity();
            for (std::size_t l = k; l <= last; ++l)
                min_width = std::min(min_width, static_cast<double>(a.widths[l]));
            double prod = 1.0;
            for (std::size_t l = k + 1; l <= last; ++l)
                prod *= static_cast<double>(a.widths[l]) * a.init_scales[l - 1] * a.init_scales[l - 1];
            return a.activation.frequency * static_cast<double>(a.widths[k]) / min_width * prod;
        },
        [&](const NetworkState& state, const Dataset&, const std::vector<ForwardTrace>& traces,
            InequalityAudit& audit) {
            const double bound = state.arch.activation.derivative_bound();
            return mean_over_traces(traces, [&](const ForwardTrace& t) {
                double sigma_op = 0.0;
                for (double v : t.derivatives[k]) sigma_op = std::max(sigma_op, std::abs(v));
                audit.derivative_bound.record(sigma_op <= bound);
                const DenseMatrix a = chain_product(state, t, k, last);
                const double op = operator_norm(a).value;
                audit.op_le_frobenius.record(op <= a.frobenius_norm() * (1.0 + 1e-12));
                return op * op;
            });
        });
}

ProbeResult probe_feature_sigma_min(const ProbeSetup& setup, std::size_t k) {
    require_hidden_layer(setup, k);
    for (std::size_t point = 0; point < setup.sweep.values.size(); ++point)
        require(setup.widths_at(point)[k] >= setup.samples_per_trial, ErrorKind::Precondition,
                "probe_feature_sigma_min: n_k must be >= N at every sweep point");
    return run_sweep(
        setup, ProbeQuantity::FeatureSigmaMin, k,
        [&](const ArchitectureSpec& a) {
            return lemma_scaling_prediction(a, a.activation.frequency, ScalingLaw::FeatureSigmaMin, k);
        },
        [&](const NetworkState&, const Dataset&, const std::vector<ForwardTrace>& traces,
            InequalityAudit&) {
            const double sigma = min_singular_value(feature_matrix(traces, k));
            return sigma * sigma;
        });
}

CentredFeatureProbe probe_centred_features(const NetworkState& state, const Dataset& data,
                                           std::size_t k, std::size_t mc_mean_samples,
                                           std::uint64_t seed) {
    require(k >= 1 && k < state.depth(), ErrorKind::InvalidInput,
            "probe_centred_features: layer must be hidden");
    require(mc_mean_samples >= 1000, ErrorKind::InvalidInput,
            "probe_centred_features: need at least 1000 samples for the mean");

    const std::size_t width = state.arch.widths[k];
    CentredFeatureProbe out;
    out.mu.assign(width, 0.0);
    const Dataset fresh = sample_dataset(state.arch.widths[0], mc_mean_samples, data.kind,
                                         seed ^ 0x6d75ULL);
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        const ForwardTrace t = forward(state, fresh.sample(i));
        for (std::size_t j = 0; j < width; ++j) out.mu[j] += t.features[k][j];
    }
    for (double& v : out.mu) v /= static_cast<double>(mc_mean_samples);

    const std::vector<ForwardTrace> traces = forward_all(state, data);
    const DenseMatrix f = feature_matrix(traces, k);
    const std::size_t n = f.rows();
    const double mu_sq = dot(out.mu, out.mu);

    DenseMatrix centred = f;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = centred.row(i);
        for (std::size_t j = 0; j < width; ++j) row[j] -= out.mu[j];
        out.lambda_diag.push_back(dot(f.row(i), out.mu) - mu_sq);
    }
    out.feature_gram = gram_rows(f);
    out.centred_gram = gram_rows(centred);
    out.tolerance = 1e-6 * out.feature_gram.trace();

    if (std::sqrt(mu_sq) < 1e-12) {
        out.degenerate = true;
        return out;
    }
    out.difference = DenseMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.difference(i, j) = out.feature_gram(i, j) - out.centred_gram(i, j) +
                                   out.lambda_diag[i] * out.lambda_diag[j] / mu_sq;
    // Symmetrize exactly so the eigensolver's tolerance check sees no drift.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (out.difference(i, j) + out.difference(j, i));
            out.difference(i, j) = v;
            out.difference(j, i) = v;
        }
    out.difference_min_eigenvalue = sym_eigen(out.difference).min();
    out.holds = out.difference_min_eigenvalue >= -out.tolerance;
    return out;
}

DenseMatrix input_jacobian(const NetworkState& state, std::span<const double> x, std::size_t k) {
    const std::size_t depth = state.depth();
    require(k >= 1 && k <= depth, ErrorKind::InvalidInput, "input_jacobian: layer out of range");
    const ForwardTrace trace = forward(state, x);
    // First factor applied to the identity is just Sigma_1 W_1^T.
    DenseMatrix jac = state.layer(1).transpose();
    for (std::size_t l = 1; l <= k; ++l) {
        if (l > 1) jac = multiply(state.layer(l).transpose(), jac);
        if (l < depth) {
            const auto& d = trace.derivatives[l];
            for (std::size_t i = 0; i < jac.rows(); ++i) {
                auto row = jac.row(i);
                for (double& v : row) v *= d[i];
            }
        }
    }
    return jac;
}

double empirical_lipschitz(const NetworkState& state, const Dataset& data, std::size_t k) {
    double best = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        best = std::max(best, operator_norm(input_jacobian(state, data.sample(i), k), 2000, 1e-10).value);
    return best;
}

GershgorinBounds gershgorin_bounds(const DenseMatrix& gram) {
    require(gram.square() && !gram.empty(), ErrorKind::Dimension,
            "gershgorin_bounds: matrix must be square and non-empty");
    const std::size_t n = gram.rows();
    double min_diag = std::numeric_limits<double>::infinity();
    double max_diag = -std::numeric_limits<double>::infinity();
    double max_off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        min_diag = std::min(min_diag, gram(i, i));
        max_diag = std::max(max_diag, gram(i, i));
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) max_off = std::max(max_off, std::abs(gram(i, j)));
    }
    const double spread = static_cast<double>(n) * max_off;
    return {min_diag - spread, max_diag + spread};
}

}  // namespace ntkspec
