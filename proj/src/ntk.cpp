#include "ntkspec/ntk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ntkspec/error.hpp"

namespace ntkspec {

GMatrixSet build_g_matrices(const NetworkState& state, std::span<const ForwardTrace> traces) {
    const std::size_t depth = state.depth();
    const auto& widths = state.arch.widths;
    GMatrixSet out;
    for (std::size_t k = 1; k <= depth; ++k) out.g.emplace_back(traces.size(), widths[k]);

    for (std::size_t i = 0; i < traces.size(); ++i) {
        const ForwardTrace& t = traces[i];
        require(t.depth() == depth, ErrorKind::Dimension, "trace depth does not match network");
        out.g[depth - 1](i, 0) = 1.0;
        // G_k row = Sigma_k (W_{k+1} G_{k+1} row), right to left.
        std::vector<double> sens{1.0};
        for (std::size_t k = depth - 1; k >= 1; --k) {
            require(t.derivatives[k].size() == widths[k], ErrorKind::Dimension,
                    "trace width does not match network");
            std::vector<double> next = multiply(state.layer(k + 1), sens);
            for (std::size_t j = 0; j < next.size(); ++j) next[j] *= t.derivatives[k][j];
            std::copy(next.begin(), next.end(), out.g[k - 1].row(i).begin());
            sens = std::move(next);
        }
    }
    return out;
}

bool NtkResult::psd_within_tolerance() const {
    return spectrum.min() >= -kPsdTolerance * std::max(0.0, spectrum.max());
}

NtkResult assemble_ntk(std::span<const ForwardTrace> traces, const GMatrixSet& g) {
    require(!traces.empty(), ErrorKind::InvalidInput, "assemble_ntk: no samples");
    const std::size_t depth = g.depth();
    require(traces.front().depth() == depth, ErrorKind::Dimension,
            "assemble_ntk: trace depth does not match G set");
    const std::size_t n = traces.size();

    NtkResult out;
    out.kernel = DenseMatrix(n, n);
    for (std::size_t k = 0; k < depth; ++k) {
        const DenseMatrix f = feature_matrix(traces, k);
        const DenseMatrix& gk = g.layer(k + 1);
        require(gk.rows() == n, ErrorKind::Dimension, "assemble_ntk: G row count != N");
        DenseMatrix ff = gram_rows(f);
        DenseMatrix gg = gram_rows(gk);
        DenseMatrix term = hadamard(ff, gg);
        out.kernel = add(out.kernel, term);
        out.layer_terms.push_back(std::move(term));
        out.feature_grams.push_back(std::move(ff));
        out.sensitivity_grams.push_back(std::move(gg));
    }
    out.spectrum = sym_eigen(out.kernel);
    out.lambda_min = out.spectrum.min();
    out.lambda_min_clamped = std::max(0.0, out.lambda_min);
    return out;
}

NtkResult compute_ntk(const NetworkState& state, const Dataset& data) {
    const std::vector<ForwardTrace> traces = forward_all(state, data);
    return assemble_ntk(traces, build_g_matrices(state, traces));
}

DenseMatrix jacobian(const NetworkState& state, const Dataset& data) {
    const std::size_t p = state.parameter_count();
    require(p <= kMaxOracleParameters, ErrorKind::InvalidInput,
            "jacobian: parameter count exceeds oracle limit");
    const std::size_t depth = state.depth();
    const auto& widths = state.arch.widths;
    const Activation& act = state.arch.activation;
    require(data.samples.cols() == widths[0], ErrorKind::Dimension, "jacobian: input width != n_0");

    DenseMatrix jac(data.size(), p);
    for (std::size_t i = 0; i < data.size(); ++i) {
        // Forward, keeping layer inputs and pre-activations.
        std::vector<std::vector<double>> inputs(depth + 1), pre(depth + 1);
        inputs[0].assign(data.sample(i).begin(), data.sample(i).end());
        for (std::size_t k = 1; k <= depth; ++k) {
            const DenseMatrix& w = state.layer(k);
            pre[k].assign(widths[k], 0.0);
            for (std::size_t b = 0; b < widths[k]; ++b)
                for (std::size_t a = 0; a < widths[k - 1]; ++a) pre[k][b] += w(a, b) * inputs[k - 1][a];
            if (k < depth) {
                inputs[k].resize(widths[k]);
                for (std::size_t b = 0; b < widths[k]; ++b) inputs[k][b] = act.value(pre[k][b]);
            }
        }
        // Backward: delta_k = d f_L / d pre_k.
        std::vector<double> delta{1.0};
        auto row = jac.row(i);
        for (std::size_t k = depth; k >= 1; --k) {
            for (std::size_t b = 0; b < widths[k]; ++b)
                for (std::size_t a = 0; a < widths[k - 1]; ++a)
                    row[parameter_index(state.arch, k, a, b)] = inputs[k - 1][a] * delta[b];
            if (k == 1) break;
            const DenseMatrix& w = state.layer(k);
            std::vector<double> prev(widths[k - 1], 0.0);
            for (std::size_t a = 0; a < widths[k - 1]; ++a) {
                double acc = 0.0;
                for (std::size_t b = 0; b < widths[k]; ++b) acc += w(a, b) * delta[b];
                prev[a] = acc * act.derivative(pre[k - 1][a]);
            }
            delta = std::move(prev);
        }
    }
    return jac;
}

DenseMatrix jacobian_gram(const NetworkState& state, const Dataset& data) {
    return gram_rows(jacobian(state, data));
}

NtkDiagnostics ntk_diagnostics(const NtkResult& result) {
    NtkDiagnostics d;
    d.lambda_min = result.lambda_min;
    d.slack = kPsdTolerance * std::max(1.0, std::abs(result.spectrum.max()));
    d.schur_holds = true;
    for (std::size_t k = 0; k < result.layer_terms.size(); ++k) {
        const double term_min = sym_eigen(result.layer_terms[k]).min();
        const double feat_min = sym_eigen(result.feature_grams[k]).min();
        const DenseMatrix& gg = result.sensitivity_grams[k];
        double min_row = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < gg.rows(); ++i) min_row = std::min(min_row, gg(i, i));
        const double bound = feat_min * min_row;
        d.term_lambda_min.push_back(term_min);
        d.schur_bounds.push_back(bound);
        d.weyl_sum += term_min;
        d.schur_sum += bound;
        if (term_min < bound - d.slack) d.schur_holds = false;
    }
    d.weyl_holds = d.lambda_min >= d.weyl_sum - d.slack;
    return d;
}

}  // namespace ntkspec
