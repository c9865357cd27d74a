#include "ntkspec/network.hpp"

#include <cmath>

#include "ntkspec/error.hpp"
#include "ntkspec/rng.hpp"

namespace ntkspec {

std::string_view to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Cosine: return "cosine";
        case ActivationKind::Sine: return "sine";
        case ActivationKind::Relu: return "relu";
        case ActivationKind::Identity: return "identity";
    }
    return "unknown";
}

ActivationKind parse_activation(std::string_view name) {
    if (name == "cosine" || name == "cos") return ActivationKind::Cosine;
    if (name == "sine" || name == "sin") return ActivationKind::Sine;
    if (name == "relu") return ActivationKind::Relu;
    if (name == "identity" || name == "linear") return ActivationKind::Identity;
    fail(ErrorKind::Config, "unknown activation '" + std::string(name) + "'");
}

double Activation::value(double t) const {
    switch (kind) {
        case ActivationKind::Cosine: return std::cos(frequency * t);
        case ActivationKind::Sine: return std::sin(frequency * t);
        case ActivationKind::Relu: return t > 0.0 ? t : 0.0;
        case ActivationKind::Identity: return t;
    }
    return t;
}

double Activation::derivative(double t) const {
    switch (kind) {
        case ActivationKind::Cosine: return -frequency * std::sin(frequency * t);
        case ActivationKind::Sine: return frequency * std::cos(frequency * t);
        case ActivationKind::Relu: return t > 0.0 ? 1.0 : 0.0;
        case ActivationKind::Identity: return 1.0;
    }
    return 1.0;
}

double Activation::derivative_bound() const { return periodic() ? frequency : 1.0; }

std::size_t ArchitectureSpec::parameter_count() const {
    std::size_t p = 0;
    for (std::size_t k = 1; k < widths.size(); ++k) p += widths[k - 1] * widths[k];
    return p;
}

std::vector<std::string> ArchitectureSpec::validate() const {
    require(widths.size() >= 2, ErrorKind::InvalidInput, "architecture needs at least one layer");
    for (std::size_t w : widths)
        require(w >= 1, ErrorKind::InvalidInput, "all widths must be >= 1");
    require(widths.back() == 1, ErrorKind::InvalidInput, "output width n_L must be 1");
    require(init_scales.size() == depth(), ErrorKind::InvalidInput,
            "init_scales must hold one standard deviation per layer");
    for (double b : init_scales)
        require(std::isfinite(b) && b >= 0.0, ErrorKind::InvalidInput,
                "init scales must be finite and non-negative");
    if (activation.periodic())
        require(activation.frequency > 0.0, ErrorKind::InvalidInput,
                "periodic activation needs a positive frequency");

    std::vector<std::string> warnings;
    for (std::size_t k = 1; k < depth(); ++k) {
        if (init_scales[k - 1] > 1.0)
            warnings.push_back("beta_" + std::to_string(k) + " = " +
                               std::to_string(init_scales[k - 1]) + " exceeds 1");
    }
    return warnings;
}

std::vector<double> he_scales(std::span<const std::size_t> widths) {
    std::vector<double> scales;
    for (std::size_t k = 1; k < widths.size(); ++k)
        scales.push_back(std::sqrt(2.0 / static_cast<double>(widths[k - 1])));
    return scales;
}

ArchitectureSpec make_he_architecture(std::vector<std::size_t> widths, Activation activation) {
    ArchitectureSpec arch;
    arch.init_scales = he_scales(widths);
    arch.widths = std::move(widths);
    arch.activation = activation;
    return arch;
}

ArchitectureSpec InitRule::apply(std::vector<std::size_t> widths, Activation activation) const {
    if (he) return make_he_architecture(std::move(widths), activation);
    ArchitectureSpec arch{std::move(widths), activation, scales};
    arch.validate();
    return arch;
}

NetworkState init_network(const ArchitectureSpec& arch, std::uint64_t seed) {
    arch.validate();
    Rng rng(seed, Stream::Weights);
    NetworkState state;
    state.arch = arch;
    for (std::size_t k = 1; k <= arch.depth(); ++k) {
        DenseMatrix w(arch.widths[k - 1], arch.widths[k]);
        const double beta = arch.init_scales[k - 1];
        for (double& v : w.data()) v = beta * rng.normal();
        state.weights.push_back(std::move(w));
    }
    return state;
}

std::size_t parameter_index(const ArchitectureSpec& arch, std::size_t k, std::size_t a,
                            std::size_t b) {
    std::size_t offset = 0;
    for (std::size_t l = 1; l < k; ++l) offset += arch.widths[l - 1] * arch.widths[l];
    return offset + b * arch.widths[k - 1] + a;
}

std::vector<double> flatten_parameters(const NetworkState& state) {
    std::vector<double> theta;
    theta.reserve(state.parameter_count());
    for (const DenseMatrix& w : state.weights)
        for (std::size_t b = 0; b < w.cols(); ++b)
            for (std::size_t a = 0; a < w.rows(); ++a) theta.push_back(w(a, b));
    return theta;
}

NetworkState with_parameters(const NetworkState& state, std::span<const double> theta) {
    require(theta.size() == state.parameter_count(), ErrorKind::Dimension,
            "parameter vector length != p");
    NetworkState out = state;
    std::size_t idx = 0;
    for (DenseMatrix& w : out.weights)
        for (std::size_t b = 0; b < w.cols(); ++b)
            for (std::size_t a = 0; a < w.rows(); ++a) w(a, b) = theta[idx++];
    return out;
}

ForwardTrace forward(const NetworkState& state, std::span<const double> x) {
    const std::size_t depth = state.depth();
    require(x.size() == state.arch.widths[0], ErrorKind::Dimension,
            "forward: input length != n_0");
    const Activation& act = state.arch.activation;

    ForwardTrace trace;
    trace.features.resize(depth + 1);
    trace.preactivations.resize(depth + 1);
    trace.derivatives.resize(depth + 1);
    trace.features[0].assign(x.begin(), x.end());

    for (std::size_t k = 1; k <= depth; ++k) {
        std::vector<double> g = multiply_transposed(state.layer(k), trace.features[k - 1]);
        if (k == depth) {
            trace.features[k] = std::move(g);
            break;
        }
        std::vector<double> f(g.size()), d(g.size());
        for (std::size_t j = 0; j < g.size(); ++j) {
            f[j] = act.value(g[j]);
            d[j] = act.derivative(g[j]);
        }
        trace.features[k] = std::move(f);
        trace.derivatives[k] = std::move(d);
        trace.preactivations[k] = std::move(g);
    }
    return trace;
}

double forward_output(const NetworkState& state, std::span<const double> x) {
    return forward(state, x).output();
}

std::string_view to_string(SamplerKind kind) {
    return kind == SamplerKind::GaussianIid ? "gaussian_iid" : "sphere_uniform";
}

SamplerKind parse_sampler(std::string_view name) {
    if (name == "gaussian_iid" || name == "gaussian") return SamplerKind::GaussianIid;
    if (name == "sphere_uniform" || name == "sphere") return SamplerKind::SphereUniform;
    fail(ErrorKind::Config, "unknown sampler '" + std::string(name) + "'");
}

Dataset sample_dataset(std::size_t n0, std::size_t n_samples, SamplerKind kind,
                       std::uint64_t seed) {
    require(n0 >= 1 && n_samples >= 1, ErrorKind::InvalidInput,
            "sample_dataset: n0 and n_samples must be >= 1");
    Rng rng(seed, Stream::Data);
    Dataset data{DenseMatrix(n_samples, n0), kind, seed};
    for (std::size_t i = 0; i < n_samples; ++i) {
        auto row = data.samples.row(i);
        for (double& v : row) v = rng.normal();
        if (kind == SamplerKind::SphereUniform) {
            double nrm = norm2(row);
            while (nrm == 0.0) {
                for (double& v : row) v = rng.normal();
                nrm = norm2(row);
            }
            const double scale = std::sqrt(static_cast<double>(n0)) / nrm;
            for (double& v : row) v *= scale;
        }
    }
    return data;
}

std::vector<ForwardTrace> forward_all(const NetworkState& state, const Dataset& data) {
    std::vector<ForwardTrace> traces;
    traces.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) traces.push_back(forward(state, data.sample(i)));
    return traces;
}

DenseMatrix feature_matrix(std::span<const ForwardTrace> traces, std::size_t k) {
    require(!traces.empty(), ErrorKind::InvalidInput, "feature_matrix: no traces");
    require(k < traces.front().features.size(), ErrorKind::InvalidInput,
            "feature_matrix: layer out of range");
    const std::size_t width = traces.front().features[k].size();
    DenseMatrix f(traces.size(), width);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        require(traces[i].features[k].size() == width, ErrorKind::Dimension,
                "feature_matrix: inconsistent widths");
        std::copy(traces[i].features[k].begin(), traces[i].features[k].end(), f.row(i).begin());
    }
    return f;
}

}  // namespace ntkspec
