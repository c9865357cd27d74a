#include "ntkspec/memorization.hpp"

#include <cmath>
#include <string>

#include "ntkspec/error.hpp"
#include "ntkspec/ntk.hpp"

namespace ntkspec {

RankCertificate certify_rank(const NetworkState& state, const Dataset& data) {
    const std::size_t n = data.size();
    const std::size_t p = state.parameter_count();
    require(p >= n, ErrorKind::Precondition,
            "certify_rank: p = " + std::to_string(p) + " < N = " + std::to_string(n) +
                ", full row rank is impossible");
    const Spectrum gram = sym_eigen(jacobian_gram(state, data));

    RankCertificate cert;
    for (auto it = gram.eigenvalues.rbegin(); it != gram.eigenvalues.rend(); ++it)
        cert.singular_values.push_back(std::sqrt(std::max(0.0, *it)));
    const double top = cert.singular_values.front();
    for (double s : cert.singular_values)
        if (s > cert.threshold * top) ++cert.rank;
    cert.in_rank_set = cert.rank == n;
    return cert;
}

namespace {

NetworkState perturbed(const NetworkState& base, std::span<const double> direction, double h) {
    std::vector<double> theta = flatten_parameters(base);
    require(direction.size() == theta.size(), ErrorKind::Dimension,
            "direction length != parameter count");
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += h * direction[i];
    return with_parameters(base, theta);
}

}  // namespace

double difference_quotient(const NetworkState& base, std::span<const double> direction, double h,
                           std::span<const double> x) {
    require(h > 0.0, ErrorKind::InvalidInput, "difference_quotient: h must be positive");
    const NetworkState moved = perturbed(base, direction, h);
    const std::size_t depth = base.depth();
    const DenseMatrix& wm = moved.layer(depth);
    const DenseMatrix& wb = base.layer(depth);
    // The 1/h is folded into the output weights before contracting, so the
    // two f_L evaluations never round separately and then cancel.
    double acc = 0.0;
    if (depth == 1) {
        for (std::size_t a = 0; a < x.size(); ++a) acc += x[a] * (wm(a, 0) / h - wb(a, 0) / h);
        return acc;
    }
    const ForwardTrace tm = forward(moved, x);
    const ForwardTrace tb = forward(base, x);
    const auto& fm = tm.features[depth - 1];
    const auto& fb = tb.features[depth - 1];
    for (std::size_t a = 0; a < fm.size(); ++a) acc += fm[a] * (wm(a, 0) / h);
    for (std::size_t a = 0; a < fb.size(); ++a) acc += fb[a] * (-wb(a, 0) / h);
    return acc;
}

FitResult fit_targets(const MemorizationTask& task) {
    const std::size_t n = task.data.size();
    require(task.targets.size() == n, ErrorKind::Dimension, "fit_targets: length(Y) != N");
    require(task.epsilon > 0.0, ErrorKind::InvalidInput, "fit_targets: epsilon must be positive");

    FitResult out;
    out.certificate = certify_rank(task.base, task.data);
    if (!out.certificate.in_rank_set)
        fail(ErrorKind::Precondition,
             "fit_targets: Jacobian rank " + std::to_string(out.certificate.rank) + " < N = " +
                 std::to_string(n));

    out.direction = least_squares(jacobian(task.base, task.data), task.targets);

    double h = 1e-1;
    for (int step = 0; step < 8; ++step, h /= 10.0) {
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = difference_quotient(task.base, out.direction, h, task.data.sample(i));
            sq += (g - task.targets[i]) * (g - task.targets[i]);
        }
        const StepSample sample{h, std::sqrt(sq)};
        if (out.curve.empty() || sample.residual < out.residual) {
            out.residual = sample.residual;
            out.chosen_h = h;
        }
        out.curve.push_back(sample);
    }
    out.success = out.residual < task.epsilon;
    return out;
}

NetworkState realize_as_network(const NetworkState& base, std::span<const double> direction,
                                double h) {
    require(h > 0.0, ErrorKind::InvalidInput, "realize_as_network: h must be positive");
    const NetworkState moved = perturbed(base, direction, h);
    const std::size_t depth = base.depth();
    const auto& widths = base.arch.widths;

    NetworkState out;
    out.arch = base.arch;
    if (depth == 1) {
        DenseMatrix w(widths[0], 1);
        for (std::size_t a = 0; a < widths[0]; ++a)
            w(a, 0) = moved.layer(1)(a, 0) / h - base.layer(1)(a, 0) / h;
        out.weights.push_back(std::move(w));
        return out;
    }

    for (std::size_t k = 1; k < depth; ++k) out.arch.widths[k] = 2 * widths[k];

    DenseMatrix first(widths[0], 2 * widths[1]);
    for (std::size_t a = 0; a < widths[0]; ++a)
        for (std::size_t b = 0; b < widths[1]; ++b) {
            first(a, b) = moved.layer(1)(a, b);
            first(a, widths[1] + b) = base.layer(1)(a, b);
        }
    out.weights.push_back(std::move(first));

    for (std::size_t k = 2; k < depth; ++k) {
        const std::size_t rin = widths[k - 1];
        const std::size_t cout = widths[k];
        DenseMatrix w(2 * rin, 2 * cout);
        for (std::size_t a = 0; a < rin; ++a)
            for (std::size_t b = 0; b < cout; ++b) {
                w(a, b) = moved.layer(k)(a, b);
                w(rin + a, cout + b) = base.layer(k)(a, b);
            }
        out.weights.push_back(std::move(w));
    }

    const std::size_t last = widths[depth - 1];
    DenseMatrix head(2 * last, 1);
    for (std::size_t a = 0; a < last; ++a) {
        head(a, 0) = moved.layer(depth)(a, 0) / h;
        head(last + a, 0) = -base.layer(depth)(a, 0) / h;
    }
    out.weights.push_back(std::move(head));
    return out;
}

}  // namespace ntkspec
