#include "ntkspec/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "ntkspec/error.hpp"
#include "ntkspec/rng.hpp"
#include "ntkspec/ntk.hpp"
#include "ntkspec/theory.hpp"

#ifndef NTKSPEC_VERSION
#define NTKSPEC_VERSION "unknown"
#endif

namespace ntkspec {

using nlohmann::json;

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string Table::to_csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

json to_json(const InequalityAudit& a) {
    auto count = [](const CheckCount& c) { return json{{"checked", c.checked}, {"violated", c.violated}}; };
    return {{"weyl", count(a.weyl)},
            {"schur", count(a.schur)},
            {"derivative_bound", count(a.derivative_bound)},
            {"gershgorin", count(a.gershgorin)},
            {"centred_psd", count(a.centred_psd)},
            {"op_le_frobenius", count(a.op_le_frobenius)},
            {"psd", count(a.psd)},
            {"clean", a.clean()}};
}

namespace {

std::string str(std::size_t v) { return std::to_string(v); }
std::string str(std::uint64_t v, int) { return std::to_string(v); }

std::string join_widths(const std::vector<std::size_t>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(w[i]);
    }
    return s;
}

// Runs fn(i) for i in [0, count) on up to `workers` threads. Results are
// written by index, so output order never depends on scheduling. The first
// exception is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

class Stopwatch {
public:
    explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
    std::string elapsed_ms() const {
        if (!enabled_) return "";
        const auto d = std::chrono::steady_clock::now() - start_;
        return format_double(std::chrono::duration<double, std::milli>(d).count());
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
};

double geometric_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::log(x);
    return std::exp(s / static_cast<double>(v.size()));
}

double monotone_fraction(const std::vector<double>& v) {
    if (v.size() < 2) return 1.0;
    std::size_t ok = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] >= v[i - 1]) ++ok;
    return static_cast<double>(ok) / static_cast<double>(v.size() - 1);
}

std::optional<SlopeFit> try_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 2) return std::nullopt;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) return std::nullopt;
    if (std::adjacent_find(xs.begin(), xs.end(), std::not_equal_to<>()) == xs.end()) return std::nullopt;
    return loglog_slope(xs, ys);
}

json fit_json(const std::optional<SlopeFit>& fit) {
    if (!fit) return nullptr;
    return {{"slope", fit->slope}, {"intercept", fit->intercept}, {"r_squared", fit->r_squared},
            {"points", fit->point_count}};
}

// Centred-feature PSD check on layer k plus the Gershgorin bracket of the centred Gram.
// Uses at most 64 of the given inputs to keep the eigenproblem small.
void audit_centred(const NetworkState& state, const Dataset& data, std::size_t k,
                   std::size_t mean_samples, std::uint64_t seed, InequalityAudit& audit) {
    if (mean_samples == 0 || k < 1 || k >= state.depth()) return;
    Dataset head = data;
    if (data.size() > 64) {
        head.samples = DenseMatrix(64, data.samples.cols());
        for (std::size_t i = 0; i < 64; ++i)
            std::copy(data.sample(i).begin(), data.sample(i).end(), head.samples.row(i).begin());
    }
    const CentredFeatureProbe c = probe_centred_features(state, head, k, std::max<std::size_t>(mean_samples, 1000), seed);
    if (c.degenerate) return;
    audit.centred_psd.record(c.holds);
    const GershgorinBounds g = gershgorin_bounds(c.centred_gram);
    const Spectrum sp = sym_eigen(c.centred_gram);
    audit.gershgorin.record(g.lower <= sp.min() * (1 + 1e-12) + 1e-12 && sp.max() <= g.upper * (1 + 1e-12) + 1e-12);
}

void audit_traces(const std::vector<ForwardTrace>& traces, const Activation& act, InequalityAudit& audit) {
    for (const ForwardTrace& t : traces) audit.derivative_bound.record(derivative_bound_holds(t, act));
}

// Full NTK with Weyl/Schur/PSD and the Gershgorin bracket of the kernel.
NtkResult audited_ntk(const NetworkState& state, const Dataset& data, InequalityAudit& audit) {
    const std::vector<ForwardTrace> traces = forward_all(state, data);
    audit_traces(traces, state.arch.activation, audit);
    NtkResult r = assemble_ntk(traces, build_g_matrices(state, traces));
    const NtkDiagnostics d = ntk_diagnostics(r);
    audit.weyl.record(d.weyl_holds);
    audit.schur.record(d.schur_holds);
    audit.psd.record(r.psd_within_tolerance());
    const GershgorinBounds g = gershgorin_bounds(r.kernel);
    const double slack = 1e-12 * std::max(1.0, r.kernel.max_abs());
    audit.gershgorin.record(g.lower <= r.lambda_min + slack && r.spectrum.max() <= g.upper + slack);
    return r;
}

struct ScalingTask {
    std::size_t act = 0, point = 0, trial = 0;
};

std::vector<ScalingTask> scaling_grid(const SweepConfig& cfg) {
    std::vector<ScalingTask> grid;
    for (std::size_t a = 0; a < cfg.activations.size(); ++a)
        for (std::size_t p = 0; p < cfg.sample_counts.size(); ++p)
            for (std::size_t t = 0; t < cfg.trials; ++t) grid.push_back({a, p, t});
    return grid;
}

ArchitectureSpec scaling_arch(const SweepConfig& cfg, std::size_t act, std::size_t n) {
    require(n >= 1, ErrorKind::Config, "sample_counts entries must be >= 1");
    return cfg.init.apply({cfg.n0, cfg.width_factor * n, cfg.n2, 1},
                          Activation{cfg.activations[act], cfg.s});
}

}  // namespace

NtkScalingResult run_ntk_scaling(const SweepConfig& cfg) {
    require(!cfg.sample_counts.empty(), ErrorKind::Config, "ntk_scaling: empty sample_counts");
    const auto grid = scaling_grid(cfg);

    struct Outcome {
        double lambda_min = 0.0, clamped = 0.0;
        std::string wall_ms;
        InequalityAudit audit;
    };
    std::vector<Outcome> outcomes(grid.size());
    parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
        const ScalingTask& task = grid[i];
        const std::size_t n = cfg.sample_counts[task.point];
        const std::uint64_t seed = cfg.seed + task.trial;
        Stopwatch clock(cfg.timing);
        const ArchitectureSpec arch = scaling_arch(cfg, task.act, n);
        const NetworkState state = init_network(arch, seed);
        const Dataset data = sample_dataset(cfg.n0, n, cfg.sampler, seed);
        Outcome& out = outcomes[i];
        const NtkResult r = audited_ntk(state, data, out.audit);
        audit_centred(state, data, 1, cfg.mean_samples, seed, out.audit);
        out.lambda_min = r.lambda_min;
        out.clamped = r.lambda_min_clamped;
        out.wall_ms = clock.elapsed_ms();
    });

    NtkScalingResult res;
    res.table.name = "ntk_scaling";
    res.table.header = {"experiment", "activation", "s", "n0", "n1", "n2", "N", "trial", "seed",
                        "lambda_min", "lambda_min_clamped", "excluded", "wall_ms"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const ScalingTask& task = grid[i];
        const Outcome& o = outcomes[i];
        const std::size_t n = cfg.sample_counts[task.point];
        res.table.rows.push_back({"ntk_scaling", std::string(to_string(cfg.activations[task.act])),
                                  format_double(cfg.s), str(cfg.n0), str(cfg.width_factor * n),
                                  str(cfg.n2), str(n), str(task.trial), str(cfg.seed + task.trial, 0),
                                  format_double(o.lambda_min), format_double(o.clamped),
                                  o.lambda_min > 0.0 ? "0" : "1", o.wall_ms});
        res.audit.merge(o.audit);
    }

    for (std::size_t a = 0; a < cfg.activations.size(); ++a) {
        ActivationFit fit;
        fit.activation = cfg.activations[a];
        std::vector<double> xs, ys;
        for (std::size_t p = 0; p < cfg.sample_counts.size(); ++p) {
            std::vector<double> positive;
            double clamped = 0.0;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                if (grid[i].act != a || grid[i].point != p) continue;
                clamped += outcomes[i].clamped;
                if (outcomes[i].lambda_min > 0.0)
                    positive.push_back(outcomes[i].lambda_min);
                else
                    ++fit.excluded;
            }
            const double n1 = static_cast<double>(cfg.width_factor * cfg.sample_counts[p]);
            fit.sweep.push_back(n1);
            fit.clamped_mean.push_back(clamped / static_cast<double>(cfg.trials));
            const double agg = positive.empty() ? std::nan("") : geometric_mean(positive);
            fit.aggregate.push_back(agg);
            if (!positive.empty()) {
                xs.push_back(n1);
                ys.push_back(agg);
            }
        }
        fit.fit = try_fit(xs, ys);
        fit.monotone_fraction = monotone_fraction(fit.clamped_mean);
        res.fits.push_back(std::move(fit));
    }
    return res;
}

LipschitzResult run_lipschitz_sweep(const SweepConfig& cfg) {
    require(cfg.widths.size() >= 2 && cfg.widths.back() == 1, ErrorKind::Config,
            "lipschitz: widths must be a template ending in 1");
    require(cfg.sweep_layer < cfg.widths.size() - 1 && cfg.sweep_layer >= 1, ErrorKind::Config,
            "lipschitz: sweep_layer must index a hidden layer");
    require(cfg.layer >= 1 && cfg.layer < cfg.widths.size(), ErrorKind::Config,
            "lipschitz: layer out of range");
    require(!cfg.sweep_values.empty(), ErrorKind::Config, "lipschitz: empty sweep_values");
    const std::vector<std::size_t> n0s = cfg.n0_values.empty() ? std::vector<std::size_t>{cfg.n0} : cfg.n0_values;

    struct Task {
        std::size_t n0 = 0, act = 0, point = 0, trial = 0;
    };
    std::vector<Task> grid;
    for (std::size_t z = 0; z < n0s.size(); ++z)
        for (std::size_t a = 0; a < cfg.activations.size(); ++a)
            for (std::size_t p = 0; p < cfg.sweep_values.size(); ++p)
                for (std::size_t t = 0; t < cfg.trials; ++t) grid.push_back({z, a, p, t});

    auto widths_for = [&](const Task& t) {
        std::vector<std::size_t> w = cfg.widths;
        w[0] = n0s[t.n0];
        w[cfg.sweep_layer] = cfg.sweep_values[t.point];
        return w;
    };

    struct Outcome {
        double elip = 0.0;
        std::string wall_ms;
        InequalityAudit audit;
    };
    std::vector<Outcome> outcomes(grid.size());
    parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
        const Task& task = grid[i];
        const std::uint64_t seed = cfg.seed + task.trial;
        Stopwatch clock(cfg.timing);
        const ArchitectureSpec arch = cfg.init.apply(widths_for(task), Activation{cfg.activations[task.act], cfg.s});
        const NetworkState state = init_network(arch, seed);
        const Dataset data = sample_dataset(arch.widths[0], cfg.samples, cfg.sampler, seed);
        Outcome& out = outcomes[i];
        audit_traces(forward_all(state, data), arch.activation, out.audit);
        audit_centred(state, data, 1, cfg.mean_samples, seed, out.audit);
        out.elip = empirical_lipschitz(state, data, cfg.layer);
        out.wall_ms = clock.elapsed_ms();
    });

    LipschitzResult res;
    res.table.name = "lipschitz";
    res.table.header = {"experiment", "activation", "s", "widths", "n0", "sweep_layer", "sweep_value",
                        "layer", "samples", "trial", "seed", "elip", "wall_ms"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Task& t = grid[i];
        res.table.rows.push_back({"lipschitz", std::string(to_string(cfg.activations[t.act])),
                                  format_double(cfg.s), join_widths(widths_for(t)), str(n0s[t.n0]),
                                  str(cfg.sweep_layer), str(cfg.sweep_values[t.point]), str(cfg.layer),
                                  str(cfg.samples), str(t.trial), str(cfg.seed + t.trial, 0),
                                  format_double(outcomes[i].elip), outcomes[i].wall_ms});
        res.audit.merge(outcomes[i].audit);
    }

    for (std::size_t z = 0; z < n0s.size(); ++z)
        for (std::size_t a = 0; a < cfg.activations.size(); ++a) {
            ActivationFit fit;
            fit.activation = cfg.activations[a];
            fit.n0 = n0s[z];
            for (std::size_t p = 0; p < cfg.sweep_values.size(); ++p) {
                std::vector<double> vals;
                for (std::size_t i = 0; i < grid.size(); ++i)
                    if (grid[i].n0 == z && grid[i].act == a && grid[i].point == p && outcomes[i].elip > 0.0)
                        vals.push_back(outcomes[i].elip);
                fit.excluded += cfg.trials - vals.size();
                fit.sweep.push_back(static_cast<double>(cfg.sweep_values[p]));
                fit.aggregate.push_back(vals.empty() ? 0.0 : geometric_mean(vals));
            }
            fit.fit = try_fit(fit.sweep, fit.aggregate);
            fit.monotone_fraction = monotone_fraction(fit.aggregate);
            res.fits.push_back(std::move(fit));
        }
    return res;
}

BoundsResult run_bounds_table(const SweepConfig& cfg) {
    require(!cfg.sample_counts.empty(), ErrorKind::Config, "bounds_table: empty sample_counts");
    const auto grid = scaling_grid(cfg);

    struct Outcome {
        double lambda_min = 0.0, lambda_xxt = 0.0;
        BoundEvaluation bounds;
        InequalityAudit audit;
    };
    std::vector<Outcome> outcomes(grid.size());
    parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
        const ScalingTask& task = grid[i];
        const std::size_t n = cfg.sample_counts[task.point];
        const std::uint64_t seed = cfg.seed + task.trial;
        const ArchitectureSpec arch = scaling_arch(cfg, task.act, n);
        const NetworkState state = init_network(arch, seed);
        const Dataset data = sample_dataset(cfg.n0, n, cfg.sampler, seed);
        Outcome& out = outcomes[i];
        out.lambda_min = audited_ntk(state, data, out.audit).lambda_min;
        out.lambda_xxt = std::max(0.0, sym_eigen(gram_rows(data.samples)).min());
        out.bounds = theorem31_lower(arch, cfg.s, out.lambda_xxt, n);
    });

    BoundsResult res;
    res.table.name = "bounds_table";
    res.table.header = {"experiment", "activation", "s", "n0", "n1", "n2", "N", "trial", "seed",
                        "lambda_min", "lambda_min_xxt", "lower_bound", "upper_bound",
                        "ratio_measured_lower", "ratio_upper_measured", "a_flags"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const ScalingTask& t = grid[i];
        const Outcome& o = outcomes[i];
        const std::size_t n = cfg.sample_counts[t.point];
        std::string flags;
        for (int f : o.bounds.a_flags) flags += f ? '1' : '0';
        const double lower = o.bounds.lower_bound_value;
        const double upper = o.bounds.upper_bound_value;
        res.table.rows.push_back(
            {"bounds_table", std::string(to_string(cfg.activations[t.act])), format_double(cfg.s),
             str(cfg.n0), str(cfg.width_factor * n), str(cfg.n2), str(n), str(t.trial),
             str(cfg.seed + t.trial, 0), format_double(o.lambda_min), format_double(o.lambda_xxt),
             format_double(lower), format_double(upper),
             lower > 0.0 ? format_double(o.lambda_min / lower) : "",
             o.lambda_min > 0.0 ? format_double(upper / o.lambda_min) : "", flags});
        if (upper < lower) ++res.upper_below_lower;
        res.audit.merge(o.audit);
    }

    for (std::size_t a = 0; a < cfg.activations.size(); ++a) {
        std::vector<BoundsRow> rows;
        std::vector<double> xs, ys, ratios;
        for (std::size_t p = 0; p < cfg.sample_counts.size(); ++p) {
            std::vector<double> positive;
            double lower = 0.0, upper = 0.0;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                if (grid[i].act != a || grid[i].point != p) continue;
                if (outcomes[i].lambda_min > 0.0) positive.push_back(outcomes[i].lambda_min);
                lower += outcomes[i].bounds.lower_bound_value / static_cast<double>(cfg.trials);
                upper += outcomes[i].bounds.upper_bound_value / static_cast<double>(cfg.trials);
            }
            BoundsRow row;
            row.n1 = static_cast<double>(cfg.width_factor * cfg.sample_counts[p]);
            row.measured = positive.empty() ? std::nan("") : geometric_mean(positive);
            row.lower = lower;
            row.upper = upper;
            rows.push_back(row);
            if (!positive.empty() && lower > 0.0) {
                xs.push_back(lower);
                ys.push_back(row.measured);
                ratios.push_back(row.measured / lower);
            }
        }
        res.rows.emplace_back(cfg.activations[a], rows);
        res.fits.emplace_back(cfg.activations[a], try_fit(xs, ys));
        double band = std::nan("");
        if (!ratios.empty())
            band = *std::max_element(ratios.begin(), ratios.end()) / *std::min_element(ratios.begin(), ratios.end());
        res.ratio_band.emplace_back(cfg.activations[a], band);
    }
    return res;
}

namespace {

ProbeResult probe_centred_sweep(const ProbeSetup& setup, std::size_t k, std::size_t mean_samples,
                                ProbeRun& run) {
    ProbeResult out;
    out.quantity = ProbeQuantity::CentredFeatures;
    out.layer = k;
    out.sweep_variable = "n" + std::to_string(setup.sweep.layer);
    for (std::size_t point = 0; point < setup.sweep.values.size(); ++point) {
        const ArchitectureSpec arch = setup.architecture_at(point);
        std::vector<double> values;
        for (std::size_t t = 0; t < setup.trials; ++t) {
            const std::uint64_t seed = setup.seed + t;
            const NetworkState state = init_network(arch, seed);
            const Dataset data = sample_dataset(arch.widths[0], setup.samples_per_trial, setup.sampler, seed);
            audit_traces(forward_all(state, data), arch.activation, out.audit);
            const CentredFeatureProbe c = probe_centred_features(state, data, k, std::max<std::size_t>(mean_samples, 1000), seed);
            ++run.centred_checked;
            if (c.degenerate) {
                ++run.centred_degenerate;
                continue;
            }
            out.audit.centred_psd.record(c.holds);
            const GershgorinBounds g = gershgorin_bounds(c.centred_gram);
            const Spectrum sp = sym_eigen(c.centred_gram);
            out.audit.gershgorin.record(g.lower <= sp.min() + 1e-12 && sp.max() <= g.upper + 1e-12);
            // Smallest eigenvalue of the difference, relative to trace(F F^T).
            values.push_back(c.difference_min_eigenvalue / c.feature_gram.trace());
        }
        double mean = 0.0, var = 0.0;
        for (double v : values) mean += v / static_cast<double>(std::max<std::size_t>(1, values.size()));
        for (double v : values) var += (v - mean) * (v - mean);
        out.sweep_values.push_back(static_cast<double>(setup.sweep.values[point]));
        out.measured.push_back(mean);
        out.trial_std.push_back(values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0);
        out.predicted.push_back(0.0);
    }
    return out;
}

ProbeResult probe_lipschitz_sweep(const ProbeSetup& setup, std::size_t k) {
    ProbeResult out;
    out.quantity = ProbeQuantity::EmpiricalLipschitz;
    out.layer = k;
    out.sweep_variable = "n" + std::to_string(setup.sweep.layer);
    for (std::size_t point = 0; point < setup.sweep.values.size(); ++point) {
        const ArchitectureSpec arch = setup.architecture_at(point);
        std::vector<double> values;
        for (std::size_t t = 0; t < setup.trials; ++t) {
            const std::uint64_t seed = setup.seed + t;
            const NetworkState state = init_network(arch, seed);
            const Dataset data = sample_dataset(arch.widths[0], setup.samples_per_trial, setup.sampler, seed);
            audit_traces(forward_all(state, data), arch.activation, out.audit);
            values.push_back(empirical_lipschitz(state, data, k));
        }
        double mean = 0.0, var = 0.0;
        for (double v : values) mean += v / static_cast<double>(values.size());
        for (double v : values) var += (v - mean) * (v - mean);
        out.sweep_values.push_back(static_cast<double>(setup.sweep.values[point]));
        out.measured.push_back(mean);
        out.trial_std.push_back(values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0);
        // The prediction bounds the squared constant.
        out.predicted.push_back(k < arch.depth()
                                    ? std::sqrt(lemma_scaling_prediction(arch, arch.activation.frequency,
                                                                         ScalingLaw::LipschitzAssumption, k))
                                    : std::nan(""));
    }
    out.fit = try_fit(out.sweep_values, out.measured);
    return out;
}

ProbeRun run_probe(const ProbeSpec& spec, const SweepConfig& cfg) {
    require(spec.widths.size() >= 2, ErrorKind::Config, "probe '" + spec.probe + "': widths missing");
    ProbeSetup setup;
    setup.widths = spec.widths;
    setup.activation = spec.activation;
    setup.init = cfg.init;
    setup.sweep = {spec.sweep_layer, spec.sweep_values};
    if (setup.sweep.values.empty()) setup.sweep.values = {spec.widths.at(spec.sweep_layer)};
    setup.trials = spec.trials;
    setup.samples_per_trial = spec.samples;
    setup.sampler = cfg.sampler;
    setup.seed = cfg.seed;

    ProbeRun run;
    run.spec = spec;
    const std::size_t k = spec.layer;
    if (spec.probe == "feature_norm") {
        run.results.push_back(probe_feature_norm(setup, k));
    } else if (spec.probe == "sigma_frobenius") {
        run.results.push_back(probe_sigma_frobenius(setup, k));
    } else if (spec.probe == "chain_product") {
        const std::size_t p = spec.chain_end ? spec.chain_end : spec.widths.size() - 2;
        ChainProbeResult c = probe_chain_product(setup, k, p);
        run.results.push_back(std::move(c.chain));
        run.results.push_back(std::move(c.g_row));
    } else if (spec.probe == "operator_norm_chain") {
        run.results.push_back(probe_operator_norm_chain(setup, k));
    } else if (spec.probe == "feature_sigma_min") {
        run.results.push_back(probe_feature_sigma_min(setup, k));
    } else if (spec.probe == "centred_features") {
        run.results.push_back(probe_centred_sweep(setup, k, cfg.mean_samples, run));
    } else if (spec.probe == "empirical_lipschitz") {
        run.results.push_back(probe_lipschitz_sweep(setup, k));
    } else {
        fail(ErrorKind::Config, "unknown probe '" + spec.probe + "'");
    }
    return run;
}

}  // namespace

LemmaProbeResult run_lemma_probes(const SweepConfig& cfg) {
    require(!cfg.probes.empty(), ErrorKind::Config, "lemma_probe: no probes configured");
    LemmaProbeResult res;
    std::vector<ProbeRun> runs(cfg.probes.size());
    parallel_for(cfg.probes.size(), cfg.workers, [&](std::size_t i) { runs[i] = run_probe(cfg.probes[i], cfg); });

    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (const ProbeResult& r : runs[i].results) {
            Table t;
            t.name = "probe_" + std::to_string(i) + "_" + std::string(to_string(r.quantity));
            t.header = {"probe", "activation", "s", "widths", "layer", "sweep_variable", "sweep_value",
                        "trials", "samples", "measured", "trial_std", "predicted"};
            for (std::size_t p = 0; p < r.sweep_values.size(); ++p)
                t.rows.push_back({std::string(to_string(r.quantity)),
                                  std::string(to_string(runs[i].spec.activation.kind)),
                                  format_double(runs[i].spec.activation.frequency),
                                  join_widths(runs[i].spec.widths), str(r.layer), r.sweep_variable,
                                  format_double(r.sweep_values[p]), str(runs[i].spec.trials),
                                  str(runs[i].spec.samples), format_double(r.measured[p]),
                                  format_double(r.trial_std[p]), format_double(r.predicted[p])});
            res.tables.push_back(std::move(t));
            res.audit.merge(r.audit);
        }
    }
    res.runs = std::move(runs);
    return res;
}

MemorizeResult run_memorization(const SweepConfig& cfg) {
    require(cfg.widths.size() >= 2 && cfg.widths.back() == 1, ErrorKind::Config,
            "memorize: widths must end in 1");
    const Activation act{cfg.activations.front(), cfg.s};
    const ArchitectureSpec arch = cfg.init.apply(cfg.widths, act);
    const std::size_t n = cfg.samples;

    struct Outcome {
        MemorizeRecord record;
        std::string wall_ms;
        InequalityAudit audit;
    };
    std::vector<Outcome> outcomes(cfg.trials);
    parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
        const std::uint64_t seed = cfg.seed + t;
        Stopwatch clock(cfg.timing);
        Outcome& out = outcomes[t];
        MemorizationTask task;
        task.base = init_network(arch, seed);
        task.data = sample_dataset(arch.widths[0], n, cfg.sampler, seed);
        Rng rng(seed, Stream::Targets);
        for (std::size_t i = 0; i < n; ++i) task.targets.push_back(rng.normal());
        out.record.seed = seed;
        out.record.target_norm = norm2(task.targets);
        task.epsilon = cfg.epsilon_rel * out.record.target_norm;

        audited_ntk(task.base, task.data, out.audit);
        audit_centred(task.base, task.data, 1, cfg.mean_samples, seed, out.audit);
        out.record.certificate = certify_rank(task.base, task.data);
        if (out.record.certificate.in_rank_set) {
            FitResult fit = fit_targets(task);
            const NetworkState doubled = realize_as_network(task.base, fit.direction, fit.chosen_h);
            for (std::size_t i = 0; i < n; ++i) {
                const double g = difference_quotient(task.base, fit.direction, fit.chosen_h, task.data.sample(i));
                out.record.realize_max_error =
                    std::max(out.record.realize_max_error, std::abs(forward_output(doubled, task.data.sample(i)) - g));
            }
            out.record.fit = std::move(fit);
        }
        out.wall_ms = clock.elapsed_ms();
    });

    MemorizeResult res;
    res.table.name = "memorize";
    res.table.header = {"experiment", "activation", "s", "widths", "N", "trial", "seed", "rank",
                        "in_rank_set", "sigma_max", "sigma_min", "target_norm", "residual",
                        "chosen_h", "success", "realize_max_error", "wall_ms"};
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const MemorizeRecord& r = outcomes[t].record;
        const auto& sv = r.certificate.singular_values;
        res.table.rows.push_back(
            {"memorize", std::string(to_string(act.kind)), format_double(cfg.s), join_widths(cfg.widths),
             str(n), str(t), str(r.seed, 0), str(r.certificate.rank), r.certificate.in_rank_set ? "1" : "0",
             format_double(sv.front()), format_double(sv.back()), format_double(r.target_norm),
             r.fit ? format_double(r.fit->residual) : "", r.fit ? format_double(r.fit->chosen_h) : "",
             r.fit && r.fit->success ? "1" : "0", r.fit ? format_double(r.realize_max_error) : "",
             outcomes[t].wall_ms});
        if (r.certificate.in_rank_set) ++res.certified;
        if (r.fit && r.fit->success) ++res.fitted;
        res.worst_realize_error = std::max(res.worst_realize_error, r.realize_max_error);
        res.records.push_back(r);
        res.audit.merge(outcomes[t].audit);
    }
    return res;
}

namespace {

DenseMatrix finite_difference_gram(const NetworkState& state, const Dataset& data, double h) {
    std::vector<double> theta = flatten_parameters(state);
    DenseMatrix jac(data.size(), theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double keep = theta[j];
        theta[j] = keep + h;
        const NetworkState plus = with_parameters(state, theta);
        theta[j] = keep - h;
        const NetworkState minus = with_parameters(state, theta);
        theta[j] = keep;
        for (std::size_t i = 0; i < data.size(); ++i)
            jac(i, j) = (forward_output(plus, data.sample(i)) - forward_output(minus, data.sample(i))) / (2 * h);
    }
    return gram_rows(jac);
}

double relative_error(const DenseMatrix& a, const DenseMatrix& b) {
    const double denom = b.frobenius_norm();
    const double diff = subtract(a, b).frobenius_norm();
    return denom > 0.0 ? diff / denom : diff;
}

}  // namespace

NtkCheckResult run_ntk_check(const SweepConfig& cfg) {
    require(cfg.check_max_width >= 1 && cfg.check_max_depth >= 1 && cfg.check_max_samples >= 1,
            ErrorKind::Config, "ntk_check: size limits must be >= 1");
    struct Task {
        std::size_t act = 0, trial = 0;
    };
    std::vector<Task> grid;
    for (std::size_t a = 0; a < cfg.activations.size(); ++a)
        for (std::size_t t = 0; t < cfg.trials; ++t) grid.push_back({a, t});

    struct Outcome {
        std::vector<std::size_t> widths;
        std::size_t n = 0;
        double oracle = 0.0, fd = 0.0;
        bool weyl = false, schur = false, psd = false;
        InequalityAudit audit;
    };
    std::vector<Outcome> outcomes(grid.size());
    parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
        const Task& task = grid[i];
        const std::uint64_t seed = cfg.seed + task.trial;
        Rng shape(seed, Stream::Probe);
        auto draw = [&](std::size_t hi) { return 1 + std::min(hi - 1, static_cast<std::size_t>(shape.uniform() * static_cast<double>(hi))); };
        Outcome& out = outcomes[i];
        const std::size_t depth = draw(cfg.check_max_depth);
        for (std::size_t k = 0; k < depth; ++k) out.widths.push_back(draw(cfg.check_max_width));
        out.widths.push_back(1);
        out.n = draw(cfg.check_max_samples);

        const ArchitectureSpec arch = cfg.init.apply(out.widths, Activation{cfg.activations[task.act], cfg.s});
        const NetworkState state = init_network(arch, seed);
        const Dataset data = sample_dataset(out.widths[0], out.n, cfg.sampler, seed);
        InequalityAudit local;
        const NtkResult r = audited_ntk(state, data, local);
        audit_centred(state, data, 1, cfg.mean_samples, seed, local);
        const DenseMatrix jj = jacobian_gram(state, data);
        out.oracle = relative_error(r.kernel, jj);
        out.fd = relative_error(jj, finite_difference_gram(state, data, 1e-5));
        out.weyl = local.weyl.clean();
        out.schur = local.schur.clean();
        out.psd = local.psd.clean();
        out.audit = local;
    });

    NtkCheckResult res;
    res.table.name = "ntk_check";
    res.table.header = {"experiment", "activation", "s", "trial", "seed", "widths", "N",
                        "oracle_rel_error", "fd_rel_error", "weyl_holds", "schur_holds", "psd"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Outcome& o = outcomes[i];
        res.table.rows.push_back({"ntk_check", std::string(to_string(cfg.activations[grid[i].act])),
                                  format_double(cfg.s), str(grid[i].trial), str(cfg.seed + grid[i].trial, 0),
                                  join_widths(o.widths), str(o.n), format_double(o.oracle),
                                  format_double(o.fd), o.weyl ? "1" : "0", o.schur ? "1" : "0",
                                  o.psd ? "1" : "0"});
        res.max_oracle_error = std::max(res.max_oracle_error, o.oracle);
        res.max_fd_error = std::max(res.max_fd_error, o.fd);
        res.audit.merge(o.audit);
    }
    return res;
}

ExperimentReport run_experiment(const SweepConfig& cfg) {
    ExperimentReport rep;
    rep.kind = cfg.experiment;
    json& s = rep.summary;
    s["experiment"] = std::string(to_string(cfg.experiment));

    auto fits_json = [](const std::vector<ActivationFit>& fits, bool with_n0) {
        json arr = json::array();
        for (const ActivationFit& f : fits) {
            json j{{"activation", std::string(to_string(f.activation))},
                   {"sweep", f.sweep},
                   {"fit", fit_json(f.fit)},
                   {"excluded", f.excluded},
                   {"monotone_fraction", f.monotone_fraction}};
            json agg = json::array();
            for (double v : f.aggregate) agg.push_back(std::isnan(v) ? json(nullptr) : json(v));
            j["geometric_mean"] = agg;
            if (with_n0) j["n0"] = f.n0;
            arr.push_back(j);
        }
        return arr;
    };

    switch (cfg.experiment) {
        case ExperimentKind::NtkScaling: {
            NtkScalingResult r = run_ntk_scaling(cfg);
            s["activations"] = fits_json(r.fits, false);
            rep.tables.push_back(std::move(r.table));
            rep.audit = r.audit;
            break;
        }
        case ExperimentKind::Lipschitz: {
            LipschitzResult r = run_lipschitz_sweep(cfg);
            s["activations"] = fits_json(r.fits, true);
            rep.tables.push_back(std::move(r.table));
            rep.audit = r.audit;
            break;
        }
        case ExperimentKind::BoundsTable: {
            BoundsResult r = run_bounds_table(cfg);
            json arr = json::array();
            for (std::size_t a = 0; a < r.fits.size(); ++a) {
                json rows = json::array();
                for (const BoundsRow& b : r.rows[a].second)
                    rows.push_back({{"n1", b.n1},
                                    {"measured", std::isnan(b.measured) ? json(nullptr) : json(b.measured)},
                                    {"lower", b.lower},
                                    {"upper", b.upper}});
                arr.push_back({{"activation", std::string(to_string(r.fits[a].first))},
                               {"fit_measured_vs_lower", fit_json(r.fits[a].second)},
                               {"ratio_band", std::isnan(r.ratio_band[a].second) ? json(nullptr) : json(r.ratio_band[a].second)},
                               {"rows", rows}});
            }
            s["activations"] = arr;
            s["upper_below_lower"] = r.upper_below_lower;
            rep.tables.push_back(std::move(r.table));
            rep.audit = r.audit;
            break;
        }
        case ExperimentKind::LemmaProbe: {
            LemmaProbeResult r = run_lemma_probes(cfg);
            json arr = json::array();
            for (const ProbeRun& run : r.runs)
                for (const ProbeResult& p : run.results)
                    arr.push_back({{"probe", run.spec.probe},
                                   {"quantity", std::string(to_string(p.quantity))},
                                   {"layer", p.layer},
                                   {"sweep_variable", p.sweep_variable},
                                   {"sweep", p.sweep_values},
                                   {"measured", p.measured},
                                   {"fit", fit_json(p.fit)}});
            s["probes"] = arr;
            rep.tables = std::move(r.tables);
            rep.audit = r.audit;
            break;
        }
        case ExperimentKind::Memorize: {
            MemorizeResult r = run_memorization(cfg);
            s["seeds"] = cfg.trials;
            s["certified"] = r.certified;
            s["fitted"] = r.fitted;
            s["worst_realize_error"] = r.worst_realize_error;
            json recs = json::array();
            for (const MemorizeRecord& m : r.records)
                recs.push_back({{"seed", m.seed},
                                {"rank", m.certificate.rank},
                                {"in_rank_set", m.certificate.in_rank_set},
                                {"sigma_min", m.certificate.singular_values.back()},
                                {"target_norm", m.target_norm},
                                {"residual", m.fit ? json(m.fit->residual) : json(nullptr)},
                                {"chosen_h", m.fit ? json(m.fit->chosen_h) : json(nullptr)},
                                {"success", m.fit && m.fit->success}});
            s["records"] = recs;
            rep.tables.push_back(std::move(r.table));
            rep.audit = r.audit;
            break;
        }
        case ExperimentKind::NtkCheck: {
            NtkCheckResult r = run_ntk_check(cfg);
            s["max_oracle_rel_error"] = r.max_oracle_error;
            s["max_fd_rel_error"] = r.max_fd_error;
            rep.tables.push_back(std::move(r.table));
            rep.audit = r.audit;
            break;
        }
    }
    s["audit"] = to_json(rep.audit);
    return rep;
}

std::vector<std::filesystem::path> write_report(const ExperimentReport& report, const SweepConfig& cfg,
                                                const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    require(!ec, ErrorKind::Config, "cannot create output directory '" + out_dir.string() + "'");

    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& file, const std::string& content) {
        const std::filesystem::path path = out_dir / file;
        std::ofstream out(path, std::ios::binary);
        require(out.good(), ErrorKind::Config, "cannot write '" + path.string() + "'");
        out << content;
        written.push_back(path);
    };

    json outputs = json::array();
    for (const Table& t : report.tables) {
        emit(t.name + ".csv", t.to_csv());
        outputs.push_back(t.name + ".csv");
    }
    emit("summary.json", report.summary.dump(2) + "\n");

    json seeds = json::array();
    for (std::size_t t = 0; t < cfg.trials; ++t) seeds.push_back(cfg.seed + t);
    json manifest{{"tool", "ntkspec"},
                  {"version", NTKSPEC_VERSION},
                  {"experiment", std::string(to_string(cfg.experiment))},
                  {"config", to_json(cfg)},
                  {"trial_seeds", seeds},
                  {"outputs", outputs}};
    emit("manifest.json", manifest.dump(2) + "\n");
    return written;
}

}  // namespace ntkspec
