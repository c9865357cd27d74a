#include "ntkspec/ntkspec.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <string>

#include "ntkspec/error.hpp"
#include "ntkspec/experiments.hpp"
#include "ntkspec/network.hpp"
#include "ntkspec/ntk.hpp"

struct ntks_network {
    ntkspec::NetworkState state;
};

struct ntks_dataset {
    ntkspec::Dataset data;
};

struct ntks_kernel {
    ntkspec::NtkResult result;
};

namespace {

thread_local std::string g_last_error;

ntks_status code_for(ntkspec::ErrorKind kind) {
    using ntkspec::ErrorKind;
    switch (kind) {
        case ErrorKind::InvalidInput: return NTKS_ERR_INVALID_INPUT;
        case ErrorKind::Dimension: return NTKS_ERR_DIMENSION;
        case ErrorKind::Asymmetry: return NTKS_ERR_ASYMMETRY;
        case ErrorKind::Degenerate: return NTKS_ERR_DEGENERATE;
        case ErrorKind::Precondition: return NTKS_ERR_PRECONDITION;
        case ErrorKind::Config: return NTKS_ERR_CONFIG;
        case ErrorKind::Numerical: return NTKS_ERR_NUMERICAL;
    }
    return NTKS_ERR_INTERNAL;
}

template <typename F>
ntks_status guarded(F&& body) {
    g_last_error.clear();
    try {
        body();
        return NTKS_OK;
    } catch (const ntkspec::Error& e) {
        g_last_error = e.what();
        return code_for(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return NTKS_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return NTKS_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown exception";
        return NTKS_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    ntkspec::require(p != nullptr, ntkspec::ErrorKind::InvalidInput, std::string(what) + " is null");
}

}  // namespace

extern "C" {

const char* ntks_last_error(void) { return g_last_error.c_str(); }

const char* ntks_version(void) { return NTKSPEC_VERSION; }

const char* ntks_status_name(ntks_status status) {
    switch (status) {
        case NTKS_OK: return "ok";
        case NTKS_ERR_INVALID_INPUT: return "invalid_input";
        case NTKS_ERR_DIMENSION: return "dimension";
        case NTKS_ERR_ASYMMETRY: return "asymmetry";
        case NTKS_ERR_DEGENERATE: return "degenerate";
        case NTKS_ERR_PRECONDITION: return "precondition";
        case NTKS_ERR_CONFIG: return "config";
        case NTKS_ERR_NUMERICAL: return "numerical";
        case NTKS_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

ntks_status ntks_network_create(const size_t* widths, size_t count, const char* activation, double s,
                                uint64_t seed, ntks_network** out) {
    return guarded([&] {
        need(widths, "widths");
        need(activation, "activation");
        need(out, "out");
        *out = nullptr;
        const ntkspec::Activation act{ntkspec::parse_activation(activation), s};
        auto arch = ntkspec::make_he_architecture(std::vector<std::size_t>(widths, widths + count), act);
        *out = new ntks_network{ntkspec::init_network(arch, seed)};
    });
}

void ntks_network_free(ntks_network* net) { delete net; }

size_t ntks_network_parameter_count(const ntks_network* net) {
    return net ? net->state.parameter_count() : 0;
}

ntks_status ntks_network_forward(const ntks_network* net, const double* x, size_t n0, double* out) {
    return guarded([&] {
        need(net, "network");
        need(x, "x");
        need(out, "out");
        ntkspec::require(n0 == net->state.arch.widths[0], ntkspec::ErrorKind::Dimension,
                         "input length does not match n0");
        *out = ntkspec::forward_output(net->state, {x, n0});
    });
}

ntks_status ntks_dataset_sample(size_t n0, size_t n, const char* sampler, uint64_t seed, ntks_dataset** out) {
    return guarded([&] {
        need(sampler, "sampler");
        need(out, "out");
        *out = nullptr;
        *out = new ntks_dataset{ntkspec::sample_dataset(n0, n, ntkspec::parse_sampler(sampler), seed)};
    });
}

ntks_status ntks_dataset_from_rows(const double* rows, size_t n, size_t n0, ntks_dataset** out) {
    return guarded([&] {
        need(rows, "rows");
        need(out, "out");
        *out = nullptr;
        ntkspec::require(n >= 1 && n0 >= 1, ntkspec::ErrorKind::InvalidInput, "dataset must be nonempty");
        ntkspec::Dataset d;
        d.samples = ntkspec::DenseMatrix(n, n0, std::vector<double>(rows, rows + n * n0));
        ntkspec::require(d.samples.all_finite(), ntkspec::ErrorKind::InvalidInput, "dataset has non-finite entries");
        *out = new ntks_dataset{std::move(d)};
    });
}

void ntks_dataset_free(ntks_dataset* data) { delete data; }

size_t ntks_dataset_size(const ntks_dataset* data) { return data ? data->data.size() : 0; }

ntks_status ntks_kernel_compute(const ntks_network* net, const ntks_dataset* data, ntks_kernel** out) {
    return guarded([&] {
        need(net, "network");
        need(data, "dataset");
        need(out, "out");
        *out = nullptr;
        *out = new ntks_kernel{ntkspec::compute_ntk(net->state, data->data)};
    });
}

void ntks_kernel_free(ntks_kernel* kernel) { delete kernel; }

size_t ntks_kernel_size(const ntks_kernel* kernel) { return kernel ? kernel->result.kernel.rows() : 0; }

double ntks_kernel_lambda_min(const ntks_kernel* kernel) { return kernel ? kernel->result.lambda_min : 0.0; }

ntks_status ntks_kernel_copy(const ntks_kernel* kernel, double* buffer, size_t capacity) {
    return guarded([&] {
        need(kernel, "kernel");
        need(buffer, "buffer");
        const auto src = kernel->result.kernel.data();
        ntkspec::require(capacity >= src.size(), ntkspec::ErrorKind::Dimension, "buffer too small");
        std::memcpy(buffer, src.data(), src.size() * sizeof(double));
    });
}

ntks_status ntks_kernel_eigenvalues(const ntks_kernel* kernel, double* buffer, size_t capacity) {
    return guarded([&] {
        need(kernel, "kernel");
        need(buffer, "buffer");
        const auto& ev = kernel->result.spectrum.eigenvalues;
        ntkspec::require(capacity >= ev.size(), ntkspec::ErrorKind::Dimension, "buffer too small");
        std::memcpy(buffer, ev.data(), ev.size() * sizeof(double));
    });
}

ntks_status ntks_run_experiment(const char* experiment, const ntks_run_options* options, char** summary_json) {
    return guarded([&] {
        need(experiment, "experiment");
        if (summary_json) *summary_json = nullptr;
        const ntkspec::ExperimentKind kind = ntkspec::parse_experiment(experiment);
        const ntks_run_options defaults{};
        const ntks_run_options& opt = options ? *options : defaults;

        ntkspec::SweepConfig cfg;
        if (opt.config_path) {
            std::ifstream in(opt.config_path);
            ntkspec::require(in.good(), ntkspec::ErrorKind::Config,
                             std::string("cannot open config '") + opt.config_path + "'");
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                ntkspec::fail(ntkspec::ErrorKind::Config, std::string("config '") + opt.config_path + "': " + e.what());
            }
            // The experiment key is optional when the caller names the kind.
            if (j.is_object() && !j.contains("experiment")) j["experiment"] = experiment;
            cfg = ntkspec::parse_config(j);
            ntkspec::require(cfg.experiment == kind, ntkspec::ErrorKind::Config,
                             std::string("config describes '") + std::string(ntkspec::to_string(cfg.experiment)) +
                                 "', not '" + experiment + "'");
        } else {
            cfg = ntkspec::default_config(kind);
        }
        if (opt.has_seed) cfg.seed = opt.seed;
        if (opt.trials) {
            cfg.trials = opt.trials;
            for (auto& p : cfg.probes) p.trials = opt.trials;
        }
        if (opt.workers) cfg.workers = opt.workers;

        const ntkspec::ExperimentReport report = ntkspec::run_experiment(cfg);
        if (opt.out_dir) ntkspec::write_report(report, cfg, opt.out_dir);
        if (summary_json) {
            const std::string text = report.summary.dump(2);
            char* buf = static_cast<char*>(std::malloc(text.size() + 1));
            if (!buf) throw std::bad_alloc();
            std::memcpy(buf, text.c_str(), text.size() + 1);
            *summary_json = buf;
        }
    });
}

void ntks_string_free(char* s) { std::free(s); }

}  // extern "C"
