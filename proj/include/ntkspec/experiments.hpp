#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ntkspec/audit.hpp"
#include "ntkspec/linalg.hpp"
#include "ntkspec/memorization.hpp"
#include "ntkspec/network.hpp"
#include "ntkspec/probes.hpp"

namespace ntkspec {

enum class ExperimentKind { NtkScaling, Lipschitz, LemmaProbe, Memorize, BoundsTable, NtkCheck };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment(std::string_view name);

// One probe of a lemma_probe run. Fields left unset in the config inherit the
// top-level values.
struct ProbeSpec {
    std::string probe;  // feature_norm, sigma_frobenius, chain_product, operator_norm_chain,
                        // feature_sigma_min, centred_features, empirical_lipschitz
    std::vector<std::size_t> widths;
    std::size_t layer = 1;
    std::size_t chain_end = 0;  // p for chain_product, 0 means L-1
    std::size_t sweep_layer = 1;
    std::vector<std::size_t> sweep_values;
    std::size_t trials = 10;
    std::size_t samples = 8;
    Activation activation;
};

struct SweepConfig {
    ExperimentKind experiment = ExperimentKind::NtkScaling;
    std::vector<ActivationKind> activations{ActivationKind::Cosine, ActivationKind::Relu};
    double s = 5.0;
    std::size_t n0 = 64;
    std::vector<std::size_t> n0_values;     // lipschitz: one sweep per entry
    std::vector<std::size_t> widths;        // template for lipschitz, memorize, probes
    std::size_t width_factor = 8;           // n_1 = c * N
    std::size_t n2 = 64;
    std::vector<std::size_t> sample_counts{8, 16, 24, 32, 48, 64};
    std::size_t sweep_layer = 3;
    std::vector<std::size_t> sweep_values;
    std::size_t samples = 1000;             // inputs per trial where N is not swept
    std::size_t layer = 3;                  // lipschitz: ELip of f_layer
    std::vector<ProbeSpec> probes;
    std::size_t mean_samples = 1000;        // Monte Carlo size for E_x f_k; 0 disables
    InitRule init;
    SamplerKind sampler = SamplerKind::GaussianIid;
    std::size_t trials = 5;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    bool timing = false;                    // fill wall_ms; off keeps CSVs byte-stable
    double epsilon_rel = 1e-2;              // memorize: epsilon = epsilon_rel * ||Y||
    std::size_t check_max_width = 8;
    std::size_t check_max_depth = 4;
    std::size_t check_max_samples = 6;
};

// Desk-scale defaults for each experiment kind.
SweepConfig default_config(ExperimentKind kind);
SweepConfig parse_config(const nlohmann::json& j);
SweepConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const SweepConfig& cfg);

// Tabular result rendered as CSV. Cells are pre-formatted strings.
struct Table {
    std::string name;  // file stem
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_csv() const;
};

// Shortest round-trip decimal for a double; empty for NaN.
std::string format_double(double v);

struct ActivationFit {
    ActivationKind activation = ActivationKind::Cosine;
    std::size_t n0 = 0;                 // lipschitz only
    std::vector<double> sweep;          // x values (n_1 or n_3)
    std::vector<double> aggregate;      // geometric mean over trials
    std::vector<double> clamped_mean;   // ntk scaling: arithmetic mean of clamped lambda_min
    std::optional<SlopeFit> fit;
    std::size_t excluded = 0;
    double monotone_fraction = 1.0;     // share of adjacent pairs nondecreasing
};

struct NtkScalingResult {
    Table table;
    std::vector<ActivationFit> fits;
    InequalityAudit audit;
};

struct LipschitzResult {
    Table table;
    std::vector<ActivationFit> fits;  // one per (n0, activation)
    InequalityAudit audit;
};

struct BoundsRow {
    double n1 = 0.0;
    double measured = 0.0;  // geometric mean lambda_min
    double lower = 0.0;
    double upper = 0.0;
};

struct BoundsResult {
    Table table;
    std::vector<std::pair<ActivationKind, std::vector<BoundsRow>>> rows;
    std::vector<std::pair<ActivationKind, std::optional<SlopeFit>>> fits;  // log measured vs log lower
    std::vector<std::pair<ActivationKind, double>> ratio_band;  // max/min of measured/lower
    std::size_t upper_below_lower = 0;
    InequalityAudit audit;
};

struct ProbeRun {
    ProbeSpec spec;
    std::vector<ProbeResult> results;  // chain_product yields two
    std::size_t centred_checked = 0;
    std::size_t centred_degenerate = 0;
};

struct LemmaProbeResult {
    std::vector<Table> tables;
    std::vector<ProbeRun> runs;
    InequalityAudit audit;
};

struct MemorizeRecord {
    std::uint64_t seed = 0;
    RankCertificate certificate;
    std::optional<FitResult> fit;
    double target_norm = 0.0;
    double realize_max_error = 0.0;
};

struct MemorizeResult {
    Table table;
    std::vector<MemorizeRecord> records;
    std::size_t certified = 0;
    std::size_t fitted = 0;
    double worst_realize_error = 0.0;
    InequalityAudit audit;
};

struct NtkCheckResult {
    Table table;
    double max_oracle_error = 0.0;
    double max_fd_error = 0.0;
    InequalityAudit audit;
};

NtkScalingResult run_ntk_scaling(const SweepConfig& cfg);
LipschitzResult run_lipschitz_sweep(const SweepConfig& cfg);
BoundsResult run_bounds_table(const SweepConfig& cfg);
LemmaProbeResult run_lemma_probes(const SweepConfig& cfg);
MemorizeResult run_memorization(const SweepConfig& cfg);
NtkCheckResult run_ntk_check(const SweepConfig& cfg);

// Kind-agnostic wrapper used by the CLI and the C API.
struct ExperimentReport {
    ExperimentKind kind = ExperimentKind::NtkScaling;
    std::vector<Table> tables;
    nlohmann::json summary;
    InequalityAudit audit;
};

ExperimentReport run_experiment(const SweepConfig& cfg);

// Writes every table as <name>.csv, summary.json and manifest.json. Returns
// the written paths.
std::vector<std::filesystem::path> write_report(const ExperimentReport& report,
                                                const SweepConfig& cfg,
                                                const std::filesystem::path& out_dir);

nlohmann::json to_json(const InequalityAudit& audit);

}  // namespace ntkspec
