// Acceptance run. One PASS/FAIL line per criterion; exits non-zero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ntkspec/experiments.hpp"
#include "ntkspec/linalg.hpp"
#include "ntkspec/theory.hpp"
#include "oracles.hpp"

using namespace ntkspec;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = NTKSPEC_CONFIG_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> body;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs kept for the audit aggregation and the rerun comparison.
struct Recorded {
    std::string config;
    fs::path out_dir;
    ExperimentReport report;
};
std::vector<Recorded> g_runs;
InequalityAudit g_audit;

const ExperimentReport& run_config(const std::string& file) {
    const SweepConfig cfg = load_config(kConfigs / file);
    Recorded rec;
    rec.config = file;
    rec.out_dir = fs::temp_directory_path() / ("ntkspec_acceptance_" + fs::path(file).stem().string());
    fs::remove_all(rec.out_dir);
    rec.report = run_experiment(cfg);
    write_report(rec.report, cfg, rec.out_dir);
    g_audit.merge(rec.report.audit);
    g_runs.push_back(std::move(rec));
    return g_runs.back().report;
}

Outcome c1_oracle() {
    const ExperimentReport& r = run_config("small.json");
    const double oracle = r.summary.at("max_oracle_rel_error").get<double>();
    const double fd = r.summary.at("max_fd_rel_error").get<double>();
    return {oracle <= 1e-10 && fd <= 1e-4,
            "kernel vs JJ^T " + fmt(oracle) + " (<= 1e-10), JJ^T vs central differences " + fmt(fd) + " (<= 1e-4)"};
}

Outcome c2_eigen() {
    double worst = 0.0, worst_trace = 0.0, worst_det = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const DenseMatrix m = oracle::random_symmetric(5, 9000 + seed);
        const Spectrum sp = sym_eigen(m);
        const std::vector<double> ref = oracle::bisection_eigenvalues(m);
        double prod = 1.0, sum = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            worst = std::max(worst, std::abs(sp.eigenvalues[i] - ref[i]));
            sum += sp.eigenvalues[i];
            prod *= sp.eigenvalues[i];
        }
        worst_trace = std::max(worst_trace, std::abs(sum - m.trace()) / std::max(1.0, std::abs(m.trace())));
        const double det = oracle::cofactor_det(m);
        worst_det = std::max(worst_det, std::abs(prod - det) / std::max(1.0, std::abs(det)));
    }
    return {worst <= 1e-8 && worst_trace <= 1e-10 && worst_det <= 1e-10,
            "max |eig - bisection| " + fmt(worst) + " (<= 1e-8), trace " + fmt(worst_trace) + ", det " +
                fmt(worst_det) + " (<= 1e-10 relative)"};
}

struct ScalingGap {
    double cosine = std::nan(""), relu = std::nan("");
};
ScalingGap g_fig1;

ScalingGap scaling_slopes(const std::string& file) {
    const ExperimentReport& rep = run_config(file);
    ScalingGap g;
    for (const auto& a : rep.summary.at("activations")) {
        const double slope = a.at("fit").is_null() ? std::nan("") : a.at("fit").at("slope").get<double>();
        if (a.at("activation") == "cosine") g.cosine = slope;
        if (a.at("activation") == "relu") g.relu = slope;
    }
    return g;
}

Outcome c3_fig1() {
    g_fig1 = scaling_slopes("fig1_desk.json");
    const bool ok = g_fig1.cosine >= 1.4 && g_fig1.relu <= g_fig1.cosine - 0.25;
    return {ok, "cosine slope " + fmt(g_fig1.cosine) + " (>= 1.4), relu slope " + fmt(g_fig1.relu) +
                    " (<= cosine - 0.25)"};
}

Outcome c4_fig2() {
    const ScalingGap g = scaling_slopes("fig2_desk.json");
    const double gap = g.cosine - g.relu, gap8 = g_fig1.cosine - g_fig1.relu;
    const bool ok = g.cosine >= 1.4 && g.relu <= g.cosine - 0.25 && gap >= gap8 - 0.1;
    return {ok, "cosine slope " + fmt(g.cosine) + " (>= 1.4), relu slope " + fmt(g.relu) +
                    " (<= cosine - 0.25), gap " + fmt(gap) + " (>= c=8 gap " + fmt(gap8) + " - 0.1)"};
}

Outcome c5_lipschitz() {
    const SweepConfig cfg = load_config(kConfigs / "fig3_desk.json");
    const ExperimentReport& rep = run_config("fig3_desk.json");
    Outcome out;
    std::string detail;
    for (std::size_t n0 : cfg.n0_values) {
        double cos_slope = std::nan("");
        std::vector<double> cos_vals, relu_vals;
        for (const auto& a : rep.summary.at("activations")) {
            if (a.at("n0") != n0) continue;
            std::vector<double> vals;
            for (const auto& v : a.at("geometric_mean")) vals.push_back(v.is_null() ? std::nan("") : v.get<double>());
            if (a.at("activation") == "cosine") {
                cos_vals = vals;
                cos_slope = a.at("fit").is_null() ? std::nan("") : a.at("fit").at("slope").get<double>();
            } else if (a.at("activation") == "relu") {
                relu_vals = vals;
            }
        }
        bool dominates = !cos_vals.empty() && cos_vals.size() == relu_vals.size();
        double min_ratio = INFINITY;
        for (std::size_t i = 0; dominates && i < cos_vals.size(); ++i) {
            dominates = cos_vals[i] > relu_vals[i];
            min_ratio = std::min(min_ratio, cos_vals[i] / relu_vals[i]);
        }
        out.pass = out.pass && cos_slope < 0.5 && dominates;
        detail += (detail.empty() ? "" : "; ") + std::string("n0=") + std::to_string(n0) + ": cosine slope " +
                  fmt(cos_slope) + " (< 0.5), min cosine/relu ELip " + fmt(min_ratio) + " (> 1 at every n3)";
    }
    out.detail = detail;
    return out;
}

Outcome c6_moments() {
    std::mt19937_64 engine(20240601);
    std::normal_distribution<double> normal(0.0, 1.0);
    constexpr std::size_t kDraws = 1000000;
    double worst_z = 0.0;
    for (double s : {0.5, 1.0, 2.0, 5.0})
        for (double sigma : {0.25, 1.0, 4.0}) {
            double c1 = 0, c2 = 0, s1 = 0, s2 = 0;
            for (std::size_t i = 0; i < kDraws; ++i) {
                const double z = sigma * normal(engine);
                const double c = std::cos(s * z), sn = std::sin(s * z);
                c1 += c * c;
                c2 += c * c * c * c;
                s1 += sn * sn;
                s2 += sn * sn * sn * sn;
            }
            const double n = static_cast<double>(kDraws);
            const MomentPrediction p = gaussian_activation_moments(s, sigma);
            auto z_score = [&](double m1, double m2, double target) {
                const double mean = m1 / n;
                const double se = std::sqrt(std::max(m2 / n - mean * mean, 0.0) / n);
                return std::abs(mean - target) / std::max(se, 1e-300);
            };
            worst_z = std::max({worst_z, z_score(c1, c2, p.mean_cos_sq), z_score(s1, s2, p.mean_sin_sq)});
        }
    return {worst_z <= 3.0, "worst |MC - closed form| " + fmt(worst_z) + " standard errors (<= 3), 12 cells x 1e6 draws"};
}

Outcome c7_sigma_min() {
    const ExperimentReport& rep = run_config("sigma_min.json");
    const auto& probe = rep.summary.at("probes").at(0);
    const double slope = probe.at("fit").is_null() ? std::nan("") : probe.at("fit").at("slope").get<double>();
    return {slope >= 0.8 && slope <= 1.2, "sigma_min(F_1)^2 slope vs n1 " + fmt(slope) + " (in [0.8, 1.2])"};
}

Outcome c8_memorize() {
    const SweepConfig cfg = load_config(kConfigs / "mem16.json");
    const MemorizeResult r = run_memorization(cfg);
    // Same run through the reporting path, for the audit and rerun checks.
    run_config("mem16.json");
    const bool ok = r.certified >= 38 && 10 * r.fitted >= 9 * r.certified && r.worst_realize_error <= 1e-12;
    return {ok, "certified " + std::to_string(r.certified) + "/40 (>= 38), fitted " + std::to_string(r.fitted) + "/" +
                    std::to_string(r.certified) + " (>= 90%), worst realisation error " +
                    fmt(r.worst_realize_error) + " (<= 1e-12)"};
}

Outcome c9_audit() {
    std::ostringstream os;
    std::size_t checked = 0, violated = 0;
    auto add = [&](const char* name, const CheckCount& c) {
        checked += c.checked;
        violated += c.violated;
        os << name << " " << c.violated << "/" << c.checked << " ";
    };
    add("weyl", g_audit.weyl);
    add("schur", g_audit.schur);
    add("gershgorin", g_audit.gershgorin);
    add("centred_psd", g_audit.centred_psd);
    add("sigma_bound", g_audit.derivative_bound);
    add("psd", g_audit.psd);
    const bool covered = g_audit.weyl.checked && g_audit.schur.checked && g_audit.gershgorin.checked &&
                         g_audit.centred_psd.checked && g_audit.derivative_bound.checked;
    return {violated == 0 && covered, "violations " + os.str() + "(all zero, every family exercised)"};
}

Outcome c10_determinism() {
    std::size_t compared = 0;
    std::string mismatched;
    for (const Recorded& rec : g_runs) {
        std::ifstream in(rec.out_dir / "manifest.json");
        const nlohmann::json manifest = nlohmann::json::parse(in);
        const SweepConfig cfg = parse_config(manifest.at("config"));
        const ExperimentReport again = run_experiment(cfg);
        for (const Table& t : again.tables) {
            std::ifstream f(rec.out_dir / (t.name + ".csv"), std::ios::binary);
            std::stringstream ss;
            ss << f.rdbuf();
            ++compared;
            if (ss.str() != t.to_csv()) mismatched += rec.config + ":" + t.name + " ";
        }
    }
    return {mismatched.empty() && compared > 0,
            std::to_string(compared) + " CSVs regenerated from their manifests" +
                (mismatched.empty() ? ", all byte-identical" : ", differing: " + mismatched)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "oracle equivalence", 10, c1_oracle},
        {2, "eigensolver", 5, c2_eigen},
        {3, "width scaling c=8", 600, c3_fig1},
        {4, "width scaling c=15", 900, c4_fig2},
        {5, "Lipschitz sweep", 600, c5_lipschitz},
        {6, "moment identities", 30, c6_moments},
        {7, "feature sigma_min scaling", 300, c7_sigma_min},
        {8, "memorization", 120, c8_memorize},
        {9, "inequality suite", 0, c9_audit},
        {10, "determinism", 0, c10_determinism},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        std::string timing = fmt(secs) + " s";
        if (c.budget_s > 0) {
            timing += " (< " + fmt(c.budget_s) + " s)";
            o.pass = o.pass && secs < c.budget_s;
        }
        if (!o.pass) ++failed;
        std::printf("%s %2d %s: %s; %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(),
                    timing.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
