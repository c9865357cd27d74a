#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ntkspec/ntkspec.h"

using nlohmann::json;

namespace {

struct Command {
    const char* name;
    const char* experiment;
    const char* help;
};

constexpr Command kCommands[] = {
    {"ntk-scaling", "ntk_scaling", "lambda_min of the NTK against hidden width n1 = c*N"},
    {"lipschitz", "lipschitz", "empirical Lipschitz constant of f_k against width"},
    {"lemma-probe", "lemma_probe", "Monte Carlo probes of the supporting scaling laws"},
    {"memorize", "memorize", "rank certificate, finite-difference fit and doubled-network realisation"},
    {"bounds", "bounds_table", "measured lambda_min next to the constant-free lower and upper bounds"},
    {"ntk-check", "ntk_check", "kernel assembly against J J^T and finite differences"},
};

std::string num(const json& v) {
    if (v.is_null()) return "n/a";
    std::ostringstream os;
    os.precision(6);
    os << v.get<double>();
    return os.str();
}

void print_fits(const json& acts) {
    for (const auto& a : acts) {
        std::cout << "  " << a.at("activation").get<std::string>();
        if (a.contains("n0")) std::cout << " n0=" << a.at("n0");
        const json& fit = a.contains("fit") ? a.at("fit") : a.at("fit_measured_vs_lower");
        std::cout << "  slope " << (fit.is_null() ? "n/a" : num(fit.at("slope")));
        if (!fit.is_null()) std::cout << "  r2 " << num(fit.at("r_squared"));
        if (a.contains("excluded")) std::cout << "  excluded " << a.at("excluded");
        if (a.contains("ratio_band")) std::cout << "  ratio band " << num(a.at("ratio_band"));
        std::cout << '\n';
    }
}

void print_summary(const std::string& experiment, const json& s) {
    if (experiment == "ntk_check") {
        std::cout << "max relative error, kernel vs J J^T: " << num(s.at("max_oracle_rel_error")) << '\n'
                  << "max relative error, J J^T vs finite differences: " << num(s.at("max_fd_rel_error")) << '\n';
    } else if (experiment == "memorize") {
        for (const auto& r : s.at("records")) {
            std::cout << "  seed " << r.at("seed") << "  rank " << r.at("rank")
                      << (r.at("in_rank_set").get<bool>() ? " (full)" : " (deficient)") << "  sigma_min "
                      << num(r.at("sigma_min")) << "  residual " << num(r.at("residual")) << "  |Y| "
                      << num(r.at("target_norm")) << (r.at("success").get<bool>() ? "  ok" : "  miss") << '\n';
        }
        std::cout << "certified " << s.at("certified") << "/" << s.at("seeds") << ", fitted " << s.at("fitted")
                  << ", worst realisation error " << num(s.at("worst_realize_error")) << '\n';
    } else if (experiment == "lemma_probe") {
        for (const auto& p : s.at("probes"))
            std::cout << "  " << p.at("quantity").get<std::string>() << " vs " << p.at("sweep_variable").get<std::string>()
                      << "  slope " << (p.at("fit").is_null() ? "n/a" : num(p.at("fit").at("slope"))) << '\n';
    } else {
        print_fits(s.at("activations"));
        if (s.contains("upper_below_lower")) std::cout << "upper < lower on " << s.at("upper_below_lower") << " rows\n";
    }
    std::size_t violated = 0;
    for (const auto& [name, c] : s.at("audit").items())
        if (c.is_object()) violated += c.at("violated").get<std::size_t>();
    std::cout << "inequality audit: " << (violated ? std::to_string(violated) + " violations" : "clean") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NTK spectrum experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "results";
    std::uint64_t seed = 0;
    std::size_t trials = 0, workers = 1;
    for (const Command& c : kCommands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (NTK_SPECTRUM_OUT overrides)");
        sub->add_option("--seed", seed, "base seed; trial t uses seed + t");
        sub->add_option("--trials", trials, "override the trial count");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    const Command* cmd = nullptr;
    for (const Command& c : kCommands)
        if (app.got_subcommand(c.name)) cmd = &c;

    if (const char* env = std::getenv("NTK_SPECTRUM_OUT"); env && *env) out_dir = env;

    CLI::App* sub = app.get_subcommand(cmd->name);
    ntks_run_options opt{};
    opt.config_path = config_path.empty() ? nullptr : config_path.c_str();
    opt.out_dir = out_dir.c_str();
    opt.has_seed = sub->count("--seed") > 0;
    opt.seed = seed;
    opt.trials = trials;
    opt.workers = sub->count("--workers") > 0 ? workers : 0;

    char* summary = nullptr;
    const ntks_status st = ntks_run_experiment(cmd->experiment, &opt, &summary);
    if (st != NTKS_OK) {
        std::cerr << "error (" << ntks_status_name(st) << "): " << ntks_last_error() << '\n';
        return st == NTKS_ERR_CONFIG ? 1 : 2;
    }
    print_summary(cmd->experiment, json::parse(summary));
    ntks_string_free(summary);
    std::cout << "wrote " << out_dir << '\n';
    return 0;
}
