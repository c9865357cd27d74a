#include <fstream>
#include <set>
#include <string>

#include "ntkspec/error.hpp"
#include "ntkspec/experiments.hpp"

namespace ntkspec {

using nlohmann::json;

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::NtkScaling: return "ntk_scaling";
        case ExperimentKind::Lipschitz: return "lipschitz";
        case ExperimentKind::LemmaProbe: return "lemma_probe";
        case ExperimentKind::Memorize: return "memorize";
        case ExperimentKind::BoundsTable: return "bounds_table";
        case ExperimentKind::NtkCheck: return "ntk_check";
    }
    return "unknown";
}

ExperimentKind parse_experiment(std::string_view name) {
    for (ExperimentKind k : {ExperimentKind::NtkScaling, ExperimentKind::Lipschitz,
                             ExperimentKind::LemmaProbe, ExperimentKind::Memorize,
                             ExperimentKind::BoundsTable, ExperimentKind::NtkCheck})
        if (to_string(k) == name) return k;
    fail(ErrorKind::Config, "unknown experiment '" + std::string(name) + "'");
}

namespace {

const std::vector<std::size_t> kWidthSweep{64, 128, 256, 512, 1024};

ProbeSpec probe(std::string name, std::vector<std::size_t> widths, std::size_t layer,
                std::size_t sweep_layer, std::vector<std::size_t> values, std::size_t trials,
                std::size_t samples) {
    ProbeSpec p;
    p.probe = std::move(name);
    p.widths = std::move(widths);
    p.layer = layer;
    p.sweep_layer = sweep_layer;
    p.sweep_values = std::move(values);
    p.trials = trials;
    p.samples = samples;
    p.activation = Activation{ActivationKind::Cosine, 5.0};
    return p;
}

std::vector<ProbeSpec> default_probe_suite() {
    std::vector<ProbeSpec> suite;
    suite.push_back(probe("feature_norm", {16, 64, 1}, 1, 1, kWidthSweep, 10, 4));
    suite.push_back(probe("sigma_frobenius", {16, 64, 1}, 1, 1, kWidthSweep, 10, 4));
    ProbeSpec chain = probe("chain_product", {8, 64, 64, 1}, 1, 2, kWidthSweep, 10, 4);
    chain.chain_end = 2;
    suite.push_back(chain);
    suite.push_back(probe("operator_norm_chain", {8, 64, 64, 1}, 1, 1, {32, 64, 128, 256}, 5, 4));
    suite.push_back(probe("feature_sigma_min", {64, 64, 1}, 1, 1, {32, 64, 128, 256, 512}, 10, 16));
    suite.push_back(probe("centred_features", {16, 64, 1}, 1, 1, {32, 64, 128}, 5, 8));
    suite.push_back(probe("empirical_lipschitz", {16, 64, 64, 1}, 2, 2, {64, 128, 256}, 3, 50));
    return suite;
}

const std::set<std::string> kTopKeys{
    "experiment", "activations", "activation", "s", "n0", "n0_values", "widths",
    "width_factor", "n2", "sample_counts", "sweep_layer", "sweep_values", "samples", "layer",
    "probes", "mean_samples", "init", "sampler", "trials", "seed", "workers", "timing",
    "epsilon_rel", "check_max_width", "check_max_depth", "check_max_samples"};

const std::set<std::string> kProbeKeys{"probe", "widths", "layer", "chain_end", "sweep_layer",
                                       "sweep_values", "trials", "samples", "activation", "s"};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) fail(ErrorKind::Config, "unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

InitRule parse_init(const json& j) {
    if (j.is_string()) {
        require(j.get<std::string>() == "he", ErrorKind::Config,
                "init must be \"he\" or a list of per-layer scales");
        return InitRule::he_init();
    }
    require(j.is_array(), ErrorKind::Config, "init must be \"he\" or a list of per-layer scales");
    return InitRule::explicit_scales(j.get<std::vector<double>>());
}

json init_to_json(const InitRule& init) {
    if (init.he) return "he";
    return init.scales;
}

}  // namespace

SweepConfig default_config(ExperimentKind kind) {
    SweepConfig c;
    c.experiment = kind;
    switch (kind) {
        case ExperimentKind::NtkScaling:
        case ExperimentKind::BoundsTable:
            break;
        case ExperimentKind::Lipschitz:
            c.s = 30.0;
            c.n0_values = {64, 200};
            c.widths = {64, 64, 64, 64, 1};
            c.sweep_layer = 3;
            c.sweep_values = kWidthSweep;
            c.samples = 1000;
            c.layer = 3;
            c.trials = 1;
            break;
        case ExperimentKind::LemmaProbe:
            c.activations = {ActivationKind::Cosine};
            c.probes = default_probe_suite();
            c.trials = 10;
            break;
        case ExperimentKind::Memorize:
            c.activations = {ActivationKind::Cosine};
            c.s = 2.0;
            c.widths = {4, 64, 32, 1};
            c.samples = 16;
            c.trials = 40;
            break;
        case ExperimentKind::NtkCheck:
            c.activations = {ActivationKind::Cosine, ActivationKind::Sine, ActivationKind::Relu,
                             ActivationKind::Identity};
            c.s = 3.0;
            c.trials = 20;
            c.mean_samples = 1000;
            break;
    }
    return c;
}

SweepConfig parse_config(const json& j) {
    try {
        require(j.is_object(), ErrorKind::Config, "config must be a JSON object");
        reject_unknown(j, kTopKeys, "config");
        require(j.contains("experiment"), ErrorKind::Config, "config: missing 'experiment'");
        SweepConfig c = default_config(parse_experiment(j.at("experiment").get<std::string>()));

        if (j.contains("activations")) {
            c.activations.clear();
            for (const auto& a : j.at("activations")) c.activations.push_back(parse_activation(a.get<std::string>()));
        }
        if (j.contains("activation")) c.activations = {parse_activation(j.at("activation").get<std::string>())};
        read(j, "s", c.s);
        read(j, "n0", c.n0);
        read(j, "n0_values", c.n0_values);
        read(j, "widths", c.widths);
        read(j, "width_factor", c.width_factor);
        read(j, "n2", c.n2);
        read(j, "sample_counts", c.sample_counts);
        read(j, "sweep_layer", c.sweep_layer);
        read(j, "sweep_values", c.sweep_values);
        read(j, "samples", c.samples);
        read(j, "layer", c.layer);
        read(j, "mean_samples", c.mean_samples);
        if (j.contains("init")) c.init = parse_init(j.at("init"));
        if (j.contains("sampler")) c.sampler = parse_sampler(j.at("sampler").get<std::string>());
        read(j, "trials", c.trials);
        read(j, "seed", c.seed);
        read(j, "workers", c.workers);
        read(j, "timing", c.timing);
        read(j, "epsilon_rel", c.epsilon_rel);
        read(j, "check_max_width", c.check_max_width);
        read(j, "check_max_depth", c.check_max_depth);
        read(j, "check_max_samples", c.check_max_samples);

        if (j.contains("probes")) {
            c.probes.clear();
            const Activation inherited{c.activations.empty() ? ActivationKind::Cosine : c.activations.front(), c.s};
            for (const auto& pj : j.at("probes")) {
                reject_unknown(pj, kProbeKeys, "probe entry");
                ProbeSpec p;
                p.probe = pj.at("probe").get<std::string>();
                p.activation = inherited;
                p.trials = c.trials;
                p.samples = 8;
                read(pj, "widths", p.widths);
                read(pj, "layer", p.layer);
                read(pj, "chain_end", p.chain_end);
                read(pj, "sweep_layer", p.sweep_layer);
                read(pj, "sweep_values", p.sweep_values);
                read(pj, "trials", p.trials);
                read(pj, "samples", p.samples);
                if (pj.contains("activation")) p.activation.kind = parse_activation(pj.at("activation").get<std::string>());
                read(pj, "s", p.activation.frequency);
                c.probes.push_back(std::move(p));
            }
        }

        require(c.trials >= 1, ErrorKind::Config, "config: trials must be >= 1");
        require(c.workers >= 1, ErrorKind::Config, "config: workers must be >= 1");
        require(!c.activations.empty(), ErrorKind::Config, "config: no activations");
        return c;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        fail(ErrorKind::Config, e.what());
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("config: ") + e.what());
    }
}

SweepConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Config, "cannot open config '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, "config '" + path.string() + "': " + e.what());
    }
    return parse_config(j);
}

json to_json(const SweepConfig& c) {
    json j;
    j["experiment"] = std::string(to_string(c.experiment));
    json acts = json::array();
    for (ActivationKind a : c.activations) acts.push_back(std::string(to_string(a)));
    j["activations"] = acts;
    j["s"] = c.s;
    j["n0"] = c.n0;
    j["n0_values"] = c.n0_values;
    j["widths"] = c.widths;
    j["width_factor"] = c.width_factor;
    j["n2"] = c.n2;
    j["sample_counts"] = c.sample_counts;
    j["sweep_layer"] = c.sweep_layer;
    j["sweep_values"] = c.sweep_values;
    j["samples"] = c.samples;
    j["layer"] = c.layer;
    j["mean_samples"] = c.mean_samples;
    j["init"] = init_to_json(c.init);
    j["sampler"] = std::string(to_string(c.sampler));
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["timing"] = c.timing;
    j["epsilon_rel"] = c.epsilon_rel;
    j["check_max_width"] = c.check_max_width;
    j["check_max_depth"] = c.check_max_depth;
    j["check_max_samples"] = c.check_max_samples;
    json probes = json::array();
    for (const ProbeSpec& p : c.probes) {
        probes.push_back({{"probe", p.probe},
                          {"widths", p.widths},
                          {"layer", p.layer},
                          {"chain_end", p.chain_end},
                          {"sweep_layer", p.sweep_layer},
                          {"sweep_values", p.sweep_values},
                          {"trials", p.trials},
                          {"samples", p.samples},
                          {"activation", std::string(to_string(p.activation.kind))},
                          {"s", p.activation.frequency}});
    }
    j["probes"] = probes;
    return j;
}

}  // namespace ntkspec
