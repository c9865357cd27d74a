#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "ntkspec/ntkspec.h"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ntkspec_capi_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("network, dataset and kernel handles") {
    const size_t widths[] = {3, 5, 4, 1};
    ntks_network* net = nullptr;
    REQUIRE(ntks_network_create(widths, 4, "cos", 3.0, 7, &net) == NTKS_OK);
    CHECK(ntks_network_parameter_count(net) == 3 * 5 + 5 * 4 + 4);

    ntks_dataset* data = nullptr;
    REQUIRE(ntks_dataset_sample(3, 5, "gaussian", 7, &data) == NTKS_OK);
    CHECK(ntks_dataset_size(data) == 5);

    ntks_kernel* k = nullptr;
    REQUIRE(ntks_kernel_compute(net, data, &k) == NTKS_OK);
    REQUIRE(ntks_kernel_size(k) == 5);
    std::vector<double> kern(25), ev(5);
    REQUIRE(ntks_kernel_copy(k, kern.data(), kern.size()) == NTKS_OK);
    REQUIRE(ntks_kernel_eigenvalues(k, ev.data(), ev.size()) == NTKS_OK);
    double trace = 0.0, sum = 0.0;
    for (size_t i = 0; i < 5; ++i) {
        trace += kern[i * 5 + i];
        sum += ev[i];
        for (size_t j = 0; j < 5; ++j) CHECK(kern[i * 5 + j] == kern[j * 5 + i]);
    }
    CHECK(sum == doctest::Approx(trace).epsilon(1e-12));
    CHECK(ntks_kernel_lambda_min(k) == ev[0]);
    CHECK(ntks_kernel_copy(k, kern.data(), 24) == NTKS_ERR_DIMENSION);

    double y = 0.0;
    const double x[] = {0.1, -0.2, 0.3};
    CHECK(ntks_network_forward(net, x, 3, &y) == NTKS_OK);
    CHECK(std::isfinite(y));
    CHECK(ntks_network_forward(net, x, 2, &y) == NTKS_ERR_DIMENSION);
    CHECK(std::string(ntks_last_error()).find("n0") != std::string::npos);

    ntks_kernel_free(k);
    ntks_dataset_free(data);
    ntks_network_free(net);
}

TEST_CASE("a single linear layer has kernel X X^T") {
    const size_t widths[] = {2, 1};
    ntks_network* net = nullptr;
    REQUIRE(ntks_network_create(widths, 2, "identity", 1.0, 0, &net) == NTKS_OK);
    const double rows[] = {1.0, 2.0, -1.0, 0.5, 3.0, 0.0};
    ntks_dataset* data = nullptr;
    REQUIRE(ntks_dataset_from_rows(rows, 3, 2, &data) == NTKS_OK);
    ntks_kernel* k = nullptr;
    REQUIRE(ntks_kernel_compute(net, data, &k) == NTKS_OK);
    std::vector<double> kern(9);
    REQUIRE(ntks_kernel_copy(k, kern.data(), 9) == NTKS_OK);
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 3; ++j)
            CHECK(kern[i * 3 + j] == doctest::Approx(rows[2 * i] * rows[2 * j] + rows[2 * i + 1] * rows[2 * j + 1]));
    ntks_kernel_free(k);
    ntks_dataset_free(data);
    ntks_network_free(net);
}

TEST_CASE("errors map onto status codes") {
    ntks_network* net = reinterpret_cast<ntks_network*>(0x1);
    const size_t bad_out[] = {3, 4, 2};
    CHECK(ntks_network_create(bad_out, 3, "cos", 1.0, 0, &net) != NTKS_OK);
    CHECK(net == nullptr);
    const size_t ok[] = {3, 1};
    CHECK(ntks_network_create(ok, 2, "tanh", 1.0, 0, &net) == NTKS_ERR_CONFIG);
    CHECK(ntks_network_create(nullptr, 2, "cos", 1.0, 0, &net) == NTKS_ERR_INVALID_INPUT);
    const double nan_rows[] = {NAN, 1.0};
    ntks_dataset* data = nullptr;
    CHECK(ntks_dataset_from_rows(nan_rows, 1, 2, &data) == NTKS_ERR_INVALID_INPUT);
    CHECK(ntks_run_experiment("no_such", nullptr, nullptr) == NTKS_ERR_CONFIG);

    ntks_run_options opt{};
    opt.config_path = "/nonexistent/config.json";
    CHECK(ntks_run_experiment("ntk_check", &opt, nullptr) == NTKS_ERR_CONFIG);

    const fs::path dir = scratch("cfg");
    fs::create_directories(dir);
    std::ofstream(dir / "unknown.json") << R"({"experiment": "ntk_check", "widht": 3})";
    const std::string unknown = (dir / "unknown.json").string();
    opt.config_path = unknown.c_str();
    CHECK(ntks_run_experiment("ntk_check", &opt, nullptr) == NTKS_ERR_CONFIG);
    CHECK(std::string(ntks_last_error()).find("widht") != std::string::npos);

    std::ofstream(dir / "mismatch.json") << R"({"experiment": "memorize"})";
    const std::string mismatch = (dir / "mismatch.json").string();
    opt.config_path = mismatch.c_str();
    CHECK(ntks_run_experiment("ntk_check", &opt, nullptr) == NTKS_ERR_CONFIG);
    CHECK(std::string(ntks_status_name(NTKS_ERR_NUMERICAL)) == "numerical");
}

TEST_CASE("run_experiment writes reproducible reports") {
    const fs::path a = scratch("run_a"), b = scratch("run_b");
    ntks_run_options opt{};
    opt.trials = 3;
    const std::string da = a.string(), db = b.string();
    opt.out_dir = da.c_str();
    char* summary = nullptr;
    REQUIRE(ntks_run_experiment("ntk_check", &opt, &summary) == NTKS_OK);
    const auto s = nlohmann::json::parse(summary);
    ntks_string_free(summary);
    CHECK(s.at("max_oracle_rel_error").get<double>() <= 1e-10);
    CHECK(s.at("audit").at("clean").get<bool>());

    opt.out_dir = db.c_str();
    REQUIRE(ntks_run_experiment("ntk_check", &opt, nullptr) == NTKS_OK);
    for (const char* f : {"ntk_check.csv", "summary.json", "manifest.json"}) {
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }

    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest.at("trial_seeds") == nlohmann::json::array({0, 1, 2}));
    CHECK(manifest.at("config").at("trials") == 3);

    // The seed override shifts every trial seed.
    const fs::path c = scratch("run_c");
    const std::string dc = c.string();
    opt.out_dir = dc.c_str();
    opt.has_seed = 1;
    opt.seed = 100;
    REQUIRE(ntks_run_experiment("ntk_check", &opt, nullptr) == NTKS_OK);
    CHECK(nlohmann::json::parse(slurp(c / "manifest.json")).at("trial_seeds") ==
          nlohmann::json::array({100, 101, 102}));
    CHECK(slurp(c / "ntk_check.csv") != slurp(a / "ntk_check.csv"));

    // The manifest's config echo replays the run bitwise.
    const fs::path d = scratch("run_d");
    const std::string dd = d.string();
    std::ofstream(fs::temp_directory_path() / "ntkspec_capi_replay.json") << manifest.at("config").dump();
    const std::string replay = (fs::temp_directory_path() / "ntkspec_capi_replay.json").string();
    ntks_run_options again{};
    again.config_path = replay.c_str();
    again.out_dir = dd.c_str();
    REQUIRE(ntks_run_experiment("ntk_check", &again, nullptr) == NTKS_OK);
    CHECK(slurp(d / "ntk_check.csv") == slurp(a / "ntk_check.csv"));
}
