#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgm/dataset.hpp"
#include "fgm/engine.hpp"

namespace fgm::cli {

/// Synthetic replica parameters; one train/test/truth triple per seed.
struct SyntheticSpec {
    std::size_t n = 1024;
    std::size_t n_test = 0;  // 0 means n
    std::size_t m = 4096;
    std::size_t informative = 100;
    Weighting weighting = Weighting::type1;
};

/// Fixed files; seeds then only label rows.
struct FileSpec {
    std::string train;
    std::string test;   // empty: evaluate on train
    std::string truth;  // empty: no recovery column
};

struct BenchMethod {
    std::string name;  // fgm, fgm-debias, l1, l1-debias, l2-full
    std::vector<std::size_t> budgets{10};
    std::vector<std::size_t> max_outer{15};
    std::vector<double> regs;               // l1 by explicit weight
    std::vector<std::size_t> supports;      // l1 by matched support size
};

struct BenchConfig {
    std::optional<SyntheticSpec> synthetic;
    std::optional<FileSpec> files;
    std::vector<std::uint64_t> seeds{1};
    LossType loss = LossType::squared_hinge;
    double C = 10.0;
    double debias_C = 20.0;
    double eps_outer = 1e-2;
    std::vector<BenchMethod> methods;
};

/// Throws UsageError on an unknown method, key or value.
BenchConfig parse_bench_config(const nlohmann::json& j);
nlohmann::json bench_config_to_json(const BenchConfig& c);

struct BenchRow {
    std::string method;
    std::string setting;
    std::uint64_t seed = 0;
    std::optional<std::size_t> budget;
    std::optional<std::size_t> outer_iters;
    double accuracy = 0.0;
    std::size_t support = 0;
    std::optional<std::size_t> recovered;
    double seconds = 0.0;
    std::string model_json;  // without timing
};

/// Rows ordered by (method, setting, seed) regardless of the worker count.
std::vector<BenchRow> run_bench(const BenchConfig& config, std::size_t threads);

/// Header: method,setting,seed,budget,outer_iters,accuracy,support,recovered,seconds
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace fgm::cli
