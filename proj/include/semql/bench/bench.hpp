#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semql/bench/workloads.hpp"
#include "semql/cli/session.hpp"

namespace semql {

/// A named optimizer/cascade configuration compared in a benchmark.
/// Presets: baseline (= ai_first), reordered, pushdown, pullup, auto
/// (= ai_aware, optimized), no_rewrite, cascade, oracle_only, proxy_only.
struct Strategy {
    std::string name;
    OptimizerFlags optimizer;
    bool cascade = false;
    std::optional<std::string> model;  // default model override
};

[[nodiscard]] Strategy strategy_preset(std::string const& name);

struct Scenario {
    std::string name;
    std::string generator;
    nlohmann::json params = nlohmann::json::object();
    std::optional<std::filesystem::path> tables_dir;
    std::optional<std::string> query;  // `${param}` is replaced by the sweep value
    std::string sweep_param;
    std::vector<double> sweep_values;
    std::vector<Strategy> strategies;
    std::vector<std::uint64_t> seeds{0};
    std::optional<nlohmann::json> providers;
    CascadeConfig cascade;
    std::optional<TruthSpec> truth;
    std::filesystem::path base_dir;  // relative paths in the scenario resolve here
};

/// {name, generator | tables, params?, query?, sweep: {param, values},
///  strategies: [name | {name, optimizer?, cascade?, model?}], seeds?, providers?,
///  cascade?: {oracle_budget, target_precision, ...}, truth?: {table, key, column}}.
/// Throws ScenarioParseError.
[[nodiscard]] Scenario parse_scenario(nlohmann::json const& j, std::filesystem::path const& base_dir = {});
[[nodiscard]] Scenario load_scenario(std::filesystem::path const& path);

struct Quality {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Compares the `truth.key` column of `result` with the truth rows.
[[nodiscard]] Quality quality(Table const& result, Catalog const& catalog, TruthSpec const& truth);
[[nodiscard]] Quality quality(std::vector<std::string> const& predicted, std::vector<std::string> const& expected);

struct BenchRow {
    std::string scenario;
    std::string param;
    double value = 0.0;
    std::string strategy;
    std::uint64_t seed = 0;
    std::uint64_t ai_calls = 0;
    double est_ai_calls = 0.0;
    std::uint64_t oracle_calls = 0;
    std::uint64_t proxy_calls = 0;
    std::size_t rows = 0;
    double wall_ms = 0.0;
    std::optional<Quality> quality;
};

struct BenchOptions {
    std::size_t workers = 4;
    std::size_t batch_size = 64;
};

[[nodiscard]] std::vector<BenchRow> run_scenario(Scenario const& scenario, BenchOptions const& options = {});

/// Column order: scenario,param,value,strategy,seed,ai_calls,est_ai_calls,
/// oracle_calls,proxy_calls,rows,wall_ms,precision,recall,f1.
[[nodiscard]] std::string bench_csv(std::vector<BenchRow> const& rows);

/// Per (value, seed): ai_calls of each strategy and its speedup over the
/// first strategy of the scenario.
[[nodiscard]] std::string speedup_csv(std::vector<BenchRow> const& rows);

}  // namespace semql
