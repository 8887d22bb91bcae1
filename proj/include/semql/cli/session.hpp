#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "semql/cascade/cascade.hpp"
#include "semql/exec/executor.hpp"
#include "semql/models/registry.hpp"
#include "semql/planner/planner.hpp"

namespace semql {

struct OptimizerFlags {
    bool reorder = true;
    Placement placement = Placement::Auto;
    bool rewrite = true;
};

/// `reorder=on,placement=auto|on|pullup|pushdown,rewrite=off`. Throws Error.
[[nodiscard]] OptimizerFlags parse_optimizer_flags(std::string_view text);
[[nodiscard]] std::string to_string(OptimizerFlags const& flags);

/// `oracle_budget=N,target_precision=P,...` applied on top of `base`. Throws Error.
[[nodiscard]] CascadeConfig parse_cascade_flags(std::string_view text, CascadeConfig base = {});

enum class OutputFormat { Table, Csv, Json };

[[nodiscard]] OutputFormat parse_output_format(std::string_view text);

struct RunConfig {
    std::filesystem::path tables_dir = ".";
    std::optional<std::filesystem::path> provider_config;
    OptimizerFlags optimizer;
    std::optional<CascadeConfig> cascade;
    std::uint64_t seed = 0;
    OutputFormat format = OutputFormat::Table;
    std::optional<std::filesystem::path> stats_path;
    std::optional<std::filesystem::path> record_path;
    std::size_t workers = 4;
    std::size_t batch_size = 64;
};

/// Planner options for the flags plus hints and an optional rewrite oracle.
[[nodiscard]] PlannerOptions planner_options(OptimizerFlags const& flags,
                                             std::map<std::string, double> hints = {},
                                             std::shared_ptr<RewriteOracle> oracle = nullptr);

/// `<dir>/selectivity.json` ({"<predicate>": selectivity}) or empty.
[[nodiscard]] std::map<std::string, double> load_selectivity_hints(std::filesystem::path const& dir);

/// Model-backed rewrite oracle when the registry names a "rewrite_oracle" model.
[[nodiscard]] std::shared_ptr<RewriteOracle> registry_oracle(ProviderRegistry const& providers);

struct PreparedQuery {
    LogicalPlan baseline;  // lowered: push-down, written order, annotated
    LogicalPlan optimized;
};

[[nodiscard]] PreparedQuery prepare_query(std::string_view sql, Catalog const& catalog,
                                          PlannerOptions const& options);

[[nodiscard]] ExecOptions exec_options(RunConfig const& config, PlannerOptions const& planner);

/// Result rendering: aligned text table, CSV, or a JSON array of objects.
[[nodiscard]] std::string render_table(Table const& table, OutputFormat format);

/// JSON lines; FILE values become {uri, mime_type, size_bytes, created_at}.
[[nodiscard]] std::string to_jsonl(Table const& table);

/// Command entry points. Return the process exit code: 0 success, 1 other
/// failure, 2 SQL error, 3 provider error.
int cmd_run(std::string const& sql, RunConfig const& config, std::ostream& out, std::ostream& err);
int cmd_explain(std::string const& sql, RunConfig const& config, std::ostream& out, std::ostream& err);
int cmd_bench(std::filesystem::path const& scenario, RunConfig const& config, std::ostream& out,
              std::ostream& err, std::optional<std::filesystem::path> const& csv_path = std::nullopt,
              std::optional<std::filesystem::path> const& speedup_path = std::nullopt);
int cmd_ingest(std::filesystem::path const& file, RunConfig const& config, std::optional<std::string> const& name,
               std::ostream& out, std::ostream& err);

}  // namespace semql
