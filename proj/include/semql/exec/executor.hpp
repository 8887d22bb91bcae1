#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semql/cascade/cascade.hpp"
#include "semql/core/errors.hpp"
#include "semql/core/table.hpp"
#include "semql/models/registry.hpp"
#include "semql/planner/planner.hpp"

namespace semql {

struct ExecOptions {
    std::size_t batch_size = 64;
    std::size_t workers = 4;
    /// Runtime reordering of fused filter chains.
    bool adaptive_reorder = true;
    /// Rows per reordering epoch; independent of batch_size so that stats do
    /// not depend on how rows are split into morsels.
    std::size_t reorder_epoch_rows = 64;
    std::size_t reorder_window = 10;
    double reorder_hysteresis = 0.10;
    /// When set, every AI_FILTER in filter position runs through the cascade.
    /// Per-call options ('cascade', 'proxy_model', 'oracle_model',
    /// 'oracle_budget', 'target_precision', 'target_recall', 'delta') override it.
    std::optional<CascadeConfig> cascade;
    std::size_t agg_batch_tokens = 3072;
    std::size_t max_labels_per_call = 250;
    std::string default_model{kDefaultModel};
    /// Profiles seeding the adaptive reorderer.
    PlannerOptions planner;
};

struct NodeStats {
    int id = 0;
    std::string kind;
    std::uint64_t rows_in = 0;
    std::uint64_t rows_out = 0;
    std::uint64_t ai_calls = 0;
    std::uint64_t prompt_tokens = 0;
    double wall_ms = 0.0;
};

struct PredicateStats {
    int id = 0;
    std::string text;
    std::uint64_t rows_seen = 0;
    std::uint64_t rows_passed = 0;
    std::uint64_t ai_calls = 0;
    std::uint64_t cost_units = 0;

    [[nodiscard]] double observed_selectivity() const;
    [[nodiscard]] double mean_cost() const;
};

struct CascadeStats {
    int pred_id = 0;
    CascadeSummary summary;
};

struct ExecStats {
    std::vector<NodeStats> nodes;  // plan pre-order
    std::vector<PredicateStats> predicates;
    std::vector<CascadeStats> cascades;
    std::uint64_t truncations = 0;
    std::uint64_t label_hallucinations = 0;
    std::uint64_t reorders = 0;
    std::map<std::string, ModelCounters> models;  // provider counters during this execution

    [[nodiscard]] std::uint64_t total_ai_calls() const;
    [[nodiscard]] nlohmann::json to_json(bool include_timing = true) const;
};

struct ExecResult {
    Table table;
    ExecStats stats;
};

/// Provider failure that aborted a query; carries the stats gathered so far.
class ExecutionAborted : public ProviderError {
  public:
    ExecutionAborted(ProviderError const& cause, ExecStats partial)
        : ProviderError(cause.what(), cause.retryable()), partial_(std::move(partial)) {}

    [[nodiscard]] ExecStats const& partial_stats() const { return partial_; }

  private:
    ExecStats partial_;
};

/// Runs an optimized plan. Result rows are ordered by input row ids.
[[nodiscard]] ExecResult execute(LogicalPlan const& plan, Catalog const& catalog,
                                 ProviderRegistry const& providers, ExecOptions const& options = {});

/// Morsel dispatcher over up to `workers` threads. The first exception thrown
/// by any task stops the remaining ones and is rethrown.
[[nodiscard]] ParallelFor worker_pool_for(std::size_t workers);

/// ClassifyMulti prompt for AI_CLASSIFY over one input value.
[[nodiscard]] std::string classify_prompt(std::string const& input,
                                          std::optional<std::string> const& instruction);

}  // namespace semql
