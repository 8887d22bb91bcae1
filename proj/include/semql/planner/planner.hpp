#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semql/core/table.hpp"
#include "semql/planner/plan.hpp"

namespace semql {

enum class PredicateKind { Cheap, AiText, AiMultimodal };

[[nodiscard]] std::string_view to_string(PredicateKind kind);

struct Observation {
    double rows_seen = 0.0;
    double rows_passed = 0.0;
    double total_cost = 0.0;
};

struct PredicateProfile {
    int pred_id = 0;
    PredicateKind kind = PredicateKind::Cheap;
    double est_cost_per_row = 1.0;
    double est_selectivity = 1.0;
    std::optional<Observation> observed;
};

/// cost / (1 - selectivity); selectivity 1 ranks last.
[[nodiscard]] double predicate_rank(double cost, double selectivity);
[[nodiscard]] double predicate_rank(PredicateProfile const& p);

/// Strict ordering used everywhere predicates are sorted: rank, then Cheap
/// before AI, then id.
[[nodiscard]] bool rank_before(PredicateProfile const& a, PredicateProfile const& b);

enum class Placement { Auto, PullUp, PushDown };

[[nodiscard]] std::string_view to_string(Placement p);

struct RewriteSide {
    std::string table;
    std::string binding;
    std::string column;
    std::size_t slot = 0;
    std::size_t row_count = 0;
    std::size_t distinct_count = 0;
    double avg_token_count = 0.0;
    std::vector<std::string> samples;
};

/// What a rewrite oracle sees: the join prompt plus metadata, statistics and
/// sample values for each side.
struct RewriteQuestion {
    std::string prompt;
    RewriteSide left;
    RewriteSide right;
};

struct RewriteAnswer {
    bool rewrite = false;
    std::string label_binding;
};

class RewriteOracle {
  public:
    virtual ~RewriteOracle() = default;
    /// Throws OracleUnavailable when the decision cannot be obtained.
    virtual RewriteAnswer decide(RewriteQuestion const& question) = 0;
};

/// Affirms when the label side has at most `max_distinct` distinct values of
/// at most `max_avg_tokens` tokens and the prompt places the label inside a
/// membership phrase ("is mapped to category {1}", "is about {1}", ...).
class HeuristicRewriteOracle : public RewriteOracle {
  public:
    std::size_t max_distinct = 1000;
    double max_avg_tokens = 16.0;

    RewriteAnswer decide(RewriteQuestion const& question) override;
};

struct RewritePlan {
    bool label_is_right = true;
    std::size_t row_slot = 0;
    std::size_t label_slot = 1;
};

struct PlannerOptions {
    bool reorder = true;
    Placement placement = Placement::Auto;
    bool rewrite = true;
    std::size_t context_window_tokens = 32768;
    std::size_t max_labels_per_call = 250;
    double ai_default_selectivity = 0.5;
    double between_default_selectivity = 0.3;
    double multimodal_factor = 10.0;
    /// Selectivity overrides keyed by the printed predicate text.
    std::map<std::string, double> selectivity_hints;
    /// Runtime observations keyed by the printed predicate text.
    std::map<std::string, Observation> observed;
    /// Rewrite oracle; the heuristic one when null.
    std::shared_ptr<RewriteOracle> oracle;
};

/// Profiles of every predicate (filters and join predicates) in the plan.
[[nodiscard]] std::vector<PredicateProfile> profile_predicates(LogicalPlan const& plan,
                                                               Catalog const& catalog,
                                                               PlannerOptions const& options = {});

/// Permutation of `profiles` indices in evaluation order.
[[nodiscard]] std::vector<std::size_t> order_predicates(std::vector<PredicateProfile> const& profiles);

/// Reorders filter chains (when enabled) and chooses, for every single-side AI
/// predicate, whether it runs below or above the join so that the estimated
/// total number of model calls is smallest; ties prefer push-down. Returns an
/// annotated plan.
[[nodiscard]] LogicalPlan place_ai_predicates(LogicalPlan const& plan, Catalog const& catalog,
                                              PlannerOptions const& options = {});

/// Fills est_rows / est_ai_calls bottom-up.
void annotate(LogicalPlan& plan, Catalog const& catalog, PlannerOptions const& options = {});

/// Rewrite candidate check for a Join node. An oracle that throws
/// OracleUnavailable is replaced by the heuristic.
[[nodiscard]] std::optional<RewritePlan> detect_classify_rewrite(PlanNode const& join,
                                                                 Catalog const& catalog,
                                                                 RewriteOracle* oracle = nullptr);

/// Labels per classification call so that instruction, the longest row value
/// and the chunk fit `context_window_tokens`. Throws LabelOverflow when a
/// single label cannot fit.
[[nodiscard]] std::size_t classify_chunk_size(std::size_t instruction_tokens,
                                              std::size_t max_row_tokens,
                                              std::size_t max_label_tokens,
                                              std::size_t context_window_tokens,
                                              std::size_t max_labels_per_call = 250);

/// Replaces the join node with id `join_id` by a Classify node.
[[nodiscard]] LogicalPlan apply_classify_rewrite(LogicalPlan const& plan, int join_id,
                                                 RewritePlan const& rewrite, Catalog const& catalog,
                                                 PlannerOptions const& options = {});

/// Placement, ordering and (when enabled) rewrite. The result is annotated.
[[nodiscard]] LogicalPlan optimize(LogicalPlan const& lowered, Catalog const& catalog,
                                   PlannerOptions const& options = {});

/// One node per line, two spaces of indent per depth, suffixed with
/// `(rows=<est>, ai_calls=<est>)`.
[[nodiscard]] std::string explain(LogicalPlan const& plan);

/// Estimate formatting used by EXPLAIN: two decimals, trailing zeros trimmed.
[[nodiscard]] std::string format_estimate(double v);

}  // namespace semql
