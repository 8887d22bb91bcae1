#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "semql/parser/ast.hpp"

namespace semql {

struct PlanColumn {
    std::string qualifier;  // table binding name; empty for computed columns
    std::string name;
    ValueKind kind = ValueKind::Text;
    friend bool operator==(PlanColumn const&, PlanColumn const&) = default;
};

using PlanSchema = std::vector<PlanColumn>;

/// Index of the column an expression refers to. Unqualified names must be
/// unambiguous. Throws NameError.
[[nodiscard]] std::size_t resolve_column(PlanSchema const& schema, std::string_view qualifier,
                                         std::string_view name);

/// Result kind of `expr` evaluated over rows of `schema`. Throws NameError
/// for unresolved columns and TypeError for ill-typed expressions.
[[nodiscard]] ValueKind infer_kind(Expr const& expr, PlanSchema const& schema);

/// Output column name for a select item without an alias.
[[nodiscard]] std::string default_column_name(Expr const& expr);

/// One WHERE/ON conjunct.
struct Predicate {
    int id = 0;
    Expr expr;
    std::set<std::string> bindings;  // lowercase table bindings referenced

    [[nodiscard]] bool is_ai() const { return expr.contains_ai(); }
    [[nodiscard]] std::string text() const { return print(expr); }
    friend bool operator==(Predicate const&, Predicate const&) = default;
};

/// Semantic join replaced by per-row multi-label classification.
struct ClassifySpec {
    std::string prompt;          // original two-binding template
    std::size_t row_slot = 0;    // placeholder index bound to the row side
    std::size_t label_slot = 1;  // placeholder index bound to the label side
    Expr row_expr;
    Expr label_expr;
    std::map<std::string, std::string> options;
    std::size_t chunk_size = 1;
    bool row_side_left = true;  // output keeps the original join's column order
    friend bool operator==(ClassifySpec const&, ClassifySpec const&) = default;
};

enum class NodeKind { Scan, Filter, Join, Project, Classify, Aggregate };

[[nodiscard]] std::string_view to_string(NodeKind kind);

struct PlanNode {
    NodeKind kind = NodeKind::Scan;
    int id = 0;
    std::vector<PlanNode> children;
    PlanSchema schema;

    // Scan. An empty table name scans a single empty row (SELECT without FROM).
    std::string table;
    std::string binding;

    // Filter
    Predicate pred;

    // Join: equi_keys pair a left-side expression with a right-side one.
    std::vector<std::pair<Expr, Expr>> equi_keys;
    std::optional<Predicate> join_pred;

    // Project / Aggregate
    std::vector<Expr> exprs;
    std::vector<std::string> names;
    std::vector<Expr> group_keys;

    // Classify: children[0] is the row side, children[1] the label side.
    ClassifySpec classify;

    double est_rows = 0.0;
    double est_ai_calls = 0.0;

    friend bool operator==(PlanNode const&, PlanNode const&) = default;
};

struct LogicalPlan {
    PlanNode root;

    [[nodiscard]] double total_ai_calls() const;
    friend bool operator==(LogicalPlan const&, LogicalPlan const&) = default;
};

/// Pre-order traversal helpers.
template <typename F>
void visit(PlanNode const& node, F&& f) {
    f(node);
    for (auto const& c : node.children) visit(c, f);
}

template <typename F>
void visit(PlanNode& node, F&& f) {
    f(node);
    for (auto& c : node.children) visit(c, f);
}

/// Renumbers node ids in pre-order starting at 1.
void renumber(LogicalPlan& plan);

}  // namespace semql
