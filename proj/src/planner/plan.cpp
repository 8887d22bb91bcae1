#include "semql/planner/plan.hpp"

#include "semql/core/errors.hpp"
#include "semql/core/table.hpp"

namespace semql {

std::size_t resolve_column(PlanSchema const& schema, std::string_view qualifier,
                           std::string_view name) {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (!iequals(schema[i].name, name)) continue;
        if (!qualifier.empty() && !iequals(schema[i].qualifier, qualifier)) continue;
        if (found) {
            throw NameError("ambiguous column '" + std::string(name) + "'; qualify it with a table");
        }
        found = i;
    }
    if (!found) {
        auto full = qualifier.empty() ? std::string(name)
                                      : std::string(qualifier) + "." + std::string(name);
        throw NameError("unknown column '" + full + "'");
    }
    return *found;
}

namespace {

void require_kind(ValueKind actual, ValueKind wanted, std::string const& what) {
    if (actual != wanted && actual != ValueKind::Null) {
        throw TypeError(what + " expects " + std::string(to_string(wanted)) + ", got " +
                        std::string(to_string(actual)));
    }
}

void require_comparable(ValueKind a, ValueKind b) {
    if (a != b && a != ValueKind::Null && b != ValueKind::Null) {
        throw TypeError("cannot compare " + std::string(to_string(a)) + " with " +
                        std::string(to_string(b)));
    }
}

}  // namespace

ValueKind infer_kind(Expr const& e, PlanSchema const& schema) {
    switch (e.kind) {
        case ExprKind::Literal: return e.literal.kind();
        case ExprKind::Column: return schema[resolve_column(schema, e.table, e.name)].kind;
        case ExprKind::Star: return ValueKind::Null;
        case ExprKind::Compare:
            require_comparable(infer_kind(e.args[0], schema), infer_kind(e.args[1], schema));
            return ValueKind::Bool;
        case ExprKind::Between:
        case ExprKind::In: {
            auto k = infer_kind(e.args[0], schema);
            for (std::size_t i = 1; i < e.args.size(); ++i) {
                require_comparable(k, infer_kind(e.args[i], schema));
            }
            return ValueKind::Bool;
        }
        case ExprKind::FlIsImage:
            require_kind(infer_kind(e.args[0], schema), ValueKind::File, "FL_IS_IMAGE");
            return ValueKind::Bool;
        case ExprKind::Count:
            for (auto const& a : e.args) (void)infer_kind(a, schema);
            return ValueKind::Int;
        case ExprKind::AiCall:
            for (auto const& b : e.ai->bindings) (void)infer_kind(b, schema);
            for (auto const& l : e.ai->labels) (void)infer_kind(l, schema);
            return e.ai->kind == AiKind::Filter ? ValueKind::Bool : ValueKind::Text;
    }
    return ValueKind::Null;
}

std::string default_column_name(Expr const& e) {
    if (e.kind == ExprKind::Column) return e.name;
    return print(e);
}

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Scan: return "Scan";
        case NodeKind::Filter: return "Filter";
        case NodeKind::Join: return "Join";
        case NodeKind::Project: return "Project";
        case NodeKind::Classify: return "Classify";
        case NodeKind::Aggregate: return "Aggregate";
    }
    return "?";
}

double LogicalPlan::total_ai_calls() const {
    double total = 0.0;
    visit(root, [&](PlanNode const& n) { total += n.est_ai_calls; });
    return total;
}

void renumber(LogicalPlan& plan) {
    int next = 1;
    visit(plan.root, [&](PlanNode& n) { n.id = next++; });
}

}  // namespace semql
