#include "semql/parser/lower.hpp"

#include "semql/core/errors.hpp"

namespace semql {

namespace {

PlanNode make_scan(TableRef const& ref, Catalog const& catalog) {
    auto table = catalog.get(ref.name);
    PlanNode scan;
    scan.kind = NodeKind::Scan;
    scan.table = table->name();
    scan.binding = ref.binding_name();
    for (auto const& col : table->schema().columns()) {
        scan.schema.push_back({scan.binding, col.name, col.kind});
    }
    return scan;
}

PlanNode make_filter(PlanNode child, Predicate pred) {
    PlanNode f;
    f.kind = NodeKind::Filter;
    f.schema = child.schema;
    f.pred = std::move(pred);
    f.children.push_back(std::move(child));
    return f;
}

std::set<std::string> bindings_of(Expr const& e, PlanSchema const& schema) {
    std::set<std::string> out;
    for (auto const* col : columns_of(e)) {
        out.insert(to_lower(schema[resolve_column(schema, col->table, col->name)].qualifier));
    }
    return out;
}

void check_predicate(Expr const& e, PlanSchema const& schema) {
    if (e.kind == ExprKind::AiCall && e.ai->kind != AiKind::Filter) {
        throw TypeError(std::string(function_name(e.ai->kind)) +
                        " does not produce a boolean and cannot be used as a predicate");
    }
    auto kind = infer_kind(e, schema);
    if (kind != ValueKind::Bool && kind != ValueKind::Null) {
        throw TypeError("predicate '" + print(e) + "' is not boolean");
    }
}

void check_no_nested_aggregate(Expr const& e) {
    for (auto const& a : e.args) {
        if (a.is_aggregate()) throw TypeError("aggregate calls cannot be nested");
        check_no_nested_aggregate(a);
    }
    if (e.kind == ExprKind::AiCall) {
        for (auto const& b : e.ai->bindings) {
            if (b.is_aggregate()) throw TypeError("aggregate calls cannot be nested");
            check_no_nested_aggregate(b);
        }
    }
}

bool contains_aggregate(Expr const& e) {
    if (e.is_aggregate()) return true;
    for (auto const& a : e.args) {
        if (contains_aggregate(a)) return true;
    }
    return false;
}

bool contains_ai_filter(Expr const& e) {
    if (e.kind == ExprKind::AiCall) {
        if (e.ai->kind == AiKind::Filter) return true;
        for (auto const& b : e.ai->bindings) {
            if (contains_ai_filter(b)) return true;
        }
    }
    for (auto const& a : e.args) {
        if (contains_ai_filter(a)) return true;
    }
    return false;
}

std::string unique_name(std::vector<std::string> const& taken, std::string const& name,
                        std::string const& qualifier) {
    auto used = [&](std::string const& n) {
        for (auto const& t : taken) {
            if (iequals(t, n)) return true;
        }
        return false;
    };
    if (!used(name)) return name;
    if (!qualifier.empty() && !used(qualifier + "." + name)) return qualifier + "." + name;
    for (int k = 2;; ++k) {
        auto candidate = name + "_" + std::to_string(k);
        if (!used(candidate)) return candidate;
    }
}

PlanNode make_output(Ast const& ast, PlanNode input) {
    auto const& schema = input.schema;
    PlanNode out;
    out.schema.clear();

    if (ast.select_star) {
        if (!ast.group_by.empty()) throw TypeError("SELECT * cannot be combined with GROUP BY");
        out.kind = NodeKind::Project;
        for (auto const& col : schema) {
            auto name = unique_name(out.names, col.name, col.qualifier);
            out.exprs.push_back(Expr::make_column(col.qualifier, col.name));
            out.names.push_back(name);
            out.schema.push_back({"", name, col.kind});
        }
        out.children.push_back(std::move(input));
        return out;
    }

    bool aggregate = !ast.group_by.empty();
    for (auto const& item : ast.items) {
        if (contains_ai_filter(item.expr)) throw TypeError("AI_FILTER is only allowed in WHERE or ON");
        check_no_nested_aggregate(item.expr);
        if (item.expr.is_aggregate()) aggregate = true;
        else if (contains_aggregate(item.expr)) {
            throw TypeError("aggregate calls must be top-level select items");
        }
    }

    for (auto const& item : ast.items) {
        auto kind = infer_kind(item.expr, schema);
        auto name = unique_name(out.names, item.alias ? *item.alias : default_column_name(item.expr), "");
        out.exprs.push_back(item.expr);
        out.names.push_back(name);
        out.schema.push_back({"", name, kind});
    }

    if (!aggregate) {
        out.kind = NodeKind::Project;
        out.children.push_back(std::move(input));
        return out;
    }

    out.kind = NodeKind::Aggregate;
    for (auto const& g : ast.group_by) {
        Expr key = g;
        if (g.kind == ExprKind::Column && g.table.empty()) {
            bool in_input = false;
            for (auto const& col : schema) in_input = in_input || iequals(col.name, g.name);
            if (!in_input) {
                for (auto const& item : ast.items) {
                    if (item.alias && iequals(*item.alias, g.name)) key = item.expr;
                }
            }
        }
        if (contains_ai_filter(key)) throw TypeError("AI_FILTER is only allowed in WHERE or ON");
        if (contains_aggregate(key)) throw TypeError("GROUP BY cannot reference an aggregate");
        (void)infer_kind(key, schema);
        out.group_keys.push_back(std::move(key));
    }
    if (ast.group_by.empty()) {
        // a bare column next to an aggregate groups by that column
        for (auto const& item : ast.items) {
            if (!item.expr.is_aggregate()) out.group_keys.push_back(item.expr);
        }
    }
    for (auto const& item : ast.items) {
        if (item.expr.is_aggregate() || item.expr.kind == ExprKind::Literal) continue;
        bool grouped = false;
        for (auto const& k : out.group_keys) grouped = grouped || k == item.expr;
        if (!grouped) {
            throw TypeError("select item '" + print(item.expr) +
                            "' must appear in GROUP BY or be an aggregate");
        }
    }
    out.children.push_back(std::move(input));
    return out;
}

}  // namespace

LogicalPlan lower(Ast const& ast, Catalog const& catalog) {
    PlanNode left;
    std::optional<PlanNode> right;
    if (ast.from) {
        left = make_scan(*ast.from, catalog);
    } else {
        left.kind = NodeKind::Scan;
    }
    if (ast.join) {
        right = make_scan(ast.join->table, catalog);
        if (iequals(right->binding, left.binding)) {
            throw NameError("table binding '" + left.binding + "' used twice; add an alias");
        }
    }

    PlanSchema combined = left.schema;
    if (right) combined.insert(combined.end(), right->schema.begin(), right->schema.end());
    auto left_binding = to_lower(left.binding);
    auto right_binding = right ? to_lower(right->binding) : std::string();

    std::vector<Expr> conjuncts;
    if (ast.join) conjuncts = ast.join->on;
    conjuncts.insert(conjuncts.end(), ast.where.begin(), ast.where.end());

    std::vector<Predicate> left_preds, right_preds, residual;
    std::vector<std::pair<Expr, Expr>> equi_keys;
    std::optional<Predicate> join_pred;
    int next_id = 1;
    for (auto& c : conjuncts) {
        check_predicate(c, combined);
        Predicate p;
        p.id = next_id++;
        p.bindings = bindings_of(c, combined);
        p.expr = std::move(c);
        bool two_sided = p.bindings.size() == 2;
        if (!two_sided) {
            bool on_right = right && p.bindings.count(right_binding) > 0;
            (on_right ? right_preds : left_preds).push_back(std::move(p));
            continue;
        }
        auto const& e = p.expr;
        if (e.kind == ExprKind::Compare && e.name == "=" && e.args[0].kind == ExprKind::Column &&
            e.args[1].kind == ExprKind::Column) {
            auto side0 = to_lower(
                combined[resolve_column(combined, e.args[0].table, e.args[0].name)].qualifier);
            if (side0 == left_binding) equi_keys.emplace_back(e.args[0], e.args[1]);
            else equi_keys.emplace_back(e.args[1], e.args[0]);
            continue;
        }
        if (p.is_ai() && !join_pred) {
            join_pred = std::move(p);
            continue;
        }
        residual.push_back(std::move(p));
    }

    for (auto& p : left_preds) left = make_filter(std::move(left), std::move(p));
    PlanNode input = std::move(left);
    if (right) {
        for (auto& p : right_preds) right = make_filter(std::move(*right), std::move(p));
        PlanNode join;
        join.kind = NodeKind::Join;
        join.schema = combined;
        join.equi_keys = std::move(equi_keys);
        join.join_pred = std::move(join_pred);
        join.children.push_back(std::move(input));
        join.children.push_back(std::move(*right));
        input = std::move(join);
    }
    for (auto& p : residual) input = make_filter(std::move(input), std::move(p));

    LogicalPlan plan;
    plan.root = make_output(ast, std::move(input));
    renumber(plan);
    return plan;
}

}  // namespace semql
