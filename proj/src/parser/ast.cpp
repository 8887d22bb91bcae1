#include "semql/parser/ast.hpp"

namespace semql {

std::string_view function_name(AiKind kind) {
    switch (kind) {
        case AiKind::Complete: return "AI_COMPLETE";
        case AiKind::Filter: return "AI_FILTER";
        case AiKind::Classify: return "AI_CLASSIFY";
        case AiKind::Agg: return "AI_AGG";
        case AiKind::SummarizeAgg: return "AI_SUMMARIZE_AGG";
    }
    return "?";
}

Expr Expr::make_literal(Value v) {
    Expr e;
    e.kind = ExprKind::Literal;
    e.literal = std::move(v);
    return e;
}

Expr Expr::make_column(std::string table, std::string name) {
    Expr e;
    e.kind = ExprKind::Column;
    e.table = std::move(table);
    e.name = std::move(name);
    return e;
}

bool Expr::is_aggregate() const {
    if (kind == ExprKind::Count) return true;
    return kind == ExprKind::AiCall &&
           (ai->kind == AiKind::Agg || ai->kind == AiKind::SummarizeAgg);
}

bool Expr::contains_ai() const {
    if (kind == ExprKind::AiCall) return true;
    for (auto const& a : args) {
        if (a.contains_ai()) return true;
    }
    return false;
}

namespace {

void collect_columns(Expr const& e, std::vector<Expr const*>& out) {
    if (e.kind == ExprKind::Column) out.push_back(&e);
    for (auto const& a : e.args) collect_columns(a, out);
    if (e.kind == ExprKind::AiCall) {
        for (auto const& b : e.ai->bindings) collect_columns(b, out);
        for (auto const& l : e.ai->labels) collect_columns(l, out);
    }
}

}  // namespace

std::vector<Expr const*> columns_of(Expr const& expr) {
    std::vector<Expr const*> out;
    collect_columns(expr, out);
    return out;
}

namespace {

std::string quote(std::string_view s) { return Value::text(std::string(s)).to_sql(); }

std::string print_operand(Expr const& e) {
    bool wrap = e.kind == ExprKind::Compare || e.kind == ExprKind::Between ||
                e.kind == ExprKind::In;
    return wrap ? "(" + print(e) + ")" : print(e);
}

std::string print_options(std::map<std::string, std::string> const& options,
                          std::string_view skip = {}) {
    std::string out;
    for (auto const& [k, v] : options) {
        if (k == skip) continue;
        out += out.empty() ? "{" : ", ";
        out += quote(k) + ": " + quote(v);
    }
    return out.empty() ? out : ", " + out + "}";
}

std::string print_prompt(AiCallExpr const& ai) {
    if (!ai.prompt_object) return quote(ai.prompt);
    std::string out = "PROMPT(" + quote(ai.prompt);
    for (auto const& b : ai.bindings) out += ", " + print(b);
    return out + ")";
}

std::string print_ai(AiCallExpr const& ai) {
    std::string out(function_name(ai.kind));
    out += "(";
    switch (ai.kind) {
        case AiKind::Filter:
            out += print_prompt(ai) + print_options(ai.options);
            break;
        case AiKind::Complete:
            if (ai.model_argument) {
                auto model = ai.options.count("model") ? ai.options.at("model") : "";
                out += quote(model) + ", " + quote(ai.instruction.value_or("")) + ", " +
                       print(ai.bindings.at(0)) + print_options(ai.options, "model");
            } else {
                out += print_prompt(ai) + print_options(ai.options);
            }
            break;
        case AiKind::Classify:
            out += print(ai.bindings.at(0)) + ", ";
            if (ai.labels_from_column) {
                out += print(ai.labels.at(0));
            } else {
                out += "[";
                for (std::size_t i = 0; i < ai.labels.size(); ++i) {
                    out += (i ? ", " : "") + print(ai.labels[i]);
                }
                out += "]";
            }
            if (ai.instruction) out += ", " + quote(*ai.instruction);
            out += print_options(ai.options);
            break;
        case AiKind::Agg:
            out += print(ai.bindings.at(0)) + ", " + quote(ai.instruction.value_or("")) +
                   print_options(ai.options);
            break;
        case AiKind::SummarizeAgg:
            out += print(ai.bindings.at(0)) + print_options(ai.options);
            break;
    }
    return out + ")";
}

}  // namespace

std::string print(Expr const& e) {
    switch (e.kind) {
        case ExprKind::Literal: return e.literal.to_sql();
        case ExprKind::Column: return e.table.empty() ? e.name : e.table + "." + e.name;
        case ExprKind::Star: return "*";
        case ExprKind::Compare:
            return print_operand(e.args.at(0)) + " " + e.name + " " + print_operand(e.args.at(1));
        case ExprKind::Between:
            return print_operand(e.args.at(0)) + (e.negated ? " NOT BETWEEN " : " BETWEEN ") +
                   print_operand(e.args.at(1)) + " AND " + print_operand(e.args.at(2));
        case ExprKind::In: {
            std::string out = print_operand(e.args.at(0)) + (e.negated ? " NOT IN (" : " IN (");
            for (std::size_t i = 1; i < e.args.size(); ++i) {
                out += (i > 1 ? ", " : "") + print(e.args[i]);
            }
            return out + ")";
        }
        case ExprKind::AiCall: return print_ai(*e.ai);
        case ExprKind::FlIsImage: return "FL_IS_IMAGE(" + print(e.args.at(0)) + ")";
        case ExprKind::Count:
            return e.args.empty() ? "COUNT(*)" : "COUNT(" + print(e.args[0]) + ")";
    }
    return "";
}

std::string print(Ast const& ast) {
    std::string out = "SELECT ";
    if (ast.select_star) {
        out += "*";
    } else {
        for (std::size_t i = 0; i < ast.items.size(); ++i) {
            if (i) out += ", ";
            out += print(ast.items[i].expr);
            if (ast.items[i].alias) out += " AS " + *ast.items[i].alias;
        }
    }
    auto table = [](TableRef const& t) { return t.alias ? t.name + " AS " + *t.alias : t.name; };
    auto conj = [](std::vector<Expr> const& es) {
        std::string s;
        for (std::size_t i = 0; i < es.size(); ++i) s += (i ? " AND " : "") + print(es[i]);
        return s;
    };
    if (ast.from) out += " FROM " + table(*ast.from);
    if (ast.join) out += " JOIN " + table(ast.join->table) + " ON " + conj(ast.join->on);
    if (!ast.where.empty()) out += " WHERE " + conj(ast.where);
    if (!ast.group_by.empty()) {
        out += " GROUP BY ";
        for (std::size_t i = 0; i < ast.group_by.size(); ++i) {
            out += (i ? ", " : "") + print(ast.group_by[i]);
        }
    }
    return out;
}

}  // namespace semql
