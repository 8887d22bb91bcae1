#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semql/core/box.hpp"
#include "semql/core/value.hpp"

namespace semql {

enum class AiKind { Complete, Filter, Classify, Agg, SummarizeAgg };

[[nodiscard]] std::string_view function_name(AiKind kind);

enum class ExprKind {
    Literal,
    Column,     // [table.]name
    Star,       // only inside COUNT(*)
    Compare,    // args[0] op args[1]; op in name
    Between,    // args[0] BETWEEN args[1] AND args[2]
    In,         // args[0] IN (args[1..])
    AiCall,
    FlIsImage,  // FL_IS_IMAGE(args[0])
    Count,      // COUNT(*) or COUNT(args[0])
};

struct AiCallExpr;

struct Expr {
    ExprKind kind = ExprKind::Literal;
    Value literal;
    std::string table;  // Column qualifier
    std::string name;   // Column name, or comparison operator
    bool negated = false;
    std::vector<Expr> args;
    Box<AiCallExpr> ai;

    static Expr make_literal(Value v);
    static Expr make_column(std::string table, std::string name);

    [[nodiscard]] bool is_aggregate() const;
    [[nodiscard]] bool contains_ai() const;

    friend bool operator==(Expr const&, Expr const&) = default;
};

struct AiCallExpr {
    AiKind kind = AiKind::Complete;
    std::string prompt;                 // template text with {k} placeholders
    bool prompt_object = false;         // written as PROMPT(...)
    std::vector<Expr> bindings;         // one per placeholder index
    std::vector<Expr> labels;           // Classify: literal list items, or one column ref
    bool labels_from_column = false;
    std::optional<std::string> instruction;  // Classify / Agg
    std::map<std::string, std::string> options;
    bool model_argument = false;        // AI_COMPLETE('model', 'instruction', input) form

    friend bool operator==(AiCallExpr const&, AiCallExpr const&) = default;
};

struct SelectItem {
    Expr expr;
    std::optional<std::string> alias;
    friend bool operator==(SelectItem const&, SelectItem const&) = default;
};

struct TableRef {
    std::string name;
    std::optional<std::string> alias;
    [[nodiscard]] std::string const& binding_name() const { return alias ? *alias : name; }
    friend bool operator==(TableRef const&, TableRef const&) = default;
};

struct JoinClause {
    TableRef table;
    std::vector<Expr> on;  // conjunction
    friend bool operator==(JoinClause const&, JoinClause const&) = default;
};

struct Ast {
    bool select_star = false;
    std::vector<SelectItem> items;
    std::optional<TableRef> from;
    std::optional<JoinClause> join;
    std::vector<Expr> where;  // conjunction
    std::vector<Expr> group_by;

    friend bool operator==(Ast const&, Ast const&) = default;
};

/// Every column reference inside `expr`, including AI call bindings and labels.
[[nodiscard]] std::vector<Expr const*> columns_of(Expr const& expr);

/// Canonical SQL text for an expression / statement. parse(print(ast)) == ast.
[[nodiscard]] std::string print(Expr const& expr);
[[nodiscard]] std::string print(Ast const& ast);

}  // namespace semql
