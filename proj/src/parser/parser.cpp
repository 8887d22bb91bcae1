#include "semql/parser/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>

#include "semql/core/errors.hpp"
#include "semql/core/prompt.hpp"
#include "semql/core/table.hpp"

namespace semql {

namespace {

enum class Tok { Ident, String, Int, Float, Symbol, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 1;
    int column = 1;
};

std::vector<Token> tokenize(std::string_view sql) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (sql[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < sql.size()) {
        char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            while (i < sql.size() && sql[i] != '\n') advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < sql.size() &&
                   (std::isalnum(static_cast<unsigned char>(sql[j])) || sql[j] == '_')) {
                ++j;
            }
            t.kind = Tok::Ident;
            t.text = std::string(sql.substr(i, j - i));
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < sql.size() &&
                    std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            std::size_t j = i;
            bool is_float = false;
            while (j < sql.size() && std::isdigit(static_cast<unsigned char>(sql[j]))) ++j;
            if (j < sql.size() && sql[j] == '.') {
                is_float = true;
                ++j;
                while (j < sql.size() && std::isdigit(static_cast<unsigned char>(sql[j]))) ++j;
            }
            if (j < sql.size() && (sql[j] == 'e' || sql[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < sql.size() && (sql[k] == '+' || sql[k] == '-')) ++k;
                if (k < sql.size() && std::isdigit(static_cast<unsigned char>(sql[k]))) {
                    is_float = true;
                    j = k;
                    while (j < sql.size() && std::isdigit(static_cast<unsigned char>(sql[j]))) ++j;
                }
            }
            t.kind = is_float ? Tok::Float : Tok::Int;
            t.text = std::string(sql.substr(i, j - i));
            advance(j - i);
        } else if (c == '\'') {
            std::string s;
            std::size_t j = i + 1;
            bool closed = false;
            while (j < sql.size()) {
                if (sql[j] == '\'') {
                    if (j + 1 < sql.size() && sql[j + 1] == '\'') {
                        s += '\'';
                        j += 2;
                        continue;
                    }
                    closed = true;
                    ++j;
                    break;
                }
                s += sql[j++];
            }
            if (!closed) throw SyntaxError("unterminated string literal", line, col, {"'"});
            t.kind = Tok::String;
            t.text = std::move(s);
            advance(j - i);
        } else {
            static constexpr std::string_view kTwo[] = {"<=", ">=", "<>", "!="};
            t.kind = Tok::Symbol;
            bool matched = false;
            for (auto op : kTwo) {
                if (sql.substr(i, 2) == op) {
                    t.text = std::string(op);
                    advance(2);
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                if (std::string_view("(),.*=<>[]{}:;-").find(c) == std::string_view::npos) {
                    throw SyntaxError(std::string("unexpected character '") + c + "'", line, col, {});
                }
                t.text = std::string(1, c);
                advance(1);
            }
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::End;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

const std::set<std::string> kReserved = {"SELECT", "FROM",  "WHERE", "JOIN",  "INNER", "ON",
                                         "AND",    "OR",    "NOT",   "BETWEEN", "IN",  "GROUP",
                                         "BY",     "AS",    "TRUE",  "FALSE", "NULL"};

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    return out;
}

enum class Context { Select, Where, On, GroupBy, Nested };

class Parser {
  public:
    explicit Parser(std::string_view sql) : tokens_(tokenize(sql)) {}

    Ast statement() {
        Ast ast;
        expect_keyword("SELECT");
        if (is_symbol("*")) {
            advance();
            ast.select_star = true;
        } else {
            do {
                SelectItem item;
                item.expr = predicate(Context::Select);
                if (accept_keyword("AS")) {
                    item.alias = identifier("alias");
                } else if (peek().kind == Tok::Ident && !is_reserved(peek())) {
                    item.alias = identifier("alias");
                }
                ast.items.push_back(std::move(item));
            } while (accept_symbol(","));
        }
        if (accept_keyword("FROM")) {
            ast.from = table_ref();
            if (accept_keyword("INNER")) expect_keyword("JOIN");
            else if (!accept_keyword("JOIN")) goto after_join;
            {
                JoinClause join;
                join.table = table_ref();
                expect_keyword("ON");
                join.on = conjunction(Context::On);
                ast.join = std::move(join);
            }
        }
    after_join:
        if (accept_keyword("WHERE")) ast.where = conjunction(Context::Where);
        if (accept_keyword("GROUP")) {
            expect_keyword("BY");
            do {
                ast.group_by.push_back(predicate(Context::GroupBy));
            } while (accept_symbol(","));
        }
        accept_symbol(";");
        if (peek().kind != Tok::End) {
            if (is_keyword("JOIN")) fail("only a single JOIN is supported", {});
            fail("unexpected token '" + peek().text + "'",
                 {"FROM", "JOIN", "WHERE", "GROUP", ";", "end of input"});
        }
        return ast;
    }

  private:
    Token const& peek(std::size_t ahead = 0) const {
        return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
    }
    Token const& advance() { return tokens_[std::min(pos_++, tokens_.size() - 1)]; }

    [[noreturn]] void fail(std::string const& message, std::vector<std::string> expected) const {
        auto const& t = peek();
        throw SyntaxError(message, t.line, t.column, std::move(expected));
    }

    static bool is_reserved(Token const& t) {
        return t.kind == Tok::Ident && kReserved.count(upper(t.text)) > 0;
    }
    bool is_keyword(std::string_view kw, std::size_t ahead = 0) const {
        auto const& t = peek(ahead);
        return t.kind == Tok::Ident && iequals(t.text, kw);
    }
    bool is_symbol(std::string_view s) const {
        return peek().kind == Tok::Symbol && peek().text == s;
    }
    bool accept_keyword(std::string_view kw) {
        if (!is_keyword(kw)) return false;
        advance();
        return true;
    }
    bool accept_symbol(std::string_view s) {
        if (!is_symbol(s)) return false;
        advance();
        return true;
    }
    void expect_keyword(std::string_view kw) {
        if (!accept_keyword(kw)) {
            fail("expected " + std::string(kw) + ", found '" + describe(peek()) + "'",
                 {std::string(kw)});
        }
    }
    void expect_symbol(std::string_view s) {
        if (!accept_symbol(s)) {
            fail("expected '" + std::string(s) + "', found '" + describe(peek()) + "'",
                 {std::string(s)});
        }
    }
    static std::string describe(Token const& t) {
        return t.kind == Tok::End ? std::string("end of input") : t.text;
    }
    std::string identifier(std::string const& what) {
        if (peek().kind != Tok::Ident || is_reserved(peek())) {
            fail("expected " + what + ", found '" + describe(peek()) + "'", {"identifier"});
        }
        return advance().text;
    }

    TableRef table_ref() {
        TableRef ref;
        ref.name = identifier("table name");
        if (accept_keyword("AS")) {
            ref.alias = identifier("table alias");
        } else if (peek().kind == Tok::Ident && !is_reserved(peek())) {
            ref.alias = identifier("table alias");
        }
        return ref;
    }

    std::vector<Expr> conjunction(Context ctx) {
        std::vector<Expr> out;
        do {
            out.push_back(predicate(ctx));
        } while (accept_keyword("AND"));
        if (is_keyword("OR")) {
            fail("OR is not supported; only AND-conjunctions of predicates", {"AND"});
        }
        return out;
    }

    Expr predicate(Context ctx) {
        Expr lhs = operand(ctx);
        bool negated = false;
        if (is_keyword("NOT") && (is_keyword("BETWEEN", 1) || is_keyword("IN", 1))) {
            advance();
            negated = true;
        }
        if (accept_keyword("BETWEEN")) {
            Expr e;
            e.kind = ExprKind::Between;
            e.negated = negated;
            e.args.push_back(std::move(lhs));
            e.args.push_back(operand(Context::Nested));
            expect_keyword("AND");
            e.args.push_back(operand(Context::Nested));
            return e;
        }
        if (accept_keyword("IN")) {
            Expr e;
            e.kind = ExprKind::In;
            e.negated = negated;
            e.args.push_back(std::move(lhs));
            expect_symbol("(");
            do {
                e.args.push_back(literal_operand());
            } while (accept_symbol(","));
            expect_symbol(")");
            return e;
        }
        static constexpr std::string_view kOps[] = {"=", "<>", "!=", "<", "<=", ">", ">="};
        if (peek().kind == Tok::Symbol) {
            for (auto op : kOps) {
                if (peek().text == op) {
                    advance();
                    Expr e;
                    e.kind = ExprKind::Compare;
                    e.name = op == "!=" ? "<>" : std::string(op);
                    e.args.push_back(std::move(lhs));
                    e.args.push_back(operand(Context::Nested));
                    return e;
                }
            }
        }
        return lhs;
    }

    Expr literal_operand() {
        auto e = operand(Context::Nested);
        if (e.kind != ExprKind::Literal) fail("IN lists accept literals only", {"literal"});
        return e;
    }

    Expr number(bool negative) {
        auto const& t = advance();
        if (t.kind == Tok::Int) {
            std::int64_t v = 0;
            auto text = (negative ? "-" : "") + t.text;
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc()) {
                throw SyntaxError("integer literal out of range", t.line, t.column, {});
            }
            return Expr::make_literal(Value::integer(v));
        }
        double d = std::strtod(t.text.c_str(), nullptr);
        return Expr::make_literal(Value::real(negative ? -d : d));
    }

    Expr operand(Context ctx) {
        auto const& t = peek();
        switch (t.kind) {
            case Tok::String: return Expr::make_literal(Value::text(advance().text));
            case Tok::Int:
            case Tok::Float: return number(false);
            case Tok::Symbol:
                if (t.text == "-" && (peek(1).kind == Tok::Int || peek(1).kind == Tok::Float)) {
                    advance();
                    return number(true);
                }
                if (t.text == "(") {
                    advance();
                    auto inner = predicate(ctx);
                    expect_symbol(")");
                    return inner;
                }
                fail("unexpected '" + t.text + "'", {"expression"});
            case Tok::End: fail("unexpected end of input", {"expression"});
            case Tok::Ident: break;
        }
        auto word = upper(t.text);
        if (word == "TRUE" || word == "FALSE") {
            advance();
            return Expr::make_literal(Value::boolean(word == "TRUE"));
        }
        if (word == "NULL") {
            advance();
            return Expr::make_literal(Value::null());
        }
        if (peek(1).kind == Tok::Symbol && peek(1).text == "(") return call(ctx);
        auto first = identifier("column");
        if (accept_symbol(".")) {
            auto second = identifier("column");
            return Expr::make_column(std::move(first), std::move(second));
        }
        return Expr::make_column("", std::move(first));
    }

    std::map<std::string, std::string> options_map() {
        std::map<std::string, std::string> out;
        expect_symbol("{");
        if (accept_symbol("}")) return out;
        do {
            if (peek().kind != Tok::String) fail("option keys must be string literals", {"string"});
            auto key = advance().text;
            expect_symbol(":");
            auto v = operand(Context::Nested);
            if (v.kind != ExprKind::Literal || v.literal.is_null()) {
                fail("option values must be literals", {"literal"});
            }
            out[key] = v.literal.render();
        } while (accept_symbol(","));
        expect_symbol("}");
        return out;
    }

    void trailing_options(AiCallExpr& ai) {
        if (accept_symbol(",")) {
            if (!is_symbol("{")) fail("expected options map", {"{"});
            for (auto& [k, v] : options_map()) ai.options[k] = v;
        }
    }

    // PROMPT('...', b0, b1, ...) or a bare string (0-binding template)
    void prompt_argument(AiCallExpr& ai) {
        if (is_keyword("PROMPT") && peek(1).text == "(") {
            auto const& at = peek();
            advance();
            advance();
            if (peek().kind != Tok::String) fail("PROMPT expects a template string", {"string"});
            ai.prompt = advance().text;
            ai.prompt_object = true;
            while (accept_symbol(",")) ai.bindings.push_back(operand(Context::Nested));
            expect_symbol(")");
            check_template(ai, at);
            return;
        }
        if (peek().kind != Tok::String) fail("expected PROMPT(...) or a string", {"PROMPT", "string"});
        auto const& at = peek();
        ai.prompt = advance().text;
        check_template(ai, at);
    }

    static void check_template(AiCallExpr const& ai, Token const& at) {
        std::vector<std::string> names(ai.bindings.size());
        try {
            PromptTemplate check(ai.prompt, names);
        } catch (ArityMismatch const& e) {
            throw SyntaxError(e.what(), at.line, at.column, {});
        }
    }

    Expr call(Context ctx) {
        auto const& name_tok = peek();
        auto fname = upper(name_tok.text);
        advance();
        expect_symbol("(");
        Expr e;

        auto require_select = [&](std::string const& fn) {
            if (ctx != Context::Select) {
                throw SyntaxError(fn + " is an aggregate and may only appear in the select list",
                                  name_tok.line, name_tok.column, {});
            }
        };

        if (fname == "COUNT") {
            require_select(fname);
            e.kind = ExprKind::Count;
            if (!accept_symbol("*")) e.args.push_back(operand(Context::Nested));
            expect_symbol(")");
            return e;
        }
        if (fname == "FL_IS_IMAGE") {
            e.kind = ExprKind::FlIsImage;
            e.args.push_back(operand(Context::Nested));
            expect_symbol(")");
            return e;
        }

        AiCallExpr ai;
        if (fname == "AI_FILTER" || fname == "AI_JOIN") {
            if (fname == "AI_JOIN" && ctx != Context::On) {
                throw SyntaxError("AI_JOIN may only appear in a JOIN ... ON clause", name_tok.line,
                                  name_tok.column, {});
            }
            if (ctx != Context::Where && ctx != Context::On) {
                throw SyntaxError("AI_FILTER may only appear in WHERE or ON", name_tok.line,
                                  name_tok.column, {});
            }
            ai.kind = AiKind::Filter;
            prompt_argument(ai);
            trailing_options(ai);
        } else if (fname == "AI_COMPLETE") {
            ai.kind = AiKind::Complete;
            if (peek().kind == Tok::String && peek(1).text == "," && peek(2).kind == Tok::String) {
                // AI_COMPLETE('model', 'instruction', input)
                ai.options["model"] = advance().text;
                advance();
                ai.instruction = advance().text;
                expect_symbol(",");
                ai.bindings.push_back(operand(Context::Nested));
                ai.prompt = *ai.instruction + " {0}";
                ai.model_argument = true;
            } else {
                prompt_argument(ai);
            }
            trailing_options(ai);
        } else if (fname == "AI_CLASSIFY") {
            ai.kind = AiKind::Classify;
            ai.prompt = "{0}";
            ai.bindings.push_back(operand(Context::Nested));
            expect_symbol(",");
            if (accept_symbol("[")) {
                if (!is_symbol("]")) {
                    do {
                        ai.labels.push_back(literal_operand());
                    } while (accept_symbol(","));
                }
                expect_symbol("]");
                if (ai.labels.empty()) fail("AI_CLASSIFY needs at least one label", {"label"});
            } else {
                auto col = operand(Context::Nested);
                if (col.kind != ExprKind::Column) {
                    fail("AI_CLASSIFY labels must be a list or a column", {"[", "column"});
                }
                ai.labels.push_back(std::move(col));
                ai.labels_from_column = true;
            }
            if (accept_symbol(",")) {
                if (peek().kind == Tok::String) {
                    ai.instruction = advance().text;
                    trailing_options(ai);
                } else if (is_symbol("{")) {
                    for (auto& [k, v] : options_map()) ai.options[k] = v;
                } else {
                    fail("expected instruction or options", {"string", "{"});
                }
            }
        } else if (fname == "AI_AGG" || fname == "AI_SUMMARIZE_AGG") {
            require_select(fname);
            ai.kind = fname == "AI_AGG" ? AiKind::Agg : AiKind::SummarizeAgg;
            ai.prompt = "{0}";
            ai.bindings.push_back(operand(Context::Nested));
            if (ai.kind == AiKind::Agg) {
                expect_symbol(",");
                if (peek().kind != Tok::String) fail("AI_AGG expects an instruction string", {"string"});
                ai.instruction = advance().text;
            }
            trailing_options(ai);
        } else {
            throw SyntaxError("unknown function '" + name_tok.text + "'", name_tok.line,
                              name_tok.column,
                              {"AI_COMPLETE", "AI_FILTER", "AI_JOIN", "AI_CLASSIFY", "AI_AGG",
                               "AI_SUMMARIZE_AGG", "FL_IS_IMAGE", "COUNT"});
        }
        expect_symbol(")");
        e.kind = ExprKind::AiCall;
        e.ai = std::move(ai);
        return e;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace

Ast parse(std::string_view sql) { return Parser(sql).statement(); }

}  // namespace semql
