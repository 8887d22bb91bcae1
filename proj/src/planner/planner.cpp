#include "semql/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <regex>

#include "semql/core/errors.hpp"
#include "semql/core/prompt.hpp"

namespace semql {

std::string_view to_string(PredicateKind kind) {
    switch (kind) {
        case PredicateKind::Cheap: return "cheap";
        case PredicateKind::AiText: return "ai_text";
        case PredicateKind::AiMultimodal: return "ai_multimodal";
    }
    return "?";
}

std::string_view to_string(Placement p) {
    switch (p) {
        case Placement::Auto: return "auto";
        case Placement::PullUp: return "pullup";
        case Placement::PushDown: return "pushdown";
    }
    return "?";
}

double predicate_rank(double cost, double selectivity) {
    if (selectivity >= 1.0) return std::numeric_limits<double>::infinity();
    return cost / (1.0 - selectivity);
}

double predicate_rank(PredicateProfile const& p) {
    return predicate_rank(p.est_cost_per_row, p.est_selectivity);
}

bool rank_before(PredicateProfile const& a, PredicateProfile const& b) {
    double ra = predicate_rank(a), rb = predicate_rank(b);
    if (ra != rb) return ra < rb;
    bool ca = a.kind == PredicateKind::Cheap, cb = b.kind == PredicateKind::Cheap;
    if (ca != cb) return ca;
    return a.pred_id < b.pred_id;
}

namespace {

struct Env {
    Catalog const& catalog;
    PlannerOptions const& options;
    std::map<std::string, TablePtr> by_binding;  // lowercase binding -> table
};

Env make_env(PlanNode const& root, Catalog const& catalog, PlannerOptions const& options) {
    Env env{catalog, options, {}};
    visit(root, [&](PlanNode const& n) {
        if (n.kind == NodeKind::Scan && !n.table.empty()) {
            env.by_binding[to_lower(n.binding)] = catalog.get(n.table);
        }
    });
    return env;
}

ColumnStats const* column_stats(Env const& env, PlanSchema const& schema, Expr const& col) {
    if (col.kind != ExprKind::Column) return nullptr;
    auto const& pc = schema[resolve_column(schema, col.table, col.name)];
    auto it = env.by_binding.find(to_lower(pc.qualifier));
    if (it == env.by_binding.end()) return nullptr;
    auto idx = it->second->schema().find(pc.name);
    if (!idx) return nullptr;
    return &it->second->stats().columns[*idx];
}

std::size_t ai_call_count(Expr const& e) {
    std::size_t n = e.kind == ExprKind::AiCall ? 1 : 0;
    for (auto const& a : e.args) n += ai_call_count(a);
    if (e.kind == ExprKind::AiCall) {
        for (auto const& b : e.ai->bindings) n += ai_call_count(b);
    }
    return n;
}

void ai_cost(Env const& env, PlanSchema const& schema, Expr const& e, double& tokens,
             bool& multimodal) {
    if (e.kind == ExprKind::AiCall) {
        for (auto const& b : e.ai->bindings) {
            if (infer_kind(b, schema) == ValueKind::File) multimodal = true;
            if (auto const* cs = column_stats(env, schema, b)) {
                tokens += cs->avg_token_count;
            } else if (b.kind == ExprKind::Literal) {
                tokens += static_cast<double>(estimate_tokens(b.literal.render()));
            }
            ai_cost(env, schema, b, tokens, multimodal);
        }
    }
    for (auto const& a : e.args) ai_cost(env, schema, a, tokens, multimodal);
}

double default_selectivity(Env const& env, PlanSchema const& schema, Expr const& e) {
    auto const& opt = env.options;
    auto ndv = [&](Expr const& col) -> double {
        auto const* cs = column_stats(env, schema, col);
        return cs ? static_cast<double>(cs->distinct_count) : 0.0;
    };
    switch (e.kind) {
        case ExprKind::Literal:
            if (e.literal.kind() == ValueKind::Bool) return e.literal.as_bool() ? 1.0 : 0.0;
            return e.literal.is_null() ? 0.0 : 1.0;
        case ExprKind::AiCall: return opt.ai_default_selectivity;
        case ExprKind::In: {
            double d = ndv(e.args[0]);
            double s = d > 0 ? std::clamp(static_cast<double>(e.args.size() - 1) / d, 0.0, 1.0)
                             : opt.between_default_selectivity;
            return e.negated ? 1.0 - s : s;
        }
        case ExprKind::Between: {
            double s = opt.between_default_selectivity;
            return e.negated ? 1.0 - s : s;
        }
        case ExprKind::Compare: {
            bool col_lit = (e.args[0].kind == ExprKind::Column && e.args[1].kind == ExprKind::Literal) ||
                           (e.args[1].kind == ExprKind::Column && e.args[0].kind == ExprKind::Literal);
            if (col_lit && (e.name == "=" || e.name == "<>")) {
                double d = ndv(e.args[0].kind == ExprKind::Column ? e.args[0] : e.args[1]);
                double s = d > 0 ? 1.0 / d : opt.between_default_selectivity;
                return e.name == "=" ? s : 1.0 - s;
            }
            if (e.args[0].contains_ai() || e.args[1].contains_ai()) return opt.ai_default_selectivity;
            return opt.between_default_selectivity;
        }
        case ExprKind::FlIsImage: {
            auto const* cs = column_stats(env, schema, e.args[0]);
            if (!cs || cs->sample_values.empty()) return opt.between_default_selectivity;
            double images = 0;
            for (auto const& v : cs->sample_values) {
                if (v.kind() == ValueKind::File && fl_is_image(v.as_file())) ++images;
            }
            return images / static_cast<double>(cs->sample_values.size());
        }
        case ExprKind::Column: return 0.5;
        default: return 1.0;
    }
}

PredicateProfile profile(Env const& env, Predicate const& pred, PlanSchema const& schema) {
    PredicateProfile p;
    p.pred_id = pred.id;
    if (pred.is_ai()) {
        double tokens = 0.0;
        bool multimodal = false;
        ai_cost(env, schema, pred.expr, tokens, multimodal);
        tokens = std::max(tokens, 1.0);
        p.kind = multimodal ? PredicateKind::AiMultimodal : PredicateKind::AiText;
        p.est_cost_per_row = multimodal ? tokens * env.options.multimodal_factor : tokens;
    }
    auto text = pred.text();
    if (auto it = env.options.observed.find(text); it != env.options.observed.end()) {
        p.observed = it->second;
    }
    if (auto it = env.options.selectivity_hints.find(text);
        it != env.options.selectivity_hints.end()) {
        p.est_selectivity = std::clamp(it->second, 0.0, 1.0);
    } else if (p.observed && p.observed->rows_seen > 0) {
        p.est_selectivity = std::clamp(p.observed->rows_passed / p.observed->rows_seen, 0.0, 1.0);
        if (p.kind != PredicateKind::Cheap && p.observed->rows_seen > 0) {
            p.est_cost_per_row = std::max(1.0, p.observed->total_cost / p.observed->rows_seen);
        }
    } else {
        p.est_selectivity = default_selectivity(env, schema, pred.expr);
    }
    return p;
}

double key_ndv(Env const& env, PlanSchema const& schema, Expr const& key, double rows) {
    auto const* cs = column_stats(env, schema, key);
    double base = cs ? static_cast<double>(cs->distinct_count) : rows;
    return std::min(base, rows);
}

void annotate_node(Env const& env, PlanNode& n) {
    for (auto& c : n.children) annotate_node(env, c);
    switch (n.kind) {
        case NodeKind::Scan: {
            n.est_rows = n.table.empty() ? 1.0 : static_cast<double>(env.catalog.get(n.table)->row_count());
            n.est_ai_calls = 0.0;
            break;
        }
        case NodeKind::Filter: {
            auto const& child = n.children[0];
            auto p = profile(env, n.pred, child.schema);
            n.est_ai_calls = child.est_rows * static_cast<double>(ai_call_count(n.pred.expr));
            n.est_rows = child.est_rows * p.est_selectivity;
            break;
        }
        case NodeKind::Join: {
            auto const& l = n.children[0];
            auto const& r = n.children[1];
            double pairs = l.est_rows * r.est_rows;
            if (!n.equi_keys.empty() && pairs > 0) {
                auto const& [lk, rk] = n.equi_keys.front();
                double v = std::max({key_ndv(env, l.schema, lk, l.est_rows),
                                     key_ndv(env, r.schema, rk, r.est_rows), 1.0});
                pairs /= v;
            }
            n.est_ai_calls = 0.0;
            n.est_rows = pairs;
            if (n.join_pred) {
                auto p = profile(env, *n.join_pred, n.schema);
                n.est_ai_calls = pairs * static_cast<double>(ai_call_count(n.join_pred->expr));
                n.est_rows = pairs * p.est_selectivity;
            }
            break;
        }
        case NodeKind::Classify: {
            auto const& rows = n.children[0];
            auto const& labels = n.children[1];
            double distinct = key_ndv(env, labels.schema, n.classify.label_expr, labels.est_rows);
            double chunks = std::ceil(distinct / static_cast<double>(std::max<std::size_t>(n.classify.chunk_size, 1)));
            n.est_ai_calls = rows.est_rows * chunks;
            auto p = profile(env, n.pred, n.schema);
            n.est_rows = rows.est_rows * labels.est_rows * p.est_selectivity;
            break;
        }
        case NodeKind::Project: {
            auto const& child = n.children[0];
            n.est_rows = child.est_rows;
            double per_row = 0;
            for (auto const& e : n.exprs) per_row += static_cast<double>(ai_call_count(e));
            n.est_ai_calls = child.est_rows * per_row;
            break;
        }
        case NodeKind::Aggregate: {
            auto const& child = n.children[0];
            double groups = child.est_rows > 0 ? 1.0 : 0.0;
            if (!n.group_keys.empty()) {
                groups = 1.0;
                for (auto const& k : n.group_keys) {
                    auto const* cs = column_stats(env, child.schema, k);
                    groups *= cs ? std::max<double>(static_cast<double>(cs->distinct_count), 1.0)
                                 : child.est_rows;
                }
                groups = std::min(groups, child.est_rows);
            }
            double key_calls = 0, agg_calls = 0;
            for (auto const& k : n.group_keys) key_calls += static_cast<double>(ai_call_count(k));
            for (auto const& e : n.exprs) {
                if (e.is_aggregate() && e.kind == ExprKind::AiCall) agg_calls += 1;
            }
            n.est_rows = groups;
            n.est_ai_calls = child.est_rows * key_calls + groups * agg_calls;
            break;
        }
    }
}

struct Chain {
    PlanNode base;
    std::vector<Predicate> preds;  // bottom-up
};

Chain peel(PlanNode node) {
    Chain c;
    while (node.kind == NodeKind::Filter) {
        c.preds.push_back(node.pred);
        PlanNode child = std::move(node.children[0]);
        node = std::move(child);
    }
    std::reverse(c.preds.begin(), c.preds.end());
    c.base = std::move(node);
    return c;
}

PlanNode build_chain(PlanNode base, std::vector<Predicate> preds) {
    for (auto& p : preds) {
        PlanNode f;
        f.kind = NodeKind::Filter;
        f.schema = base.schema;
        f.pred = std::move(p);
        f.children.push_back(std::move(base));
        base = std::move(f);
    }
    return base;
}

std::vector<Predicate> ordered(Env const& env, std::vector<Predicate> preds, PlanSchema const& schema) {
    if (!env.options.reorder) {
        std::stable_sort(preds.begin(), preds.end(),
                         [](Predicate const& a, Predicate const& b) { return a.id < b.id; });
        return preds;
    }
    std::vector<PredicateProfile> profiles;
    for (auto const& p : preds) profiles.push_back(profile(env, p, schema));
    auto order = order_predicates(profiles);
    std::vector<Predicate> out;
    for (auto i : order) out.push_back(preds[i]);
    return out;
}

double total_calls(PlanNode const& n) {
    double t = n.est_ai_calls;
    for (auto const& c : n.children) t += total_calls(c);
    return t;
}

}  // namespace

std::vector<PredicateProfile> profile_predicates(LogicalPlan const& plan, Catalog const& catalog,
                                                 PlannerOptions const& options) {
    auto env = make_env(plan.root, catalog, options);
    std::vector<PredicateProfile> out;
    visit(plan.root, [&](PlanNode const& n) {
        if (n.kind == NodeKind::Filter) out.push_back(profile(env, n.pred, n.children[0].schema));
        if (n.kind == NodeKind::Join && n.join_pred) out.push_back(profile(env, *n.join_pred, n.schema));
    });
    std::sort(out.begin(), out.end(),
              [](auto const& a, auto const& b) { return a.pred_id < b.pred_id; });
    return out;
}

std::vector<std::size_t> order_predicates(std::vector<PredicateProfile> const& profiles) {
    std::vector<std::size_t> idx(profiles.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return rank_before(profiles[a], profiles[b]);
    });
    return idx;
}

void annotate(LogicalPlan& plan, Catalog const& catalog, PlannerOptions const& options) {
    auto env = make_env(plan.root, catalog, options);
    annotate_node(env, plan.root);
}

LogicalPlan place_ai_predicates(LogicalPlan const& input, Catalog const& catalog,
                                PlannerOptions const& options) {
    LogicalPlan plan = input;
    auto env = make_env(plan.root, catalog, options);
    auto& root = plan.root;
    bool canonical = (root.kind == NodeKind::Project || root.kind == NodeKind::Aggregate) &&
                     root.children.size() == 1;
    if (!canonical) {
        annotate_node(env, root);
        return plan;
    }

    auto above = peel(std::move(root.children[0]));
    root.children.clear();

    if (above.base.kind != NodeKind::Join) {
        auto schema = above.base.schema;
        root.children.push_back(build_chain(std::move(above.base), ordered(env, above.preds, schema)));
        annotate_node(env, root);
        renumber(plan);
        return plan;
    }

    PlanNode join = std::move(above.base);
    auto left = peel(std::move(join.children[0]));
    auto right = peel(std::move(join.children[1]));
    join.children.clear();

    struct Movable {
        Predicate pred;
        bool right_side;
    };
    std::vector<Movable> movable;
    std::vector<Predicate> left_fixed, right_fixed;
    for (auto& p : left.preds) {
        if (p.is_ai()) movable.push_back({p, false});
        else left_fixed.push_back(p);
    }
    for (auto& p : right.preds) {
        if (p.is_ai()) movable.push_back({p, true});
        else right_fixed.push_back(p);
    }

    auto build = [&](std::uint64_t pulled_mask) {
        auto lp = left_fixed, rp = right_fixed, ap = above.preds;
        for (std::size_t i = 0; i < movable.size(); ++i) {
            if (pulled_mask >> i & 1U) ap.push_back(movable[i].pred);
            else (movable[i].right_side ? rp : lp).push_back(movable[i].pred);
        }
        PlanNode j = join;
        j.children.push_back(build_chain(left.base, ordered(env, lp, left.base.schema)));
        j.children.push_back(build_chain(right.base, ordered(env, rp, right.base.schema)));
        auto schema = j.schema;
        PlanNode out = root;
        out.children.push_back(build_chain(std::move(j), ordered(env, ap, schema)));
        annotate_node(env, out);
        return out;
    };

    std::uint64_t all = movable.size() >= 64 ? ~0ULL : ((1ULL << movable.size()) - 1);
    PlanNode best;
    switch (options.placement) {
        case Placement::PushDown: best = build(0); break;
        case Placement::PullUp: best = build(all); break;
        case Placement::Auto: {
            if (movable.size() > 12) {
                // too many to enumerate: decide each predicate against the all-push plan
                std::uint64_t mask = 0;
                double base = total_calls(build(0));
                for (std::size_t i = 0; i < movable.size(); ++i) {
                    if (total_calls(build(1ULL << i)) < base) mask |= 1ULL << i;
                }
                best = build(mask);
                break;
            }
            double best_total = std::numeric_limits<double>::infinity();
            int best_pulled = 0;
            for (std::uint64_t mask = 0; mask <= all; ++mask) {
                auto candidate = build(mask);
                double t = total_calls(candidate);
                int pulled = __builtin_popcountll(mask);
                constexpr double kEps = 1e-9;
                if (t < best_total - kEps || (std::abs(t - best_total) <= kEps && pulled < best_pulled)) {
                    best_total = t;
                    best_pulled = pulled;
                    best = std::move(candidate);
                }
            }
            break;
        }
    }
    plan.root = std::move(best);
    renumber(plan);
    return plan;
}

RewriteAnswer HeuristicRewriteOracle::decide(RewriteQuestion const& q) {
    static const std::regex membership(
        R"(\b(is|are|was|were|mapped to|maps to|map to|belongs? to|falls? under|categor(y|ies|ized)|class(es|ified)?|labels?|topics?|about|type of|kind of|related to|tagged)\b)",
        std::regex::icase);
    auto qualifies = [&](RewriteSide const& side) {
        if (side.distinct_count > max_distinct || side.avg_token_count > max_avg_tokens) return false;
        auto placeholder = "{" + std::to_string(side.slot) + "}";
        auto pos = q.prompt.find(placeholder);
        if (pos == std::string::npos) return false;
        constexpr std::size_t kWindow = 48;
        auto start = pos > kWindow ? pos - kWindow : 0;
        auto before = q.prompt.substr(start, pos - start);
        return std::regex_search(before, membership);
    };
    bool l = qualifies(q.left), r = qualifies(q.right);
    RewriteAnswer a;
    if (!l && !r) return a;
    a.rewrite = true;
    if (l && r) {
        a.label_binding = q.left.distinct_count < q.right.distinct_count ? q.left.binding : q.right.binding;
    } else {
        a.label_binding = l ? q.left.binding : q.right.binding;
    }
    return a;
}

std::optional<RewritePlan> detect_classify_rewrite(PlanNode const& join, Catalog const& catalog,
                                                   RewriteOracle* oracle) {
    if (join.kind != NodeKind::Join || !join.equi_keys.empty() || !join.join_pred) return std::nullopt;
    auto const& e = join.join_pred->expr;
    if (e.kind != ExprKind::AiCall || e.ai->kind != AiKind::Filter || e.ai->bindings.size() != 2) {
        return std::nullopt;
    }
    auto const& lschema = join.children[0].schema;
    auto const& rschema = join.children[1].schema;
    auto side_of = [&](Expr const& b) -> int {
        if (b.kind != ExprKind::Column) return -1;
        int side = -1;
        for (std::size_t i = 0; i < lschema.size(); ++i) {
            if (iequals(lschema[i].name, b.name) && (b.table.empty() || iequals(lschema[i].qualifier, b.table))) side = 0;
        }
        for (std::size_t i = 0; i < rschema.size(); ++i) {
            if (iequals(rschema[i].name, b.name) && (b.table.empty() || iequals(rschema[i].qualifier, b.table))) {
                side = side == 0 ? -1 : 1;
            }
        }
        return side;
    };
    int s0 = side_of(e.ai->bindings[0]);
    int s1 = side_of(e.ai->bindings[1]);
    if (s0 < 0 || s1 < 0 || s0 == s1) return std::nullopt;

    auto describe = [&](PlanSchema const& schema, Expr const& b, std::size_t slot) {
        auto const& pc = schema[resolve_column(schema, b.table, b.name)];
        RewriteSide side;
        side.binding = pc.qualifier;
        side.column = pc.name;
        side.slot = slot;
        PlanNode const* scan = nullptr;
        for (auto const* sub : {&join.children[0], &join.children[1]}) {
            visit(*sub, [&](PlanNode const& n) {
                if (n.kind == NodeKind::Scan && iequals(n.binding, pc.qualifier)) scan = &n;
            });
        }
        if (scan && !scan->table.empty()) {
            auto table = catalog.get(scan->table);
            side.table = table->name();
            side.row_count = table->row_count();
            if (auto idx = table->schema().find(pc.name)) {
                auto const& cs = table->stats().columns[*idx];
                side.distinct_count = cs.distinct_count;
                side.avg_token_count = cs.avg_token_count;
                for (auto const& v : cs.sample_values) side.samples.push_back(v.render());
            }
        }
        return side;
    };
    std::size_t left_slot = s0 == 0 ? 0 : 1;
    std::size_t right_slot = 1 - left_slot;
    RewriteQuestion q;
    q.prompt = e.ai->prompt;
    q.left = describe(lschema, e.ai->bindings[left_slot], left_slot);
    q.right = describe(rschema, e.ai->bindings[right_slot], right_slot);

    HeuristicRewriteOracle heuristic;
    RewriteAnswer answer;
    try {
        answer = oracle ? oracle->decide(q) : heuristic.decide(q);
    } catch (OracleUnavailable const&) {
        answer = heuristic.decide(q);
    }
    if (!answer.rewrite) return std::nullopt;
    RewritePlan plan;
    if (iequals(answer.label_binding, q.left.binding)) plan.label_is_right = false;
    else if (iequals(answer.label_binding, q.right.binding)) plan.label_is_right = true;
    else return std::nullopt;
    plan.label_slot = plan.label_is_right ? right_slot : left_slot;
    plan.row_slot = 1 - plan.label_slot;
    return plan;
}

std::size_t classify_chunk_size(std::size_t instruction_tokens, std::size_t max_row_tokens,
                                std::size_t max_label_tokens, std::size_t context_window_tokens,
                                std::size_t max_labels_per_call) {
    max_label_tokens = std::max<std::size_t>(max_label_tokens, 1);
    std::size_t used = instruction_tokens + max_row_tokens;
    if (used >= context_window_tokens || context_window_tokens - used < max_label_tokens) {
        throw LabelOverflow("a single label does not fit the context window (" +
                            std::to_string(context_window_tokens) + " tokens)");
    }
    std::size_t fit = (context_window_tokens - used) / max_label_tokens;
    return std::max<std::size_t>(1, std::min(fit, max_labels_per_call));
}

LogicalPlan apply_classify_rewrite(LogicalPlan const& input, int join_id, RewritePlan const& rewrite,
                                   Catalog const& catalog, PlannerOptions const& options) {
    LogicalPlan plan = input;
    bool applied = false;
    visit(plan.root, [&](PlanNode& n) {
        if (applied || n.id != join_id || n.kind != NodeKind::Join) return;
        auto env = make_env(n, catalog, options);
        auto const& ai = *n.join_pred->expr.ai;
        std::size_t row_child = rewrite.label_is_right ? 0 : 1;
        std::size_t label_child = 1 - row_child;

        ClassifySpec spec;
        spec.prompt = ai.prompt;
        spec.row_slot = rewrite.row_slot;
        spec.label_slot = rewrite.label_slot;
        spec.row_expr = ai.bindings[rewrite.row_slot];
        spec.label_expr = ai.bindings[rewrite.label_slot];
        spec.options = ai.options;
        spec.row_side_left = row_child == 0;

        std::vector<std::string> blanks(2);
        auto instruction_tokens = estimate_tokens(render_template(spec.prompt, blanks));
        auto const* row_stats = column_stats(env, n.children[row_child].schema, spec.row_expr);
        auto const* label_stats = column_stats(env, n.children[label_child].schema, spec.label_expr);
        spec.chunk_size = classify_chunk_size(instruction_tokens, row_stats ? row_stats->max_token_count : 0,
                                              label_stats ? label_stats->max_token_count : 1,
                                              options.context_window_tokens, options.max_labels_per_call);

        PlanNode c;
        c.kind = NodeKind::Classify;
        c.id = n.id;
        c.schema = n.schema;
        c.pred = *n.join_pred;
        c.classify = std::move(spec);
        c.children.push_back(std::move(n.children[row_child]));
        c.children.push_back(std::move(n.children[label_child]));
        n = std::move(c);
        applied = true;
    });
    annotate(plan, catalog, options);
    return plan;
}

LogicalPlan optimize(LogicalPlan const& lowered, Catalog const& catalog, PlannerOptions const& options) {
    auto plan = place_ai_predicates(lowered, catalog, options);
    if (options.rewrite) {
        std::vector<std::pair<int, RewritePlan>> rewrites;
        visit(plan.root, [&](PlanNode const& n) {
            if (n.kind != NodeKind::Join) return;
            if (auto r = detect_classify_rewrite(n, catalog, options.oracle.get())) {
                rewrites.emplace_back(n.id, *r);
            }
        });
        for (auto const& [id, r] : rewrites) plan = apply_classify_rewrite(plan, id, r, catalog, options);
    }
    annotate(plan, catalog, options);
    renumber(plan);
    return plan;
}

std::string format_estimate(double v) {
    if (std::isinf(v)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

namespace {

std::string describe(PlanNode const& n) {
    auto join_list = [](std::vector<std::string> const& parts) {
        std::string s;
        for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? ", " : "") + parts[i];
        return s;
    };
    switch (n.kind) {
        case NodeKind::Scan:
            if (n.table.empty()) return "Scan <single row>";
            return iequals(n.table, n.binding) ? "Scan " + n.table : "Scan " + n.table + " AS " + n.binding;
        case NodeKind::Filter: return "Filter " + n.pred.text();
        case NodeKind::Join: {
            std::string s = n.equi_keys.empty() ? "Join cross" : "Join hash";
            std::vector<std::string> keys;
            for (auto const& [l, r] : n.equi_keys) keys.push_back(print(l) + " = " + print(r));
            if (!keys.empty()) s += " [" + join_list(keys) + "]";
            if (n.join_pred) s += " on " + n.join_pred->text();
            return s;
        }
        case NodeKind::Project: return "Project " + join_list(n.names);
        case NodeKind::Aggregate: {
            std::vector<std::string> keys;
            for (auto const& k : n.group_keys) keys.push_back(print(k));
            std::string s = "Aggregate";
            if (!keys.empty()) s += " group=[" + join_list(keys) + "]";
            return s + " " + join_list(n.names);
        }
        case NodeKind::Classify: {
            auto const& c = n.classify;
            return "Classify " + print(c.row_expr) + " labels=" + print(c.label_expr) +
                   " chunk=" + std::to_string(c.chunk_size) + " " + n.pred.text() +
                   " [rewritten: classify]";
        }
    }
    return "?";
}

void explain_node(PlanNode const& n, int depth, std::string& out) {
    out += std::string(static_cast<std::size_t>(depth) * 2, ' ') + describe(n) +
           " (rows=" + format_estimate(n.est_rows) + ", ai_calls=" + format_estimate(n.est_ai_calls) + ")\n";
    for (auto const& c : n.children) explain_node(c, depth + 1, out);
}

}  // namespace

std::string explain(LogicalPlan const& plan) {
    std::string out;
    explain_node(plan.root, 0, out);
    return out;
}

}  // namespace semql
