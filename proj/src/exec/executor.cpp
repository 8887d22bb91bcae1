#include "semql/exec/executor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "semql/agg/agg.hpp"
#include "semql/core/prompt.hpp"
#include "semql/exec/reorder.hpp"
#include "semql/models/synthetic.hpp"

namespace semql {

double PredicateStats::observed_selectivity() const {
    return rows_seen == 0 ? 0.0 : static_cast<double>(rows_passed) / static_cast<double>(rows_seen);
}

double PredicateStats::mean_cost() const {
    return rows_seen == 0 ? 0.0 : static_cast<double>(cost_units) / static_cast<double>(rows_seen);
}

std::uint64_t ExecStats::total_ai_calls() const {
    std::uint64_t total = 0;
    for (auto const& n : nodes) total += n.ai_calls;
    return total;
}

nlohmann::json ExecStats::to_json(bool include_timing) const {
    using nlohmann::json;
    json j;
    j["nodes"] = json::array();
    for (auto const& n : nodes) {
        json node = {{"id", n.id},
                     {"kind", n.kind},
                     {"rows_in", n.rows_in},
                     {"rows_out", n.rows_out},
                     {"ai_calls", n.ai_calls},
                     {"prompt_tokens", n.prompt_tokens}};
        if (include_timing) node["wall_ms"] = n.wall_ms;
        j["nodes"].push_back(std::move(node));
    }
    j["predicates"] = json::array();
    for (auto const& p : predicates) {
        j["predicates"].push_back({{"id", p.id},
                                   {"text", p.text},
                                   {"rows_seen", p.rows_seen},
                                   {"rows_passed", p.rows_passed},
                                   {"ai_calls", p.ai_calls},
                                   {"observed_selectivity", p.observed_selectivity()},
                                   {"mean_cost", p.mean_cost()}});
    }
    j["cascade"] = json::array();
    for (auto const& c : cascades) {
        json by_source = json::object();
        for (auto const& [source, count] : c.summary.by_source) by_source[std::string(to_string(source))] = count;
        j["cascade"].push_back({{"predicate", c.pred_id},
                                {"rows", c.summary.rows},
                                {"proxy_calls", c.summary.proxy_calls},
                                {"oracle_calls", c.summary.oracle_calls},
                                {"proxy_errors", c.summary.proxy_errors},
                                {"oracle_failures", c.summary.oracle_failures},
                                {"sampled", c.summary.sampled},
                                {"tau_low", c.summary.tau_low},
                                {"tau_high", c.summary.tau_high},
                                {"by_source", by_source}});
    }
    j["counters"] = {{"truncations", truncations},
                     {"label_hallucinations", label_hallucinations},
                     {"reorders", reorders}};
    j["providers"] = json::object();
    for (auto const& [model, c] : models) {
        j["providers"][model] = {{"calls", c.call_count},
                                 {"prompt_tokens", c.prompt_tokens},
                                 {"output_tokens", c.output_tokens}};
    }
    j["total_ai_calls"] = total_ai_calls();
    return j;
}

ParallelFor worker_pool_for(std::size_t workers) {
    return [workers](std::size_t n, std::function<void(std::size_t)> const& fn) {
        if (n == 0) return;
        std::size_t w = std::min(std::max<std::size_t>(workers, 1), n);
        if (w == 1) {
            for (std::size_t i = 0; i < n; ++i) fn(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr error;
        std::mutex mu;
        auto body = [&] {
            while (!failed.load()) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!error) error = std::current_exception();
                    failed = true;
                }
            }
        };
        std::vector<std::thread> threads;
        threads.reserve(w - 1);
        for (std::size_t t = 1; t < w; ++t) threads.emplace_back(body);
        body();
        for (auto& t : threads) t.join();
        if (error) std::rethrow_exception(error);
    };
}

std::string classify_prompt(std::string const& input, std::optional<std::string> const& instruction) {
    std::string out;
    if (instruction) out = *instruction + "\n";
    out += input;
    out += "\nLabel: ";
    out += kLabelMarker;
    return out;
}

namespace {

using Key = std::vector<std::uint64_t>;

struct XRow {
    Key key;
    Row values;
};

using Rows = std::vector<XRow>;

struct Meter {
    std::atomic<std::uint64_t> rows_in{0};
    std::atomic<std::uint64_t> rows_out{0};
    std::atomic<std::uint64_t> calls{0};
    std::atomic<std::uint64_t> tokens{0};
    double wall_ms = 0.0;
};

struct PredMeter {
    std::atomic<std::uint64_t> seen{0};
    std::atomic<std::uint64_t> passed{0};
    std::atomic<std::uint64_t> calls{0};
    std::atomic<std::uint64_t> cost{0};
};

struct Scope {
    Meter& node;
    PredMeter* pred = nullptr;
    std::uint64_t ai_cost = 0;
};

struct ValuesHash {
    std::size_t operator()(std::vector<Value> const& values) const {
        std::size_t h = 1469598103934665603ULL;
        for (auto const& v : values) h = (h ^ v.hash()) * 1099511628211ULL;
        return h;
    }
};

template <typename F>
void each_ai(Expr const& e, F&& f) {
    if (e.kind == ExprKind::AiCall) {
        f(*e.ai);
        for (auto const& b : e.ai->bindings) each_ai(b, f);
    }
    for (auto const& a : e.args) each_ai(a, f);
}

Key concat(Key const& a, Key const& b) {
    Key out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

Row concat(Row const& a, Row const& b) {
    Row out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

std::optional<std::string> option(std::map<std::string, std::string> const& options, std::string const& key) {
    auto it = options.find(key);
    if (it == options.end()) return std::nullopt;
    return it->second;
}

double parse_double(std::string const& key, std::string const& text) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (std::exception const&) {
    }
    throw TypeError("option '" + key + "' expects a number, got '" + text + "'");
}

std::vector<std::vector<std::string>> chunked(std::vector<std::string> const& labels, std::size_t size) {
    std::vector<std::vector<std::string>> out;
    size = std::max<std::size_t>(size, 1);
    for (std::size_t i = 0; i < labels.size(); i += size) {
        auto end = std::min(labels.size(), i + size);
        out.emplace_back(labels.begin() + static_cast<std::ptrdiff_t>(i),
                         labels.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

class Engine;

class Evaluator {
  public:
    Evaluator(Engine& engine, PlanSchema const& schema) : engine_(engine), schema_(schema) {}

    void bind(Expr const& e) {
        for (auto const* c : columns_of(e)) columns_[c] = resolve_column(schema_, c->table, c->name);
    }

    void set_labels(AiCallExpr const* ai, std::vector<std::string> labels) { labels_[ai] = std::move(labels); }

    [[nodiscard]] std::size_t column(Expr const& e) const {
        auto it = columns_.find(&e);
        return it != columns_.end() ? it->second : resolve_column(schema_, e.table, e.name);
    }

    Value eval(Expr const& e, Row const& row, Scope& scope) const;

    bool test(Expr const& e, Row const& row, Scope& scope) const {
        auto v = eval(e, row, scope);
        return v.kind() == ValueKind::Bool && v.as_bool();
    }

  private:
    Value eval_ai(AiCallExpr const& ai, Row const& row, Scope& scope) const;

    Engine& engine_;
    PlanSchema const& schema_;
    std::unordered_map<Expr const*, std::size_t> columns_;
    std::map<AiCallExpr const*, std::vector<std::string>> labels_;
};

class Engine {
  public:
    Engine(LogicalPlan const& plan, Catalog const& catalog, ProviderRegistry const& providers,
           ExecOptions const& options)
        : plan_(plan),
          catalog_(catalog),
          providers_(providers),
          options_(options),
          pfor_(worker_pool_for(options.workers)),
          before_(providers.stats()->snapshot()),
          hallucinations_before_(providers.stats()->label_hallucinations()) {
        visit(plan.root, [&](PlanNode const& n) {
            meters_[n.id] = std::make_unique<Meter>();
            if (n.kind == NodeKind::Filter || n.kind == NodeKind::Classify) add_pred(n.pred);
            if (n.kind == NodeKind::Join && n.join_pred) add_pred(*n.join_pred);
        });
        for (auto const& p : profile_predicates(plan, catalog, options.planner)) profiles_[p.pred_id] = p;
    }

    Rows run(PlanNode const& n) {
        switch (n.kind) {
            case NodeKind::Scan: return scan(n);
            case NodeKind::Filter: return cascaded(n.pred) ? cascade_filter(n) : filter_chain(n);
            case NodeKind::Join: return join(n);
            case NodeKind::Classify: return classify(n);
            case NodeKind::Project: return project(n);
            case NodeKind::Aggregate: return aggregate(n);
        }
        throw Error("unknown plan node");
    }

    ModelResponse call(ModelRequest const& request, Scope& scope) {
        auto provider = providers_.get(request.model_name);
        scope.node.calls++;
        scope.node.tokens += estimate_tokens(request.prompt);
        if (scope.pred) scope.pred->calls++;
        return provider->invoke(request);
    }

    ProviderPtr counted(std::string const& model, Meter& meter, PredMeter* pred) {
        auto inner = providers_.get(model);
        return std::make_shared<CallbackProvider>([inner, &meter, pred](ModelRequest const& request) {
            meter.calls++;
            meter.tokens += estimate_tokens(request.prompt);
            if (pred) pred->calls++;
            return inner->invoke(request);
        });
    }

    [[nodiscard]] std::string model_of(std::map<std::string, std::string> const& options) const {
        return option(options, "model").value_or(options_.default_model);
    }

    [[nodiscard]] std::size_t max_labels() const { return std::max<std::size_t>(options_.max_labels_per_call, 1); }

    [[nodiscard]] std::uint64_t multimodal_factor() const {
        return static_cast<std::uint64_t>(std::max(1.0, std::round(options_.planner.multimodal_factor)));
    }

    [[nodiscard]] ExecStats stats() const {
        ExecStats s;
        visit(plan_.root, [&](PlanNode const& n) {
            auto const& m = *meters_.at(n.id);
            s.nodes.push_back({n.id, std::string(to_string(n.kind)), m.rows_in.load(), m.rows_out.load(),
                               m.calls.load(), m.tokens.load(), m.wall_ms});
            auto add = [&](Predicate const& p) {
                auto const& pm = *pred_meters_.at(p.id);
                s.predicates.push_back({p.id, p.text(), pm.seen.load(), pm.passed.load(), pm.calls.load(),
                                        pm.cost.load()});
            };
            if (n.kind == NodeKind::Filter || n.kind == NodeKind::Classify) add(n.pred);
            if (n.kind == NodeKind::Join && n.join_pred) add(*n.join_pred);
        });
        s.cascades = cascades_;
        s.truncations = truncations_.load();
        s.reorders = reorders_;
        s.label_hallucinations = providers_.stats()->label_hallucinations() - hallucinations_before_;
        for (auto const& [model, c] : providers_.stats()->snapshot()) {
            ModelCounters base;
            if (auto it = before_.find(model); it != before_.end()) base = it->second;
            ModelCounters d{c.call_count - base.call_count, c.prompt_tokens - base.prompt_tokens,
                            c.output_tokens - base.output_tokens};
            if (d.call_count > 0 || d.prompt_tokens > 0 || d.output_tokens > 0) s.models[model] = d;
        }
        return s;
    }

  private:
    using Clock = std::chrono::steady_clock;

    static double since(Clock::time_point start) {
        return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    }

    void add_pred(Predicate const& p) {
        if (!pred_meters_.count(p.id)) pred_meters_[p.id] = std::make_unique<PredMeter>();
    }

    Meter& meter(PlanNode const& n) { return *meters_.at(n.id); }
    PredMeter& pred_meter(Predicate const& p) { return *pred_meters_.at(p.id); }

    /// Runs `fn(begin, end, morsel)` over morsels of `n` items.
    template <typename F>
    std::size_t morsels(std::size_t n, F&& fn) {
        std::size_t b = std::max<std::size_t>(options_.batch_size, 1);
        std::size_t count = (n + b - 1) / b;
        pfor_(count, [&](std::size_t i) { fn(i * b, std::min(n, (i + 1) * b), i); });
        return count;
    }

    bool check(Evaluator const& ev, Predicate const& p, Row const& row, Meter& m, std::uint64_t* cost_out = nullptr) {
        auto& pm = pred_meter(p);
        Scope scope{m, &pm};
        bool ok = ev.test(p.expr, row, scope);
        std::uint64_t cost = scope.ai_cost > 0 ? scope.ai_cost : 1;
        pm.seen++;
        if (ok) pm.passed++;
        pm.cost += cost;
        if (cost_out) *cost_out = cost;
        return ok;
    }

    [[nodiscard]] std::optional<CascadeConfig> cascade_config(Predicate const& p) const {
        if (p.expr.kind != ExprKind::AiCall || p.expr.ai->kind != AiKind::Filter) return std::nullopt;
        auto const& opts = p.expr.ai->options;
        auto flag = option(opts, "cascade");
        if (flag && (iequals(*flag, "off") || iequals(*flag, "false"))) return std::nullopt;
        bool on = flag && (iequals(*flag, "on") || iequals(*flag, "true"));
        if (!on && !options_.cascade) return std::nullopt;
        CascadeConfig c = options_.cascade.value_or(CascadeConfig{});
        if (auto v = option(opts, "proxy_model")) c.proxy_model = *v;
        if (auto v = option(opts, "oracle_model")) c.oracle_model = *v;
        if (auto v = option(opts, "oracle_budget")) {
            auto d = parse_double("oracle_budget", *v);
            if (d < 0) throw TypeError("oracle_budget must be non-negative");
            c.oracle_budget = static_cast<std::size_t>(d);
        }
        if (auto v = option(opts, "target_precision")) c.target_precision = parse_double("target_precision", *v);
        if (auto v = option(opts, "target_recall")) c.target_recall = parse_double("target_recall", *v);
        if (auto v = option(opts, "delta")) c.delta = parse_double("delta", *v);
        c.validate();
        return c;
    }

    [[nodiscard]] bool cascaded(Predicate const& p) const { return cascade_config(p).has_value(); }

    Rows scan(PlanNode const& n) {
        auto start = Clock::now();
        Rows out;
        if (n.table.empty()) {
            out.push_back({{0}, {}});
        } else {
            auto table = catalog_.get(n.table);
            out.reserve(table->row_count());
            for (std::size_t i = 0; i < table->row_count(); ++i) out.push_back({{i}, table->rows()[i]});
        }
        auto& m = meter(n);
        m.rows_in = out.size();
        m.rows_out = out.size();
        m.wall_ms = since(start);
        return out;
    }

    Rows filter_chain(PlanNode const& top) {
        std::vector<PlanNode const*> chain;
        PlanNode const* below = &top;
        while (below->kind == NodeKind::Filter && !cascaded(below->pred)) {
            chain.push_back(below);
            below = &below->children.at(0);
        }
        std::reverse(chain.begin(), chain.end());  // evaluation order: bottom first
        Rows input = run(*below);
        auto start = Clock::now();

        Evaluator ev(*this, below->schema);
        for (auto const* f : chain) ev.bind(f->pred.expr);

        std::size_t k = chain.size();
        std::vector<char> keep(input.size(), 0);
        struct Tally {
            std::uint64_t seen = 0, passed = 0, cost = 0;
        };

        auto run_range = [&](std::size_t begin, std::size_t end, std::vector<std::size_t> const& order) {
            std::vector<Tally> total(k);
            std::mutex mu;
            morsels(end - begin, [&](std::size_t b, std::size_t e, std::size_t) {
                std::vector<Tally> local(k);
                for (std::size_t r = begin + b; r < begin + e; ++r) {
                    bool ok = true;
                    for (auto idx : order) {
                        auto const& node = *chain[idx];
                        std::uint64_t cost = 0;
                        bool pass = check(ev, node.pred, input[r].values, meter(node), &cost);
                        local[idx].seen++;
                        local[idx].cost += cost;
                        if (!pass) {
                            ok = false;
                            break;
                        }
                        local[idx].passed++;
                    }
                    keep[r] = ok ? 1 : 0;
                }
                std::lock_guard lock(mu);
                for (std::size_t i = 0; i < k; ++i) {
                    total[i].seen += local[i].seen;
                    total[i].passed += local[i].passed;
                    total[i].cost += local[i].cost;
                }
            });
            for (std::size_t i = 0; i < k; ++i) {
                meter(*chain[i]).rows_in += total[i].seen;
                meter(*chain[i]).rows_out += total[i].passed;
            }
            return total;
        };

        if (options_.adaptive_reorder && k >= 2) {
            std::vector<PredicateProfile> profiles;
            for (auto const* f : chain) {
                auto it = profiles_.find(f->pred.id);
                PredicateProfile p;
                p.pred_id = f->pred.id;
                if (it != profiles_.end()) p = it->second;
                profiles.push_back(p);
            }
            AdaptiveReorderer reorderer(std::move(profiles), options_.reorder_window, options_.reorder_hysteresis);
            std::size_t epoch = std::max<std::size_t>(options_.reorder_epoch_rows, 1);
            for (std::size_t begin = 0; begin < input.size(); begin += epoch) {
                auto end = std::min(input.size(), begin + epoch);
                auto tally = run_range(begin, end, reorderer.order());
                for (std::size_t i = 0; i < k; ++i) {
                    reorderer.observe(i, static_cast<double>(tally[i].seen), static_cast<double>(tally[i].passed),
                                      static_cast<double>(tally[i].cost));
                }
                if (reorderer.end_batch()) ++reorders_;
            }
        } else {
            std::vector<std::size_t> order(k);
            for (std::size_t i = 0; i < k; ++i) order[i] = i;
            run_range(0, input.size(), order);
        }

        Rows out;
        for (std::size_t r = 0; r < input.size(); ++r) {
            if (keep[r]) out.push_back(std::move(input[r]));
        }
        double ms = since(start) / static_cast<double>(k);
        for (auto const* f : chain) meter(*f).wall_ms = ms;
        return out;
    }

    Rows cascade_filter(PlanNode const& n) {
        Rows input = run(n.children.at(0));
        auto start = Clock::now();
        auto config = *cascade_config(n.pred);
        auto& m = meter(n);
        auto& pm = pred_meter(n.pred);
        m.rows_in = input.size();

        Evaluator ev(*this, n.children.at(0).schema);
        ev.bind(n.pred.expr);
        auto const& ai = *n.pred.expr.ai;

        std::vector<std::pair<std::uint64_t, std::string>> items;
        for (std::size_t i = 0; i < input.size(); ++i) {
            Scope scope{m, &pm};
            std::vector<std::string> values;
            bool null = false;
            for (auto const& b : ai.bindings) {
                auto v = ev.eval(b, input[i].values, scope);
                if (v.is_null()) {
                    null = true;
                    break;
                }
                values.push_back(v.render());
            }
            if (!null) items.emplace_back(i, render_template(ai.prompt, values));
        }

        auto proxy = counted(config.proxy_model, m, &pm);
        auto oracle = counted(config.oracle_model, m, &pm);
        CascadeRunner runner(config, proxy, oracle, pfor_);
        std::vector<RoutedPrediction> routed;
        try {
            routed = runner.run(items);
        } catch (...) {
            cascades_.push_back({n.pred.id, runner.summary()});
            throw;
        }
        cascades_.push_back({n.pred.id, runner.summary()});

        std::vector<char> keep(input.size(), 0);
        for (auto const& r : routed) keep[r.row_id] = r.decision ? 1 : 0;
        Rows out;
        for (std::size_t i = 0; i < input.size(); ++i) {
            if (keep[i]) out.push_back(std::move(input[i]));
        }
        pm.seen += input.size();
        pm.passed += out.size();
        pm.cost += input.size();
        m.rows_out = out.size();
        m.wall_ms = since(start);
        return out;
    }

    Rows join(PlanNode const& n) {
        Rows left = run(n.children.at(0));
        Rows right = run(n.children.at(1));
        auto start = Clock::now();
        auto& m = meter(n);
        m.rows_in = left.size() + right.size();

        Evaluator ev(*this, n.schema);
        if (n.join_pred) ev.bind(n.join_pred->expr);

        auto emit = [&](XRow const& l, XRow const& r, Rows& out) {
            Row values = concat(l.values, r.values);
            if (n.join_pred && !check(ev, *n.join_pred, values, m)) return;
            out.push_back({concat(l.key, r.key), std::move(values)});
        };

        std::vector<Rows> parts;
        std::mutex mu;
        auto collect = [&](std::size_t morsel, Rows rows) {
            std::lock_guard lock(mu);
            if (parts.size() <= morsel) parts.resize(morsel + 1);
            parts[morsel] = std::move(rows);
        };

        if (!n.equi_keys.empty()) {
            Evaluator el(*this, n.children[0].schema);
            Evaluator er(*this, n.children[1].schema);
            for (auto const& [lk, rk] : n.equi_keys) {
                el.bind(lk);
                er.bind(rk);
            }
            auto key_of = [&](Evaluator const& e, XRow const& row, bool left_side) -> std::optional<std::vector<Value>> {
                Scope scope{m};
                std::vector<Value> key;
                for (auto const& pair : n.equi_keys) {
                    auto v = e.eval(left_side ? pair.first : pair.second, row.values, scope);
                    if (v.is_null()) return std::nullopt;
                    key.push_back(std::move(v));
                }
                return key;
            };
            std::unordered_map<std::vector<Value>, std::vector<std::size_t>, ValuesHash> table;
            for (std::size_t i = 0; i < right.size(); ++i) {
                if (auto key = key_of(er, right[i], false)) table[*key].push_back(i);
            }
            morsels(left.size(), [&](std::size_t b, std::size_t e, std::size_t morsel) {
                Rows out;
                for (std::size_t i = b; i < e; ++i) {
                    auto key = key_of(el, left[i], true);
                    if (!key) continue;
                    auto it = table.find(*key);
                    if (it == table.end()) continue;
                    for (auto j : it->second) emit(left[i], right[j], out);
                }
                collect(morsel, std::move(out));
            });
        } else {
            std::size_t pairs = left.size() * right.size();
            morsels(pairs, [&](std::size_t b, std::size_t e, std::size_t morsel) {
                Rows out;
                for (std::size_t p = b; p < e; ++p) emit(left[p / right.size()], right[p % right.size()], out);
                collect(morsel, std::move(out));
            });
        }

        Rows out;
        for (auto& part : parts) {
            for (auto& row : part) out.push_back(std::move(row));
        }
        m.rows_out = out.size();
        m.wall_ms = since(start);
        return out;
    }

    Rows classify(PlanNode const& n) {
        Rows rows = run(n.children.at(0));
        Rows label_rows = run(n.children.at(1));
        auto start = Clock::now();
        auto const& spec = n.classify;
        auto& m = meter(n);
        auto& pm = pred_meter(n.pred);
        m.rows_in = rows.size() + label_rows.size();

        Evaluator er(*this, n.children[0].schema);
        Evaluator el(*this, n.children[1].schema);
        er.bind(spec.row_expr);
        el.bind(spec.label_expr);

        std::vector<std::string> labels;
        std::map<std::string, std::size_t> label_index;
        std::vector<std::optional<std::size_t>> label_of(label_rows.size());
        for (std::size_t j = 0; j < label_rows.size(); ++j) {
            Scope scope{m};
            auto v = el.eval(spec.label_expr, label_rows[j].values, scope);
            if (v.is_null()) continue;
            auto text = v.render();
            auto [it, fresh] = label_index.emplace(text, labels.size());
            if (fresh) labels.push_back(text);
            label_of[j] = it->second;
        }
        auto chunks = chunked(labels, spec.chunk_size);
        auto model = model_of(spec.options);

        std::vector<Rows> parts;
        std::mutex mu;
        morsels(rows.size(), [&](std::size_t b, std::size_t e, std::size_t morsel) {
            Rows out;
            for (std::size_t i = b; i < e; ++i) {
                Scope scope{m, &pm};
                auto v = er.eval(spec.row_expr, rows[i].values, scope);
                pm.seen += label_rows.size();
                pm.cost += 1;
                if (v.is_null() || labels.empty()) continue;
                std::vector<std::string> slots(2);
                slots[spec.row_slot] = v.render();
                slots[spec.label_slot] = std::string(kLabelMarker);
                auto prompt = render_template(spec.prompt, slots);
                std::vector<char> hit(labels.size(), 0);
                for (auto const& chunk : chunks) {
                    ModelRequest request;
                    request.task = Task::ClassifyMulti;
                    request.model_name = model;
                    request.prompt = prompt;
                    request.labels = chunk;
                    auto response = call(request, scope);
                    if (!response.labels) continue;
                    for (auto const& l : *response.labels) {
                        if (auto it = label_index.find(l); it != label_index.end()) hit[it->second] = 1;
                    }
                }
                for (std::size_t j = 0; j < label_rows.size(); ++j) {
                    if (!label_of[j] || !hit[*label_of[j]]) continue;
                    auto const& l = label_rows[j];
                    if (spec.row_side_left) out.push_back({concat(rows[i].key, l.key), concat(rows[i].values, l.values)});
                    else out.push_back({concat(l.key, rows[i].key), concat(l.values, rows[i].values)});
                    pm.passed++;
                }
            }
            std::lock_guard lock(mu);
            if (parts.size() <= morsel) parts.resize(morsel + 1);
            parts[morsel] = std::move(out);
        });

        Rows out;
        for (auto& part : parts) {
            for (auto& row : part) out.push_back(std::move(row));
        }
        if (!spec.row_side_left) {
            std::stable_sort(out.begin(), out.end(), [](XRow const& a, XRow const& b) { return a.key < b.key; });
        }
        m.rows_out = out.size();
        m.wall_ms = since(start);
        return out;
    }

    void prepare_labels(Evaluator& ev, Expr const& e, Rows const& input) {
        each_ai(e, [&](AiCallExpr const& ai) {
            if (ai.kind != AiKind::Classify) return;
            std::vector<std::string> labels;
            if (ai.labels_from_column) {
                auto idx = ev.column(ai.labels.at(0));
                std::map<std::string, bool> seen;
                for (auto const& row : input) {
                    auto const& v = row.values[idx];
                    if (v.is_null()) continue;
                    auto text = v.render();
                    if (seen.emplace(text, true).second) labels.push_back(text);
                }
            } else {
                for (auto const& l : ai.labels) {
                    auto text = l.literal.render();
                    if (std::find(labels.begin(), labels.end(), text) == labels.end()) labels.push_back(text);
                }
            }
            ev.set_labels(&ai, std::move(labels));
        });
    }

    Rows project(PlanNode const& n) {
        Rows input = run(n.children.at(0));
        auto start = Clock::now();
        auto& m = meter(n);
        m.rows_in = input.size();
        Evaluator ev(*this, n.children[0].schema);
        for (auto const& e : n.exprs) {
            ev.bind(e);
            prepare_labels(ev, e, input);
        }
        Rows out(input.size());
        morsels(input.size(), [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t i = b; i < e; ++i) {
                Scope scope{m};
                Row values;
                values.reserve(n.exprs.size());
                for (auto const& x : n.exprs) values.push_back(ev.eval(x, input[i].values, scope));
                out[i] = {input[i].key, std::move(values)};
            }
        });
        m.rows_out = out.size();
        m.wall_ms = since(start);
        return out;
    }

    Rows aggregate(PlanNode const& n) {
        Rows input = run(n.children.at(0));
        auto start = Clock::now();
        auto& m = meter(n);
        m.rows_in = input.size();
        Evaluator ev(*this, n.children[0].schema);
        for (auto const& g : n.group_keys) {
            ev.bind(g);
            prepare_labels(ev, g, input);
        }
        for (auto const& e : n.exprs) {
            ev.bind(e);
            prepare_labels(ev, e, input);
        }

        std::vector<std::vector<Value>> keys(input.size());
        morsels(input.size(), [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t i = b; i < e; ++i) {
                Scope scope{m};
                for (auto const& g : n.group_keys) keys[i].push_back(ev.eval(g, input[i].values, scope));
            }
        });

        std::vector<std::vector<Value>> group_keys;
        std::vector<std::vector<std::size_t>> members;
        if (n.group_keys.empty()) {
            group_keys.emplace_back();
            members.emplace_back();
            for (std::size_t i = 0; i < input.size(); ++i) members[0].push_back(i);
        } else {
            std::unordered_map<std::vector<Value>, std::size_t, ValuesHash> index;
            for (std::size_t i = 0; i < input.size(); ++i) {
                auto [it, fresh] = index.emplace(keys[i], group_keys.size());
                if (fresh) {
                    group_keys.push_back(keys[i]);
                    members.emplace_back();
                }
                members[it->second].push_back(i);
            }
        }

        std::map<std::string, ProviderPtr> providers;
        for (auto const& e : n.exprs) {
            if (e.kind == ExprKind::AiCall) {
                auto model = model_of(e.ai->options);
                if (!providers.count(model)) providers[model] = counted(model, m, nullptr);
            }
        }

        Rows out(group_keys.size());
        pfor_(group_keys.size(), [&](std::size_t g) {
            Row values;
            for (auto const& e : n.exprs) {
                auto key_it = std::find(n.group_keys.begin(), n.group_keys.end(), e);
                if (key_it != n.group_keys.end()) {
                    values.push_back(group_keys[g][static_cast<std::size_t>(key_it - n.group_keys.begin())]);
                    continue;
                }
                Scope scope{m};
                if (e.kind == ExprKind::Count) {
                    std::int64_t count = 0;
                    for (auto i : members[g]) {
                        if (e.args.empty() || e.args[0].kind == ExprKind::Star ||
                            !ev.eval(e.args[0], input[i].values, scope).is_null()) {
                            ++count;
                        }
                    }
                    values.push_back(Value::integer(count));
                } else if (e.kind == ExprKind::AiCall &&
                           (e.ai->kind == AiKind::Agg || e.ai->kind == AiKind::SummarizeAgg)) {
                    AggOptions agg;
                    agg.batch_size_tokens = options_.agg_batch_tokens;
                    agg.model = model_of(e.ai->options);
                    if (e.ai->kind == AiKind::Agg) agg.instruction = e.ai->instruction;
                    AggState state(*providers.at(agg.model), agg);
                    for (auto i : members[g]) {
                        auto v = ev.eval(e.ai->bindings.at(0), input[i].values, scope);
                        if (!v.is_null()) state.push(v.render());
                    }
                    values.push_back(Value::text(state.finalize()));
                    truncations_ += state.truncations();
                } else if (!members[g].empty()) {
                    values.push_back(ev.eval(e, input[members[g].front()].values, scope));
                } else {
                    values.push_back(ev.eval(e, Row{}, scope));
                }
            }
            out[g] = {{static_cast<std::uint64_t>(g)}, std::move(values)};
        });
        m.rows_out = out.size();
        m.wall_ms = since(start);
        return out;
    }

    LogicalPlan const& plan_;
    Catalog const& catalog_;
    ProviderRegistry const& providers_;
    ExecOptions const& options_;
    ParallelFor pfor_;
    std::map<std::string, ModelCounters> before_;
    std::uint64_t hallucinations_before_;
    std::map<int, std::unique_ptr<Meter>> meters_;
    std::map<int, std::unique_ptr<PredMeter>> pred_meters_;
    std::map<int, PredicateProfile> profiles_;
    std::vector<CascadeStats> cascades_;
    std::atomic<std::uint64_t> truncations_{0};
    std::uint64_t reorders_ = 0;

    friend class Evaluator;
};

Value Evaluator::eval(Expr const& e, Row const& row, Scope& scope) const {
    switch (e.kind) {
        case ExprKind::Literal: return e.literal;
        case ExprKind::Column: return row.at(column(e));
        case ExprKind::Star: throw TypeError("'*' is only valid inside COUNT");
        case ExprKind::Count: throw TypeError("COUNT outside an aggregation");
        case ExprKind::Compare: {
            auto l = eval(e.args[0], row, scope);
            auto r = eval(e.args[1], row, scope);
            if (l.is_null() || r.is_null()) return Value::null();
            auto c = l.compare(r);
            auto const& op = e.name;
            bool out = false;
            if (op == "=") out = c == 0;
            else if (op == "<>") out = c != 0;
            else if (op == "<") out = c < 0;
            else if (op == "<=") out = c <= 0;
            else if (op == ">") out = c > 0;
            else if (op == ">=") out = c >= 0;
            else throw TypeError("unknown comparison operator '" + op + "'");
            return Value::boolean(out);
        }
        case ExprKind::Between: {
            auto v = eval(e.args[0], row, scope);
            auto lo = eval(e.args[1], row, scope);
            auto hi = eval(e.args[2], row, scope);
            if (v.is_null() || lo.is_null() || hi.is_null()) return Value::null();
            bool in = v.compare(lo) >= 0 && v.compare(hi) <= 0;
            return Value::boolean(in != e.negated);
        }
        case ExprKind::In: {
            auto v = eval(e.args[0], row, scope);
            if (v.is_null()) return Value::null();
            bool found = false, saw_null = false;
            for (std::size_t i = 1; i < e.args.size() && !found; ++i) {
                auto item = eval(e.args[i], row, scope);
                if (item.is_null()) saw_null = true;
                else found = v.compare(item) == 0;
            }
            if (!found && saw_null) return Value::null();
            return Value::boolean(found != e.negated);
        }
        case ExprKind::FlIsImage: {
            auto v = eval(e.args[0], row, scope);
            if (v.is_null()) return Value::null();
            return Value::boolean(fl_is_image(v.as_file()));
        }
        case ExprKind::AiCall: return eval_ai(*e.ai, row, scope);
    }
    throw TypeError("unsupported expression");
}

Value Evaluator::eval_ai(AiCallExpr const& ai, Row const& row, Scope& scope) const {
    switch (ai.kind) {
        case AiKind::Filter:
        case AiKind::Complete: {
            std::vector<std::string> values;
            bool file = false;
            std::uint64_t tokens = 0;
            for (auto const& b : ai.bindings) {
                auto v = eval(b, row, scope);
                if (v.is_null()) return Value::null();
                file = file || v.kind() == ValueKind::File;
                values.push_back(v.render());
                tokens += estimate_tokens(values.back());
            }
            ModelRequest request;
            request.task = ai.kind == AiKind::Filter ? Task::FilterBool : Task::Complete;
            request.model_name = engine_.model_of(ai.options);
            request.prompt = render_template(ai.prompt, values);
            scope.ai_cost += std::max<std::uint64_t>(tokens, 1) * (file ? engine_.multimodal_factor() : 1);
            auto response = engine_.call(request, scope);
            if (ai.kind == AiKind::Filter) return Value::boolean(response.bool_value.value_or(false));
            return Value::text(response.text);
        }
        case AiKind::Classify: {
            auto v = eval(ai.bindings.at(0), row, scope);
            if (v.is_null()) return Value::null();
            auto it = labels_.find(&ai);
            if (it == labels_.end() || it->second.empty()) return Value::null();
            auto const& labels = it->second;
            auto input = v.render();
            scope.ai_cost += std::max<std::uint64_t>(estimate_tokens(input), 1);
            auto prompt = classify_prompt(input, ai.instruction);
            std::vector<char> hit(labels.size(), 0);
            for (auto const& chunk : chunked(labels, engine_.max_labels())) {
                ModelRequest request;
                request.task = Task::ClassifyMulti;
                request.model_name = engine_.model_of(ai.options);
                request.prompt = prompt;
                request.labels = chunk;
                auto response = engine_.call(request, scope);
                if (!response.labels) continue;
                for (auto const& l : *response.labels) {
                    auto pos = std::find(labels.begin(), labels.end(), l);
                    if (pos != labels.end()) hit[static_cast<std::size_t>(pos - labels.begin())] = 1;
                }
            }
            std::string joined;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (!hit[i]) continue;
                if (!joined.empty()) joined += ", ";
                joined += labels[i];
            }
            return Value::text(joined);
        }
        case AiKind::Agg:
        case AiKind::SummarizeAgg: throw TypeError(std::string(function_name(ai.kind)) + " outside an aggregation");
    }
    throw TypeError("unsupported AI call");
}

}  // namespace

ExecResult execute(LogicalPlan const& plan, Catalog const& catalog, ProviderRegistry const& providers,
                   ExecOptions const& options) {
    Engine engine(plan, catalog, providers, options);
    Rows rows;
    try {
        rows = engine.run(plan.root);
    } catch (ProviderError const& e) {
        throw ExecutionAborted(e, engine.stats());
    }
    std::stable_sort(rows.begin(), rows.end(), [](XRow const& a, XRow const& b) { return a.key < b.key; });

    std::vector<ColumnDef> columns;
    for (auto const& c : plan.root.schema) columns.push_back({c.name, c.kind});
    std::vector<Row> values;
    values.reserve(rows.size());
    for (auto& r : rows) values.push_back(std::move(r.values));
    return {Table("result", Schema(std::move(columns)), std::move(values)), engine.stats()};
}

}  // namespace semql
