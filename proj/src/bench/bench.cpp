#include "semql/bench/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "semql/core/errors.hpp"
#include "semql/core/ingest.hpp"

namespace semql {

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string replace_all(std::string text, std::string const& from, std::string const& to) {
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
        text.replace(pos, from.size(), to);
    }
    return text;
}

bool is_cascade_field(std::string const& name) {
    return name == "oracle_budget" || name == "target_precision" || name == "target_recall" || name == "delta";
}

void apply_cascade_field(CascadeConfig& c, std::string const& name, double v) {
    if (name == "oracle_budget") c.oracle_budget = static_cast<std::size_t>(std::llround(v));
    else if (name == "target_precision") c.target_precision = v;
    else if (name == "target_recall") c.target_recall = v;
    else if (name == "delta") c.delta = v;
}

}  // namespace

Strategy strategy_preset(std::string const& name) {
    Strategy s;
    s.name = name;
    auto flags = [&](bool reorder, Placement placement, bool rewrite) {
        s.optimizer = {reorder, placement, rewrite};
    };
    if (name == "baseline" || name == "ai_first") flags(false, Placement::PushDown, false);
    else if (name == "reordered") flags(true, Placement::PushDown, false);
    else if (name == "pushdown") flags(true, Placement::PushDown, false);
    else if (name == "pullup") flags(true, Placement::PullUp, false);
    else if (name == "auto" || name == "ai_aware" || name == "optimized") flags(true, Placement::Auto, true);
    else if (name == "no_rewrite") flags(true, Placement::Auto, false);
    else if (name == "cascade") {
        flags(true, Placement::Auto, true);
        s.cascade = true;
    } else if (name == "oracle_only") {
        flags(true, Placement::Auto, true);
        s.model = "oracle";
    } else if (name == "proxy_only") {
        flags(true, Placement::Auto, true);
        s.model = "proxy";
    } else {
        throw ScenarioParseError("unknown strategy '" + name + "'");
    }
    return s;
}

Scenario parse_scenario(nlohmann::json const& j, std::filesystem::path const& base_dir) {
    Scenario s;
    s.base_dir = base_dir;
    try {
        if (!j.is_object()) throw ScenarioParseError("scenario must be a JSON object");
        s.name = j.value("name", std::string("scenario"));
        if (j.contains("generator")) s.generator = j.at("generator").get<std::string>();
        if (j.contains("tables")) {
            std::filesystem::path dir = j.at("tables").get<std::string>();
            s.tables_dir = dir.is_relative() ? base_dir / dir : dir;
        }
        if (s.generator.empty() == !s.tables_dir.has_value()) {
            throw ScenarioParseError("scenario needs exactly one of 'generator' or 'tables'");
        }
        if (j.contains("params")) s.params = j.at("params");
        if (j.contains("query")) s.query = j.at("query").get<std::string>();
        if (s.tables_dir && !s.query) throw ScenarioParseError("a 'tables' scenario needs a 'query'");
        if (j.contains("sweep")) {
            auto const& sw = j.at("sweep");
            s.sweep_param = sw.at("param").get<std::string>();
            s.sweep_values = sw.at("values").get<std::vector<double>>();
            if (s.sweep_values.empty()) throw ScenarioParseError("sweep needs at least one value");
        }
        if (!j.contains("strategies") || j.at("strategies").empty()) {
            throw ScenarioParseError("scenario needs a non-empty 'strategies' list");
        }
        for (auto const& st : j.at("strategies")) {
            if (st.is_string()) {
                s.strategies.push_back(strategy_preset(st.get<std::string>()));
                continue;
            }
            auto name = st.at("name").get<std::string>();
            Strategy strategy = strategy_preset(st.value("preset", std::string("auto")));
            strategy.name = name;
            if (st.contains("optimizer")) strategy.optimizer = parse_optimizer_flags(st.at("optimizer").get<std::string>());
            if (st.contains("cascade")) strategy.cascade = st.at("cascade").get<bool>();
            if (st.contains("model")) strategy.model = st.at("model").get<std::string>();
            s.strategies.push_back(std::move(strategy));
        }
        if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (s.seeds.empty()) throw ScenarioParseError("'seeds' must not be empty");
        if (j.contains("providers")) s.providers = j.at("providers");
        if (j.contains("cascade")) {
            auto const& c = j.at("cascade");
            std::string flags;
            for (auto const& [k, v] : c.items()) {
                if (!flags.empty()) flags += ",";
                flags += k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
            }
            s.cascade = parse_cascade_flags(flags);
        }
        if (j.contains("truth")) {
            auto const& t = j.at("truth");
            s.truth = TruthSpec{t.at("table").get<std::string>(), t.at("key").get<std::string>(),
                                t.at("column").get<std::string>()};
        }
    } catch (nlohmann::json::exception const& e) {
        throw ScenarioParseError(std::string("invalid scenario: ") + e.what());
    } catch (ScenarioParseError const&) {
        throw;
    } catch (Error const& e) {
        throw ScenarioParseError(std::string("invalid scenario: ") + e.what());
    }
    return s;
}

Scenario load_scenario(std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioParseError("cannot open scenario " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (nlohmann::json::exception const& e) {
        throw ScenarioParseError("invalid scenario " + path.string() + ": " + e.what());
    }
    return parse_scenario(j, path.parent_path());
}

Quality quality(std::vector<std::string> const& predicted, std::vector<std::string> const& expected) {
    std::set<std::string> p(predicted.begin(), predicted.end());
    std::set<std::string> e(expected.begin(), expected.end());
    std::size_t hit = 0;
    for (auto const& x : p) hit += e.count(x);
    Quality q;
    q.precision = p.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(p.size());
    q.recall = e.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(e.size());
    q.f1 = q.precision + q.recall > 0 ? 2 * q.precision * q.recall / (q.precision + q.recall) : 0.0;
    return q;
}

Quality quality(Table const& result, Catalog const& catalog, TruthSpec const& truth) {
    auto key = result.schema().find(truth.key);
    if (!key) throw ScenarioParseError("result has no column '" + truth.key + "' for quality metrics");
    std::vector<std::string> predicted;
    for (auto const& row : result.rows()) predicted.push_back(row[*key].render());

    auto table = catalog.get(truth.table);
    auto tk = table->schema().find(truth.key);
    auto tc = table->schema().find(truth.column);
    if (!tk || !tc) throw ScenarioParseError("truth table lacks '" + truth.key + "' or '" + truth.column + "'");
    std::vector<std::string> expected;
    for (auto const& row : table->rows()) {
        auto const& v = row[*tc];
        if (v.kind() == ValueKind::Bool && v.as_bool()) expected.push_back(row[*tk].render());
    }
    return quality(predicted, expected);
}

std::vector<BenchRow> run_scenario(Scenario const& scenario, BenchOptions const& options) {
    std::vector<BenchRow> out;
    std::vector<double> values = scenario.sweep_values;
    bool swept = !scenario.sweep_param.empty();
    if (!swept) values = {0.0};

    for (double value : values) {
        auto params = scenario.params;
        if (swept && !is_cascade_field(scenario.sweep_param)) params[scenario.sweep_param] = value;
        Workload w;
        if (scenario.tables_dir) {
            w.name = scenario.name;
            w.catalog = load_catalog(*scenario.tables_dir);
            w.selectivity_hints = load_selectivity_hints(*scenario.tables_dir);
        } else {
            w = make_workload(scenario.generator, params);
        }
        auto query = scenario.query.value_or(w.query);
        if (swept) query = replace_all(query, "${" + scenario.sweep_param + "}", format_estimate(value));
        auto truth = scenario.truth ? scenario.truth : w.truth;
        auto providers = scenario.providers.value_or(w.providers);

        for (auto seed : scenario.seeds) {
            for (auto const& strategy : scenario.strategies) {
                ProviderConfigOptions po;
                po.seed = seed;
                auto registry = providers_from_json(providers, scenario.base_dir, po);
                auto popts = planner_options(strategy.optimizer, w.selectivity_hints, registry_oracle(registry));
                popts.context_window_tokens = w.context_window_tokens;
                auto prepared = prepare_query(query, w.catalog, popts);

                RunConfig rc;
                rc.workers = options.workers;
                rc.batch_size = options.batch_size;
                rc.seed = seed;
                if (strategy.cascade) {
                    auto c = scenario.cascade;
                    if (swept && is_cascade_field(scenario.sweep_param)) apply_cascade_field(c, scenario.sweep_param, value);
                    rc.cascade = c;
                }
                auto eopts = exec_options(rc, popts);
                if (strategy.model) eopts.default_model = *strategy.model;

                auto start = std::chrono::steady_clock::now();
                auto result = execute(prepared.optimized, w.catalog, registry, eopts);
                double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

                BenchRow row;
                row.scenario = scenario.name;
                row.param = scenario.sweep_param;
                row.value = value;
                row.strategy = strategy.name;
                row.seed = seed;
                row.ai_calls = result.stats.total_ai_calls();
                row.est_ai_calls = prepared.optimized.total_ai_calls();
                if (auto it = result.stats.models.find("oracle"); it != result.stats.models.end()) {
                    row.oracle_calls = it->second.call_count;
                }
                if (auto it = result.stats.models.find("proxy"); it != result.stats.models.end()) {
                    row.proxy_calls = it->second.call_count;
                }
                row.rows = result.table.row_count();
                row.wall_ms = ms;
                if (truth) row.quality = quality(result.table, w.catalog, *truth);
                out.push_back(std::move(row));
            }
        }
    }
    return out;
}

std::string bench_csv(std::vector<BenchRow> const& rows) {
    std::ostringstream out;
    out << "scenario,param,value,strategy,seed,ai_calls,est_ai_calls,oracle_calls,proxy_calls,rows,wall_ms,"
           "precision,recall,f1\n";
    for (auto const& r : rows) {
        out << r.scenario << "," << r.param << "," << format_estimate(r.value) << "," << r.strategy << "," << r.seed
            << "," << r.ai_calls << "," << format_estimate(r.est_ai_calls) << "," << r.oracle_calls << ","
            << r.proxy_calls << "," << r.rows << "," << fixed(r.wall_ms, 3) << ",";
        if (r.quality) {
            out << fixed(r.quality->precision, 4) << "," << fixed(r.quality->recall, 4) << "," << fixed(r.quality->f1, 4);
        } else {
            out << ",,";
        }
        out << "\n";
    }
    return out.str();
}

std::string speedup_csv(std::vector<BenchRow> const& rows) {
    std::ostringstream out;
    out << "param,value,seed,strategy,ai_calls,speedup\n";
    if (rows.empty()) return out.str();
    auto const& baseline = rows.front().strategy;
    for (auto const& r : rows) {
        std::uint64_t base = r.ai_calls;
        for (auto const& b : rows) {
            if (b.strategy == baseline && b.value == r.value && b.seed == r.seed) {
                base = b.ai_calls;
                break;
            }
        }
        std::string speedup;
        if (r.ai_calls == 0) speedup = base == 0 ? "1" : "inf";
        else speedup = fixed(static_cast<double>(base) / static_cast<double>(r.ai_calls), 4);
        out << r.param << "," << format_estimate(r.value) << "," << r.seed << "," << r.strategy << "," << r.ai_calls
            << "," << speedup << "\n";
    }
    return out.str();
}

}  // namespace semql
