#include "semql/cli/session.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "semql/bench/bench.hpp"
#include "semql/core/errors.hpp"
#include "semql/core/ingest.hpp"
#include "semql/parser/lower.hpp"
#include "semql/parser/parser.hpp"

namespace semql {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::pair<std::string, std::string>> parse_pairs(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (!item.empty()) {
            auto eq = item.find('=');
            if (eq == std::string::npos) throw Error("expected key=value, got '" + item + "'");
            out.emplace_back(to_lower(trim(item.substr(0, eq))), trim(item.substr(eq + 1)));
        }
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

bool parse_switch(std::string const& key, std::string const& v) {
    auto l = to_lower(v);
    if (l == "on" || l == "true" || l == "1") return true;
    if (l == "off" || l == "false" || l == "0") return false;
    throw Error(key + " expects on|off, got '" + v + "'");
}

double parse_number(std::string const& key, std::string const& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (std::exception const&) {
    }
    throw Error(key + " expects a number, got '" + v + "'");
}

std::size_t parse_count(std::string const& key, std::string const& v) {
    double d = parse_number(key, v);
    if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
        throw Error(key + " expects a non-negative integer, got '" + v + "'");
    }
    return static_cast<std::size_t>(d);
}

nlohmann::json value_json(Value const& v) {
    switch (v.kind()) {
        case ValueKind::Null: return nullptr;
        case ValueKind::Bool: return v.as_bool();
        case ValueKind::Int: return v.as_int();
        case ValueKind::Float: return v.as_float();
        case ValueKind::Text: return v.as_text();
        case ValueKind::File: return v.as_file().uri;
    }
    return nullptr;
}

bool is_sql_error(std::exception const& e) {
    return dynamic_cast<SyntaxError const*>(&e) || dynamic_cast<TypeError const*>(&e) ||
           dynamic_cast<NameError const*>(&e) || dynamic_cast<ArityMismatch const*>(&e) ||
           dynamic_cast<LabelOverflow const*>(&e);
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        body();
        return 0;
    } catch (ProviderError const& e) {
        err << "provider error: " << e.what() << "\n";
        return 3;
    } catch (std::exception const& e) {
        if (is_sql_error(e)) {
            err << "sql error: " << e.what() << "\n";
            return 2;
        }
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

void write_file(std::filesystem::path const& path, std::string const& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

ProviderRegistry registry_for(RunConfig const& config) {
    ProviderConfigOptions options;
    options.seed = config.seed;
    options.record_path = config.record_path;
    return load_providers(*config.provider_config, options);
}

}  // namespace

OptimizerFlags parse_optimizer_flags(std::string_view text) {
    OptimizerFlags f;
    for (auto const& [key, v] : parse_pairs(text)) {
        if (key == "reorder") f.reorder = parse_switch(key, v);
        else if (key == "rewrite") f.rewrite = parse_switch(key, v);
        else if (key == "placement") {
            auto l = to_lower(v);
            if (l == "auto" || l == "on") f.placement = Placement::Auto;
            else if (l == "pullup") f.placement = Placement::PullUp;
            else if (l == "pushdown") f.placement = Placement::PushDown;
            else throw Error("placement expects auto|pullup|pushdown, got '" + v + "'");
        } else {
            throw Error("unknown optimizer flag '" + key + "'");
        }
    }
    return f;
}

std::string to_string(OptimizerFlags const& f) {
    return std::string("reorder=") + (f.reorder ? "on" : "off") + ",placement=" + std::string(to_string(f.placement)) +
           ",rewrite=" + (f.rewrite ? "on" : "off");
}

CascadeConfig parse_cascade_flags(std::string_view text, CascadeConfig c) {
    for (auto const& [key, v] : parse_pairs(text)) {
        if (key == "oracle_budget") c.oracle_budget = parse_count(key, v);
        else if (key == "target_precision") c.target_precision = parse_number(key, v);
        else if (key == "target_recall") c.target_recall = parse_number(key, v);
        else if (key == "delta") c.delta = parse_number(key, v);
        else if (key == "phase2_fraction") c.phase2_fraction = parse_number(key, v);
        else if (key == "min_sample") c.min_sample = parse_count(key, v);
        else if (key == "batch_rows") c.batch_rows = parse_count(key, v);
        else if (key == "seed") c.seed = parse_count(key, v);
        else if (key == "proxy_model") c.proxy_model = v;
        else if (key == "oracle_model") c.oracle_model = v;
        else throw Error("unknown cascade option '" + key + "'");
    }
    c.validate();
    return c;
}

OutputFormat parse_output_format(std::string_view text) {
    auto l = to_lower(text);
    if (l == "table") return OutputFormat::Table;
    if (l == "csv") return OutputFormat::Csv;
    if (l == "json") return OutputFormat::Json;
    throw Error("unknown format '" + std::string(text) + "'");
}

PlannerOptions planner_options(OptimizerFlags const& flags, std::map<std::string, double> hints,
                               std::shared_ptr<RewriteOracle> oracle) {
    PlannerOptions o;
    o.reorder = flags.reorder;
    o.placement = flags.placement;
    o.rewrite = flags.rewrite;
    o.selectivity_hints = std::move(hints);
    o.oracle = std::move(oracle);
    return o;
}

std::map<std::string, double> load_selectivity_hints(std::filesystem::path const& dir) {
    std::map<std::string, double> hints;
    auto path = dir / "selectivity.json";
    if (!std::filesystem::exists(path)) return hints;
    std::ifstream in(path);
    try {
        auto j = nlohmann::json::parse(in);
        for (auto const& [text, sel] : j.items()) {
            // keys are normalised through the printer so any spelling matches
            std::string key = text;
            try {
                key = print(parse("SELECT 1 WHERE " + text).where.at(0));
            } catch (Error const&) {
            }
            hints[key] = sel.get<double>();
        }
    } catch (nlohmann::json::exception const& e) {
        throw Error("invalid " + path.string() + ": " + e.what());
    }
    return hints;
}

std::shared_ptr<RewriteOracle> registry_oracle(ProviderRegistry const& providers) {
    if (!providers.contains("rewrite_oracle")) return nullptr;
    return std::make_shared<ModelRewriteOracle>(providers.get("rewrite_oracle"), "rewrite_oracle");
}

PreparedQuery prepare_query(std::string_view sql, Catalog const& catalog, PlannerOptions const& options) {
    auto lowered = lower(parse(sql), catalog);
    PreparedQuery q;
    q.baseline = lowered;
    annotate(q.baseline, catalog, options);
    q.optimized = optimize(lowered, catalog, options);
    return q;
}

ExecOptions exec_options(RunConfig const& config, PlannerOptions const& planner) {
    ExecOptions o;
    o.batch_size = config.batch_size;
    o.workers = config.workers;
    o.adaptive_reorder = planner.reorder;
    o.max_labels_per_call = planner.max_labels_per_call;
    o.planner = planner;
    if (config.cascade) {
        o.cascade = config.cascade;
        o.cascade->seed = config.seed;
    }
    return o;
}

std::string render_table(Table const& table, OutputFormat format) {
    if (format == OutputFormat::Csv) return to_csv(table);
    auto const& schema = table.schema();
    if (format == OutputFormat::Json) {
        auto arr = nlohmann::json::array();
        for (auto const& row : table.rows()) {
            nlohmann::json obj = nlohmann::json::object();
            for (std::size_t i = 0; i < schema.size(); ++i) obj[schema[i].name] = value_json(row[i]);
            arr.push_back(std::move(obj));
        }
        return arr.dump(2) + "\n";
    }
    std::vector<std::vector<std::string>> cells;
    std::vector<std::size_t> width(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) width[i] = schema[i].name.size();
    for (auto const& row : table.rows()) {
        std::vector<std::string> line;
        for (std::size_t i = 0; i < schema.size(); ++i) {
            line.push_back(row[i].is_null() ? "NULL" : row[i].render());
            width[i] = std::max(width[i], line.back().size());
        }
        cells.push_back(std::move(line));
    }
    std::ostringstream out;
    auto emit = [&](std::vector<std::string> const& line) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            out << (i ? " | " : "") << line[i];
            if (i + 1 < line.size()) out << std::string(width[i] - line[i].size(), ' ');
        }
        out << "\n";
    };
    std::vector<std::string> header;
    for (auto const& c : schema.columns()) header.push_back(c.name);
    emit(header);
    for (std::size_t i = 0; i < width.size(); ++i) out << (i ? "-+-" : "") << std::string(width[i], '-');
    out << "\n";
    for (auto const& line : cells) emit(line);
    out << "(" << table.row_count() << (table.row_count() == 1 ? " row)" : " rows)") << "\n";
    return out.str();
}

std::string to_jsonl(Table const& table) {
    std::string out;
    auto const& schema = table.schema();
    for (auto const& row : table.rows()) {
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t i = 0; i < schema.size(); ++i) {
            auto const& v = row[i];
            if (v.kind() == ValueKind::File) {
                auto const& f = v.as_file();
                obj[schema[i].name] = {{"uri", f.uri},
                                       {"mime_type", f.mime_type},
                                       {"size_bytes", f.size_bytes},
                                       {"created_at", f.created_at}};
            } else {
                obj[schema[i].name] = value_json(v);
            }
        }
        out += obj.dump() + "\n";
    }
    return out;
}

int cmd_run(std::string const& sql, RunConfig const& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto catalog = load_catalog(config.tables_dir);
        if (!config.provider_config) throw Error("--providers is required for run");
        auto registry = registry_for(config);
        auto popts = planner_options(config.optimizer, load_selectivity_hints(config.tables_dir),
                                     registry_oracle(registry));
        auto prepared = prepare_query(sql, catalog, popts);
        auto eopts = exec_options(config, popts);
        try {
            auto result = execute(prepared.optimized, catalog, registry, eopts);
            out << render_table(result.table, config.format);
            if (config.stats_path) write_file(*config.stats_path, result.stats.to_json().dump(2) + "\n");
        } catch (ExecutionAborted const& e) {
            if (config.stats_path) write_file(*config.stats_path, e.partial_stats().to_json().dump(2) + "\n");
            throw;
        }
    });
}

int cmd_explain(std::string const& sql, RunConfig const& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto catalog = load_catalog(config.tables_dir);
        std::shared_ptr<RewriteOracle> oracle;
        std::optional<ProviderRegistry> registry;
        if (config.provider_config) {
            registry = registry_for(config);
            oracle = registry_oracle(*registry);
        }
        auto popts = planner_options(config.optimizer, load_selectivity_hints(config.tables_dir), oracle);
        auto prepared = prepare_query(sql, catalog, popts);
        out << "baseline push-down plan, est_ai_calls=" << format_estimate(prepared.baseline.total_ai_calls()) << "\n"
            << explain(prepared.baseline) << "\n"
            << "optimized plan (" << to_string(config.optimizer)
            << "), est_ai_calls=" << format_estimate(prepared.optimized.total_ai_calls()) << "\n"
            << explain(prepared.optimized);
    });
}

int cmd_bench(std::filesystem::path const& scenario_path, RunConfig const& config, std::ostream& out,
              std::ostream& err, std::optional<std::filesystem::path> const& csv_path,
              std::optional<std::filesystem::path> const& speedup_path) {
    return guarded(err, [&] {
        auto scenario = load_scenario(scenario_path);
        BenchOptions options;
        options.workers = config.workers;
        options.batch_size = config.batch_size;
        auto rows = run_scenario(scenario, options);
        auto csv = bench_csv(rows);
        auto speedup = speedup_csv(rows);
        if (csv_path) write_file(*csv_path, csv);
        else out << csv;
        if (speedup_path) write_file(*speedup_path, speedup);
        else out << "\n" << speedup;
    });
}

int cmd_ingest(std::filesystem::path const& file, RunConfig const& config, std::optional<std::string> const& name,
               std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto ext = to_lower(file.extension().string());
        Table table;
        if (ext == ".csv") table = read_csv(file);
        else if (ext == ".jsonl") table = read_jsonl(file);
        else throw IngestError("unsupported file type '" + ext + "' (expected .csv or .jsonl)");
        auto table_name = name.value_or(file.stem().string());
        table = Table(table_name, table.schema(), table.rows());

        bool has_files = false;
        for (auto const& c : table.schema().columns()) has_files = has_files || c.kind == ValueKind::File;
        std::filesystem::create_directories(config.tables_dir);
        auto target = config.tables_dir / (table_name + (has_files ? ".jsonl" : ".csv"));
        write_file(target, has_files ? to_jsonl(table) : to_csv(table));

        out << "ingested " << table_name << ": " << table.row_count() << " rows -> " << target.string() << "\n";
        auto const& stats = table.stats();
        for (std::size_t i = 0; i < table.schema().size(); ++i) {
            auto const& c = table.schema()[i];
            char avg[32];
            std::snprintf(avg, sizeof avg, "%.2f", stats.columns[i].avg_token_count);
            out << "  " << c.name << " " << to_string(c.kind) << " distinct=" << stats.columns[i].distinct_count
                << " avg_tokens=" << avg << "\n";
        }
    });
}

}  // namespace semql
