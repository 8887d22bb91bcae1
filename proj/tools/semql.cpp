#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "semql/cli/session.hpp"

namespace {

struct Flags {
    std::string tables = ".";
    std::string providers;
    std::string optimizer;
    std::string cascade;
    std::uint64_t seed = 0;
    std::string stats;
    std::string format = "table";
    std::string record;
    std::size_t workers = 4;
    std::size_t batch_size = 64;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--tables", f.tables, "Directory of *.csv / *.jsonl tables");
    cmd->add_option("--providers", f.providers, "Provider config (JSON)");
    cmd->add_option("--optimizer", f.optimizer, "reorder=on|off,placement=auto|pullup|pushdown,rewrite=on|off");
    cmd->add_option("--cascade", f.cascade, "oracle_budget=N[,target_precision=P,...]");
    cmd->add_option("--seed", f.seed, "Seed for synthetic providers and sampling");
    cmd->add_option("--stats", f.stats, "Write ExecStats JSON to this file");
    cmd->add_option("--format", f.format, "table | csv | json");
    cmd->add_option("--record", f.record, "Append every provider call to this fixture");
    cmd->add_option("--workers", f.workers, "Worker threads");
    cmd->add_option("--batch-size", f.batch_size, "Rows per morsel");
}

semql::RunConfig to_config(Flags const& f) {
    semql::RunConfig c;
    c.tables_dir = f.tables;
    if (!f.providers.empty()) c.provider_config = f.providers;
    if (!f.optimizer.empty()) c.optimizer = semql::parse_optimizer_flags(f.optimizer);
    if (!f.cascade.empty()) c.cascade = semql::parse_cascade_flags(f.cascade);
    c.seed = f.seed;
    c.format = semql::parse_output_format(f.format);
    if (!f.stats.empty()) c.stats_path = f.stats;
    if (!f.record.empty()) c.record_path = f.record;
    c.workers = f.workers;
    c.batch_size = f.batch_size;
    return c;
}

std::string read_sql(std::string const& sql, std::string const& file) {
    if (file.empty()) return sql;
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semql: SQL with AI operators over in-memory tables"};
    app.require_subcommand(1);
    Flags flags;
    std::string sql, sql_file, scenario, csv_out, speedup_out, ingest_file, ingest_name;

    auto* run = app.add_subcommand("run", "Execute a query");
    run->add_option("sql", sql, "Query text");
    run->add_option("-f,--file", sql_file, "Read the query from a file");
    add_common(run, flags);

    auto* explain = app.add_subcommand("explain", "Show the baseline and optimized plans");
    explain->add_option("sql", sql, "Query text");
    explain->add_option("-f,--file", sql_file, "Read the query from a file");
    add_common(explain, flags);

    auto* bench = app.add_subcommand("bench", "Run a benchmark scenario");
    bench->add_option("scenario", scenario, "Scenario JSON")->required();
    bench->add_option("--out", csv_out, "Write the results CSV here");
    bench->add_option("--speedup", speedup_out, "Write the speedup CSV here");
    add_common(bench, flags);

    auto* ingest = app.add_subcommand("ingest", "Load a CSV/JSONL file into the tables directory");
    ingest->add_option("file", ingest_file, "Input file")->required();
    ingest->add_option("--name", ingest_name, "Table name (default: file stem)");
    add_common(ingest, flags);

    CLI11_PARSE(app, argc, argv);

    semql::RunConfig config;
    std::string text;
    try {
        config = to_config(flags);
        if (run->parsed() || explain->parsed()) {
            text = read_sql(sql, sql_file);
            if (text.empty()) throw std::runtime_error("no query given");
        }
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    if (run->parsed()) return semql::cmd_run(text, config, std::cout, std::cerr);
    if (explain->parsed()) return semql::cmd_explain(text, config, std::cout, std::cerr);
    if (bench->parsed()) {
        std::optional<std::filesystem::path> csv, speedup;
        if (!csv_out.empty()) csv = csv_out;
        if (!speedup_out.empty()) speedup = speedup_out;
        return semql::cmd_bench(scenario, config, std::cout, std::cerr, csv, speedup);
    }
    std::optional<std::string> name;
    if (!ingest_name.empty()) name = ingest_name;
    return semql::cmd_ingest(ingest_file, config, name, std::cout, std::cerr);
}
