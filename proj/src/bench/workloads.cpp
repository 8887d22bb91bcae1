#include "semql/bench/workloads.hpp"

#include <cmath>
#include <cstdio>

#include "semql/core/digest.hpp"
#include "semql/core/errors.hpp"
#include "semql/core/prompt.hpp"
#include "semql/parser/parser.hpp"

namespace semql {

namespace {

constexpr std::string_view kWords[] = {
    "system", "query",  "latency", "storage", "index",   "cluster", "model",  "vector", "plan",
    "buffer", "memory", "network", "sample",  "cache",   "shard",   "stream", "window", "engine",
    "table",  "column", "report",  "market",  "weather", "policy",  "budget", "review", "signal",
};

std::string filler(std::uint64_t seed, std::size_t words) {
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        auto w = kWords[mix64(seed * 1000003 + i) % std::size(kWords)];
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

TablePtr make_table(std::string name, std::vector<ColumnDef> columns, std::vector<Row> rows) {
    return std::make_shared<Table const>(std::move(name), Schema(std::move(columns)), std::move(rows));
}

nlohmann::json keyword_provider(std::string const& name, std::vector<std::string> keywords) {
    return {{"name", name}, {"kind", "synthetic"}, {"params", {{"profile", "oracle"}, {"keywords", keywords}}}};
}

std::string pad3(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%03zu", i);
    return buf;
}

}  // namespace

std::string where_key(std::string const& sql, std::size_t i) { return print(parse(sql).where.at(i)); }

Workload papers_images_workload() {
    Workload w;
    w.name = "papers_images";
    std::vector<Row> papers;
    papers.reserve(100000);
    for (std::int64_t id = 0; id < 100000; ++id) {
        bool recent = id % 10 == 0 && id < 3000;
        bool energy = id % 100 < 10;
        std::string abstract = "Paper " + std::to_string(id) + " " +
                               (energy ? "measures joules-per-query of analytical engines. "
                                       : "studies cardinality estimation. ") +
                               filler(static_cast<std::uint64_t>(id), 48);
        papers.push_back({Value::integer(id), Value::text("Paper title " + std::to_string(id)),
                          Value::integer(recent ? 2012 : 2004), Value::text(std::move(abstract))});
    }
    std::vector<Row> images;
    images.reserve(10000);
    for (std::int64_t id = 0; id < 100000; id += 10) {
        auto uri = "s3://papers/fig_" + std::to_string(id) + (id % 20 == 0 ? "_tpch-energy" : "_latency") + ".png";
        images.push_back({Value::integer(id), Value::file(FileRef::make(uri, "image/png", 20480))});
    }
    w.catalog.add(make_table("papers",
                             {{"id", ValueKind::Int}, {"title", ValueKind::Text}, {"date", ValueKind::Int},
                              {"abstract", ValueKind::Text}},
                             std::move(papers)));
    w.catalog.add(make_table("paper_images", {{"id", ValueKind::Int}, {"image_file", ValueKind::File}},
                             std::move(images)));
    w.query =
        "SELECT p.id, p.title FROM papers p JOIN paper_images i ON p.id = i.id "
        "WHERE AI_FILTER(PROMPT('Abstract {0} discusses energy efficiency in database systems', p.abstract)) "
        "AND p.date BETWEEN 2010 AND 2015 "
        "AND AI_FILTER(PROMPT('Image {0} shows energy consumption of different systems using the TPC-H "
        "workload', i.image_file))";
    w.selectivity_hints[where_key(w.query, 0)] = 0.1;
    w.selectivity_hints[where_key(w.query, 1)] = 0.003;
    w.providers = nlohmann::json::array({keyword_provider("default", {"joules-per-query", "tpch-energy"})});
    return w;
}

Workload review_category_workload() {
    Workload w;
    w.name = "review_category";
    std::vector<std::string> reviews = {
        "Great electronics purchase, the headphones sound crisp.",
        "The kitchen blender is loud, and the books I ordered arrived late.",
        "These toys broke within a week.",
        "Comfortable footwear that runs a bit small.",
    };
    std::vector<std::string> labels = {"electronics", "clothing", "kitchen", "books", "toys", "footwear"};
    std::vector<Row> rrows;
    for (std::size_t i = 0; i < reviews.size(); ++i) {
        rrows.push_back({Value::integer(static_cast<std::int64_t>(i + 1)), Value::text(reviews[i])});
    }
    std::vector<Row> lrows;
    for (auto const& l : labels) lrows.push_back({Value::text(l)});
    w.catalog.add(make_table("Reviews", {{"id", ValueKind::Int}, {"review", ValueKind::Text}}, std::move(rrows)));
    w.catalog.add(make_table("Categories", {{"label", ValueKind::Text}}, std::move(lrows)));
    w.query =
        "SELECT * FROM Reviews JOIN Categories "
        "ON AI_FILTER(PROMPT('Review {0} is mapped to category {1}', Reviews.review, Categories.label))";
    w.providers = nlohmann::json::array(
        {{{"name", "default"},
          {"kind", "synthetic"},
          {"params", {{"profile", "oracle"}, {"truth", "mention"}, {"marker", "is mapped to category "}}}}});
    return w;
}

Workload rewrite_workload(std::size_t rows, std::size_t labels, std::size_t chunks, std::uint64_t seed,
                          double false_positive_rate) {
    if (rows == 0 || labels == 0 || chunks == 0) throw ScenarioParseError("rewrite workload sizes must be positive");
    Workload w;
    w.name = "rewrite";
    std::vector<Row> rrows;
    std::vector<Row> truth;
    for (std::size_t i = 0; i < rows; ++i) {
        auto a = mix64(seed * 7919 + i) % labels;
        auto b = mix64(seed * 7919 + i + 1000003) % labels;
        auto text = "Ticket " + std::to_string(i) + " about topic-" + pad3(a) + " and topic-" + pad3(b) + ": " +
                    filler(seed + i, 12);
        rrows.push_back({Value::integer(static_cast<std::int64_t>(i)), Value::text(text)});
    }
    std::vector<Row> lrows;
    for (std::size_t j = 0; j < labels; ++j) lrows.push_back({Value::text("topic-" + pad3(j))});
    auto reviews = make_table("reviews", {{"id", ValueKind::Int}, {"review", ValueKind::Text}}, std::move(rrows));
    auto categories = make_table("categories", {{"label", ValueKind::Text}}, std::move(lrows));

    std::string prompt = "Review {0} is mapped to category {1}";
    auto instruction_tokens = estimate_tokens(render_template(prompt, {"", ""}));
    auto max_row = reviews->stats().columns[1].max_token_count;
    auto max_label = categories->stats().columns[0].max_token_count;
    auto per_chunk = (labels + chunks - 1) / chunks;
    w.context_window_tokens = instruction_tokens + max_row + per_chunk * max_label;

    w.catalog.add(reviews);
    w.catalog.add(categories);
    w.query = "SELECT r.id, c.label FROM reviews r JOIN categories c "
              "ON AI_FILTER(PROMPT('" + prompt + "', r.review, c.label))";
    w.providers = nlohmann::json::array({{{"name", "default"},
                                          {"kind", "synthetic"},
                                          {"params",
                                           {{"profile", "oracle"},
                                            {"truth", "mention"},
                                            {"marker", "is mapped to category "},
                                            {"false_positive_rate", false_positive_rate},
                                            {"seed", seed}}}}});
    return w;
}

Workload nyt_workload(double in_selectivity, std::size_t rows) {
    auto groups = static_cast<std::size_t>(std::lround(in_selectivity * 10.0));
    if (groups == 0 || groups > 10) throw ScenarioParseError("nyt in_selectivity must be in [0.1, 1.0]");
    Workload w;
    w.name = "nyt";
    std::vector<Row> out;
    for (std::size_t i = 0; i < rows; ++i) {
        auto group = static_cast<std::int64_t>(i % 10);
        bool finance = i % 4 == 0;
        auto title = "Article " + std::to_string(i) + (finance ? " from the markets-desk: " : " from the city desk: ") +
                     filler(i + 17, 150);
        bool expected = finance && static_cast<std::size_t>(group) < groups;
        out.push_back({Value::integer(static_cast<std::int64_t>(i)), Value::integer(1990 + static_cast<std::int64_t>(i % 30)),
                       Value::text(title), Value::integer(group), Value::boolean(expected)});
    }
    w.catalog.add(make_table("NYT_ARTICLES",
                             {{"id", ValueKind::Int}, {"year", ValueKind::Int}, {"title", ValueKind::Text},
                              {"id_group", ValueKind::Int}, {"expected", ValueKind::Bool}},
                             std::move(out)));
    std::string list;
    for (std::size_t g = 0; g < groups; ++g) list += (g ? ", " : "") + std::to_string(g);
    w.query = "SELECT year, title FROM NYT_ARTICLES "
              "WHERE AI_FILTER(PROMPT('The article title is about finance: {0}', title), {'model': 'llama3.1-70b'}) "
              "AND id_group IN (" + list + ")";
    w.providers = nlohmann::json::array({keyword_provider("default", {"markets-desk"})});
    w.truth = TruthSpec{"NYT_ARTICLES", "title", "expected"};
    return w;
}

Workload join_ratio_workload(double ratio, std::size_t rows) {
    if (!(ratio > 0.0) || rows == 0) throw ScenarioParseError("join_ratio needs ratio > 0 and rows > 0");
    Workload w;
    w.name = "join_ratio";
    auto m = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(rows)));
    std::vector<Row> tickets;
    for (std::size_t i = 0; i < rows; ++i) {
        auto text = "Ticket " + std::to_string(i) + (i % 2 == 0 ? " disputes an invoice-charge. " : " asks about setup. ") +
                    filler(i + 5, 24);
        tickets.push_back({Value::integer(static_cast<std::int64_t>(i)), Value::integer(static_cast<std::int64_t>(i)),
                           Value::text(text)});
    }
    std::vector<Row> events;
    for (std::size_t j = 0; j < m; ++j) {
        events.push_back({Value::integer(static_cast<std::int64_t>(j % rows)), Value::text("event " + std::to_string(j))});
    }
    w.catalog.add(make_table("tickets", {{"id", ValueKind::Int}, {"k", ValueKind::Int}, {"body", ValueKind::Text}},
                             std::move(tickets)));
    w.catalog.add(make_table("events", {{"k", ValueKind::Int}, {"info", ValueKind::Text}}, std::move(events)));
    w.query = "SELECT t.id, e.info FROM tickets t JOIN events e ON t.k = e.k "
              "WHERE AI_FILTER(PROMPT('Ticket {0} reports a billing problem', t.body))";
    w.providers = nlohmann::json::array({keyword_provider("default", {"invoice-charge"})});
    return w;
}

Workload cascade_workload(std::size_t dataset, std::size_t rows, std::uint64_t seed) {
    static constexpr double kRates[kCascadeDatasets] = {0.3, 0.4, 0.5, 0.6, 0.7, 0.45};
    if (dataset >= kCascadeDatasets) throw ScenarioParseError("cascade dataset must be in [0, 5]");
    Workload w;
    w.name = "cascade" + std::to_string(dataset);
    std::vector<Row> docs;
    for (std::size_t i = 0; i < rows; ++i) {
        double u = unit_interval(mix64((dataset + 1) * 0x9e3779b97f4a7c15ULL + i));
        bool positive = u < kRates[dataset];
        auto body = "Report " + std::to_string(dataset) + "-" + std::to_string(i) +
                    (positive ? " describes a flagged-incident. " : " describes routine work. ") +
                    filler(dataset * 100000 + i, 10);
        docs.push_back({Value::integer(static_cast<std::int64_t>(i)), Value::text(body), Value::boolean(positive)});
    }
    w.catalog.add(make_table("docs", {{"id", ValueKind::Int}, {"body", ValueKind::Text}, {"label", ValueKind::Bool}},
                             std::move(docs)));
    w.query = "SELECT id FROM docs WHERE AI_FILTER(PROMPT('Document {0} reports a safety incident', body))";
    std::vector<std::string> keywords = {"flagged-incident"};
    w.providers = nlohmann::json::array(
        {keyword_provider("default", keywords), keyword_provider("oracle", keywords),
         {{"name", "proxy"},
          {"kind", "synthetic"},
          {"params",
           {{"profile", "hard_easy"},
            {"accuracy", 0.8},
            {"hard_fraction", 0.2},
            {"easy_accuracy", 1.0},
            {"keywords", keywords},
            {"seed", seed}}}}});
    w.truth = TruthSpec{"docs", "id", "label"};
    return w;
}

Workload make_workload(std::string const& generator, nlohmann::json const& params) {
    try {
        if (generator == "papers_images") return papers_images_workload();
        if (generator == "review_category") return review_category_workload();
        if (generator == "rewrite") {
            return rewrite_workload(params.value("rows", std::size_t{500}), params.value("labels", std::size_t{500}),
                                    params.value("chunks", std::size_t{3}), params.value("seed", std::uint64_t{0}),
                                    params.value("false_positive_rate", 0.0));
        }
        if (generator == "nyt") {
            return nyt_workload(params.value("in_selectivity", 0.1), params.value("rows", std::size_t{1000}));
        }
        if (generator == "join_ratio") {
            return join_ratio_workload(params.value("ratio", 1.0), params.value("rows", std::size_t{1000}));
        }
        if (generator == "cascade") {
            return cascade_workload(params.value("dataset", std::size_t{0}), params.value("rows", std::size_t{2000}),
                                    params.value("seed", std::uint64_t{0}));
        }
    } catch (nlohmann::json::exception const& e) {
        throw ScenarioParseError("bad parameters for generator '" + generator + "': " + e.what());
    }
    throw ScenarioParseError("unknown generator '" + generator + "'");
}

}  // namespace semql
