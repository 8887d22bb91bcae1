#include <gtest/gtest.h>

#include <random>

#include "semql/core/errors.hpp"
#include "semql/parser/lower.hpp"
#include "semql/parser/parser.hpp"

using namespace semql;

namespace {

constexpr char const* kPapersImagesQuery =
    "SELECT AI_SUMMARIZE_AGG(p.abstract)\n"
    "FROM papers p JOIN paper_images i ON p.id = i.id\n"
    "WHERE p.date between 2010 and 2015 AND\n"
    "    AI_FILTER(PROMPT('Abstract {0} discusses energy efficiency in database systems', p.abstract))\n"
    "    AND AI_FILTER(PROMPT('Image {0} shows energy consumption of different systems using the TPC-H workload',\n"
    "    i.image_file));";

constexpr char const* kReviewCategoryQuery =
    "SELECT * FROM\n"
    "Reviews JOIN Categories\n"
    "ON AI_FILTER(PROMPT('Review {0} is mapped to category {1}',\n"
    "    Reviews.review, Categories.label));";

constexpr char const* kNytQuery =
    "SELECT year, title FROM NYT_ARTICLES\n"
    "  WHERE id_group IN (1, 2, 3) AND AI_FILTER(PROMPT('The article title is about finance: {0}', title), "
    "{'model': 'llama3.1-70b'});";

TablePtr table(std::string name, std::vector<ColumnDef> cols) {
    return std::make_shared<Table>(std::move(name), Schema(std::move(cols)), std::vector<Row>{});
}

Catalog paper_catalog() {
    Catalog c;
    c.add(table("papers", {{"id", ValueKind::Int}, {"title", ValueKind::Text}, {"date", ValueKind::Int},
                           {"abstract", ValueKind::Text}}));
    c.add(table("paper_images", {{"id", ValueKind::Int}, {"image_file", ValueKind::File}}));
    c.add(table("Reviews", {{"review", ValueKind::Text}}));
    c.add(table("Categories", {{"label", ValueKind::Text}}));
    c.add(table("product_reviews", {{"review", ValueKind::Text}, {"product_id", ValueKind::Int}}));
    return c;
}

std::vector<NodeKind> spine(PlanNode const& n) {
    std::vector<NodeKind> out;
    visit(n, [&](PlanNode const& x) { out.push_back(x.kind); });
    return out;
}

}  // namespace

TEST(Parse, PapersImagesQuery) {
    auto ast = parse(kPapersImagesQuery);
    ASSERT_TRUE(ast.join.has_value());
    EXPECT_EQ(ast.join->on.size(), 1u);
    EXPECT_EQ(ast.where.size(), 3u);
    ASSERT_EQ(ast.items.size(), 1u);
    EXPECT_TRUE(ast.items[0].expr.is_aggregate());
    EXPECT_EQ(ast.items[0].expr.ai->kind, AiKind::SummarizeAgg);
    EXPECT_EQ(ast.where[0].kind, ExprKind::Between);
    EXPECT_EQ(ast.where[2].ai->kind, AiKind::Filter);
}

TEST(Parse, SelectConstant) {
    auto ast = parse("SELECT 1");
    EXPECT_FALSE(ast.from.has_value());
    ASSERT_EQ(ast.items.size(), 1u);
    EXPECT_EQ(ast.items[0].expr.literal, Value::integer(1));
}

TEST(Parse, ReviewCategoryQuery) {
    auto ast = parse(kReviewCategoryQuery);
    EXPECT_TRUE(ast.select_star);
    ASSERT_EQ(ast.join->on.size(), 1u);
    auto const& on = ast.join->on[0];
    ASSERT_EQ(on.kind, ExprKind::AiCall);
    EXPECT_EQ(on.ai->kind, AiKind::Filter);
    EXPECT_TRUE(on.ai->prompt_object);
    EXPECT_EQ(on.ai->bindings.size(), 2u);
}

TEST(Parse, OptionsMapAndLiterals) {
    auto ast = parse(kNytQuery);
    ASSERT_EQ(ast.where.size(), 2u);
    EXPECT_EQ(ast.where[0].kind, ExprKind::In);
    EXPECT_EQ(ast.where[0].args.size(), 4u);
    EXPECT_EQ(ast.where[1].ai->options.at("model"), "llama3.1-70b");
    auto esc = parse("SELECT 'it''s'");
    EXPECT_EQ(esc.items[0].expr.literal.as_text(), "it's");
}

TEST(Parse, ClassifyAggAndFileFunctions) {
    auto a = parse(
        "SELECT AI_CLASSIFY(review,['positive','neutral','negative'], 'Classify the sentiment of this product "
        "review.') AS sentiment, COUNT(*) AS review_count FROM product_reviews GROUP BY sentiment;");
    auto const& c = *a.items[0].expr.ai;
    EXPECT_EQ(c.kind, AiKind::Classify);
    EXPECT_EQ(c.labels.size(), 3u);
    EXPECT_EQ(c.instruction, std::optional<std::string>("Classify the sentiment of this product review."));
    EXPECT_EQ(a.items[1].expr.kind, ExprKind::Count);
    EXPECT_EQ(a.group_by.size(), 1u);

    auto b = parse(
        "SELECT AI_COMPLETE('claude-3-5-sonnet', 'Identify the kitchen appliance brands from the image', "
        "marketing_content.file_ref) FROM marketing_content WHERE FL_IS_IMAGE(marketing_content.file_ref);");
    EXPECT_TRUE(b.items[0].expr.ai->model_argument);
    EXPECT_EQ(b.where[0].kind, ExprKind::FlIsImage);

    auto d = parse("SELECT product_id, AI_AGG(review, 'Identify complaints') FROM user_reviews GROUP BY product_id");
    EXPECT_EQ(d.items[1].expr.ai->kind, AiKind::Agg);

    auto e = parse("SELECT * FROM t WHERE AI_FILTER('is this spam?')");
    EXPECT_TRUE(e.where[0].ai->bindings.empty());
}

TEST(Parse, KeywordsCaseInsensitive) {
    EXPECT_EQ(parse("select a from t where a between 1 and 2"), parse("SELECT a FROM t WHERE a BETWEEN 1 AND 2"));
}

TEST(Parse, SyntaxErrorsCarryPosition) {
    try {
        (void)parse("SELECT a\nFROM t WHERE");
        FAIL();
    } catch (SyntaxError const& e) {
        EXPECT_EQ(e.line(), 2);
        EXPECT_GE(e.column(), 13);
        EXPECT_FALSE(e.expected().empty());
    }
    EXPECT_THROW((void)parse("SELECT FROM t"), SyntaxError);
    EXPECT_THROW((void)parse("SELECT 'open"), SyntaxError);
    EXPECT_THROW((void)parse("SELECT a FROM t WHERE AI_FILTER('x') OR a = 1"), SyntaxError);
    EXPECT_THROW((void)parse("SELECT a FROM t; SELECT b FROM t"), SyntaxError);
}

TEST(Parse, PrintFixpointOnSampleQueries) {
    for (auto const* sql : {kPapersImagesQuery, kReviewCategoryQuery, kNytQuery}) {
        auto ast = parse(sql);
        EXPECT_EQ(parse(print(ast)), ast) << print(ast);
    }
}

TEST(Parse, PrintFixpointOnGeneratedQueries) {
    std::mt19937_64 rng(17);
    auto pick = [&](std::vector<std::string> const& v) { return v[rng() % v.size()]; };
    std::vector<std::string> cols = {"a", "t.b", "c", "u.d"};
    std::vector<std::string> lits = {"1", "-2", "3.5", "'x'", "'it''s'", "TRUE", "NULL"};
    auto pred = [&]() -> std::string {
        switch (rng() % 6) {
            case 0: return pick(cols) + " " + pick({"=", "<>", "<", "<=", ">", ">="}) + " " + pick(lits);
            case 1: return pick(cols) + " BETWEEN 1 AND 9";
            case 2: return pick(cols) + (rng() % 2 ? " NOT" : "") + " IN (1, 2, 3)";
            case 3: return "AI_FILTER(PROMPT('is {0} about {1}', " + pick(cols) + ", " + pick(cols) + "))";
            case 4: return "AI_FILTER('plain', {'model': 'm" + std::to_string(rng() % 3) + "'})";
            default: return "FL_IS_IMAGE(" + pick(cols) + ")";
        }
    };
    for (int i = 0; i < 300; ++i) {
        std::string sql = "SELECT ";
        switch (rng() % 3) {
            case 0: sql += "*"; break;
            case 1: sql += pick(cols) + " AS x, AI_COMPLETE(PROMPT('sum {0}', " + pick(cols) + "))"; break;
            default: sql += pick(cols) + ", COUNT(*), AI_SUMMARIZE_AGG(" + pick(cols) + ")"; break;
        }
        sql += " FROM t";
        if (rng() % 2) sql += " JOIN u ON t.b = u.d";
        std::size_t n = rng() % 4;
        for (std::size_t k = 0; k < n; ++k) sql += (k == 0 ? " WHERE " : " AND ") + pred();
        auto ast = parse(sql);
        auto again = parse(print(ast));
        EXPECT_EQ(again, ast) << sql;
        EXPECT_EQ(print(again), print(ast));
    }
}

TEST(Lower, PapersImagesPushesEveryConjunct) {
    auto plan = lower(parse(kPapersImagesQuery), paper_catalog());
    auto const& agg = plan.root;
    ASSERT_EQ(agg.kind, NodeKind::Aggregate);
    auto const& join = agg.children[0];
    ASSERT_EQ(join.kind, NodeKind::Join);
    EXPECT_EQ(join.equi_keys.size(), 1u);

    auto const* left = &join.children[0];
    std::vector<std::string> left_preds;
    while (left->kind == NodeKind::Filter) {
        left_preds.push_back(left->pred.text());
        left = &left->children[0];
    }
    EXPECT_EQ(left->kind, NodeKind::Scan);
    EXPECT_EQ(left->table, "papers");
    ASSERT_EQ(left_preds.size(), 2u);
    EXPECT_NE(left_preds[0].find("AI_FILTER"), std::string::npos);  // outermost = written last
    EXPECT_NE(left_preds[1].find("BETWEEN"), std::string::npos);

    auto const& right = join.children[1];
    ASSERT_EQ(right.kind, NodeKind::Filter);
    EXPECT_NE(right.pred.text().find("Image"), std::string::npos);
    EXPECT_EQ(right.children[0].table, "paper_images");
}

TEST(Lower, ScanProjectAndErrors) {
    auto cat = paper_catalog();
    auto plan = lower(parse("SELECT title FROM papers"), cat);
    EXPECT_EQ(spine(plan.root), (std::vector<NodeKind>{NodeKind::Project, NodeKind::Scan}));
    EXPECT_THROW((void)lower(parse("SELECT nope FROM papers"), cat), NameError);
    EXPECT_THROW((void)lower(parse("SELECT title FROM nope"), cat), NameError);
    EXPECT_THROW((void)lower(parse("SELECT title FROM papers WHERE AI_COMPLETE('x')"), cat), TypeError);
    EXPECT_THROW((void)lower(parse("SELECT title FROM papers WHERE date = 'x'"), cat), TypeError);
    EXPECT_THROW((void)parse("SELECT AI_FILTER(PROMPT('{0}', title)) FROM papers"), SyntaxError);
    auto ast = parse("SELECT title FROM papers");
    ast.items[0].expr = parse("SELECT 1 FROM papers WHERE AI_FILTER(PROMPT('{0}', title))").where[0];
    EXPECT_THROW((void)lower(ast, cat), TypeError);
}

TEST(Lower, ReviewCategoryJoinPredicateKeepsOptions) {
    auto cat = paper_catalog();
    auto plan = lower(parse("SELECT * FROM Reviews JOIN Categories ON AI_FILTER(PROMPT('Review {0} is mapped to "
                            "category {1}', Reviews.review, Categories.label), {'model': 'm1', 'x': 'y'})"),
                      cat);
    auto const& join = plan.root.children[0];
    ASSERT_EQ(join.kind, NodeKind::Join);
    ASSERT_TRUE(join.join_pred.has_value());
    auto const& opts = join.join_pred->expr.ai->options;
    EXPECT_EQ(opts, (std::map<std::string, std::string>{{"model", "m1"}, {"x", "y"}}));
    EXPECT_EQ(plan.root.names, (std::vector<std::string>{"review", "label"}));
}

TEST(Lower, DuplicateOutputNamesAreQualified) {
    auto plan = lower(parse("SELECT * FROM papers p JOIN paper_images i ON p.id = i.id"), paper_catalog());
    EXPECT_EQ(plan.root.names[0], "id");
    EXPECT_EQ(plan.root.names[4], "i.id");
}

TEST(Lower, GroupByAliasAndImplicitKeys) {
    auto cat = paper_catalog();
    auto plan = lower(parse("SELECT AI_CLASSIFY(review, ['a', 'b']) AS sentiment, COUNT(*) AS n FROM product_reviews "
                            "GROUP BY sentiment"),
                      cat);
    ASSERT_EQ(plan.root.kind, NodeKind::Aggregate);
    ASSERT_EQ(plan.root.group_keys.size(), 1u);
    EXPECT_EQ(plan.root.group_keys[0].kind, ExprKind::AiCall);

    auto implicit = lower(parse("SELECT product_id, COUNT(*) FROM product_reviews"), cat);
    EXPECT_EQ(implicit.root.group_keys.size(), 1u);
    EXPECT_THROW((void)lower(parse("SELECT review, COUNT(*) FROM product_reviews GROUP BY product_id"), cat),
                 TypeError);
}
