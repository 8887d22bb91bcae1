#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "semql/core/digest.hpp"
#include "semql/core/errors.hpp"
#include "semql/core/ingest.hpp"
#include "semql/core/prompt.hpp"
#include "semql/core/table.hpp"

using namespace semql;

namespace {

std::size_t tokens_oracle(std::size_t bytes) {
    std::size_t t = bytes / 4;
    if (bytes % 4 != 0) ++t;
    return t;
}

Table text_table(std::string name, std::vector<std::string> const& values) {
    std::vector<Row> rows;
    for (auto const& v : values) rows.push_back({Value::text(v)});
    return Table(std::move(name), Schema({{"v", ValueKind::Text}}), std::move(rows));
}

std::filesystem::path scratch_dir(std::string const& name) {
    auto dir = std::filesystem::temp_directory_path() / ("semql_core_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(EstimateTokens, Formula) {
    EXPECT_EQ(estimate_tokens(""), 0u);
    EXPECT_EQ(estimate_tokens("abcdefgh"), 2u);
    EXPECT_EQ(estimate_tokens("a"), 1u);
    EXPECT_EQ(estimate_tokens(std::string(1000, 'x')), 250u);
    for (std::size_t n = 0; n < 300; ++n) EXPECT_EQ(estimate_tokens(std::string(n, 'q')), tokens_oracle(n));
}

TEST(EstimateTokens, MonotoneOverCorpus) {
    std::mt19937_64 rng(11);
    std::vector<std::string> corpus;
    for (int i = 0; i < 200; ++i) corpus.emplace_back(rng() % 2000, 'a' + static_cast<char>(rng() % 26));
    std::sort(corpus.begin(), corpus.end(), [](auto const& a, auto const& b) { return a.size() < b.size(); });
    for (std::size_t i = 1; i < corpus.size(); ++i) {
        EXPECT_LE(estimate_tokens(corpus[i - 1]), estimate_tokens(corpus[i]));
    }
}

TEST(TruncateToTokens, KeepsUtf8Whole) {
    std::string text = "ab\xC3\xA9" "cd";  // 6 bytes, é is two
    auto cut = truncate_to_tokens(text, 1);
    EXPECT_EQ(cut, "ab\xC3\xA9");
    EXPECT_TRUE(is_valid_utf8(truncate_to_tokens("a\xE2\x82\xAC", 0)));
    EXPECT_EQ(truncate_to_tokens("abc\xE2\x82\xAC", 1), "abc");
}

TEST(RenderPrompt, Examples) {
    PromptTemplate a("Is {0} positive?", {"review"});
    EXPECT_EQ(render_prompt(a, {Value::text("great product")}), "Is great product positive?");

    PromptTemplate b("Review {0} is mapped to category {1}", {"review", "label"});
    EXPECT_EQ(render_prompt(b, {Value::text("slow laptop"), Value::text("Electronics")}),
              "Review slow laptop is mapped to category Electronics");

    PromptTemplate c("{0}{0}", {"x"});
    EXPECT_EQ(render_prompt(c, {Value::text("x")}), "xx");
}

TEST(RenderPrompt, OtherBracesVerbatimAndFilesAsUri) {
    PromptTemplate t("{x} {0} {} {1}", {"f", "n"});
    auto f = Value::file(FileRef::make("file:///img/a.png", "image/png", 10));
    EXPECT_EQ(render_prompt(t, {f, Value::integer(7)}), "{x} file:///img/a.png {} 7");
}

TEST(RenderPrompt, ArityMismatch) {
    PromptTemplate t("{0} and {1}", {"a", "b"});
    EXPECT_THROW((void)render_prompt(t, {Value::text("x")}), ArityMismatch);
    EXPECT_THROW((void)render_prompt(t, {Value::text("x"), Value::text("y"), Value::text("z")}), ArityMismatch);
}

TEST(PromptTemplate, ValidatesBindings) {
    EXPECT_THROW(PromptTemplate("{2}", {"a", "b"}), Error);
    EXPECT_THROW(PromptTemplate("{0}", {"a", "b"}), Error);
    EXPECT_NO_THROW(PromptTemplate("no slots", {}));
}

TEST(RenderPrompt, InjectiveWithSeparatedSlots) {
    std::mt19937_64 rng(5);
    auto word = [&] {
        std::string w;
        for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i) w += static_cast<char>('a' + rng() % 3);
        return w;
    };
    for (int trial = 0; trial < 50; ++trial) {
        PromptTemplate t("<" + std::string("A") + ">{0}<B>{1}<C>", {"x", "y"});
        std::set<std::pair<std::string, std::string>> inputs;
        std::set<std::string> outputs;
        for (int i = 0; i < 40; ++i) {
            auto x = word(), y = word();
            if (!inputs.insert({x, y}).second) continue;
            outputs.insert(render_prompt(t, {Value::text(x), Value::text(y)}));
        }
        EXPECT_EQ(inputs.size(), outputs.size());
    }
}

TEST(FindPlaceholders, DigitsOnly) {
    auto ph = find_placeholders("a {0} {x} {12} {");
    ASSERT_EQ(ph.size(), 2u);
    EXPECT_EQ(ph[0].index, 0u);
    EXPECT_EQ(ph[0].offset, 2u);
    EXPECT_EQ(ph[1].index, 12u);
    EXPECT_EQ(ph[1].length, 4u);
}

TEST(Value, KindsAndInvariants) {
    EXPECT_TRUE(Value::real(std::nan("")).is_null());
    EXPECT_TRUE(Value::real(1.0 / 0.0).is_null());
    EXPECT_THROW((void)Value::text("\xFF\xFE"), TypeError);
    EXPECT_EQ(Value::integer(3).compare(Value::integer(5)), std::strong_ordering::less);
    EXPECT_THROW((void)Value::integer(3).compare(Value::real(3.0)), TypeError);
    EXPECT_THROW((void)Value::text("a").compare(Value::null()), TypeError);
    EXPECT_EQ(Value::null(), Value::null());
    EXPECT_EQ(Value::text("it's").to_sql(), "'it''s'");
}

TEST(FileRef, InvariantsAndEquality) {
    EXPECT_THROW((void)FileRef::make("", "image/png"), Error);
    EXPECT_THROW((void)FileRef::make("file:///a", "image/png", -1), Error);
    EXPECT_THROW((void)FileRef::make("file:///a", "png"), Error);
    auto a = FileRef::make("file:///a", "IMAGE/PNG", 1);
    EXPECT_EQ(a.mime_type, "image/png");
    EXPECT_EQ(a, FileRef::make("file:///a", "application/pdf", 99));
}

TEST(FlIsImage, PrefixRule) {
    struct Case {
        char const* mime;
        bool image;
    };
    for (auto c : {Case{"image/png", true}, Case{"application/pdf", false}, Case{"image/svg+xml", true},
                   Case{"text/plain", false}, Case{"image/jpeg", true}, Case{"video/mp4", false}}) {
        std::string m = c.mime;
        bool oracle = m.rfind("image/", 0) == 0;
        EXPECT_EQ(oracle, c.image);
        EXPECT_EQ(fl_is_image(FileRef::make("file:///x", m)), c.image) << m;
    }
}

TEST(Table, ValidatesRows) {
    Schema s({{"a", ValueKind::Int}, {"b", ValueKind::Text}});
    EXPECT_THROW(Table("t", s, {{Value::integer(1)}}), Error);
    EXPECT_THROW(Table("t", s, {{Value::text("x"), Value::text("y")}}), TypeError);
    EXPECT_NO_THROW(Table("t", s, {{Value::null(), Value::null()}}));
    EXPECT_THROW(Schema({{"a", ValueKind::Int}, {"A", ValueKind::Int}}), Error);
    EXPECT_EQ(s.find("B"), std::optional<std::size_t>(1));
}

TEST(ComputeStats, Examples) {
    auto empty = text_table("e", {});
    EXPECT_EQ(empty.stats().row_count, 0u);
    EXPECT_EQ(empty.stats().columns[0].distinct_count, 0u);

    auto cats = text_table("categories", {"Electronics", "Books", "Clothing", "Home", "Toys", "Sports"});
    EXPECT_EQ(cats.stats().columns[0].distinct_count, 6u);

    std::vector<std::string> vals;
    for (int i = 0; i < 100; ++i) vals.push_back(i % 3 == 0 ? "red" : i % 3 == 1 ? "green" : "blue");
    auto t = text_table("t", vals);
    std::set<std::string> brute(vals.begin(), vals.end());
    EXPECT_EQ(t.stats().columns[0].distinct_count, brute.size());
}

TEST(ComputeStats, MeansSamplesAndCounts) {
    std::mt19937_64 rng(3);
    std::vector<Row> rows;
    std::vector<std::string> seen;
    double sum = 0;
    std::size_t n = 0, mx = 0;
    for (int i = 0; i < 500; ++i) {
        if (rng() % 7 == 0) {
            rows.push_back({Value::null()});
            continue;
        }
        std::string v(rng() % 40, 'k');
        v += std::to_string(rng() % 30);
        rows.push_back({Value::text(v)});
        sum += static_cast<double>(tokens_oracle(v.size()));
        mx = std::max(mx, tokens_oracle(v.size()));
        ++n;
        if (std::find(seen.begin(), seen.end(), v) == seen.end()) seen.push_back(v);
    }
    Table t("t", Schema({{"v", ValueKind::Text}}), rows);
    auto const& st = t.stats();
    EXPECT_EQ(st.row_count, rows.size());
    EXPECT_NEAR(st.columns[0].avg_token_count, sum / static_cast<double>(n), 1e-9);
    EXPECT_EQ(st.columns[0].max_token_count, mx);
    EXPECT_LE(st.columns[0].distinct_count, st.row_count);
    ASSERT_EQ(st.columns[0].sample_values.size(), kMaxSampleValues);
    for (std::size_t i = 0; i < kMaxSampleValues; ++i) EXPECT_EQ(st.columns[0].sample_values[i].as_text(), seen[i]);
}

TEST(Catalog, CaseInsensitive) {
    Catalog c;
    c.add(std::make_shared<Table>(text_table("Reviews", {"a"})));
    EXPECT_NE(c.find("reviews"), nullptr);
    EXPECT_THROW((void)c.get("nope"), NameError);
}

TEST(Digest, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_NE(stable_hash64("a", 1), stable_hash64("a", 2));
    EXPECT_LT(unit_interval(~0ULL), 1.0);
}

TEST(Ingest, CsvKindInference) {
    auto t = parse_csv("t", "a,b,c,d\n1,2.5,x,\n2,3,\"y,z\",\n,4,w,\n");
    EXPECT_EQ(t.schema()[0].kind, ValueKind::Int);
    EXPECT_EQ(t.schema()[1].kind, ValueKind::Float);
    EXPECT_EQ(t.schema()[2].kind, ValueKind::Text);
    EXPECT_EQ(t.rows()[1][2].as_text(), "y,z");
    EXPECT_TRUE(t.rows()[2][0].is_null());
    EXPECT_EQ(t.stats().row_count, 3u);
}

TEST(Ingest, CsvFileColumnWithSidecar) {
    auto dir = scratch_dir("file");
    std::ofstream(dir / "a.png") << "png";
    std::ofstream(dir / "b.pdf") << "pdf";
    std::ofstream(dir / "a.png.meta.json") << R"({"mime_type": "image/png", "size_bytes": 1234, "created_at": 99})";
    auto csv = "id,f\n1,file://" + (dir / "a.png").string() + "\n2,file://" + (dir / "b.pdf").string() + "\n";
    auto t = parse_csv("t", csv, dir);
    ASSERT_EQ(t.schema()[1].kind, ValueKind::File);
    auto const& a = t.rows()[0][1].as_file();
    EXPECT_EQ(a.size_bytes, 1234);
    EXPECT_EQ(a.created_at, 99);
    EXPECT_TRUE(fl_is_image(a));
    auto const& b = t.rows()[1][1].as_file();
    EXPECT_EQ(b.mime_type, "application/pdf");
    EXPECT_EQ(b.size_bytes, 3);
}

TEST(Ingest, JsonlAndRoundTrip) {
    auto t = parse_jsonl("t", R"({"id": 1, "name": "a", "img": {"uri": "file:///x.png", "mime_type": "image/png"}}
{"id": 2, "name": null, "img": {"uri": "file:///y.jpg", "mime_type": "image/jpeg"}}
)");
    ASSERT_EQ(t.schema().size(), 3u);
    EXPECT_EQ(t.schema()[2].kind, ValueKind::File);
    EXPECT_TRUE(t.rows()[1][1].is_null());

    auto dir = scratch_dir("cat");
    auto src = text_table("notes", {"alpha", "be,ta"});
    std::ofstream(dir / "notes.csv") << to_csv(src);
    auto cat = load_catalog(dir);
    auto back = cat.get("notes");
    EXPECT_EQ(back->rows(), src.rows());
}
