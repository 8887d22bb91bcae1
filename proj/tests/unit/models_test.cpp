#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "semql/core/digest.hpp"
#include "semql/core/errors.hpp"
#include "semql/models/http.hpp"
#include "semql/models/registry.hpp"
#include "semql/models/scripted.hpp"
#include "semql/models/synthetic.hpp"

using namespace semql;

namespace {

ModelRequest filter_request(std::string prompt, std::string model = "m") {
    ModelRequest r;
    r.task = Task::FilterBool;
    r.model_name = std::move(model);
    r.prompt = std::move(prompt);
    return r;
}

ModelResponse bool_response(bool b, double c) {
    ModelResponse r;
    r.bool_value = b;
    r.confidence = c;
    return r;
}

std::filesystem::path scratch(std::string const& name) {
    auto p = std::filesystem::temp_directory_path() / ("semql_models_" + name);
    std::filesystem::remove_all(p);
    return p;
}

struct F1 {
    std::size_t tp = 0, fp = 0, fn = 0;
    [[nodiscard]] double value() const {
        return tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
};

class StubServer {
  public:
    explicit StubServer(std::function<void(httplib::Request const&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", handler);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    [[nodiscard]] std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string chat_body(std::string const& content) {
    nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
    return j.dump();
}

}  // namespace

TEST(ModelRequest, ValidateAndDigest) {
    auto r = filter_request("");
    EXPECT_THROW(r.validate(), ProviderError);
    r.prompt = "x";
    r.labels = {"a"};
    EXPECT_THROW(r.validate(), ProviderError);
    ModelRequest c;
    c.task = Task::ClassifyMulti;
    c.prompt = "p";
    EXPECT_THROW(c.validate(), ProviderError);
    c.labels = {"b", "a"};
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.digest(), sha256_hex("p\na\nb"));
    auto d = c;
    d.labels = {"a", "b"};
    EXPECT_EQ(c.digest(), d.digest());
    EXPECT_EQ(task_from_string("FilterBool"), Task::FilterBool);
    EXPECT_THROW((void)task_from_string("Nope"), Error);
}

TEST(Scripted, LookupAndMissing) {
    auto req = filter_request("is it?");
    ScriptedProvider p;
    EXPECT_THROW((void)p.invoke(req), ProviderError);
    p.add(req, bool_response(true, 0.92));
    auto r = p.invoke(req);
    EXPECT_EQ(r.bool_value, std::optional<bool>(true));
    EXPECT_DOUBLE_EQ(*r.confidence, 0.92);
    try {
        (void)p.invoke(filter_request("is it?", "other"));
        FAIL();
    } catch (ProviderError const& e) {
        EXPECT_FALSE(e.retryable());
    }
}

TEST(Scripted, FixtureTextDuplicatesAndErrors) {
    auto req = filter_request("q");
    auto line = [&](bool b) {
        return nlohmann::json{{"task", "FilterBool"},
                              {"model", "m"},
                              {"digest", req.digest()},
                              {"response", {{"bool_value", b}, {"confidence", 0.7}}}}
            .dump();
    };
    auto p = ScriptedProvider::from_text(line(false) + "\n\n" + line(true) + "\n");
    EXPECT_EQ(p.size(), 1u);
    EXPECT_EQ(p.warnings().size(), 1u);
    EXPECT_EQ(p.invoke(req).bool_value, std::optional<bool>(true));

    auto empty = ScriptedProvider::from_text("");
    EXPECT_THROW((void)empty.invoke(req), ProviderError);

    try {
        (void)ScriptedProvider::from_text(line(true) + "\n{not json\n");
        FAIL();
    } catch (FixtureParseError const& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW((void)ScriptedProvider::from_text(R"({"task": "FilterBool"})"), FixtureParseError);
    EXPECT_THROW((void)ScriptedProvider::from_file(scratch("missing.jsonl")), Error);
}

TEST(Scripted, RecordThenReplay) {
    auto path = scratch("rec.jsonl");
    auto synth = std::make_shared<SyntheticProvider>(keyword_truth({"yes"}), AccuracyProfile::calibrated(0.8), 7);
    std::vector<ModelRequest> reqs;
    for (int i = 0; i < 30; ++i) reqs.push_back(filter_request((i % 3 ? "yes " : "no ") + std::to_string(i)));
    ModelRequest cls;
    cls.task = Task::ClassifyMulti;
    cls.model_name = "m";
    cls.prompt = "doc yes about {label}";
    cls.labels = {"yes", "no"};
    reqs.push_back(cls);

    std::vector<ModelResponse> live;
    {
        RecordingProvider rec(synth, path);
        for (auto const& r : reqs) live.push_back(rec.invoke(r));
    }
    auto replay = ScriptedProvider::from_file(path);
    EXPECT_EQ(replay.size(), reqs.size());
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        EXPECT_EQ(to_json(replay.invoke(reqs[i])), to_json(live[i]));
    }
}

TEST(Managed, CountsAndContract) {
    auto stats = std::make_shared<ProviderStats>();
    auto inner = std::make_shared<CallbackProvider>([](ModelRequest const& r) {
        ModelResponse out;
        if (r.task == Task::ClassifyMulti) out.labels = std::vector<std::string>{"a", "zzz", "b", "a"};
        if (r.task == Task::FilterBool && r.prompt == "bad") return out;
        if (r.task == Task::FilterBool) out.bool_value = true;
        out.text = "ok";
        return out;
    });
    ManagedProvider m(inner, stats);
    ModelRequest c;
    c.task = Task::ClassifyMulti;
    c.model_name = "x";
    c.prompt = "p";
    c.labels = {"a", "b", "c"};
    auto r = m.invoke(c);
    EXPECT_EQ(*r.labels, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(stats->label_hallucinations(), 1u);

    auto f = m.invoke(filter_request("good", "x"));
    EXPECT_DOUBLE_EQ(*f.confidence, 1.0);
    EXPECT_THROW((void)m.invoke(filter_request("bad", "x")), ProviderError);
    EXPECT_EQ(stats->calls("x"), 3u);
    EXPECT_EQ(stats->snapshot().at("x").prompt_tokens, 3u);
}

TEST(Managed, StatsMatchTraceUnderConcurrency) {
    auto stats = std::make_shared<ProviderStats>();
    std::atomic<std::uint64_t> entries{0};
    auto inner = std::make_shared<CallbackProvider>([&](ModelRequest const&) {
        ++entries;
        return bool_response(true, 0.5);
    });
    auto stack = make_stack(inner, stats, {});
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 250; ++i) (void)stack->invoke(filter_request("p" + std::to_string(t * 1000 + i)));
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(stats->total_calls(), entries.load());
    EXPECT_EQ(stats->total_calls(), 2000u);
}

TEST(Retrying, BackoffAndGiveUp) {
    std::vector<long long> sleeps;
    int calls = 0;
    auto flaky = std::make_shared<CallbackProvider>([&](ModelRequest const&) -> ModelResponse {
        if (++calls < 3) throw ProviderError("busy", true);
        return bool_response(false, 0.6);
    });
    RetryingProvider r(flaky, 3, std::chrono::milliseconds(100),
                       [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    EXPECT_EQ(r.invoke(filter_request("x")).bool_value, std::optional<bool>(false));
    ASSERT_EQ(sleeps.size(), 2u);
    EXPECT_GE(sleeps[0], 100);
    EXPECT_LE(sleeps[0], 150);
    EXPECT_GE(sleeps[1], 200);
    EXPECT_LE(sleeps[1], 300);

    calls = -100;
    sleeps.clear();
    EXPECT_THROW((void)r.invoke(filter_request("x")), ProviderError);
    EXPECT_EQ(sleeps.size(), 3u);

    int fatal_calls = 0;
    auto fatal = std::make_shared<CallbackProvider>([&](ModelRequest const&) -> ModelResponse {
        ++fatal_calls;
        throw ProviderError("bad request", false);
    });
    RetryingProvider f(fatal, 3, std::chrono::milliseconds(1), [](auto) {});
    EXPECT_THROW((void)f.invoke(filter_request("x")), ProviderError);
    EXPECT_EQ(fatal_calls, 1);
}

TEST(Limiter, CapsInFlight) {
    std::atomic<int> now{0}, peak{0};
    auto slow = std::make_shared<CallbackProvider>([&](ModelRequest const&) {
        int n = ++now;
        int p = peak.load();
        while (n > p && !peak.compare_exchange_weak(p, n)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        --now;
        return bool_response(true, 1.0);
    });
    auto limiter = std::make_shared<ConcurrencyLimiter>(slow, 3);
    std::vector<std::thread> threads;
    for (int t = 0; t < 12; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 5; ++i) (void)limiter->invoke(filter_request("x"));
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_LE(peak.load(), 3);
    EXPECT_LE(limiter->peak_in_flight(), 3u);
}

TEST(Synthetic, OracleAndDeterminism) {
    SyntheticProvider oracle(keyword_truth({"fire"}), AccuracyProfile::oracle(), 1);
    auto yes = oracle.invoke(filter_request("a fire alarm"));
    EXPECT_TRUE(*yes.bool_value);
    EXPECT_DOUBLE_EQ(*yes.confidence, 1.0);
    EXPECT_FALSE(*oracle.invoke(filter_request("calm")).bool_value);

    SyntheticProvider a(keyword_truth({"fire"}), AccuracyProfile::calibrated(0.8), 7);
    SyntheticProvider b(keyword_truth({"fire"}), AccuracyProfile::calibrated(0.8), 7);
    SyntheticProvider c(keyword_truth({"fire"}), AccuracyProfile::calibrated(0.8), 8);
    int differ = 0;
    for (int i = 0; i < 200; ++i) {
        auto req = filter_request("row " + std::to_string(i));
        auto ra = a.invoke(req);
        auto rb = b.invoke(req);
        EXPECT_EQ(ra.bool_value, rb.bool_value);
        EXPECT_EQ(ra.confidence, rb.confidence);
        differ += c.invoke(req).confidence != ra.confidence;
    }
    EXPECT_GT(differ, 150);
}

TEST(Synthetic, PerfectProxyMatchesOracleF1) {
    SyntheticProvider proxy(keyword_truth({"hit"}), AccuracyProfile::calibrated(1.0), 3);
    SyntheticProvider oracle(keyword_truth({"hit"}), AccuracyProfile::oracle(), 3);
    for (int i = 0; i < 300; ++i) {
        auto req = filter_request((i % 4 == 0 ? "hit " : "miss ") + std::to_string(i));
        EXPECT_EQ(proxy.invoke(req).bool_value, oracle.invoke(req).bool_value);
    }
}

TEST(Synthetic, CoinFlipProxyOnBalancedData) {
    double sum = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SyntheticProvider proxy(keyword_truth({"hit"}), AccuracyProfile::calibrated(0.5), seed);
        F1 f;
        for (int i = 0; i < 2000; ++i) {
            bool truth = i % 2 == 0;
            bool said = *proxy.invoke(filter_request((truth ? "hit " : "miss ") + std::to_string(i))).bool_value;
            f.tp += truth && said;
            f.fp += !truth && said;
            f.fn += truth && !said;
        }
        sum += f.value();
    }
    EXPECT_NEAR(sum / 10, 0.5, 0.05);
}

TEST(Synthetic, AccuracyProfilesHitTheirRates) {
    for (double p : {0.6, 0.8, 0.95}) {
        SyntheticProvider cal(keyword_truth({"hit"}), AccuracyProfile::calibrated(p), 5);
        SyntheticProvider he(keyword_truth({"hit"}), AccuracyProfile::hard_easy(p, 0.5, 1.0), 5);
        int ok_cal = 0, ok_he = 0;
        double conf_sum = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            bool truth = i % 3 == 0;
            auto req = filter_request((truth ? "hit " : "miss ") + std::to_string(i));
            auto rc = cal.invoke(req);
            ok_cal += *rc.bool_value == truth;
            conf_sum += *rc.confidence;
            auto rh = he.invoke(req);
            ok_he += *rh.bool_value == truth;
            EXPECT_TRUE(*rh.confidence >= 0.95 || *rh.confidence <= 0.65);
        }
        EXPECT_NEAR(static_cast<double>(ok_cal) / n, p, 0.015) << p;
        EXPECT_NEAR(conf_sum / n, p, 0.015) << p;
        EXPECT_NEAR(static_cast<double>(ok_he) / n, p, 0.015) << p;
    }
}

TEST(Synthetic, FalsePositiveNoiseAndClassify) {
    auto profile = AccuracyProfile::oracle();
    profile.false_positive_rate = 0.03;
    SyntheticProvider noisy(keyword_truth({"hit"}), profile, 9);
    int fp = 0;
    for (int i = 0; i < 20000; ++i) fp += *noisy.invoke(filter_request("miss " + std::to_string(i))).bool_value;
    EXPECT_NEAR(fp / 20000.0, 0.03, 0.005);

    SyntheticProvider m(mention_truth("is mapped to category "), AccuracyProfile::oracle(), 0);
    ModelRequest c;
    c.task = Task::ClassifyMulti;
    c.model_name = "m";
    c.prompt = "Review great battery-life laptop is mapped to category {label}";
    c.labels = {"laptop", "battery", "battery-life", "phone"};
    auto r = m.invoke(c);
    EXPECT_EQ(*r.labels, (std::vector<std::string>{"laptop", "battery-life"}));
    for (auto const& l : c.labels) {
        bool filter = *m.invoke(filter_request(substitute_label(c.prompt, l))).bool_value;
        bool in = std::find(r.labels->begin(), r.labels->end(), l) != r.labels->end();
        EXPECT_EQ(filter, in) << l;
    }
}

TEST(Registry, ConfigFallbackAndErrors) {
    auto reg = providers_from_json(nlohmann::json::array({
                                       {{"name", "default"},
                                        {"kind", "synthetic"},
                                        {"params", {{"keywords", {"x"}}}}},
                                       {{"name", "proxy"},
                                        {"kind", "synthetic"},
                                        {"params", {{"keywords", {"x"}}, {"profile", "calibrated"}, {"accuracy", 0.7}}}},
                                   }),
                                   ".");
    EXPECT_TRUE(reg.has("proxy"));
    EXPECT_TRUE(*reg.get("anything")->invoke(filter_request("x y", "anything")).bool_value);
    EXPECT_EQ(reg.stats()->calls("anything"), 1u);
    ProviderRegistry empty;
    EXPECT_THROW((void)empty.get("m"), ProviderError);
    EXPECT_THROW((void)providers_from_json({{"name", "a"}, {"kind", "telepathy"}}, "."), Error);
}

TEST(RewriteOracleModel, ParsesAndFails) {
    RewriteQuestion q;
    q.prompt = "Review {0} is mapped to category {1}";
    q.left.binding = "Reviews";
    q.right.binding = "Categories";
    auto answer = [](std::string text) {
        return std::make_shared<CallbackProvider>([text](ModelRequest const& r) {
            EXPECT_EQ(r.task, Task::RewriteOracle);
            ModelResponse out;
            out.text = text;
            return out;
        });
    };
    ModelRewriteOracle yes(answer(R"({"rewrite": true, "label_side": "Categories"})"), "o");
    auto a = yes.decide(q);
    EXPECT_TRUE(a.rewrite);
    EXPECT_EQ(a.label_binding, "Categories");
    ModelRewriteOracle junk(answer("sure"), "o");
    EXPECT_THROW((void)junk.decide(q), OracleUnavailable);
    ModelRewriteOracle down(std::make_shared<CallbackProvider>([](ModelRequest const&) -> ModelResponse {
                                throw ProviderError("down", false);
                            }),
                            "o");
    EXPECT_THROW((void)down.decide(q), OracleUnavailable);
    EXPECT_NE(ModelRewriteOracle::render_question(q).find("Categories"), std::string::npos);
}

TEST(Http, BooleanParser) {
    auto ok = HttpProvider::parse_bool_answer("true 0.9");
    ASSERT_TRUE(ok.has_value());
    EXPECT_TRUE(ok->first);
    EXPECT_DOUBLE_EQ(ok->second, 0.9);
    EXPECT_FALSE(HttpProvider::parse_bool_answer("maybe").has_value());
    EXPECT_FALSE(HttpProvider::parse_bool_answer("true").has_value());
    EXPECT_NE(HttpProvider::wire_prompt(filter_request("q")).find("true"), std::string::npos);
}

TEST(Http, StubServerRoundTrip) {
    std::atomic<int> hits{0};
    std::string seen_auth, seen_model;
    StubServer server([&](httplib::Request const& req, httplib::Response& res) {
        int n = ++hits;
        auto body = nlohmann::json::parse(req.body);
        seen_model = body.at("model");
        seen_auth = req.get_header_value("Authorization");
        auto content = body.at("messages").at(0).at("content").get<std::string>();
        if (content.rfind("retry", 0) == 0 && n == 1) {
            res.status = 503;
            return;
        }
        if (content.rfind("bad", 0) == 0) {
            res.set_content(chat_body("maybe"), "application/json");
            return;
        }
        if (content.rfind("client", 0) == 0) {
            res.status = 400;
            return;
        }
        res.set_content(chat_body("true 0.9"), "application/json");
    });
    ::setenv("SEMQL_TEST_KEY", "secret", 1);
    HttpProviderOptions o;
    o.endpoint = server.endpoint();
    o.api_key_env = "SEMQL_TEST_KEY";
    auto http = std::make_shared<HttpProvider>(o);

    auto r = http->invoke(filter_request("is it?", "llama"));
    EXPECT_EQ(r.bool_value, std::optional<bool>(true));
    EXPECT_DOUBLE_EQ(*r.confidence, 0.9);
    EXPECT_EQ(seen_model, "llama");
    EXPECT_EQ(seen_auth, "Bearer secret");

    hits = 0;
    int sleeps = 0;
    StackOptions so;
    so.sleeper = [&](std::chrono::milliseconds) { ++sleeps; };
    auto stack = make_stack(http, std::make_shared<ProviderStats>(), so);
    EXPECT_TRUE(*stack->invoke(filter_request("retry me")).bool_value);
    EXPECT_EQ(hits.load(), 2);
    EXPECT_EQ(sleeps, 1);

    try {
        (void)http->invoke(filter_request("bad answer"));
        FAIL();
    } catch (ProviderError const& e) {
        EXPECT_FALSE(e.retryable());
    }
    try {
        (void)http->invoke(filter_request("client error"));
        FAIL();
    } catch (ProviderError const& e) {
        EXPECT_FALSE(e.retryable());
    }

    HttpProviderOptions dead;
    dead.endpoint = "http://127.0.0.1:1";
    dead.timeout = std::chrono::milliseconds(500);
    try {
        (void)HttpProvider(dead).invoke(filter_request("x"));
        FAIL();
    } catch (ProviderError const& e) {
        EXPECT_TRUE(e.retryable());
    }
}
