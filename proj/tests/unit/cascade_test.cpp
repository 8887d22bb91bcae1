#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "semql/cascade/cascade.hpp"
#include "semql/core/errors.hpp"
#include "semql/exec/executor.hpp"
#include "semql/models/synthetic.hpp"

using namespace semql;

namespace {

using Rows = std::vector<std::pair<std::uint64_t, std::string>>;

// Proxy and oracle that read the score and label straight from "s=<score> y=<0|1>" prompts.
std::pair<double, bool> decode(std::string const& prompt) {
    auto s = prompt.find("s=");
    auto y = prompt.find("y=");
    return {std::stod(prompt.substr(s + 2)), prompt[y + 2] == '1'};
}

struct Counting : Provider {
    std::function<ModelResponse(ModelRequest const&)> fn;
    std::atomic<std::size_t> calls{0};
    explicit Counting(std::function<ModelResponse(ModelRequest const&)> f) : fn(std::move(f)) {}
    ModelResponse invoke(ModelRequest const& r) override {
        ++calls;
        return fn(r);
    }
};

std::shared_ptr<Counting> score_proxy() {
    return std::make_shared<Counting>([](ModelRequest const& r) {
        auto [s, y] = decode(r.prompt);
        ModelResponse out;
        out.bool_value = s >= 0.5;
        out.confidence = s >= 0.5 ? s : 1 - s;
        return out;
    });
}

std::shared_ptr<Counting> label_oracle() {
    return std::make_shared<Counting>([](ModelRequest const& r) {
        ModelResponse out;
        out.bool_value = decode(r.prompt).second;
        out.confidence = 1.0;
        return out;
    });
}

std::string encode(double s, bool y) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "row s=%.6f y=%d", s, y ? 1 : 0);
    return buf;
}

std::vector<ScoredRow> scored(std::vector<double> const& scores) {
    std::vector<ScoredRow> out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        ScoredRow r;
        r.row_id = i;
        r.score = scores[i];
        r.proxy_decision = scores[i] >= 0.5;
        r.prompt = encode(scores[i], scores[i] >= 0.5);
        out.push_back(r);
    }
    return out;
}

// Reference inclusion probabilities: mixture, then iterative capping at 1.
std::vector<double> reference_pi(std::vector<double> const& s, std::size_t k) {
    std::size_t n = s.size();
    std::vector<double> q(n);
    double tri_sum = 0;
    for (double x : s) tri_sum += 1 - 2 * std::abs(x - 0.5);
    for (std::size_t i = 0; i < n; ++i) {
        double tri = 1 - 2 * std::abs(s[i] - 0.5);
        q[i] = 0.2 / static_cast<double>(n) + (tri_sum > 0 ? 0.8 * tri / tri_sum : 0.8 / static_cast<double>(n));
    }
    std::vector<double> pi(n, 0.0);
    std::vector<bool> capped(n, false);
    double target = static_cast<double>(std::min(k, n));
    for (;;) {
        double fixed = 0, free_q = 0;
        for (std::size_t i = 0; i < n; ++i) (capped[i] ? fixed : free_q) += capped[i] ? 1.0 : q[i];
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (capped[i]) continue;
            pi[i] = (target - fixed) * q[i] / free_q;
            if (pi[i] > 1.0) {
                capped[i] = true;
                changed = true;
            }
        }
        if (!changed) break;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (capped[i]) pi[i] = 1.0;
    }
    return pi;
}

std::vector<Sample> calibrated_samples(std::size_t n, std::uint64_t seed, bool informative) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        double s = u(rng);
        bool y = informative ? u(rng) < s : u(rng) < 0.5;
        out.push_back({i, s, y, 1.0});
    }
    return out;
}

}  // namespace

TEST(Phase1, OneCallPerRowAndScores) {
    auto proxy = score_proxy();
    EXPECT_TRUE(phase1_proxy({}, *proxy, "proxy").empty());
    EXPECT_EQ(proxy->calls, 0u);
    Rows rows;
    for (std::uint64_t i = 0; i < 100; ++i) rows.emplace_back(i, encode(static_cast<double>(i) / 100.0, false));
    auto out = phase1_proxy(rows, *proxy, "proxy", worker_pool_for(4));
    EXPECT_EQ(proxy->calls, 100u);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i].score, static_cast<double>(i) / 100.0, 1e-6);

    Counting says_false([](ModelRequest const&) {
        ModelResponse r;
        r.bool_value = false;
        r.confidence = 0.8;
        return r;
    });
    EXPECT_NEAR(phase1_proxy({{1, "x"}}, says_false, "p")[0].score, 0.2, 1e-12);

    Counting broken([](ModelRequest const&) -> ModelResponse { throw ProviderError("down", true); });
    auto b = phase1_proxy({{1, "x"}, {2, "y"}}, broken, "p");
    EXPECT_DOUBLE_EQ(b[0].score, 0.5);
    EXPECT_TRUE(b[1].proxy_error);
}

TEST(Sampling, InclusionProbabilitiesMatchReference) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng() % 200;
        std::vector<double> s(n);
        for (auto& x : s) x = trial % 5 == 0 ? 0.5 : u(rng);
        std::size_t k = rng() % (n + 20);
        auto pi = inclusion_probabilities(s, k);
        auto ref = reference_pi(s, k);
        ASSERT_EQ(pi.size(), n);
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(pi[i], ref[i], 1e-9);
            EXPECT_LE(pi[i], 1.0 + 1e-12);
            sum += pi[i];
        }
        EXPECT_NEAR(sum, static_cast<double>(std::min(k, n)), 1e-9);
    }
    auto flat = inclusion_probabilities(std::vector<double>(10, 0.5), 4);
    for (double p : flat) EXPECT_NEAR(p, 0.4, 1e-12);
}

TEST(Sampling, SystematicSampleHonoursProbabilities) {
    std::vector<double> pi = {0.1, 0.9, 0.5, 0.5, 1.0, 0.0, 0.25, 0.75};
    std::vector<double> freq(pi.size(), 0);
    const int runs = 20000;
    for (int seed = 0; seed < runs; ++seed) {
        auto idx = systematic_sample(pi, static_cast<std::uint64_t>(seed));
        EXPECT_EQ(idx.size(), 4u);
        for (auto i : idx) freq[i] += 1;
    }
    for (std::size_t i = 0; i < pi.size(); ++i) EXPECT_NEAR(freq[i] / runs, pi[i], 0.015) << i;
}

TEST(Phase2, BudgetWeightsAndOversampling) {
    auto oracle = label_oracle();
    auto rows = scored({0.1, 0.5, 0.9});
    EXPECT_TRUE(phase2_sample(rows, 0, 1, *oracle, "o").empty());
    EXPECT_EQ(oracle->calls, 0u);

    std::size_t calls = 0;
    auto all = phase2_sample(scored(std::vector<double>(30, 0.5)), 10, 3, *oracle, "o", &calls);
    EXPECT_EQ(calls, 10u);
    ASSERT_EQ(all.size(), 10u);
    for (auto const& s : all) EXPECT_NEAR(s.weight, 3.0, 1e-9);

    calls = 0;
    EXPECT_EQ(phase2_sample(rows, 50, 3, *oracle, "o", &calls).size(), 3u);
    EXPECT_EQ(calls, 3u);

    std::vector<double> mixed(50, 0.05);
    mixed.resize(100, 0.5);
    auto rows2 = scored(mixed);
    auto pi = inclusion_probabilities(mixed, 20);
    double low = 0, mid = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        for (auto const& s : phase2_sample(rows2, 20, seed, *oracle, "o")) {
            (s.row_id < 50 ? low : mid) += 1;
            EXPECT_GE(s.weight, 1.0);
            EXPECT_NEAR(s.weight, 1.0 / pi[s.row_id], 1e-9);
        }
    }
    EXPECT_GT(mid / 1000, low / 1000);
}

TEST(Bounds, BernsteinAndEffectiveSize) {
    double l = std::log(2 / 0.05);
    EXPECT_NEAR(bernstein_radius(0.25, 100, 0.05), std::sqrt(2 * 0.25 * l / 100) + 7 * l / (3 * 99), 1e-12);
    EXPECT_TRUE(std::isinf(bernstein_radius(0.1, 1, 0.05)));
    EXPECT_DOUBLE_EQ(effective_sample_size({1, 1, 1, 1}), 4.0);
    EXPECT_DOUBLE_EQ(effective_sample_size({1, 3}), 16.0 / 10.0);
}

TEST(Phase3, GuardAndDegenerate) {
    CascadeConfig c;
    auto few = calibrated_samples(c.min_sample - 1, 1, true);
    EXPECT_EQ(phase3_learn_thresholds(few, c), std::make_pair(0.0, 1.0));

    std::vector<Sample> pos, neg;
    for (std::uint64_t i = 0; i < 40; ++i) {
        pos.push_back({i, 0.3 + 0.01 * static_cast<double>(i), true, 1.0});
        neg.push_back({i, 0.2 + 0.01 * static_cast<double>(i), false, 1.0});
    }
    EXPECT_EQ(phase3_learn_thresholds(pos, c), std::make_pair(0.0, 0.3));
    auto n = phase3_learn_thresholds(neg, c);
    EXPECT_NEAR(n.first, 0.59, 1e-12);
    EXPECT_EQ(n.second, 1.0);
}

TEST(Phase3, SeparatedSamplesShrinkTheRegion) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> hi(0.9, 1.0), lo(0.0, 0.1);
    std::vector<Sample> s;
    for (std::uint64_t i = 0; i < 400; ++i) s.push_back(i % 2 ? Sample{i, hi(rng), true, 1.0} : Sample{i, lo(rng), false, 1.0});
    auto [tl, th] = phase3_learn_thresholds(s, CascadeConfig{});
    double radius = bernstein_radius(0.0, 200, 0.025);
    EXPECT_GE(tl, 0.1 - radius);
    EXPECT_LE(th, 0.9 + radius);
    EXPECT_GT(tl, 0.05);
    EXPECT_LT(th, 0.95);
    EXPECT_LE(tl, th);
}

TEST(Phase3, RandomLabelsCertifyNothing) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = calibrated_samples(300, seed, false);
        auto [tl, th] = phase3_learn_thresholds(s, CascadeConfig{});
        std::size_t inside = 0;
        for (auto const& x : s) inside += x.score >= tl && x.score <= th;
        EXPECT_GE(static_cast<double>(inside) / static_cast<double>(s.size()), 0.9) << seed;
    }
}

TEST(Phase3, ThresholdsOrderedAndMeetTargetOnCalibratedData) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = calibrated_samples(2000, seed, true);
        CascadeConfig c;
        c.target_precision = 0.8;
        auto [tl, th] = phase3_learn_thresholds(s, c);
        EXPECT_LE(0.0, tl);
        EXPECT_LE(tl, th);
        EXPECT_LE(th, 1.0);
        EXPECT_GT(th, 0.5);
        EXPECT_LT(tl, 0.5);
    }
}

TEST(Phase4, EmptyRegionAndExhaustedBudget) {
    auto oracle = label_oracle();
    CascadeState st;
    st.config.oracle_budget = 10;
    st.tau_low = 0.4;
    st.tau_high = 0.6;
    auto before = st.samples;
    EXPECT_TRUE(phase4_refine(st, scored({0.1, 0.9, 0.95}), *oracle).empty());
    EXPECT_EQ(oracle->calls, 0u);
    EXPECT_EQ(st.tau_low, 0.4);

    st.oracle_calls_used = 10;
    EXPECT_TRUE(phase4_refine(st, scored({0.5, 0.5}), *oracle).empty());
    EXPECT_EQ(st.tau_high, 0.6);
    EXPECT_EQ(oracle->calls, 0u);

    st.oracle_calls_used = 8;
    auto got = phase4_refine(st, scored({0.5, 0.45, 0.55, 0.52}), *oracle);
    EXPECT_EQ(got.size(), 1u);
    EXPECT_EQ(st.oracle_calls_used, 9u);
}

TEST(Phase4, DriftLowersUpperThreshold) {
    // Batch 0: positives near 0.9 plus a thin coin-flip band in the middle. Later batches: positives near 0.6.
    const std::size_t batch = 1000;
    int lowered = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0, 1);
        Rows rows;
        for (std::uint64_t i = 0; i < 4 * batch; ++i) {
            double g = u(rng), s = 0.05 + 0.1 * u(rng), p = 0;
            if (i < batch && g < 0.3) s = 0.85 + 0.1 * u(rng), p = 1;
            else if (i < batch && g >= 0.9) s = 0.45 + 0.3 * u(rng), p = 0.5;
            else if (i >= batch && g < 0.4) s = 0.55 + 0.1 * u(rng), p = 1;
            rows.emplace_back(i, encode(s, u(rng) < p));
        }
        CascadeConfig c;
        c.oracle_budget = 800;
        c.batch_rows = batch;
        c.seed = seed;
        CascadeRunner runner(c, score_proxy(), label_oracle());
        (void)runner.run(rows);
        auto const& h = runner.history();
        ASSERT_EQ(h.size(), 4u);
        for (std::size_t k = 1; k < h.size(); ++k) EXPECT_LE(h[k].second, h[k - 1].second) << "seed " << seed;
        for (auto const& [lo, hi] : h) EXPECT_LE(lo, hi);
        lowered += h.back().second < h.front().second;
    }
    EXPECT_GE(lowered, 10);
}

TEST(Route, ThresholdRules) {
    auto oracle = label_oracle();
    CascadeState st;
    st.config.oracle_budget = 5;
    st.tau_low = 0.2;
    st.tau_high = 0.8;
    auto rows = scored({0.95, 0.5, 0.1});
    rows[1].prompt = encode(0.5, false);
    CascadeSummary sum;
    auto out = route(rows, st, *oracle, 5, {}, &sum);
    EXPECT_EQ(out[0].source, RouteSource::ProxyAccept);
    EXPECT_TRUE(out[0].decision);
    EXPECT_EQ(out[1].source, RouteSource::Oracle);
    EXPECT_FALSE(out[1].decision);
    EXPECT_EQ(out[2].source, RouteSource::ProxyReject);
    EXPECT_EQ(oracle->calls, 1u);
    EXPECT_EQ(st.oracle_calls_used, 1u);

    st.oracle_calls_used = 5;
    auto fb = route(scored({0.5}), st, *oracle, 5);
    EXPECT_EQ(fb[0].source, RouteSource::ProxyFallback);
    EXPECT_TRUE(fb[0].decision);
    EXPECT_EQ(oracle->calls, 1u);

    st.oracle_calls_used = 0;
    Counting broken([](ModelRequest const&) -> ModelResponse { throw ProviderError("x", false); });
    CascadeSummary s2;
    auto f = route(scored({0.6}), st, broken, 5, {}, &s2);
    EXPECT_EQ(f[0].source, RouteSource::ProxyFallback);
    EXPECT_EQ(s2.oracle_failures, 1u);

    auto reuse = route(scored({0.5, 0.9}), st, *oracle, 5, {{0, true}, {1, false}});
    EXPECT_EQ(reuse[0].source, RouteSource::Oracle);
    EXPECT_TRUE(reuse[0].decision);
    EXPECT_EQ(reuse[1].source, RouteSource::ProxyAccept);
    EXPECT_EQ(oracle->calls, 1u);
}

TEST(Merge, IdentityCommutativityAndPartitions) {
    CascadeState a, b, empty;
    a.samples = calibrated_samples(120, 1, true);
    b.samples = calibrated_samples(80, 2, true);
    for (auto& s : b.samples) s.row_id += 1000;
    a.oracle_calls_used = 120;
    b.oracle_calls_used = 80;

    auto id = merge_states(a, empty);
    EXPECT_EQ(std::make_pair(id.tau_low, id.tau_high), phase3_learn_thresholds(a.samples, a.config));

    auto ab = merge_states(a, b), ba = merge_states(b, a);
    EXPECT_EQ(ab.samples, ba.samples);
    EXPECT_EQ(ab.tau_low, ba.tau_low);
    EXPECT_EQ(ab.tau_high, ba.tau_high);
    EXPECT_EQ(ab.oracle_calls_used, 200u);

    auto all = calibrated_samples(800, 9, true);
    std::vector<CascadeState> parts(4);
    for (std::size_t i = 0; i < all.size(); ++i) parts[i % 4].samples.push_back(all[i]);
    auto left = merge_states(merge_states(merge_states(parts[0], parts[1]), parts[2]), parts[3]);
    auto right = merge_states(parts[3], merge_states(parts[2], merge_states(parts[1], parts[0])));
    auto single = phase3_learn_thresholds(all, CascadeConfig{});
    EXPECT_EQ(std::make_pair(left.tau_low, left.tau_high), single);
    EXPECT_EQ(std::make_pair(right.tau_low, right.tau_high), single);

    CascadeState other;
    other.config.delta = 0.1;
    EXPECT_THROW((void)merge_states(a, other), ConfigMismatch);
}

TEST(Config, Validation) {
    CascadeConfig c;
    c.phase2_fraction = 0;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.target_precision = 1.0;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.delta = 0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Runner, BudgetProxyCountAndOracleEquivalence) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    Rows rows;
    for (std::uint64_t i = 0; i < 1500; ++i) {
        double s = u(rng);
        rows.emplace_back(i * 3, encode(s, u(rng) < s));
    }
    for (std::size_t budget : {0u, 50u, 300u}) {
        for (std::size_t workers : {1u, 4u}) {
            auto proxy = score_proxy();
            auto oracle = label_oracle();
            CascadeConfig c;
            c.oracle_budget = budget;
            c.batch_rows = 400;
            CascadeRunner runner(c, proxy, oracle, worker_pool_for(workers));
            auto out = runner.run(rows);
            EXPECT_EQ(proxy->calls, rows.size());
            EXPECT_LE(oracle->calls, budget);
            EXPECT_EQ(runner.summary().oracle_calls, oracle->calls.load());
            EXPECT_LE(runner.state().oracle_calls_used, budget);
            for (auto const& w : runner.state().samples) EXPECT_GE(w.weight, 1.0 - 1e-12);
        }
    }

    CascadeState st;
    st.config.oracle_budget = rows.size();
    auto proxy = score_proxy();
    auto oracle = label_oracle();
    auto sc = phase1_proxy(rows, *proxy, "proxy");
    auto out = route(sc, st, *oracle, rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(out[i].decision, decode(rows[i].second).second);
        EXPECT_EQ(out[i].source, RouteSource::Oracle);
    }
}

TEST(Runner, CalibratedProxyMeetsPrecisionTarget) {
    // Easy rows score near 0 or 1, hard rows near 0.5; every label is drawn with P(y = 1 | s) = s.
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0, 1);
        Rows rows;
        std::vector<bool> truth;
        for (std::uint64_t i = 0; i < 2000; ++i) {
            double s = u(rng) < 0.8 ? (u(rng) < 0.5 ? 0.95 + 0.05 * u(rng) : 0.05 * u(rng)) : 0.35 + 0.3 * u(rng);
            bool y = u(rng) < s;
            truth.push_back(y);
            rows.emplace_back(i, encode(s, y));
        }
        CascadeConfig c;
        c.oracle_budget = 400;
        c.target_precision = 0.9;
        c.seed = seed;
        CascadeRunner runner(c, score_proxy(), label_oracle());
        auto out = runner.run(rows);
        std::size_t tp = 0, pp = 0;
        for (auto const& p : out) {
            if (!p.decision) continue;
            ++pp;
            tp += truth[p.row_id];
        }
        double precision = pp ? static_cast<double>(tp) / static_cast<double>(pp) : 1.0;
        ok += precision >= 0.9 - 0.05;
    }
    EXPECT_GE(ok, 95);
}

TEST(Route, PrecisionTargetVerifiesProxyPositivesFirst) {
    auto oracle = label_oracle();
    CascadeState st;
    st.config.oracle_budget = 2;
    st.config.target_precision = 0.9;
    auto out = route(scored({0.45, 0.7, 0.49, 0.6}), st, *oracle, 2);
    EXPECT_EQ(out[3].source, RouteSource::Oracle);
    EXPECT_EQ(out[1].source, RouteSource::Oracle);
    EXPECT_EQ(out[2].source, RouteSource::ProxyFallback);

    CascadeState rec;
    rec.config.oracle_budget = 1;
    rec.config.target_recall = 0.9;
    auto r = route(scored({0.51, 0.3}), rec, *oracle, 1);
    EXPECT_EQ(r[1].source, RouteSource::Oracle);
    EXPECT_EQ(r[0].source, RouteSource::ProxyFallback);
}

TEST(Runner, CascadeBeatsProxyOnlyF1) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rows rows;
        std::vector<bool> truth;
        for (std::uint64_t i = 0; i < 1000; ++i) {
            bool y = (i * 7 + seed) % 10 < 4;
            truth.push_back(y);
            rows.emplace_back(i, (y ? "flagged " : "clean ") + std::to_string(i));
        }
        auto proxy = std::make_shared<SyntheticProvider>(keyword_truth({"flagged"}), AccuracyProfile::calibrated(0.75), seed);
        auto oracle = std::make_shared<SyntheticProvider>(keyword_truth({"flagged"}), AccuracyProfile::oracle(), seed);
        auto f1 = [&](auto const& decide) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                bool d = decide(i);
                tp += d && truth[i];
                fp += d && !truth[i];
                fn += !d && truth[i];
            }
            return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        };
        CascadeConfig c;
        c.oracle_budget = 200;
        c.seed = seed;
        CascadeRunner runner(c, proxy, oracle);
        auto out = runner.run(rows);
        double cascade = f1([&](std::size_t i) { return out[i].decision; });
        double proxy_only = f1([&](std::size_t i) {
            return *proxy->invoke(ModelRequest{Task::FilterBool, "proxy", rows[i].second, {}, 8}).bool_value;
        });
        EXPECT_GT(cascade, proxy_only) << seed;
    }
}
