#include "semql/cascade/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <limits>
#include <numeric>

#include "semql/core/digest.hpp"
#include "semql/core/errors.hpp"

namespace semql {

void CascadeConfig::validate() const {
    if (phase2_fraction <= 0.0 || phase2_fraction > 1.0) throw Error("phase2_fraction must be in (0, 1]");
    auto in_unit = [](std::optional<double> v) { return !v || (*v > 0.0 && *v < 1.0); };
    if (!in_unit(target_precision) || !in_unit(target_recall)) throw Error("cascade targets must be in (0, 1)");
    if (delta <= 0.0 || delta >= 1.0) throw Error("delta must be in (0, 1)");
    if (batch_rows == 0) throw Error("cascade batch_rows must be positive");
}

bool CascadeConfig::compatible(CascadeConfig const& o) const {
    return phase2_fraction == o.phase2_fraction && target_precision == o.target_precision &&
           target_recall == o.target_recall && delta == o.delta && min_sample == o.min_sample &&
           seed == o.seed && batch_rows == o.batch_rows && proxy_model == o.proxy_model &&
           oracle_model == o.oracle_model;
}

std::string_view to_string(RouteSource s) {
    switch (s) {
        case RouteSource::ProxyAccept: return "proxy_accept";
        case RouteSource::ProxyReject: return "proxy_reject";
        case RouteSource::Oracle: return "oracle";
        case RouteSource::ProxyFallback: return "proxy_fallback";
    }
    return "?";
}

ParallelFor sequential_for() {
    return [](std::size_t n, std::function<void(std::size_t)> const& fn) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
    };
}

namespace {

ModelRequest filter_request(std::string const& model, std::string const& prompt) {
    ModelRequest req;
    req.task = Task::FilterBool;
    req.model_name = model;
    req.prompt = prompt;
    req.max_output_tokens = 8;
    return req;
}

std::uint64_t batch_seed(std::uint64_t seed, std::size_t batch) {
    return mix64(seed ^ mix64(static_cast<std::uint64_t>(batch) + 1));
}

}  // namespace

std::vector<ScoredRow> phase1_proxy(std::vector<std::pair<std::uint64_t, std::string>> const& rows,
                                    Provider& proxy, std::string const& model, ParallelFor const& pfor) {
    std::vector<ScoredRow> out(rows.size());
    pfor(rows.size(), [&](std::size_t i) {
        auto& r = out[i];
        r.row_id = rows[i].first;
        r.prompt = rows[i].second;
        try {
            auto resp = proxy.invoke(filter_request(model, r.prompt));
            double c = resp.confidence.value_or(1.0);
            r.proxy_decision = resp.bool_value.value_or(false);
            r.score = r.proxy_decision ? c : 1.0 - c;
        } catch (ProviderError const&) {
            r.proxy_error = true;
            r.score = 0.5;
        }
    });
    return out;
}

std::vector<double> inclusion_probabilities(std::vector<double> const& scores, std::size_t k) {
    std::size_t n = scores.size();
    std::vector<double> pi(n, 0.0);
    if (n == 0 || k == 0) return pi;
    if (k >= n) {
        std::fill(pi.begin(), pi.end(), 1.0);
        return pi;
    }
    std::vector<double> tri(n);
    double tri_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tri[i] = std::max(0.0, 1.0 - 2.0 * std::abs(scores[i] - 0.5));
        tri_sum += tri[i];
    }
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = tri_sum > 0 ? 0.2 / static_cast<double>(n) + 0.8 * tri[i] / tri_sum
                           : 1.0 / static_cast<double>(n);
    }
    std::vector<bool> capped(n, false);
    double budget = static_cast<double>(k);
    for (;;) {
        double mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!capped[i]) mass += q[i];
        }
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (capped[i]) continue;
            pi[i] = mass > 0 ? budget * q[i] / mass : 0.0;
            if (pi[i] >= 1.0) {
                capped[i] = true;
                pi[i] = 1.0;
                budget -= 1.0;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return pi;
}

std::vector<std::size_t> systematic_sample(std::vector<double> const& pi, std::uint64_t seed) {
    std::vector<std::size_t> out;
    double next = unit_interval(mix64(seed));
    double cum = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        cum += pi[i];
        if (pi[i] > 0 && next < cum + 1e-9) {
            out.push_back(i);
            next += 1.0;
        }
    }
    return out;
}

std::vector<Sample> phase2_sample(std::vector<ScoredRow> const& rows, std::size_t budget_slice,
                                  std::uint64_t seed, Provider& oracle, std::string const& model,
                                  std::size_t* calls_made, ParallelFor const& pfor) {
    std::size_t k = std::min(budget_slice, rows.size());
    if (calls_made) *calls_made = 0;
    if (k == 0) return {};
    std::vector<double> scores;
    scores.reserve(rows.size());
    for (auto const& r : rows) scores.push_back(r.score);
    auto pi = inclusion_probabilities(scores, k);
    auto picked = systematic_sample(pi, seed);
    if (picked.size() > k) picked.resize(k);

    std::vector<std::optional<Sample>> got(picked.size());
    pfor(picked.size(), [&](std::size_t j) {
        auto const& r = rows[picked[j]];
        try {
            auto resp = oracle.invoke(filter_request(model, r.prompt));
            got[j] = Sample{r.row_id, r.score, resp.bool_value.value_or(false), 1.0 / pi[picked[j]]};
        } catch (ProviderError const&) {
        }
    });
    if (calls_made) *calls_made = picked.size();
    std::vector<Sample> out;
    for (auto& s : got) {
        if (s) out.push_back(*s);
    }
    return out;
}

double bernstein_radius(double variance, double n_eff, double delta) {
    if (n_eff <= 1.0) return std::numeric_limits<double>::infinity();
    double l = std::log(2.0 / delta);
    return std::sqrt(2.0 * variance * l / n_eff) + 7.0 * l / (3.0 * (n_eff - 1.0));
}

double effective_sample_size(std::vector<double> const& weights) {
    double s = 0.0, s2 = 0.0;
    for (double w : weights) {
        s += w;
        s2 += w * w;
    }
    return s2 > 0 ? s * s / s2 : 0.0;
}

namespace {

struct Acc {
    double w = 0, wy = 0, w2 = 0;
    void add(double weight, double y) {
        w += weight;
        wy += weight * y;
        w2 += weight * weight;
    }
    /// Lower confidence bound of the weighted mean.
    [[nodiscard]] double lower_bound(double delta) const {
        if (w <= 0) return -std::numeric_limits<double>::infinity();
        double mean = wy / w;
        double n_eff = w * w / w2;
        double var = n_eff > 1 ? mean * (1 - mean) * n_eff / (n_eff - 1) : 0.25;
        return mean - bernstein_radius(var, n_eff, delta);
    }
};

}  // namespace

std::pair<double, double> phase3_learn_thresholds(std::vector<Sample> const& input, CascadeConfig const& config) {
    if (input.size() < config.min_sample) return {0.0, 1.0};
    auto samples = input;
    std::sort(samples.begin(), samples.end(), [](Sample const& a, Sample const& b) {
        return a.score != b.score ? a.score < b.score : a.row_id < b.row_id;
    });
    bool any_pos = false, any_neg = false;
    for (auto const& s : samples) (s.label ? any_pos : any_neg) = true;
    if (!any_neg) return {0.0, samples.front().score};
    if (!any_pos) return {samples.back().score, 1.0};

    double ds = config.delta / 2.0;
    double prec_target = config.target_precision.value_or(kDefaultQualityTarget);
    double npv_target = config.target_precision.value_or(kDefaultQualityTarget);

    std::vector<double> grid;
    for (auto const& s : samples) {
        if (grid.empty() || grid.back() != s.score) grid.push_back(s.score);
    }

    double tau_high = 1.0;
    for (double t : grid) {
        Acc a;
        for (auto const& s : samples) {
            if (s.score > t) a.add(s.weight, s.label ? 1.0 : 0.0);
        }
        if (a.w > 0 && a.lower_bound(ds) >= prec_target) {
            tau_high = t;
            break;
        }
    }

    double tau_low = 0.0;
    if (config.target_recall) {
        Acc all_pos;
        for (auto const& s : samples) {
            if (s.label) all_pos.add(s.weight, 1.0);
        }
        for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
            double t = *it;
            Acc a;
            for (auto const& s : samples) {
                if (s.label) a.add(s.weight, s.score >= t ? 1.0 : 0.0);
            }
            if (a.lower_bound(ds) >= *config.target_recall) {
                tau_low = t;
                break;
            }
        }
    } else {
        for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
            double t = *it;
            Acc a;
            for (auto const& s : samples) {
                if (s.score < t) a.add(s.weight, s.label ? 0.0 : 1.0);
            }
            if (a.w > 0 && a.lower_bound(ds) >= npv_target) {
                tau_low = t;
                break;
            }
        }
    }
    if (tau_low > tau_high) {
        double mid = 0.5 * (tau_low + tau_high);
        tau_low = tau_high = mid;
    }
    return {tau_low, tau_high};
}

std::vector<Sample> phase4_refine(CascadeState& state, std::vector<ScoredRow> const& rows, Provider& oracle,
                                  ParallelFor const& pfor) {
    std::vector<ScoredRow> region;
    for (auto const& r : rows) {
        if (r.score >= state.tau_low && r.score <= state.tau_high) region.push_back(r);
    }
    auto remaining = state.remaining_budget();
    if (region.empty() || remaining == 0) return {};
    auto slice = static_cast<std::size_t>(std::floor(static_cast<double>(remaining) * state.config.phase2_fraction));
    slice = std::max<std::size_t>(slice, 1);
    std::size_t calls = 0;
    auto fresh = phase2_sample(region, slice, batch_seed(state.config.seed, state.batch_index), oracle,
                               state.config.oracle_model, &calls, pfor);
    state.oracle_calls_used += calls;
    state.samples.insert(state.samples.end(), fresh.begin(), fresh.end());
    std::tie(state.tau_low, state.tau_high) = phase3_learn_thresholds(state.samples, state.config);
    return fresh;
}

std::vector<RoutedPrediction> route(std::vector<ScoredRow> const& rows, CascadeState& state, Provider& oracle,
                                    std::size_t allowance, std::map<std::uint64_t, bool> const& labelled,
                                    CascadeSummary* summary, ParallelFor const& pfor) {
    std::vector<RoutedPrediction> out(rows.size());
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto const& r = rows[i];
        out[i].row_id = r.row_id;
        if (r.score < state.tau_low) {
            out[i].decision = false;
            out[i].source = RouteSource::ProxyReject;
        } else if (r.score > state.tau_high) {
            out[i].decision = true;
            out[i].source = RouteSource::ProxyAccept;
        } else if (auto it = labelled.find(r.row_id); it != labelled.end()) {
            out[i].decision = it->second;
            out[i].source = RouteSource::Oracle;
        } else {
            out[i].decision = r.proxy_decision;
            out[i].source = RouteSource::ProxyFallback;
            pending.push_back(i);
        }
    }
    std::size_t grant = std::min({allowance, state.remaining_budget(), pending.size()});
    // A precision target spends the budget on proxy positives first, a recall target on proxy
    // negatives; otherwise the most uncertain rows go first.
    auto const& cfg = state.config;
    int favoured = cfg.target_precision && !cfg.target_recall ? 1 : cfg.target_recall && !cfg.target_precision ? 0 : -1;
    auto key = [&](std::size_t i) {
        auto const& r = rows[i];
        int group = favoured < 0 || static_cast<int>(r.proxy_decision) == favoured ? 0 : 1;
        return std::make_tuple(group, std::abs(r.score - 0.5), r.row_id);
    };
    std::stable_sort(pending.begin(), pending.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    pending.resize(grant);
    std::vector<char> failed(grant, 0);
    pfor(grant, [&](std::size_t j) {
        auto i = pending[j];
        try {
            auto resp = oracle.invoke(filter_request(state.config.oracle_model, rows[i].prompt));
            out[i].decision = resp.bool_value.value_or(false);
            out[i].source = RouteSource::Oracle;
        } catch (ProviderError const&) {
            failed[j] = 1;
        }
    });
    state.oracle_calls_used += grant;
    if (summary) {
        summary->oracle_calls += grant;
        summary->oracle_failures += static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
        for (auto const& p : out) ++summary->by_source[p.source];
    }
    return out;
}

CascadeState merge_states(CascadeState const& a, CascadeState const& b) {
    if (!a.config.compatible(b.config)) throw ConfigMismatch("cascade states come from different configurations");
    CascadeState m;
    m.config = a.config;
    m.config.oracle_budget = a.config.oracle_budget + b.config.oracle_budget;
    m.samples = a.samples;
    m.samples.insert(m.samples.end(), b.samples.begin(), b.samples.end());
    std::sort(m.samples.begin(), m.samples.end(), [](Sample const& x, Sample const& y) {
        if (x.row_id != y.row_id) return x.row_id < y.row_id;
        if (x.score != y.score) return x.score < y.score;
        if (x.label != y.label) return x.label < y.label;
        return x.weight < y.weight;
    });
    m.oracle_calls_used = a.oracle_calls_used + b.oracle_calls_used;
    m.batch_index = std::max(a.batch_index, b.batch_index);
    std::tie(m.tau_low, m.tau_high) = phase3_learn_thresholds(m.samples, m.config);
    return m;
}

CascadeRunner::CascadeRunner(CascadeConfig config, ProviderPtr proxy, ProviderPtr oracle, ParallelFor pfor)
    : proxy_(std::move(proxy)), oracle_(std::move(oracle)), pfor_(std::move(pfor)) {
    config.validate();
    state_.config = std::move(config);
}

std::vector<RoutedPrediction> CascadeRunner::run(std::vector<std::pair<std::uint64_t, std::string>> const& rows) {
    std::vector<RoutedPrediction> out;
    out.reserve(rows.size());
    auto const& cfg = state_.config;
    std::size_t remaining_rows = rows.size();
    summary_.rows += rows.size();
    for (std::size_t start = 0; start < rows.size(); start += cfg.batch_rows) {
        std::size_t end = std::min(rows.size(), start + cfg.batch_rows);
        std::vector<std::pair<std::uint64_t, std::string>> batch(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                                                 rows.begin() + static_cast<std::ptrdiff_t>(end));
        auto scored = phase1_proxy(batch, *proxy_, cfg.proxy_model, pfor_);
        summary_.proxy_calls += scored.size();
        for (auto const& r : scored) summary_.proxy_errors += r.proxy_error ? 1 : 0;

        std::vector<Sample> fresh;
        if (state_.batch_index == 0) {
            auto slice = static_cast<std::size_t>(std::floor(static_cast<double>(cfg.oracle_budget) * cfg.phase2_fraction));
            std::size_t calls = 0;
            fresh = phase2_sample(scored, slice, batch_seed(cfg.seed, 0), *oracle_, cfg.oracle_model, &calls, pfor_);
            state_.oracle_calls_used += calls;
            state_.samples.insert(state_.samples.end(), fresh.begin(), fresh.end());
            std::tie(state_.tau_low, state_.tau_high) = phase3_learn_thresholds(state_.samples, cfg);
            summary_.oracle_calls += calls;
        } else {
            auto before = state_.oracle_calls_used;
            fresh = phase4_refine(state_, scored, *oracle_, pfor_);
            summary_.oracle_calls += state_.oracle_calls_used - before;
        }
        summary_.sampled += fresh.size();
        std::map<std::uint64_t, bool> labelled;
        for (auto const& s : fresh) labelled[s.row_id] = s.label;

        auto allowance = static_cast<std::size_t>(std::floor(static_cast<double>(state_.remaining_budget()) *
                                                             static_cast<double>(batch.size()) /
                                                             static_cast<double>(remaining_rows)));
        auto routed = route(scored, state_, *oracle_, allowance, labelled, &summary_, pfor_);
        out.insert(out.end(), routed.begin(), routed.end());
        remaining_rows -= batch.size();
        ++state_.batch_index;
        history_.emplace_back(state_.tau_low, state_.tau_high);
    }
    summary_.tau_low = state_.tau_low;
    summary_.tau_high = state_.tau_high;
    return out;
}

}  // namespace semql
