#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semql/models/provider.hpp"

namespace semql {

struct CascadeConfig {
    std::size_t oracle_budget = 0;
    double phase2_fraction = 0.5;
    std::optional<double> target_precision;
    std::optional<double> target_recall;
    double delta = 0.05;
    std::size_t min_sample = 20;
    std::uint64_t seed = 0;
    /// Rows per cascade batch (threshold refinement and routing allowance).
    std::size_t batch_rows = 4096;
    std::string proxy_model = "proxy";
    std::string oracle_model = "oracle";

    /// Throws Error for out-of-range fields.
    void validate() const;
    /// Equality of everything except the budget.
    [[nodiscard]] bool compatible(CascadeConfig const& other) const;
};

inline constexpr double kDefaultQualityTarget = 0.9;

struct Sample {
    std::uint64_t row_id = 0;
    double score = 0.5;
    bool label = false;   // oracle answer
    double weight = 1.0;  // inverse inclusion probability
    friend bool operator==(Sample const&, Sample const&) = default;
};

struct CascadeState {
    CascadeConfig config;
    double tau_low = 0.0;
    double tau_high = 1.0;
    std::vector<Sample> samples;
    std::size_t oracle_calls_used = 0;
    std::size_t batch_index = 0;

    [[nodiscard]] std::size_t remaining_budget() const {
        return config.oracle_budget > oracle_calls_used ? config.oracle_budget - oracle_calls_used : 0;
    }
};

struct ScoredRow {
    std::uint64_t row_id = 0;
    std::string prompt;
    double score = 0.5;  // confidence that the predicate holds
    bool proxy_decision = false;
    bool proxy_error = false;
};

enum class RouteSource { ProxyAccept, ProxyReject, Oracle, ProxyFallback };

[[nodiscard]] std::string_view to_string(RouteSource s);

struct RoutedPrediction {
    std::uint64_t row_id = 0;
    bool decision = false;
    RouteSource source = RouteSource::ProxyFallback;
    friend bool operator==(RoutedPrediction const&, RoutedPrediction const&) = default;
};

struct CascadeSummary {
    std::size_t rows = 0;
    std::size_t proxy_calls = 0;
    std::size_t oracle_calls = 0;
    std::size_t proxy_errors = 0;
    std::size_t oracle_failures = 0;
    std::size_t sampled = 0;
    std::map<RouteSource, std::size_t> by_source;
    double tau_low = 0.0;
    double tau_high = 1.0;
};

/// Runs `fn(i)` for i in [0, n); may run them concurrently.
using ParallelFor = std::function<void(std::size_t n, std::function<void(std::size_t)> const& fn)>;

[[nodiscard]] ParallelFor sequential_for();

/// Phase 1: one FilterBool call per row on the proxy. A `false` answer with
/// confidence c scores 1 - c. Rows whose call fails score 0.5.
[[nodiscard]] std::vector<ScoredRow> phase1_proxy(std::vector<std::pair<std::uint64_t, std::string>> const& rows,
                                                  Provider& proxy, std::string const& model,
                                                  ParallelFor const& pfor = sequential_for());

/// Inclusion probabilities for drawing `k` rows: pi = min(1, k*q) with
/// q = 0.2/n + 0.8*tri(s)/sum(tri), tri(s) = 1 - 2|s - 0.5|, capped mass
/// redistributed so that sum(pi) = min(k, n).
[[nodiscard]] std::vector<double> inclusion_probabilities(std::vector<double> const& scores, std::size_t k);

/// Systematic sampling: indices selected with the given inclusion
/// probabilities using one uniform start derived from `seed`.
[[nodiscard]] std::vector<std::size_t> systematic_sample(std::vector<double> const& pi, std::uint64_t seed);

/// Phase 2: samples min(budget_slice, |rows|) rows, labels them with the
/// oracle and returns weighted samples. Oracle failures drop the sample but
/// still consume the call.
[[nodiscard]] std::vector<Sample> phase2_sample(std::vector<ScoredRow> const& rows, std::size_t budget_slice,
                                                std::uint64_t seed, Provider& oracle, std::string const& model,
                                                std::size_t* calls_made = nullptr,
                                                ParallelFor const& pfor = sequential_for());

/// One-sided empirical Bernstein radius for a weighted Bernoulli mean with
/// empirical variance `variance` and effective sample size `n_eff`.
[[nodiscard]] double bernstein_radius(double variance, double n_eff, double delta);

/// (Σw)² / Σw².
[[nodiscard]] double effective_sample_size(std::vector<double> const& weights);

/// Phase 3: thresholds from weighted samples (see CascadeConfig targets).
[[nodiscard]] std::pair<double, double> phase3_learn_thresholds(std::vector<Sample> const& samples,
                                                                CascadeConfig const& config);

/// Phase 4: samples from the current uncertainty region of `rows` using
/// floor(remaining budget * phase2_fraction) calls (at least one while budget
/// remains), appends them and recomputes the thresholds. Returns the new samples.
std::vector<Sample> phase4_refine(CascadeState& state, std::vector<ScoredRow> const& rows, Provider& oracle,
                   ParallelFor const& pfor = sequential_for());

/// Routes one batch. Rows inside [tau_low, tau_high] go to the oracle while
/// `allowance` lasts (most uncertain first); `labelled` holds oracle answers
/// already obtained for sampled rows, which are reused without a call.
[[nodiscard]] std::vector<RoutedPrediction> route(std::vector<ScoredRow> const& rows, CascadeState& state,
                                                  Provider& oracle, std::size_t allowance,
                                                  std::map<std::uint64_t, bool> const& labelled = {},
                                                  CascadeSummary* summary = nullptr,
                                                  ParallelFor const& pfor = sequential_for());

/// Concatenates samples (canonically sorted), sums budgets and usage, and
/// recomputes thresholds. Throws ConfigMismatch.
[[nodiscard]] CascadeState merge_states(CascadeState const& a, CascadeState const& b);

/// Whole-stream driver: splits rows (in the given order) into batches of
/// config.batch_rows; batch 0 runs phase 2 + 3, later batches phase 4; every
/// batch is routed with a pro-rata share of the remaining budget.
class CascadeRunner {
  public:
    CascadeRunner(CascadeConfig config, ProviderPtr proxy, ProviderPtr oracle,
                  ParallelFor pfor = sequential_for());

    std::vector<RoutedPrediction> run(std::vector<std::pair<std::uint64_t, std::string>> const& rows);

    [[nodiscard]] CascadeState const& state() const { return state_; }
    [[nodiscard]] CascadeSummary const& summary() const { return summary_; }
    /// (tau_low, tau_high) after each batch.
    [[nodiscard]] std::vector<std::pair<double, double>> const& history() const { return history_; }

  private:
    CascadeState state_;
    ProviderPtr proxy_;
    ProviderPtr oracle_;
    ParallelFor pfor_;
    CascadeSummary summary_;
    std::vector<std::pair<double, double>> history_;
};

}  // namespace semql
