#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "semql/models/request.hpp"

namespace semql {

/// The provider contract. Implementations must accept concurrent invoke calls.
class Provider {
  public:
    virtual ~Provider() = default;
    /// Throws ProviderError.
    virtual ModelResponse invoke(ModelRequest const& request) = 0;
};

using ProviderPtr = std::shared_ptr<Provider>;

struct ModelCounters {
    std::uint64_t call_count = 0;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t output_tokens = 0;
    friend bool operator==(ModelCounters const&, ModelCounters const&) = default;
};

/// Per-model counters plus contract-enforcement counters. Thread-safe.
class ProviderStats {
  public:
    void record(std::string const& model, Usage const& usage);
    void count_call(std::string const& model);
    void add_hallucinations(std::uint64_t n) { hallucinations_ += n; }

    [[nodiscard]] std::map<std::string, ModelCounters> snapshot() const;
    [[nodiscard]] std::uint64_t total_calls() const;
    [[nodiscard]] std::uint64_t calls(std::string const& model) const;
    [[nodiscard]] std::uint64_t label_hallucinations() const { return hallucinations_; }
    void reset();

  private:
    mutable std::mutex mu_;
    std::map<std::string, ModelCounters> by_model_;
    std::atomic<std::uint64_t> hallucinations_{0};
};

/// Adapts a function into a provider.
class CallbackProvider : public Provider {
  public:
    using Fn = std::function<ModelResponse(ModelRequest const&)>;
    explicit CallbackProvider(Fn fn) : fn_(std::move(fn)) {}
    ModelResponse invoke(ModelRequest const& request) override { return fn_(request); }

  private:
    Fn fn_;
};

/// Outermost wrapper: validates requests, counts every invoke in the shared
/// stats, enforces the response contract (FilterBool carries a boolean and a
/// confidence; ClassifyMulti labels are a subset of the request labels, extra
/// labels are dropped and counted as hallucinations).
class ManagedProvider : public Provider {
  public:
    ManagedProvider(ProviderPtr inner, std::shared_ptr<ProviderStats> stats);
    ModelResponse invoke(ModelRequest const& request) override;

  private:
    ProviderPtr inner_;
    std::shared_ptr<ProviderStats> stats_;
};

/// Retries retryable ProviderErrors with exponential backoff and jitter.
class RetryingProvider : public Provider {
  public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    RetryingProvider(ProviderPtr inner, int max_retries = 3,
                     std::chrono::milliseconds base_delay = std::chrono::milliseconds(100),
                     Sleeper sleeper = {}, std::uint64_t seed = 0);
    ModelResponse invoke(ModelRequest const& request) override;

  private:
    ProviderPtr inner_;
    int max_retries_;
    std::chrono::milliseconds base_delay_;
    Sleeper sleeper_;
    std::uint64_t seed_;
    std::atomic<std::uint64_t> draws_{0};
};

/// Caps in-flight calls; waiting callers are admitted in arrival order.
class ConcurrencyLimiter : public Provider {
  public:
    ConcurrencyLimiter(ProviderPtr inner, std::size_t max_in_flight = 8);
    ModelResponse invoke(ModelRequest const& request) override;

    [[nodiscard]] std::size_t peak_in_flight() const;

  private:
    ProviderPtr inner_;
    std::size_t cap_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::uint64_t next_ticket_ = 0;
    std::uint64_t now_serving_ = 0;
    std::size_t in_flight_ = 0;
    std::size_t peak_ = 0;
};

struct StackOptions {
    std::size_t max_in_flight = 8;
    int max_retries = 3;
    std::chrono::milliseconds base_delay{100};
    RetryingProvider::Sleeper sleeper;
};

/// Managed(Retrying(ConcurrencyLimiter(base))).
[[nodiscard]] ProviderPtr make_stack(ProviderPtr base, std::shared_ptr<ProviderStats> stats,
                                     StackOptions const& options = {});

}  // namespace semql
