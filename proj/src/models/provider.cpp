#include "semql/models/provider.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "semql/core/digest.hpp"
#include "semql/core/errors.hpp"
#include "semql/core/prompt.hpp"

namespace semql {

void ProviderStats::count_call(std::string const& model) {
    std::lock_guard lock(mu_);
    ++by_model_[model].call_count;
}

void ProviderStats::record(std::string const& model, Usage const& usage) {
    std::lock_guard lock(mu_);
    auto& c = by_model_[model];
    c.prompt_tokens += usage.prompt_tokens;
    c.output_tokens += usage.output_tokens;
}

std::map<std::string, ModelCounters> ProviderStats::snapshot() const {
    std::lock_guard lock(mu_);
    return by_model_;
}

std::uint64_t ProviderStats::total_calls() const {
    std::lock_guard lock(mu_);
    std::uint64_t t = 0;
    for (auto const& [_, c] : by_model_) t += c.call_count;
    return t;
}

std::uint64_t ProviderStats::calls(std::string const& model) const {
    std::lock_guard lock(mu_);
    auto it = by_model_.find(model);
    return it == by_model_.end() ? 0 : it->second.call_count;
}

void ProviderStats::reset() {
    std::lock_guard lock(mu_);
    by_model_.clear();
    hallucinations_ = 0;
}

ManagedProvider::ManagedProvider(ProviderPtr inner, std::shared_ptr<ProviderStats> stats)
    : inner_(std::move(inner)), stats_(std::move(stats)) {}

ModelResponse ManagedProvider::invoke(ModelRequest const& request) {
    request.validate();
    stats_->count_call(request.model_name);
    auto r = inner_->invoke(request);
    if (r.usage.prompt_tokens == 0) r.usage.prompt_tokens = estimate_tokens(request.prompt);
    if (r.usage.output_tokens == 0) r.usage.output_tokens = estimate_tokens(r.text);
    stats_->record(request.model_name, r.usage);

    if (r.confidence) r.confidence = std::clamp(*r.confidence, 0.0, 1.0);
    switch (request.task) {
        case Task::FilterBool:
            if (!r.bool_value) throw ProviderError("FilterBool response without a boolean", false);
            if (!r.confidence) r.confidence = 1.0;
            break;
        case Task::ClassifyMulti: {
            std::set<std::string> allowed(request.labels.begin(), request.labels.end());
            std::vector<std::string> kept;
            std::set<std::string> seen;
            std::uint64_t dropped = 0;
            for (auto& l : r.labels.value_or(std::vector<std::string>{})) {
                if (!allowed.count(l)) {
                    ++dropped;
                } else if (seen.insert(l).second) {
                    kept.push_back(std::move(l));
                }
            }
            if (dropped) stats_->add_hallucinations(dropped);
            r.labels = std::move(kept);
            break;
        }
        default: break;
    }
    return r;
}

RetryingProvider::RetryingProvider(ProviderPtr inner, int max_retries,
                                   std::chrono::milliseconds base_delay, Sleeper sleeper,
                                   std::uint64_t seed)
    : inner_(std::move(inner)),
      max_retries_(max_retries),
      base_delay_(base_delay),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      seed_(seed) {}

ModelResponse RetryingProvider::invoke(ModelRequest const& request) {
    for (int attempt = 0;; ++attempt) {
        try {
            return inner_->invoke(request);
        } catch (ProviderError const& e) {
            if (!e.retryable() || attempt >= max_retries_) throw;
        }
        double jitter = 0.5 * unit_interval(mix64(seed_ ^ draws_.fetch_add(1)));
        auto delay = base_delay_.count() * (1LL << attempt) * (1.0 + jitter);
        sleeper_(std::chrono::milliseconds(static_cast<long long>(delay)));
    }
}

ConcurrencyLimiter::ConcurrencyLimiter(ProviderPtr inner, std::size_t max_in_flight)
    : inner_(std::move(inner)), cap_(std::max<std::size_t>(max_in_flight, 1)) {}

ModelResponse ConcurrencyLimiter::invoke(ModelRequest const& request) {
    {
        std::unique_lock lock(mu_);
        auto ticket = next_ticket_++;
        cv_.wait(lock, [&] { return ticket == now_serving_ && in_flight_ < cap_; });
        ++now_serving_;
        ++in_flight_;
        peak_ = std::max(peak_, in_flight_);
    }
    cv_.notify_all();
    struct Release {
        ConcurrencyLimiter* self;
        ~Release() {
            {
                std::lock_guard lock(self->mu_);
                --self->in_flight_;
            }
            self->cv_.notify_all();
        }
    } release{this};
    return inner_->invoke(request);
}

std::size_t ConcurrencyLimiter::peak_in_flight() const {
    std::lock_guard lock(mu_);
    return peak_;
}

ProviderPtr make_stack(ProviderPtr base, std::shared_ptr<ProviderStats> stats,
                       StackOptions const& options) {
    auto limited = std::make_shared<ConcurrencyLimiter>(std::move(base), options.max_in_flight);
    auto retrying = std::make_shared<RetryingProvider>(limited, options.max_retries,
                                                       options.base_delay, options.sleeper);
    return std::make_shared<ManagedProvider>(retrying, std::move(stats));
}

}  // namespace semql
