#include "semql/exec/reorder.hpp"

#include <numeric>

namespace semql {

AdaptiveReorderer::AdaptiveReorderer(std::vector<PredicateProfile> profiles, std::size_t window,
                                     double hysteresis)
    : base_(std::move(profiles)),
      order_(base_.size()),
      current_(base_.size()),
      window_(std::max<std::size_t>(window, 1)),
      hysteresis_(hysteresis) {
    std::iota(order_.begin(), order_.end(), 0);
}

void AdaptiveReorderer::observe(std::size_t index, double seen, double passed, double cost) {
    auto& o = current_.at(index);
    o.rows_seen += seen;
    o.rows_passed += passed;
    o.total_cost += cost;
}

std::vector<PredicateProfile> AdaptiveReorderer::current_profiles() const {
    std::vector<Observation> pooled(base_.size());
    for (auto const& batch : history_) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            pooled[i].rows_seen += batch[i].rows_seen;
            pooled[i].rows_passed += batch[i].rows_passed;
            pooled[i].total_cost += batch[i].total_cost;
        }
    }
    auto profiles = base_;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        auto const& o = pooled[i];
        if (o.rows_seen <= 0) continue;
        profiles[i].observed = o;
        profiles[i].est_selectivity = o.rows_passed / o.rows_seen;
        profiles[i].est_cost_per_row = std::max(1.0, o.total_cost / o.rows_seen);
    }
    return profiles;
}

double AdaptiveReorderer::expected_cost(std::vector<PredicateProfile> const& profiles,
                                        std::vector<std::size_t> const& order) {
    double reach = 1.0, cost = 0.0;
    for (auto i : order) {
        cost += reach * profiles[i].est_cost_per_row;
        reach *= profiles[i].est_selectivity;
    }
    return cost;
}

bool AdaptiveReorderer::end_batch() {
    history_.push_back(current_);
    if (history_.size() > window_) history_.pop_front();
    current_.assign(base_.size(), Observation{});
    if (base_.size() < 2) return false;

    auto profiles = current_profiles();
    auto candidate = order_predicates(profiles);
    if (candidate == order_) return false;
    double now = expected_cost(profiles, order_);
    double next = expected_cost(profiles, candidate);
    if (next <= now * (1.0 - hysteresis_)) {
        order_ = std::move(candidate);
        ++flips_;
        return true;
    }
    return false;
}

}  // namespace semql
