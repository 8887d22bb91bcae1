#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "semql/planner/planner.hpp"

namespace semql {

/// Runtime reordering of commutable conjuncts. Observations are collected per
/// batch; at each batch end the last `window` batches are pooled, every
/// predicate is re-ranked (cost / (1 - selectivity), unobserved values fall
/// back to the planner profile), and the new order is adopted only when its
/// expected per-row cost beats the current order by at least `hysteresis`.
class AdaptiveReorderer {
  public:
    AdaptiveReorderer(std::vector<PredicateProfile> profiles, std::size_t window = 10,
                      double hysteresis = 0.10);

    /// Current evaluation order (indices into the profile list).
    [[nodiscard]] std::vector<std::size_t> const& order() const { return order_; }

    /// Records `seen` evaluations of predicate `index` of which `passed`
    /// were true, at a total cost of `cost` units.
    void observe(std::size_t index, double seen, double passed, double cost);

    /// Closes the current batch. Returns true when the order changed.
    bool end_batch();

    [[nodiscard]] std::size_t flips() const { return flips_; }
    [[nodiscard]] std::vector<PredicateProfile> current_profiles() const;

    /// Expected per-row cost of evaluating `profiles` in `order`.
    [[nodiscard]] static double expected_cost(std::vector<PredicateProfile> const& profiles,
                                              std::vector<std::size_t> const& order);

  private:
    std::vector<PredicateProfile> base_;
    std::vector<std::size_t> order_;
    std::vector<Observation> current_;
    std::deque<std::vector<Observation>> history_;
    std::size_t window_;
    double hysteresis_;
    std::size_t flips_ = 0;
};

}  // namespace semql
