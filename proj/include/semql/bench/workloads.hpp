#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "semql/core/table.hpp"

namespace semql {

/// Ground truth for quality metrics: the expected result keys are the `key`
/// values of rows of `table` whose Bool `column` is true.
struct TruthSpec {
    std::string table;
    std::string key;
    std::string column;
};

/// A generated dataset with its query, planner hints and provider config.
struct Workload {
    std::string name;
    Catalog catalog;
    std::string query;
    std::map<std::string, double> selectivity_hints;
    std::size_t context_window_tokens = 32768;
    nlohmann::json providers = nlohmann::json::array();
    std::optional<TruthSpec> truth;
};

/// Printed form of the i-th WHERE conjunct of `sql` (hint map key).
[[nodiscard]] std::string where_key(std::string const& sql, std::size_t i);

/// papers (100000) and paper_images (10000); the date predicate keeps 300
/// papers, the abstract predicate 10%, and every surviving paper has one image.
[[nodiscard]] Workload papers_images_workload();

/// 4 reviews x 6 categories joined by a semantic predicate.
[[nodiscard]] Workload review_category_workload();

/// rows x labels semantic join whose label chunking yields `chunks` calls per row.
[[nodiscard]] Workload rewrite_workload(std::size_t rows = 500, std::size_t labels = 500,
                                        std::size_t chunks = 3, std::uint64_t seed = 0,
                                        double false_positive_rate = 0.0);

/// NYT-style articles; the IN predicate keeps `in_selectivity` of the rows.
[[nodiscard]] Workload nyt_workload(double in_selectivity, std::size_t rows = 1000);

/// Equi join whose output/left-input ratio is `ratio`, AI filter on the left.
[[nodiscard]] Workload join_ratio_workload(double ratio, std::size_t rows = 1000);

/// One of six cascade datasets (differing positive rates).
[[nodiscard]] Workload cascade_workload(std::size_t dataset, std::size_t rows = 2000,
                                        std::uint64_t seed = 0);

inline constexpr std::size_t kCascadeDatasets = 6;

/// Dispatch by name: papers_images, review_category, rewrite, nyt, join_ratio, cascade.
/// Throws ScenarioParseError for unknown generators or bad parameters.
[[nodiscard]] Workload make_workload(std::string const& generator, nlohmann::json const& params);

}  // namespace semql
