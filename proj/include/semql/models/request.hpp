#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace semql {

enum class Task {
    Complete,
    FilterBool,
    ClassifyMulti,
    Extract,
    Combine,
    Summarize,
    FastAggregate,
    RewriteOracle,
};

[[nodiscard]] std::string_view to_string(Task task);
/// Throws Error for an unknown name.
[[nodiscard]] Task task_from_string(std::string_view name);

struct ModelRequest {
    Task task = Task::Complete;
    std::string model_name;
    std::string prompt;
    std::vector<std::string> labels;  // ClassifyMulti only
    std::size_t max_output_tokens = 256;

    /// Throws ProviderError(non-retryable) when the prompt is empty or labels
    /// are present/absent for the wrong task.
    void validate() const;

    /// SHA-256 of the prompt followed by each label (sorted), newline separated.
    [[nodiscard]] std::string digest() const;
};

struct Usage {
    std::size_t prompt_tokens = 0;
    std::size_t output_tokens = 0;
};

struct ModelResponse {
    std::string text;
    std::optional<bool> bool_value;
    std::optional<std::vector<std::string>> labels;
    std::optional<double> confidence;
    Usage usage;
};

[[nodiscard]] nlohmann::json to_json(ModelResponse const& r);
/// Accepts the fixture shape {text?, bool_value?, labels?, confidence?, usage?}.
[[nodiscard]] ModelResponse response_from_json(nlohmann::json const& j);

}  // namespace semql
