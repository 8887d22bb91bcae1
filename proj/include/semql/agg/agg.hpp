#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "semql/cascade/cascade.hpp"
#include "semql/core/table.hpp"
#include "semql/models/provider.hpp"

namespace semql {

struct AggOptions {
    std::size_t batch_size_tokens = 3072;
    std::optional<std::string> instruction;  // AI_AGG only
    std::string model = "default";
};

/// One model call issued by an aggregation, with the texts it carried.
struct AggCall {
    Task task = Task::Extract;
    std::vector<std::string> inputs;
    friend bool operator==(AggCall const&, AggCall const&) = default;
};

/// Hierarchical extract/combine/summarize state. R and S sizes are measured
/// in estimated tokens. Single owner; pushes must be sequential.
class AggState {
  public:
    AggState(Provider& provider, AggOptions options);

    /// Buffers `text`; flushes R through Extract when it would overflow and
    /// combines S while it exceeds the batch size. A text larger than the
    /// batch is truncated and extracted on its own.
    void push(std::string const& text);

    /// Single FastAggregate call when everything fits one batch and nothing
    /// was extracted yet; otherwise Extract the rest, Combine down to one
    /// state and Summarize it. Returns "" without calls when nothing was pushed.
    std::string finalize();

    [[nodiscard]] std::vector<AggCall> const& trace() const { return trace_; }
    [[nodiscard]] std::size_t calls() const { return trace_.size(); }
    [[nodiscard]] std::size_t truncations() const { return truncations_; }
    [[nodiscard]] std::size_t row_tokens() const { return r_tokens_; }
    [[nodiscard]] std::size_t state_tokens() const;
    [[nodiscard]] std::size_t state_count() const { return s_.size(); }

  private:
    std::string call(Task task, std::vector<std::string> inputs);
    void flush_rows();
    void combine_prefix();

    Provider& provider_;
    AggOptions options_;
    std::vector<std::string> r_;
    std::size_t r_tokens_ = 0;
    std::vector<std::string> s_;
    std::vector<AggCall> trace_;
    std::size_t truncations_ = 0;
};

/// Prompt sent for one aggregation call.
[[nodiscard]] std::string agg_prompt(Task task, std::vector<std::string> const& inputs,
                                     std::optional<std::string> const& instruction);

struct AggStats {
    std::size_t calls = 0;
    std::size_t truncations = 0;
};

/// Aggregates `text_column` of `table` per distinct combination of
/// `group_columns` (first-appearance order), skipping NULL texts. Groups run
/// independently through `pfor`. Output: key columns plus a Text column
/// named `output_name`.
[[nodiscard]] Table group_aggregate(Table const& table, std::vector<std::string> const& group_columns,
                                    std::string const& text_column, Provider& provider,
                                    AggOptions const& options, std::string const& output_name = "summary",
                                    AggStats* stats = nullptr, ParallelFor const& pfor = sequential_for());

}  // namespace semql
