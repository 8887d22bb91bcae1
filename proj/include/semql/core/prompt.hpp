#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "semql/core/value.hpp"

namespace semql {

/// Approximate token count: ceil(bytes / 4). Deterministic and provider-independent.
[[nodiscard]] constexpr std::size_t estimate_tokens(std::string_view text) {
    return (text.size() + 3) / 4;
}

/// Longest prefix of `text` that fits in `max_tokens` without splitting a UTF-8 sequence.
[[nodiscard]] std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens);

/// A placeholder occurrence `{k}` inside a template.
struct Placeholder {
    std::size_t offset = 0;  // byte offset of '{'
    std::size_t length = 0;  // bytes including braces
    std::size_t index = 0;
};

/// Finds every `{digits}` placeholder. Other braces are ordinary text.
[[nodiscard]] std::vector<Placeholder> find_placeholders(std::string_view text);

/// Natural-language template with positional placeholders bound to columns.
class PromptTemplate {
  public:
    PromptTemplate() = default;
    /// Validates: every placeholder index < bindings.size() and every binding used.
    PromptTemplate(std::string text, std::vector<std::string> bindings);

    [[nodiscard]] std::string const& text() const { return text_; }
    [[nodiscard]] std::vector<std::string> const& bindings() const { return bindings_; }

    friend bool operator==(PromptTemplate const&, PromptTemplate const&) = default;

  private:
    std::string text_;
    std::vector<std::string> bindings_;
};

/// Substitutes placeholders verbatim. Throws ArityMismatch if the value count
/// differs from the binding count.
[[nodiscard]] std::string render_prompt(PromptTemplate const& t, std::vector<Value> const& row_values);

/// Same substitution over raw strings; used where some slots hold markers.
[[nodiscard]] std::string render_template(std::string_view text,
                                          std::vector<std::string> const& values);

}  // namespace semql
