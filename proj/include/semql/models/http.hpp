#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "semql/models/provider.hpp"

namespace semql {

struct HttpProviderOptions {
    std::string endpoint;  // http://host:port[/prefix]
    std::string api_key_env = "SEMQL_API_KEY";
    std::chrono::milliseconds timeout{30000};
};

/// Chat-completion client: POST <endpoint>/v1/chat/completions with
/// {model, messages:[{role:"user", content}], max_tokens}; the answer is
/// choices[0].message.content. HTTP >= 500 and transport failures are
/// retryable, 4xx and unparseable answers are not.
class HttpProvider : public Provider {
  public:
    explicit HttpProvider(HttpProviderOptions options);
    ModelResponse invoke(ModelRequest const& request) override;

    /// Prompt actually sent for a request (FilterBool / ClassifyMulti append an
    /// answer-format instruction).
    [[nodiscard]] static std::string wire_prompt(ModelRequest const& request);
    /// Parses `true|false <probability>`. Returns nullopt for anything else.
    [[nodiscard]] static std::optional<std::pair<bool, double>> parse_bool_answer(std::string const& text);

  private:
    HttpProviderOptions options_;
    std::string host_;
    std::string path_;
};

}  // namespace semql
