#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "semql/models/provider.hpp"

namespace semql {

/// Fixture key: task, model and request digest.
[[nodiscard]] std::string fixture_key(Task task, std::string_view model, std::string_view digest);

/// Answers by exact lookup in a JSONL fixture of
/// {"task", "model", "digest", "response"} objects. Unknown requests raise a
/// non-retryable ProviderError. Duplicate keys keep the last entry and add a
/// warning.
class ScriptedProvider : public Provider {
  public:
    ScriptedProvider() = default;
    /// Throws FixtureParseError (with 1-based line) or Error when unreadable.
    static ScriptedProvider from_file(std::filesystem::path const& path);
    static ScriptedProvider from_text(std::string_view jsonl);

    void add(Task task, std::string const& model, std::string const& digest, ModelResponse response);
    void add(ModelRequest const& request, ModelResponse response);

    ModelResponse invoke(ModelRequest const& request) override;

    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] std::vector<std::string> const& warnings() const { return warnings_; }

  private:
    std::map<std::string, ModelResponse> entries_;
    std::vector<std::string> warnings_;
};

/// Wraps a provider and appends one fixture line per successful call.
class RecordingProvider : public Provider {
  public:
    RecordingProvider(ProviderPtr inner, std::filesystem::path const& path, bool append = false);
    ModelResponse invoke(ModelRequest const& request) override;

  private:
    ProviderPtr inner_;
    std::mutex mu_;
    std::ofstream out_;
};

[[nodiscard]] std::string fixture_line(ModelRequest const& request, ModelResponse const& response);

}  // namespace semql
