#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "semql/models/provider.hpp"
#include "semql/planner/planner.hpp"

namespace semql {

inline constexpr std::string_view kDefaultModel = "default";

/// Model name -> provider stack, all sharing one ProviderStats. Lookups fall
/// back to the provider registered as "default".
class ProviderRegistry {
  public:
    ProviderRegistry() : stats_(std::make_shared<ProviderStats>()) {}

    /// Wraps `base` in the standard stack (stats, retry, concurrency cap).
    void add(std::string const& model, ProviderPtr base, StackOptions const& options = {});

    /// Throws ProviderError(non-retryable) when neither the model nor
    /// "default" is registered.
    [[nodiscard]] ProviderPtr get(std::string const& model) const;
    [[nodiscard]] bool has(std::string const& model) const;
    /// Registered under exactly this name (no "default" fallback).
    [[nodiscard]] bool contains(std::string const& model) const { return providers_.count(model) > 0; }

    [[nodiscard]] std::shared_ptr<ProviderStats> const& stats() const { return stats_; }

  private:
    std::map<std::string, ProviderPtr> providers_;
    std::shared_ptr<ProviderStats> stats_;
};

struct ProviderConfigOptions {
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> record_path;
    RetryingProvider::Sleeper sleeper;
};

/// Provider config: one object or an array of {name, kind, params}, kind in
/// scripted | synthetic | http. Relative fixture paths resolve against
/// `base_dir`.
[[nodiscard]] ProviderRegistry providers_from_json(nlohmann::json const& config,
                                                   std::filesystem::path const& base_dir,
                                                   ProviderConfigOptions const& options = {});
[[nodiscard]] ProviderRegistry load_providers(std::filesystem::path const& path,
                                              ProviderConfigOptions const& options = {});

/// Rewrite oracle backed by a model: sends a RewriteOracle request carrying
/// the question as JSON and expects {"rewrite": bool, "label_side": binding}.
/// Provider failures and malformed answers raise OracleUnavailable.
class ModelRewriteOracle : public RewriteOracle {
  public:
    ModelRewriteOracle(ProviderPtr provider, std::string model);
    RewriteAnswer decide(RewriteQuestion const& question) override;

    [[nodiscard]] static std::string render_question(RewriteQuestion const& question);

  private:
    ProviderPtr provider_;
    std::string model_;
};

}  // namespace semql
