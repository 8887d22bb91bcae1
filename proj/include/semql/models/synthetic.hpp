#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "semql/models/provider.hpp"

namespace semql {

/// How a synthetic boolean model errs.
///  - Oracle: always correct, confidence 1.
///  - Calibrated: confidence c = 0.5 + 0.5*u^k with k = 0.5/(p-0.5) - 1, and
///    the answer is correct with probability exactly c (so mean accuracy is p).
///  - HardEasy: a fraction `hard_fraction` of prompts is hard. Easy prompts get
///    confidence in [0.95, 1] and are correct with `easy_accuracy`; hard ones get
///    confidence in [0.5, 0.65] and the accuracy that makes the overall rate p.
struct AccuracyProfile {
    enum class Kind { Oracle, Calibrated, HardEasy };
    Kind kind = Kind::Oracle;
    double accuracy = 1.0;
    double hard_fraction = 0.2;
    double easy_accuracy = 1.0;
    /// Probability that a false pair is reported true, applied after the profile.
    double false_positive_rate = 0.0;

    static AccuracyProfile oracle() { return {}; }
    static AccuracyProfile calibrated(double p);
    static AccuracyProfile hard_easy(double p, double hard_fraction, double easy_accuracy = 1.0);
};

/// Ground truth for a rendered prompt.
using Truth = std::function<bool(std::string const& prompt)>;

/// True iff the prompt contains any of the keywords.
[[nodiscard]] Truth keyword_truth(std::vector<std::string> keywords);

/// Pair relation for semantic joins: the text after the last occurrence of
/// `marker` is a label; true iff the text before it contains that label as a
/// whole word.
[[nodiscard]] Truth mention_truth(std::string marker);

struct Judgement {
    bool answer = false;
    double confidence = 1.0;
};

/// Deterministic simulated model. Every random draw is a hash of (seed,
/// prompt), so answers do not depend on call order or concurrency.
/// ClassifyMulti prompts carry the literal marker `{label}` where each
/// candidate label is substituted before judging.
class SyntheticProvider : public Provider {
  public:
    SyntheticProvider(Truth truth, AccuracyProfile profile, std::uint64_t seed);

    ModelResponse invoke(ModelRequest const& request) override;

    [[nodiscard]] Judgement judge(std::string const& prompt) const;

  private:
    [[nodiscard]] double draw(std::string const& prompt, std::uint64_t stream) const;

    Truth truth_;
    AccuracyProfile profile_;
    std::uint64_t seed_;
};

/// Deterministic text for non-boolean tasks: the task name and a digest of the
/// prompt.
[[nodiscard]] std::string synthetic_text(Task task, std::string const& prompt);

/// Substitutes the classification marker with a concrete label.
[[nodiscard]] std::string substitute_label(std::string const& prompt, std::string const& label);

inline constexpr std::string_view kLabelMarker = "{label}";

}  // namespace semql
