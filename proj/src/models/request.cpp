#include "semql/models/request.hpp"

#include <algorithm>
#include <array>

#include "semql/core/digest.hpp"
#include "semql/core/errors.hpp"

namespace semql {

namespace {

constexpr std::array<std::pair<Task, std::string_view>, 8> kTaskNames{{
    {Task::Complete, "Complete"},
    {Task::FilterBool, "FilterBool"},
    {Task::ClassifyMulti, "ClassifyMulti"},
    {Task::Extract, "Extract"},
    {Task::Combine, "Combine"},
    {Task::Summarize, "Summarize"},
    {Task::FastAggregate, "FastAggregate"},
    {Task::RewriteOracle, "RewriteOracle"},
}};

}  // namespace

std::string_view to_string(Task task) {
    for (auto const& [t, name] : kTaskNames) {
        if (t == task) return name;
    }
    return "?";
}

Task task_from_string(std::string_view name) {
    for (auto const& [t, n] : kTaskNames) {
        if (n == name) return t;
    }
    throw Error("unknown task '" + std::string(name) + "'");
}

void ModelRequest::validate() const {
    if (prompt.empty()) throw ProviderError("request prompt is empty", false);
    bool classify = task == Task::ClassifyMulti;
    if (classify && labels.empty()) throw ProviderError("ClassifyMulti request without labels", false);
    if (!classify && !labels.empty()) {
        throw ProviderError(std::string(to_string(task)) + " request must not carry labels", false);
    }
}

std::string ModelRequest::digest() const {
    auto sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    std::string payload = prompt;
    for (auto const& l : sorted) payload += "\n" + l;
    return sha256_hex(payload);
}

nlohmann::json to_json(ModelResponse const& r) {
    nlohmann::json j;
    j["text"] = r.text;
    if (r.bool_value) j["bool_value"] = *r.bool_value;
    if (r.labels) j["labels"] = *r.labels;
    if (r.confidence) j["confidence"] = *r.confidence;
    j["usage"] = {{"prompt_tokens", r.usage.prompt_tokens}, {"output_tokens", r.usage.output_tokens}};
    return j;
}

ModelResponse response_from_json(nlohmann::json const& j) {
    if (!j.is_object()) throw Error("response must be a JSON object");
    ModelResponse r;
    if (j.contains("text")) r.text = j.at("text").get<std::string>();
    if (j.contains("bool_value")) r.bool_value = j.at("bool_value").get<bool>();
    if (j.contains("labels")) r.labels = j.at("labels").get<std::vector<std::string>>();
    if (j.contains("confidence")) {
        double c = j.at("confidence").get<double>();
        if (c < 0.0 || c > 1.0) throw Error("confidence outside [0, 1]");
        r.confidence = c;
    }
    if (j.contains("usage")) {
        auto const& u = j.at("usage");
        r.usage.prompt_tokens = u.value("prompt_tokens", std::size_t{0});
        r.usage.output_tokens = u.value("output_tokens", std::size_t{0});
    }
    return r;
}

}  // namespace semql
