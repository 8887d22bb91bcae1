#include "semql/models/http.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "semql/core/errors.hpp"

namespace semql {

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(options_.endpoint, m, url)) {
        throw Error("invalid endpoint url '" + options_.endpoint + "'");
    }
    host_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "";
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/v1/chat/completions";
}

std::string HttpProvider::wire_prompt(ModelRequest const& request) {
    switch (request.task) {
        case Task::FilterBool:
            return request.prompt +
                   "\n\nAnswer with exactly `true` or `false`, followed by a space and your "
                   "confidence in that answer as a number between 0 and 1.";
        case Task::ClassifyMulti: {
            nlohmann::json labels = request.labels;
            return request.prompt +
                   "\n\nCandidate labels for {label}: " + labels.dump() +
                   "\nAnswer with a JSON array containing every candidate label for which the "
                   "statement holds.";
        }
        default: return request.prompt;
    }
}

std::optional<std::pair<bool, double>> HttpProvider::parse_bool_answer(std::string const& text) {
    static const std::regex answer(R"(^\s*(true|false)\s+([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*$)",
                                   std::regex::icase);
    std::smatch m;
    if (!std::regex_match(text, m, answer)) return std::nullopt;
    bool value = m[1].str().size() == 4;
    double conf = std::strtod(m[2].str().c_str(), nullptr);
    if (conf < 0.0 || conf > 1.0) return std::nullopt;
    return std::make_pair(value, conf);
}

ModelResponse HttpProvider::invoke(ModelRequest const& request) {
    httplib::Client client(host_);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout).count();
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout).count() % 1000000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (char const* key = std::getenv(options_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    nlohmann::json body = {
        {"model", request.model_name},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", wire_prompt(request)}}})},
        {"max_tokens", request.max_output_tokens},
    };
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        throw ProviderError("http transport error: " + httplib::to_string(res.error()), true);
    }
    if (res->status >= 500) {
        throw ProviderError("http status " + std::to_string(res->status), true);
    }
    if (res->status >= 400) {
        throw ProviderError("http status " + std::to_string(res->status) + ": " + res->body, false);
    }

    ModelResponse r;
    try {
        auto j = nlohmann::json::parse(res->body);
        r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            auto const& u = j["usage"];
            r.usage.prompt_tokens = u.value("prompt_tokens", std::size_t{0});
            r.usage.output_tokens = u.value("completion_tokens", std::size_t{0});
        }
    } catch (nlohmann::json::exception const& e) {
        throw ProviderError(std::string("malformed completion response: ") + e.what(), false);
    }

    if (request.task == Task::FilterBool) {
        auto parsed = parse_bool_answer(r.text);
        if (!parsed) throw ProviderError("unparseable boolean answer '" + r.text + "'", false);
        r.bool_value = parsed->first;
        r.confidence = parsed->second;
    } else if (request.task == Task::ClassifyMulti) {
        try {
            r.labels = nlohmann::json::parse(r.text).get<std::vector<std::string>>();
        } catch (nlohmann::json::exception const&) {
            throw ProviderError("unparseable label list '" + r.text + "'", false);
        }
    }
    return r;
}

}  // namespace semql
