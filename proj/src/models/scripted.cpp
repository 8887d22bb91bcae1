#include "semql/models/scripted.hpp"

#include <iostream>
#include <sstream>

#include "semql/core/errors.hpp"

namespace semql {

std::string fixture_key(Task task, std::string_view model, std::string_view digest) {
    return std::string(to_string(task)) + "|" + std::string(model) + "|" + std::string(digest);
}

ScriptedProvider ScriptedProvider::from_text(std::string_view jsonl) {
    ScriptedProvider p;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= jsonl.size()) {
        auto end = jsonl.find('\n', start);
        if (end == std::string_view::npos) end = jsonl.size();
        auto line = jsonl.substr(start, end - start);
        ++line_no;
        start = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            if (end == jsonl.size()) break;
            continue;
        }
        try {
            auto j = nlohmann::json::parse(line);
            auto task = task_from_string(j.at("task").get<std::string>());
            p.add(task, j.at("model").get<std::string>(), j.at("digest").get<std::string>(),
                  response_from_json(j.at("response")));
        } catch (FixtureParseError const&) {
            throw;
        } catch (std::exception const& e) {
            throw FixtureParseError(e.what(), line_no);
        }
        if (end == jsonl.size()) break;
    }
    for (auto const& w : p.warnings_) std::cerr << "warning: " << w << "\n";
    return p;
}

ScriptedProvider ScriptedProvider::from_file(std::filesystem::path const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open fixture " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

void ScriptedProvider::add(Task task, std::string const& model, std::string const& digest,
                           ModelResponse response) {
    auto key = fixture_key(task, model, digest);
    if (entries_.count(key)) {
        warnings_.push_back("duplicate fixture entry " + key + "; keeping the last one");
    }
    entries_[key] = std::move(response);
}

void ScriptedProvider::add(ModelRequest const& request, ModelResponse response) {
    add(request.task, request.model_name, request.digest(), std::move(response));
}

ModelResponse ScriptedProvider::invoke(ModelRequest const& request) {
    auto key = fixture_key(request.task, request.model_name, request.digest());
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ProviderError("no fixture entry for " + std::string(to_string(request.task)) +
                                " request to model '" + request.model_name + "' (digest " +
                                request.digest() + ")",
                            false);
    }
    return it->second;
}

std::string fixture_line(ModelRequest const& request, ModelResponse const& response) {
    nlohmann::json j;
    j["task"] = std::string(to_string(request.task));
    j["model"] = request.model_name;
    j["digest"] = request.digest();
    j["response"] = to_json(response);
    return j.dump();
}

RecordingProvider::RecordingProvider(ProviderPtr inner, std::filesystem::path const& path, bool append)
    : inner_(std::move(inner)), out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw Error("cannot open record file " + path.string());
}

ModelResponse RecordingProvider::invoke(ModelRequest const& request) {
    auto r = inner_->invoke(request);
    std::lock_guard lock(mu_);
    out_ << fixture_line(request, r) << "\n";
    out_.flush();
    return r;
}

}  // namespace semql
