#include "semql/models/registry.hpp"

#include <fstream>

#include "semql/core/errors.hpp"
#include "semql/models/http.hpp"
#include "semql/models/scripted.hpp"
#include "semql/models/synthetic.hpp"

namespace semql {

void ProviderRegistry::add(std::string const& model, ProviderPtr base, StackOptions const& options) {
    providers_[model] = make_stack(std::move(base), stats_, options);
}

ProviderPtr ProviderRegistry::get(std::string const& model) const {
    if (auto it = providers_.find(model); it != providers_.end()) return it->second;
    if (auto it = providers_.find(std::string(kDefaultModel)); it != providers_.end()) return it->second;
    throw ProviderError("no provider configured for model '" + model + "'", false);
}

bool ProviderRegistry::has(std::string const& model) const {
    return providers_.count(model) > 0 || providers_.count(std::string(kDefaultModel)) > 0;
}

namespace {

AccuracyProfile profile_from(nlohmann::json const& params) {
    auto kind = params.value("profile", std::string("oracle"));
    double p = params.value("accuracy", 1.0);
    AccuracyProfile a;
    if (kind == "oracle") a = AccuracyProfile::oracle();
    else if (kind == "calibrated") a = AccuracyProfile::calibrated(p);
    else if (kind == "hard_easy") {
        a = AccuracyProfile::hard_easy(p, params.value("hard_fraction", 0.2),
                                       params.value("easy_accuracy", 1.0));
    } else {
        throw Error("unknown synthetic profile '" + kind + "'");
    }
    a.false_positive_rate = params.value("false_positive_rate", 0.0);
    return a;
}

void add_entry(ProviderRegistry& reg, nlohmann::json const& entry, std::filesystem::path const& base_dir,
               ProviderConfigOptions const& options) {
    auto name = entry.at("name").get<std::string>();
    auto kind = entry.at("kind").get<std::string>();
    auto params = entry.value("params", nlohmann::json::object());

    ProviderPtr base;
    if (kind == "scripted") {
        std::filesystem::path fixture = params.at("fixture").get<std::string>();
        if (fixture.is_relative()) fixture = base_dir / fixture;
        base = std::make_shared<ScriptedProvider>(ScriptedProvider::from_file(fixture));
    } else if (kind == "synthetic") {
        auto seed = params.value("seed", options.seed);
        auto truth_kind = params.value("truth", std::string("keywords"));
        Truth truth;
        if (truth_kind == "keywords") truth = keyword_truth(params.value("keywords", std::vector<std::string>{}));
        else if (truth_kind == "mention") truth = mention_truth(params.at("marker").get<std::string>());
        else throw Error("unknown synthetic truth '" + truth_kind + "'");
        base = std::make_shared<SyntheticProvider>(truth, profile_from(params), seed);
    } else if (kind == "http") {
        HttpProviderOptions h;
        h.endpoint = params.at("endpoint").get<std::string>();
        h.api_key_env = params.value("api_key_env", h.api_key_env);
        h.timeout = std::chrono::milliseconds(params.value("timeout_ms", 30000));
        base = std::make_shared<HttpProvider>(h);
    } else {
        throw Error("unknown provider kind '" + kind + "'");
    }
    if (options.record_path) {
        base = std::make_shared<RecordingProvider>(base, *options.record_path, true);
    }
    StackOptions stack;
    stack.max_in_flight = params.value("max_in_flight", std::size_t{8});
    stack.max_retries = params.value("max_retries", 3);
    stack.base_delay = std::chrono::milliseconds(params.value("base_delay_ms", 100));
    stack.sleeper = options.sleeper;
    reg.add(name, std::move(base), stack);
}

}  // namespace

ProviderRegistry providers_from_json(nlohmann::json const& config, std::filesystem::path const& base_dir,
                                     ProviderConfigOptions const& options) {
    ProviderRegistry reg;
    if (options.record_path) std::ofstream(*options.record_path, std::ios::trunc);
    try {
        if (config.is_array()) {
            for (auto const& entry : config) add_entry(reg, entry, base_dir, options);
        } else {
            add_entry(reg, config, base_dir, options);
        }
    } catch (nlohmann::json::exception const& e) {
        throw Error(std::string("invalid provider config: ") + e.what());
    }
    return reg;
}

ProviderRegistry load_providers(std::filesystem::path const& path, ProviderConfigOptions const& options) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open provider config " + path.string());
    nlohmann::json config;
    try {
        in >> config;
    } catch (nlohmann::json::exception const& e) {
        throw Error("invalid provider config " + path.string() + ": " + e.what());
    }
    return providers_from_json(config, path.parent_path(), options);
}

ModelRewriteOracle::ModelRewriteOracle(ProviderPtr provider, std::string model)
    : provider_(std::move(provider)), model_(std::move(model)) {}

std::string ModelRewriteOracle::render_question(RewriteQuestion const& q) {
    auto side = [](RewriteSide const& s) {
        return nlohmann::json{{"table", s.table},         {"binding", s.binding},
                              {"column", s.column},       {"placeholder", "{" + std::to_string(s.slot) + "}"},
                              {"row_count", s.row_count}, {"distinct_count", s.distinct_count},
                              {"avg_token_count", s.avg_token_count}, {"sample_values", s.samples}};
    };
    nlohmann::json j = {{"join_prompt", q.prompt}, {"inputs", {side(q.left), side(q.right)}}};
    return "Decide whether this semantic join is a multi-label classification of one input's rows "
           "into the other input's values. Answer as JSON {\"rewrite\": bool, \"label_side\": "
           "binding}.\n" +
           j.dump();
}

RewriteAnswer ModelRewriteOracle::decide(RewriteQuestion const& q) {
    ModelRequest req;
    req.task = Task::RewriteOracle;
    req.model_name = model_;
    req.prompt = render_question(q);
    ModelResponse r;
    try {
        r = provider_->invoke(req);
    } catch (ProviderError const& e) {
        throw OracleUnavailable(std::string("rewrite oracle failed: ") + e.what());
    }
    try {
        auto j = nlohmann::json::parse(r.text);
        RewriteAnswer a;
        a.rewrite = j.at("rewrite").get<bool>();
        if (a.rewrite) a.label_binding = j.at("label_side").get<std::string>();
        return a;
    } catch (nlohmann::json::exception const& e) {
        throw OracleUnavailable(std::string("malformed rewrite oracle answer: ") + e.what());
    }
}

}  // namespace semql
