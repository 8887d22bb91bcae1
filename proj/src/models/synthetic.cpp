#include "semql/models/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "semql/core/digest.hpp"

namespace semql {

AccuracyProfile AccuracyProfile::calibrated(double p) {
    AccuracyProfile a;
    a.kind = Kind::Calibrated;
    a.accuracy = p;
    return a;
}

AccuracyProfile AccuracyProfile::hard_easy(double p, double hard_fraction, double easy_accuracy) {
    AccuracyProfile a;
    a.kind = Kind::HardEasy;
    a.accuracy = p;
    a.hard_fraction = hard_fraction;
    a.easy_accuracy = easy_accuracy;
    return a;
}

Truth keyword_truth(std::vector<std::string> keywords) {
    return [keywords = std::move(keywords)](std::string const& prompt) {
        return std::any_of(keywords.begin(), keywords.end(),
                           [&](std::string const& k) { return prompt.find(k) != std::string::npos; });
    };
}

Truth mention_truth(std::string marker) {
    return [marker = std::move(marker)](std::string const& prompt) {
        auto at = prompt.rfind(marker);
        if (at == std::string::npos || marker.empty()) return false;
        auto label = prompt.substr(at + marker.size());
        while (!label.empty() && std::isspace(static_cast<unsigned char>(label.back()))) label.pop_back();
        if (label.empty()) return false;
        auto subject = std::string_view(prompt).substr(0, at);
        auto word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; };
        for (auto pos = subject.find(label); pos != std::string_view::npos; pos = subject.find(label, pos + 1)) {
            bool left = pos == 0 || !word(subject[pos - 1]);
            auto end = pos + label.size();
            bool right = end == subject.size() || !word(subject[end]);
            if (left && right) return true;
        }
        return false;
    };
}

std::string substitute_label(std::string const& prompt, std::string const& label) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto hit = prompt.find(kLabelMarker, pos);
        if (hit == std::string::npos) break;
        out.append(prompt, pos, hit - pos);
        out += label;
        pos = hit + kLabelMarker.size();
    }
    out.append(prompt, pos, std::string::npos);
    return out;
}

std::string synthetic_text(Task task, std::string const& prompt) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(stable_hash64(prompt, static_cast<std::uint64_t>(task))));
    return std::string(to_string(task)) + ":" + buf;
}

SyntheticProvider::SyntheticProvider(Truth truth, AccuracyProfile profile, std::uint64_t seed)
    : truth_(std::move(truth)), profile_(profile), seed_(seed) {}

double SyntheticProvider::draw(std::string const& prompt, std::uint64_t stream) const {
    return unit_interval(mix64(stable_hash64(prompt, seed_) ^ mix64(stream)));
}

Judgement SyntheticProvider::judge(std::string const& prompt) const {
    bool truth = truth_(prompt);
    Judgement j;
    double u_conf = draw(prompt, 1);
    double u_correct = draw(prompt, 2);
    bool correct = true;
    switch (profile_.kind) {
        case AccuracyProfile::Kind::Oracle:
            j.confidence = 1.0;
            break;
        case AccuracyProfile::Kind::Calibrated: {
            double p = profile_.accuracy;
            if (p >= 1.0) {
                j.confidence = 1.0;
            } else if (p <= 0.5) {
                j.confidence = 0.5;
            } else {
                double k = 0.5 / (p - 0.5) - 1.0;
                j.confidence = 0.5 + 0.5 * std::pow(u_conf, k);
            }
            correct = u_correct < j.confidence;
            break;
        }
        case AccuracyProfile::Kind::HardEasy: {
            double h = std::clamp(profile_.hard_fraction, 0.0, 1.0);
            bool hard = draw(prompt, 3) < h;
            if (hard) {
                double p_hard = h > 0 ? std::clamp((profile_.accuracy - (1.0 - h) * profile_.easy_accuracy) / h, 0.0, 1.0)
                                      : 1.0;
                j.confidence = 0.5 + 0.15 * u_conf;
                correct = u_correct < p_hard;
            } else {
                j.confidence = 0.95 + 0.05 * u_conf;
                correct = u_correct < profile_.easy_accuracy;
            }
            break;
        }
    }
    j.answer = correct ? truth : !truth;
    if (!truth && !j.answer && profile_.false_positive_rate > 0 &&
        draw(prompt, 4) < profile_.false_positive_rate) {
        j.answer = true;
    }
    return j;
}

ModelResponse SyntheticProvider::invoke(ModelRequest const& request) {
    ModelResponse r;
    switch (request.task) {
        case Task::FilterBool: {
            auto j = judge(request.prompt);
            r.bool_value = j.answer;
            r.confidence = j.confidence;
            r.text = j.answer ? "true" : "false";
            break;
        }
        case Task::ClassifyMulti: {
            std::vector<std::string> hits;
            for (auto const& l : request.labels) {
                if (truth_(substitute_label(request.prompt, l))) hits.push_back(l);
            }
            r.labels = std::move(hits);
            break;
        }
        case Task::RewriteOracle:
            r.text = R"({"rewrite": false})";
            break;
        default:
            r.text = synthetic_text(request.task, request.prompt);
            break;
    }
    return r;
}

}  // namespace semql
