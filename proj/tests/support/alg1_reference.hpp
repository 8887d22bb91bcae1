#pragma once

// Straight-line simulation of hierarchical aggregation (extract / combine /
// summarize with the single-batch short-circuit), written independently of
// AggState. Tokens are ceil(bytes / 4); texts are assumed ASCII.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "semql/models/request.hpp"

namespace semql::testing {

struct RefCall {
    Task task;
    std::vector<std::string> inputs;
};

struct RefResult {
    std::vector<RefCall> calls;
    std::string answer;
    std::size_t truncations = 0;
};

inline std::size_t ref_tokens(std::string const& s) { return (s.size() + 3) / 4; }

// `reply(k)` is the text returned by the k-th model call.
inline RefResult alg1_reference(std::vector<std::string> const& texts, std::size_t batch,
                                std::function<std::string(std::size_t)> const& reply) {
    RefResult res;
    std::vector<std::string> r, s;
    auto ask = [&](Task task, std::vector<std::string> inputs) {
        res.calls.push_back({task, std::move(inputs)});
        return reply(res.calls.size() - 1);
    };
    auto sum = [](std::vector<std::string> const& v) {
        std::size_t t = 0;
        for (auto const& x : v) t += ref_tokens(x);
        return t;
    };
    auto combine = [&] {
        std::size_t take = 2, acc = ref_tokens(s[0]) + ref_tokens(s[1]);
        while (take < s.size() && acc + ref_tokens(s[take]) <= batch) acc += ref_tokens(s[take++]);
        std::vector<std::string> prefix(s.begin(), s.begin() + static_cast<long>(take));
        auto merged = ask(Task::Combine, prefix);
        s.erase(s.begin(), s.begin() + static_cast<long>(take));
        s.insert(s.begin(), merged);
    };

    for (auto const& text : texts) {
        if (ref_tokens(text) > batch) {
            if (!r.empty()) s.push_back(ask(Task::Extract, r));
            r.clear();
            ++res.truncations;
            s.push_back(ask(Task::Extract, {text.substr(0, batch * 4)}));
        } else {
            if (sum(r) + ref_tokens(text) > batch) {
                s.push_back(ask(Task::Extract, r));
                r.clear();
            }
            r.push_back(text);
        }
        while (s.size() > 1 && sum(s) > batch) combine();
    }

    if (r.empty() && s.empty()) return res;
    if (s.empty()) {
        res.answer = ask(Task::FastAggregate, r);
        return res;
    }
    if (!r.empty()) s.push_back(ask(Task::Extract, r));
    while (s.size() > 1) combine();
    res.answer = ask(Task::Summarize, {s[0]});
    return res;
}

}  // namespace semql::testing
