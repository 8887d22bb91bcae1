#include "semql/core/prompt.hpp"

#include <cctype>

#include "semql/core/errors.hpp"

namespace semql {

std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens) {
    auto limit = max_tokens * 4;
    if (text.size() <= limit) return std::string(text);
    // back off to a UTF-8 lead byte
    while (limit > 0 && (static_cast<unsigned char>(text[limit]) & 0xC0) == 0x80) --limit;
    return std::string(text.substr(0, limit));
}

std::vector<Placeholder> find_placeholders(std::string_view text) {
    std::vector<Placeholder> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        std::size_t j = i + 1;
        std::size_t index = 0;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
            index = index * 10 + static_cast<std::size_t>(text[j] - '0');
            ++j;
        }
        if (j > i + 1 && j < text.size() && text[j] == '}') {
            out.push_back(Placeholder{i, j - i + 1, index});
            i = j;
        }
    }
    return out;
}

PromptTemplate::PromptTemplate(std::string text, std::vector<std::string> bindings)
    : text_(std::move(text)), bindings_(std::move(bindings)) {
    std::vector<bool> used(bindings_.size(), false);
    for (auto const& p : find_placeholders(text_)) {
        if (p.index >= bindings_.size()) {
            throw ArityMismatch("placeholder {" + std::to_string(p.index) + "} has no binding (" +
                                std::to_string(bindings_.size()) + " bound)");
        }
        used[p.index] = true;
    }
    for (std::size_t i = 0; i < used.size(); ++i) {
        if (!used[i]) {
            throw ArityMismatch("binding " + std::to_string(i) + " ('" + bindings_[i] +
                                "') is never referenced by the template");
        }
    }
}

std::string render_template(std::string_view text, std::vector<std::string> const& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    for (auto const& p : find_placeholders(text)) {
        out.append(text.substr(pos, p.offset - pos));
        if (p.index >= values.size()) {
            throw ArityMismatch("placeholder {" + std::to_string(p.index) + "} out of range");
        }
        out.append(values[p.index]);
        pos = p.offset + p.length;
    }
    out.append(text.substr(pos));
    return out;
}

std::string render_prompt(PromptTemplate const& t, std::vector<Value> const& row_values) {
    if (row_values.size() != t.bindings().size()) {
        throw ArityMismatch("template binds " + std::to_string(t.bindings().size()) +
                            " values, got " + std::to_string(row_values.size()));
    }
    std::vector<std::string> rendered;
    rendered.reserve(row_values.size());
    for (auto const& v : row_values) rendered.push_back(v.render());
    return render_template(t.text(), rendered);
}

}  // namespace semql
