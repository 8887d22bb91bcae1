#include "semql/agg/agg.hpp"

#include <map>
#include <unordered_map>

#include "semql/core/errors.hpp"
#include "semql/core/prompt.hpp"

namespace semql {

std::string agg_prompt(Task task, std::vector<std::string> const& inputs,
                       std::optional<std::string> const& instruction) {
    std::string head;
    switch (task) {
        case Task::Extract: head = "Extract the key information from these rows."; break;
        case Task::Combine: head = "Combine these intermediate notes into one, dropping redundant detail."; break;
        case Task::Summarize: head = "Write the final answer from these notes."; break;
        case Task::FastAggregate: head = "Write the final answer from these rows."; break;
        default: head = "Aggregate these texts."; break;
    }
    if (instruction) head += "\nTask: " + *instruction;
    std::string out = head;
    for (auto const& in : inputs) out += "\n---\n" + in;
    return out;
}

AggState::AggState(Provider& provider, AggOptions options)
    : provider_(provider), options_(std::move(options)) {
    if (options_.batch_size_tokens == 0) throw Error("aggregation batch size must be positive");
}

std::size_t AggState::state_tokens() const {
    std::size_t t = 0;
    for (auto const& s : s_) t += estimate_tokens(s);
    return t;
}

std::string AggState::call(Task task, std::vector<std::string> inputs) {
    ModelRequest req;
    req.task = task;
    req.model_name = options_.model;
    req.prompt = agg_prompt(task, inputs, options_.instruction);
    req.max_output_tokens = options_.batch_size_tokens;
    trace_.push_back({task, std::move(inputs)});
    return provider_.invoke(req).text;
}

void AggState::flush_rows() {
    if (r_.empty()) return;
    s_.push_back(call(Task::Extract, std::move(r_)));
    r_.clear();
    r_tokens_ = 0;
}

void AggState::combine_prefix() {
    std::size_t n = 0, tokens = 0;
    while (n < s_.size()) {
        auto t = estimate_tokens(s_[n]);
        if (n >= 2 && tokens + t > options_.batch_size_tokens) break;
        tokens += t;
        ++n;
    }
    std::vector<std::string> prefix(s_.begin(), s_.begin() + static_cast<std::ptrdiff_t>(n));
    auto merged = call(Task::Combine, std::move(prefix));
    s_.erase(s_.begin(), s_.begin() + static_cast<std::ptrdiff_t>(n));
    s_.insert(s_.begin(), std::move(merged));
}

void AggState::push(std::string const& text) {
    auto const batch = options_.batch_size_tokens;
    auto t = estimate_tokens(text);
    if (t > batch) {
        flush_rows();
        ++truncations_;
        s_.push_back(call(Task::Extract, {truncate_to_tokens(text, batch)}));
    } else {
        if (r_tokens_ + t > batch) flush_rows();
        r_.push_back(text);
        r_tokens_ += t;
    }
    while (s_.size() > 1 && state_tokens() > batch) combine_prefix();
}

std::string AggState::finalize() {
    if (r_.empty() && s_.empty()) return "";
    if (s_.empty() && r_tokens_ <= options_.batch_size_tokens) {
        auto rows = std::move(r_);
        r_.clear();
        r_tokens_ = 0;
        return call(Task::FastAggregate, std::move(rows));
    }
    flush_rows();
    while (s_.size() > 1) combine_prefix();
    auto last = s_.front();
    s_.clear();
    return call(Task::Summarize, {std::move(last)});
}

Table group_aggregate(Table const& table, std::vector<std::string> const& group_columns,
                      std::string const& text_column, Provider& provider, AggOptions const& options,
                      std::string const& output_name, AggStats* stats, ParallelFor const& pfor) {
    auto const& schema = table.schema();
    std::vector<std::size_t> key_idx;
    std::vector<ColumnDef> out_cols;
    for (auto const& g : group_columns) {
        auto i = schema.find(g);
        if (!i) throw NameError("unknown group column '" + g + "'");
        key_idx.push_back(*i);
        out_cols.push_back(schema[*i]);
    }
    auto text_idx = schema.find(text_column);
    if (!text_idx) throw NameError("unknown column '" + text_column + "'");
    out_cols.push_back({output_name, ValueKind::Text});

    std::vector<Row> keys;
    std::vector<std::vector<std::string>> texts;
    std::unordered_map<std::size_t, std::vector<std::size_t>> buckets;
    for (auto const& row : table.rows()) {
        Row key;
        std::size_t h = 0;
        for (auto i : key_idx) {
            key.push_back(row[i]);
            h = h * 1000003U ^ row[i].hash();
        }
        std::size_t group = keys.size();
        bool found = false;
        for (auto g : buckets[h]) {
            if (keys[g] == key) {
                group = g;
                found = true;
                break;
            }
        }
        if (!found) {
            buckets[h].push_back(group);
            keys.push_back(key);
            texts.emplace_back();
        }
        auto const& v = row[*text_idx];
        if (!v.is_null()) texts[group].push_back(v.render());
    }

    std::vector<std::string> results(keys.size());
    std::vector<AggStats> per_group(keys.size());
    pfor(keys.size(), [&](std::size_t g) {
        AggState st(provider, options);
        for (auto const& t : texts[g]) st.push(t);
        results[g] = st.finalize();
        per_group[g] = {st.calls(), st.truncations()};
    });

    std::vector<Row> out_rows;
    for (std::size_t g = 0; g < keys.size(); ++g) {
        Row r = keys[g];
        r.push_back(Value::text(results[g]));
        out_rows.push_back(std::move(r));
        if (stats) {
            stats->calls += per_group[g].calls;
            stats->truncations += per_group[g].truncations;
        }
    }
    return Table(table.name(), Schema(out_cols), std::move(out_rows));
}

}  // namespace semql
