#include "semql/core/table.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "semql/core/errors.hpp"
#include "semql/core/prompt.hpp"

namespace semql {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

Schema::Schema(std::vector<ColumnDef> columns) : columns_(std::move(columns)) {
    std::unordered_set<std::string> seen;
    for (auto const& c : columns_) {
        if (c.name.empty()) throw TypeError("column names must be non-empty");
        if (!seen.insert(to_lower(c.name)).second) {
            throw TypeError("duplicate column name '" + c.name + "'");
        }
    }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (iequals(columns_[i].name, name)) return i;
    }
    return std::nullopt;
}

Table::Table(std::string name, Schema schema, std::vector<Row> rows)
    : name_(std::move(name)), schema_(std::move(schema)), rows_(std::move(rows)) {
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        auto const& row = rows_[r];
        if (row.size() != schema_.size()) {
            throw ArityMismatch("row " + std::to_string(r) + " of table '" + name_ + "' has " +
                                std::to_string(row.size()) + " values, schema has " +
                                std::to_string(schema_.size()));
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!row[c].is_null() && row[c].kind() != schema_[c].kind) {
                throw TypeError("table '" + name_ + "' column '" + schema_[c].name + "' expects " +
                                std::string(to_string(schema_[c].kind)) + ", row " +
                                std::to_string(r) + " holds " +
                                std::string(to_string(row[c].kind())));
            }
        }
    }
    stats_ = compute_stats(*this);
}

TableStats compute_stats(Table const& table) {
    TableStats stats;
    stats.row_count = table.row_count();
    auto const width = table.schema().size();
    stats.columns.resize(width);
    for (std::size_t c = 0; c < width; ++c) {
        auto& col = stats.columns[c];
        std::unordered_set<Value> distinct;
        std::size_t non_null = 0;
        double token_sum = 0.0;
        for (auto const& row : table.rows()) {
            auto const& v = row[c];
            if (v.is_null()) continue;
            ++non_null;
            auto tokens = estimate_tokens(v.render());
            token_sum += static_cast<double>(tokens);
            col.max_token_count = std::max(col.max_token_count, tokens);
            if (distinct.insert(v).second && col.sample_values.size() < kMaxSampleValues) {
                col.sample_values.push_back(v);
            }
        }
        col.distinct_count = distinct.size();
        col.avg_token_count = non_null == 0 ? 0.0 : token_sum / static_cast<double>(non_null);
    }
    return stats;
}

void Catalog::add(TablePtr table) {
    auto key = to_lower(table->name());
    tables_[key] = std::move(table);
}

TablePtr Catalog::find(std::string_view name) const {
    auto it = tables_.find(to_lower(name));
    return it == tables_.end() ? nullptr : it->second;
}

TablePtr Catalog::get(std::string_view name) const {
    auto t = find(name);
    if (!t) throw NameError("unknown table '" + std::string(name) + "'");
    return t;
}

std::vector<std::string> Catalog::names() const {
    std::vector<std::string> out;
    for (auto const& [k, t] : tables_) out.push_back(t->name());
    return out;
}

}  // namespace semql
