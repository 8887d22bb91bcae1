#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semql/core/value.hpp"

namespace semql {

struct ColumnDef {
    std::string name;
    ValueKind kind = ValueKind::Text;

    friend bool operator==(ColumnDef const&, ColumnDef const&) = default;
};

[[nodiscard]] bool iequals(std::string_view a, std::string_view b);
[[nodiscard]] std::string to_lower(std::string_view s);

/// Ordered column list; names are unique under case-insensitive comparison.
class Schema {
  public:
    Schema() = default;
    explicit Schema(std::vector<ColumnDef> columns);

    [[nodiscard]] std::size_t size() const { return columns_.size(); }
    [[nodiscard]] ColumnDef const& operator[](std::size_t i) const { return columns_[i]; }
    [[nodiscard]] std::vector<ColumnDef> const& columns() const { return columns_; }
    [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const;

    friend bool operator==(Schema const&, Schema const&) = default;

  private:
    std::vector<ColumnDef> columns_;
};

using Row = std::vector<Value>;

struct ColumnStats {
    std::size_t distinct_count = 0;
    double avg_token_count = 0.0;
    std::size_t max_token_count = 0;
    std::vector<Value> sample_values;  // first distinct values in row order, at most 10
};

struct TableStats {
    std::size_t row_count = 0;
    std::vector<ColumnStats> columns;
};

inline constexpr std::size_t kMaxSampleValues = 10;

class Table;

/// Exact row count; exact distinct counts; mean token estimate over non-null values.
[[nodiscard]] TableStats compute_stats(Table const& table);

/// Immutable once constructed. Every row is validated against the schema.
class Table {
  public:
    Table() = default;
    Table(std::string name, Schema schema, std::vector<Row> rows);

    [[nodiscard]] std::string const& name() const { return name_; }
    [[nodiscard]] Schema const& schema() const { return schema_; }
    [[nodiscard]] std::vector<Row> const& rows() const { return rows_; }
    [[nodiscard]] std::size_t row_count() const { return rows_.size(); }
    [[nodiscard]] TableStats const& stats() const { return stats_; }

  private:
    std::string name_;
    Schema schema_;
    std::vector<Row> rows_;
    TableStats stats_;
};

using TablePtr = std::shared_ptr<Table const>;

/// Name -> table map with case-insensitive lookup.
class Catalog {
  public:
    void add(TablePtr table);
    [[nodiscard]] TablePtr find(std::string_view name) const;
    [[nodiscard]] TablePtr get(std::string_view name) const;  // throws NameError
    [[nodiscard]] std::vector<std::string> names() const;

  private:
    std::map<std::string, TablePtr> tables_;
};

}  // namespace semql
