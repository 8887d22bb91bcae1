#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "semql/core/table.hpp"

namespace semql {

/// CSV with a header row. Column kinds are inferred per column in the order
/// Int -> Float -> Text; empty fields are NULL. A column whose non-null values
/// all start with `file://` becomes FILE, with metadata read from a sidecar
/// `<path>.meta.json` ({mime_type, size_bytes, created_at}) next to each file.
[[nodiscard]] Table read_csv(std::filesystem::path const& path);
[[nodiscard]] Table parse_csv(std::string name, std::string_view text,
                              std::filesystem::path const& base_dir = {});

/// One JSON object per line. Columns appear in first-seen key order.
/// Objects of the form {"uri": ..., "mime_type": ...} become FILE values.
[[nodiscard]] Table read_jsonl(std::filesystem::path const& path);
[[nodiscard]] Table parse_jsonl(std::string name, std::string_view text);

/// Loads every *.csv and *.jsonl file in `dir`, keyed by file stem.
[[nodiscard]] Catalog load_catalog(std::filesystem::path const& dir);

/// Writes a table as CSV (header + rows); FILE values are written as uris.
[[nodiscard]] std::string to_csv(Table const& table);

}  // namespace semql
