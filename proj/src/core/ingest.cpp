#include "semql/core/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "semql/core/errors.hpp"

namespace semql {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(fs::path const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Fields are returned with a flag telling whether they were quoted, so that
// an explicitly quoted empty string stays distinct from NULL.
struct Field {
    std::string text;
    bool quoted = false;
};

std::vector<std::vector<Field>> split_csv(std::string_view text) {
    std::vector<std::vector<Field>> records;
    std::vector<Field> record;
    Field field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.text += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.text += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !field.text.empty()) {
                    throw IngestError("stray quote in CSV at line " + std::to_string(line));
                }
                in_quotes = true;
                field.quoted = true;
                field_started = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field = {};
                field_started = false;
                break;
            case '\r': break;
            case '\n':
                ++line;
                record.push_back(std::move(field));
                field = {};
                field_started = false;
                if (!(record.size() == 1 && record[0].text.empty() && !record[0].quoted)) {
                    records.push_back(std::move(record));
                }
                record.clear();
                break;
            default:
                field.text += c;
                field_started = true;
        }
    }
    if (in_quotes) throw IngestError("unterminated quoted CSV field");
    if (field_started || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

bool parse_int(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_float(std::string const& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

std::string guess_mime(std::string const& uri) {
    auto dot = uri.rfind('.');
    auto ext = dot == std::string::npos ? std::string() : to_lower(uri.substr(dot + 1));
    if (ext == "png") return "image/png";
    if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
    if (ext == "gif") return "image/gif";
    if (ext == "svg") return "image/svg+xml";
    if (ext == "webp") return "image/webp";
    if (ext == "pdf") return "application/pdf";
    if (ext == "txt") return "text/plain";
    if (ext == "mp3") return "audio/mpeg";
    if (ext == "wav") return "audio/wav";
    return "application/octet-stream";
}

FileRef file_from_uri(std::string const& uri, fs::path const& base_dir) {
    fs::path local = uri.substr(std::string_view("file://").size());
    if (local.is_relative()) local = base_dir / local;
    fs::path sidecar = local;
    sidecar += ".meta.json";
    std::error_code ec;
    if (fs::exists(sidecar, ec)) {
        json meta;
        try {
            meta = json::parse(read_file(sidecar));
        } catch (json::exception const& e) {
            throw IngestError("bad sidecar '" + sidecar.string() + "': " + e.what());
        }
        return FileRef::make(uri, meta.value("mime_type", guess_mime(uri)),
                             meta.value("size_bytes", std::int64_t{0}),
                             meta.value("created_at", std::int64_t{0}));
    }
    // No sidecar: metadata from the file itself when present, mime from the extension.
    std::int64_t size = 0;
    if (fs::exists(local, ec)) size = static_cast<std::int64_t>(fs::file_size(local, ec));
    return FileRef::make(uri, guess_mime(uri), size, 0);
}

}  // namespace

Table parse_csv(std::string name, std::string_view text, fs::path const& base_dir) {
    auto records = split_csv(text);
    if (records.empty()) throw IngestError("CSV '" + name + "' has no header row");
    auto const& header = records.front();
    auto const width = header.size();
    std::vector<ColumnDef> cols;
    for (auto const& h : header) cols.push_back({h.text, ValueKind::Text});

    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != width) {
            throw IngestError("CSV '" + name + "' record " + std::to_string(r) + " has " +
                              std::to_string(records[r].size()) + " fields, header has " +
                              std::to_string(width));
        }
    }

    for (std::size_t c = 0; c < width; ++c) {
        bool all_int = true, all_float = true, all_file = true, any = false;
        for (std::size_t r = 1; r < records.size(); ++r) {
            auto const& f = records[r][c];
            if (f.text.empty() && !f.quoted) continue;
            any = true;
            std::int64_t i;
            double d;
            if (f.quoted || !parse_int(f.text, i)) all_int = false;
            if (f.quoted || !parse_float(f.text, d)) all_float = false;
            if (!f.text.starts_with("file://")) all_file = false;
        }
        if (!any) cols[c].kind = ValueKind::Text;
        else if (all_int) cols[c].kind = ValueKind::Int;
        else if (all_float) cols[c].kind = ValueKind::Float;
        else if (all_file) cols[c].kind = ValueKind::File;
        else cols[c].kind = ValueKind::Text;
    }

    std::vector<Row> rows;
    rows.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        Row row;
        row.reserve(width);
        for (std::size_t c = 0; c < width; ++c) {
            auto const& f = records[r][c];
            if (f.text.empty() && !f.quoted) {
                row.push_back(Value::null());
                continue;
            }
            switch (cols[c].kind) {
                case ValueKind::Int: {
                    std::int64_t i = 0;
                    parse_int(f.text, i);
                    row.push_back(Value::integer(i));
                    break;
                }
                case ValueKind::Float: {
                    double d = 0;
                    parse_float(f.text, d);
                    row.push_back(Value::real(d));
                    break;
                }
                case ValueKind::File: row.push_back(Value::file(file_from_uri(f.text, base_dir))); break;
                default: row.push_back(Value::text(f.text));
            }
        }
        rows.push_back(std::move(row));
    }
    return Table(std::move(name), Schema(std::move(cols)), std::move(rows));
}

Table read_csv(fs::path const& path) {
    return parse_csv(path.stem().string(), read_file(path), path.parent_path());
}

namespace {

using ordered_json = nlohmann::ordered_json;

ValueKind json_kind(ordered_json const& v) {
    if (v.is_null()) return ValueKind::Null;
    if (v.is_boolean()) return ValueKind::Bool;
    if (v.is_number_integer()) return ValueKind::Int;
    if (v.is_number_float()) return ValueKind::Float;
    if (v.is_string()) return ValueKind::Text;
    if (v.is_object() && v.contains("uri")) return ValueKind::File;
    throw IngestError("unsupported JSON value: " + v.dump());
}

Value json_value(ordered_json const& v, ValueKind kind) {
    if (v.is_null()) return Value::null();
    switch (kind) {
        case ValueKind::Bool: return Value::boolean(v.get<bool>());
        case ValueKind::Int: return Value::integer(v.get<std::int64_t>());
        case ValueKind::Float: return Value::real(v.get<double>());
        case ValueKind::Text: return Value::text(v.get<std::string>());
        case ValueKind::File:
            return Value::file(FileRef::make(v.at("uri").get<std::string>(),
                                             v.value("mime_type", std::string("application/octet-stream")),
                                             v.value("size_bytes", std::int64_t{0}),
                                             v.value("created_at", std::int64_t{0})));
        case ValueKind::Null: break;
    }
    return Value::null();
}

}  // namespace

Table parse_jsonl(std::string name, std::string_view text) {
    std::vector<ordered_json> objects;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto obj = ordered_json::parse(line);
            if (!obj.is_object()) throw IngestError("line " + std::to_string(line_no) + " is not an object");
            objects.push_back(std::move(obj));
        } catch (ordered_json::exception const& e) {
            throw IngestError("JSONL '" + name + "' line " + std::to_string(line_no) + ": " + e.what());
        }
    }

    std::vector<ColumnDef> cols;
    for (auto const& obj : objects) {
        for (auto const& [key, val] : obj.items()) {
            auto kind = json_kind(val);
            auto it = std::find_if(cols.begin(), cols.end(),
                                   [&](ColumnDef const& c) { return c.name == key; });
            if (it == cols.end()) {
                cols.push_back({key, kind});
            } else if (it->kind == ValueKind::Null) {
                it->kind = kind;
            } else if (kind != ValueKind::Null && kind != it->kind) {
                if ((it->kind == ValueKind::Int && kind == ValueKind::Float) ||
                    (it->kind == ValueKind::Float && kind == ValueKind::Int)) {
                    it->kind = ValueKind::Float;
                } else {
                    throw IngestError("JSONL '" + name + "' key '" + key + "' mixes kinds");
                }
            }
        }
    }
    for (auto& c : cols) {
        if (c.kind == ValueKind::Null) c.kind = ValueKind::Text;
    }

    std::vector<Row> rows;
    rows.reserve(objects.size());
    for (auto const& obj : objects) {
        Row row;
        for (auto const& c : cols) {
            auto it = obj.find(c.name);
            if (it == obj.end()) {
                row.push_back(Value::null());
            } else if (c.kind == ValueKind::Float && it->is_number_integer()) {
                row.push_back(Value::real(static_cast<double>(it->get<std::int64_t>())));
            } else {
                row.push_back(json_value(*it, c.kind));
            }
        }
        rows.push_back(std::move(row));
    }
    return Table(std::move(name), Schema(std::move(cols)), std::move(rows));
}

Table read_jsonl(fs::path const& path) { return parse_jsonl(path.stem().string(), read_file(path)); }

Catalog load_catalog(fs::path const& dir) {
    if (!fs::is_directory(dir)) throw IngestError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (auto const& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        if (ext == ".csv" || ext == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    Catalog catalog;
    for (auto const& f : files) {
        auto table = f.extension() == ".csv" ? read_csv(f) : read_jsonl(f);
        catalog.add(std::make_shared<Table const>(std::move(table)));
    }
    return catalog;
}

std::string to_csv(Table const& table) {
    auto quote = [](std::string const& s) {
        if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    };
    std::string out;
    auto const& cols = table.schema().columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out += ',';
        out += quote(cols[i].name);
    }
    out += '\n';
    for (auto const& row : table.rows()) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            if (row[i].kind() == ValueKind::Text && row[i].as_text().empty()) {
                out += "\"\"";
            } else {
                out += quote(row[i].render());
            }
        }
        out += '\n';
    }
    return out;
}

}  // namespace semql
