#include "semql/core/value.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "semql/core/errors.hpp"

namespace semql {

std::string_view to_string(ValueKind kind) {
    switch (kind) {
        case ValueKind::Null: return "NULL";
        case ValueKind::Bool: return "BOOL";
        case ValueKind::Int: return "INT";
        case ValueKind::Float: return "FLOAT";
        case ValueKind::Text: return "TEXT";
        case ValueKind::File: return "FILE";
    }
    return "?";
}

FileRef FileRef::make(std::string uri, std::string mime_type, std::int64_t size_bytes,
                      std::int64_t created_at) {
    if (uri.empty()) throw TypeError("FILE uri must be non-empty");
    if (size_bytes < 0) throw TypeError("FILE size_bytes must be non-negative");
    std::transform(mime_type.begin(), mime_type.end(), mime_type.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto slash = mime_type.find('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 == mime_type.size()) {
        throw TypeError("FILE mime_type must look like type/subtype: '" + mime_type + "'");
    }
    return FileRef{std::move(uri), std::move(mime_type), size_bytes, created_at};
}

bool fl_is_image(FileRef const& file) { return file.mime_type.starts_with("image/"); }

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    auto const n = text.size();
    while (i < n) {
        auto c = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > n) return false;
        for (std::size_t k = 1; k < len; ++k) {
            auto cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong encodings, surrogates, out of range
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += len;
    }
    return true;
}

Value Value::boolean(bool b) { return Value(Storage{std::in_place_type<bool>, b}); }
Value Value::integer(std::int64_t i) { return Value(Storage{std::in_place_type<std::int64_t>, i}); }

Value Value::real(double d) {
    if (!std::isfinite(d)) return Value();
    return Value(Storage{std::in_place_type<double>, d});
}

Value Value::text(std::string s) {
    if (!is_valid_utf8(s)) throw TypeError("text value is not valid UTF-8");
    return Value(Storage{std::in_place_type<std::string>, std::move(s)});
}

Value Value::file(FileRef f) { return Value(Storage{std::in_place_type<FileRef>, std::move(f)}); }

namespace {
[[noreturn]] void wrong_kind(ValueKind want, ValueKind have) {
    throw TypeError("expected " + std::string(to_string(want)) + " value, got " +
                    std::string(to_string(have)));
}
}  // namespace

bool Value::as_bool() const {
    if (auto p = std::get_if<bool>(&data_)) return *p;
    wrong_kind(ValueKind::Bool, kind());
}

std::int64_t Value::as_int() const {
    if (auto p = std::get_if<std::int64_t>(&data_)) return *p;
    wrong_kind(ValueKind::Int, kind());
}

double Value::as_float() const {
    if (auto p = std::get_if<double>(&data_)) return *p;
    wrong_kind(ValueKind::Float, kind());
}

std::string const& Value::as_text() const {
    if (auto p = std::get_if<std::string>(&data_)) return *p;
    wrong_kind(ValueKind::Text, kind());
}

FileRef const& Value::as_file() const {
    if (auto p = std::get_if<FileRef>(&data_)) return *p;
    wrong_kind(ValueKind::File, kind());
}

namespace {
std::string format_double(double d) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    // shortest representation that round-trips
    for (int precision = 1; precision <= 17; ++precision) {
        char probe[64];
        std::snprintf(probe, sizeof probe, "%.*g", precision, d);
        if (std::strtod(probe, nullptr) == d) {
            std::string s = probe;
            if (s.find_first_of(".eE") == std::string::npos) s += ".0";
            return s;
        }
    }
    return buf;
}
}  // namespace

std::string Value::render() const {
    switch (kind()) {
        case ValueKind::Null: return "";
        case ValueKind::Bool: return as_bool() ? "true" : "false";
        case ValueKind::Int: return std::to_string(as_int());
        case ValueKind::Float: return format_double(as_float());
        case ValueKind::Text: return as_text();
        case ValueKind::File: return as_file().uri;
    }
    return "";
}

std::string Value::to_sql() const {
    switch (kind()) {
        case ValueKind::Null: return "NULL";
        case ValueKind::Bool: return as_bool() ? "TRUE" : "FALSE";
        case ValueKind::Int:
        case ValueKind::Float: return render();
        case ValueKind::Text:
        case ValueKind::File: {
            std::string out = "'";
            for (char c : render()) {
                if (c == '\'') out += '\'';
                out += c;
            }
            return out + "'";
        }
    }
    return "NULL";
}

std::strong_ordering Value::compare(Value const& other) const {
    if (is_null() || other.is_null()) throw TypeError("cannot order NULL values");
    if (kind() != other.kind()) {
        throw TypeError("cannot compare " + std::string(to_string(kind())) + " with " +
                        std::string(to_string(other.kind())));
    }
    switch (kind()) {
        case ValueKind::Bool: return as_bool() <=> other.as_bool();
        case ValueKind::Int: return as_int() <=> other.as_int();
        case ValueKind::Float: {
            auto a = as_float(), b = other.as_float();
            return a < b ? std::strong_ordering::less
                         : (a > b ? std::strong_ordering::greater : std::strong_ordering::equal);
        }
        case ValueKind::Text: return as_text().compare(other.as_text()) <=> 0;
        case ValueKind::File: return as_file().uri.compare(other.as_file().uri) <=> 0;
        case ValueKind::Null: break;
    }
    return std::strong_ordering::equal;
}

std::size_t Value::hash() const {
    std::size_t seed = std::hash<std::size_t>{}(data_.index());
    std::size_t h = 0;
    switch (kind()) {
        case ValueKind::Null: h = 0; break;
        case ValueKind::Bool: h = std::hash<bool>{}(as_bool()); break;
        case ValueKind::Int: h = std::hash<std::int64_t>{}(as_int()); break;
        case ValueKind::Float: h = std::hash<double>{}(as_float()); break;
        case ValueKind::Text: h = std::hash<std::string>{}(as_text()); break;
        case ValueKind::File: h = std::hash<std::string>{}(as_file().uri); break;
    }
    return seed ^ (h + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

}  // namespace semql
