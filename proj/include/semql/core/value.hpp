#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <variant>

namespace semql {

enum class ValueKind { Null, Bool, Int, Float, Text, File };

[[nodiscard]] std::string_view to_string(ValueKind kind);

/// Reference to a file living outside the engine. Equality is by uri only;
/// the remaining fields are advisory metadata.
struct FileRef {
    std::string uri;
    std::string mime_type;
    std::int64_t size_bytes = 0;
    std::int64_t created_at = 0;  // seconds since epoch

    /// Validates uri/mime/size and lowercases the mime type.
    static FileRef make(std::string uri, std::string mime_type, std::int64_t size_bytes = 0,
                        std::int64_t created_at = 0);

    friend bool operator==(FileRef const& a, FileRef const& b) { return a.uri == b.uri; }
};

[[nodiscard]] bool fl_is_image(FileRef const& file);

[[nodiscard]] bool is_valid_utf8(std::string_view text);

class Value {
  public:
    Value() = default;

    static Value null() { return Value(); }
    static Value boolean(bool b);
    static Value integer(std::int64_t i);
    /// Non-finite doubles are stored as NULL.
    static Value real(double d);
    /// Throws TypeError for invalid UTF-8.
    static Value text(std::string s);
    static Value file(FileRef f);

    [[nodiscard]] ValueKind kind() const { return static_cast<ValueKind>(data_.index()); }
    [[nodiscard]] bool is_null() const { return kind() == ValueKind::Null; }

    [[nodiscard]] bool as_bool() const;
    [[nodiscard]] std::int64_t as_int() const;
    [[nodiscard]] double as_float() const;
    [[nodiscard]] std::string const& as_text() const;
    [[nodiscard]] FileRef const& as_file() const;

    /// Text used when the value is substituted into a prompt or printed.
    /// FILE renders as its uri, NULL as the empty string.
    [[nodiscard]] std::string render() const;

    /// SQL literal spelling (quoted text, NULL, TRUE/FALSE).
    [[nodiscard]] std::string to_sql() const;

    /// Ordering between two non-null values of the same kind. Throws TypeError
    /// for differing kinds or NULL operands.
    [[nodiscard]] std::strong_ordering compare(Value const& other) const;

    /// Structural equality (NULL == NULL). Used for grouping and hashing, not
    /// for SQL predicate semantics.
    friend bool operator==(Value const& a, Value const& b) { return a.data_ == b.data_; }

    [[nodiscard]] std::size_t hash() const;

  private:
    using Storage = std::variant<std::monostate, bool, std::int64_t, double, std::string, FileRef>;
    explicit Value(Storage data) : data_(std::move(data)) {}

    Storage data_;
};

}  // namespace semql

template <>
struct std::hash<semql::Value> {
    std::size_t operator()(semql::Value const& v) const noexcept { return v.hash(); }
};
