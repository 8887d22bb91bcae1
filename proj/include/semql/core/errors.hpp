#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace semql {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised for kind mismatches: comparing values of different kinds, a row
/// value that does not match its column, a non-boolean AI predicate.
class TypeError : public Error {
  public:
    using Error::Error;
};

class ArityMismatch : public Error {
  public:
    using Error::Error;
};

/// Unknown table or column.
class NameError : public Error {
  public:
    using Error::Error;
};

class SyntaxError : public Error {
  public:
    SyntaxError(std::string message, int line, int column, std::vector<std::string> expected)
        : Error(format(message, line, column, expected)),
          line_(line),
          column_(column),
          expected_(std::move(expected)) {}

    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] int column() const { return column_; }
    [[nodiscard]] std::vector<std::string> const& expected() const { return expected_; }

  private:
    static std::string format(std::string const& message, int line, int column,
                              std::vector<std::string> const& expected) {
        std::string out = "syntax error at " + std::to_string(line) + ":" +
                          std::to_string(column) + ": " + message;
        if (!expected.empty()) {
            out += " (expected one of:";
            for (auto const& e : expected) out += " " + e;
            out += ")";
        }
        return out;
    }

    int line_;
    int column_;
    std::vector<std::string> expected_;
};

class ProviderError : public Error {
  public:
    ProviderError(std::string const& message, bool retryable)
        : Error(message), retryable_(retryable) {}

    [[nodiscard]] bool retryable() const { return retryable_; }

  private:
    bool retryable_;
};

class FixtureParseError : public Error {
  public:
    FixtureParseError(std::string const& message, std::size_t line)
        : Error("fixture line " + std::to_string(line) + ": " + message), line_(line) {}

    [[nodiscard]] std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

class IngestError : public Error {
  public:
    using Error::Error;
};

class LabelOverflow : public Error {
  public:
    using Error::Error;
};

class ConfigMismatch : public Error {
  public:
    using Error::Error;
};

class OracleUnavailable : public Error {
  public:
    using Error::Error;
};

class ScenarioParseError : public Error {
  public:
    using Error::Error;
};

}  // namespace semql
