#pragma once

#include <string_view>

#include "semql/parser/ast.hpp"

namespace semql {

/// Parses one AISQL statement. Keywords are case-insensitive; string literals
/// are single-quoted with '' as the escape. Throws SyntaxError carrying the
/// line/column of the offending token and the set of tokens that would have
/// been accepted there.
[[nodiscard]] Ast parse(std::string_view sql);

}  // namespace semql
