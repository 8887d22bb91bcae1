#pragma once

#include "semql/core/table.hpp"
#include "semql/parser/ast.hpp"
#include "semql/planner/plan.hpp"

namespace semql {

/// Canonical plan: Scan -> Filter* -> Join -> Filter* -> Project/Aggregate.
/// Conjuncts keep their written order (ON before WHERE); each one sits at the
/// lowest position that sees all its columns. Column-to-column equalities
/// across the two sides become hash-join keys; the first two-sided AI
/// predicate becomes the join predicate. Estimates are left at zero.
/// Throws NameError for unknown tables/columns and TypeError for non-boolean
/// predicates or ill-typed comparisons.
[[nodiscard]] LogicalPlan lower(Ast const& ast, Catalog const& catalog);

}  // namespace semql
