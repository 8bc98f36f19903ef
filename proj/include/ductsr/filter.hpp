#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ductsr/expr.hpp"
#include "ductsr/sr.hpp"

namespace ductsr {

/// Syntactic feature vocabulary shared by facts files and constraint
/// programs. Fact predicates are spelled contains_<name>.
enum class Feature : std::uint8_t {
  Re, X, Y, Z,          // variable containment (usable in `require`)
  X2, Y2, Z2,           // squared variable (usable in `forbid`)
  X3, Y3, Z3,           // cubed variable
  X4, Y4, Z4,           // fourth power
  Nested                // nested unary operators anywhere in the tree
};

const char* name(Feature f);
std::optional<Feature> feature_from_name(std::string_view text);
bool has_feature(const ExprFeatures& features, Feature f);
void set_feature(ExprFeatures& features, Feature f);

/// One equation of a fact base. Complexity and loss are data carried by the
/// facts file (or rounded from the frontier); they are never recomputed from
/// the expression text.
struct EquationFact {
  long long id = 0;
  long long complexity = 0;
  long long loss = 0;  // MSE rounded to the nearest integer, ties away from zero
  std::string expression;
  ExprFeatures features;
};

/// Raised on malformed facts or constraint text; line numbers are 1-based.
class FactsParseError : public Error {
public:
  FactsParseError(const std::string& detail, std::size_t line);
  std::size_t line() const { return line_; }

private:
  std::size_t line_ = 0;
};

/// One fact per frontier entry, losses rounded, features extracted from the
/// expression trees.
std::vector<EquationFact> facts_from_frontier(const ParetoFrontier& frontier);

/// Parses lines of the form `eq(ID, Complexity, Loss, "expr").` and
/// `contains_<feature>(ID).` with `%` comments. Declared features supplement
/// the features recomputed from each expression string; a declaration that
/// leaves the feature set inconsistent (a power of a variable the expression
/// does not contain) is an error, as are unknown ids and duplicate ids.
std::vector<EquationFact> parse_facts(std::string_view text);
std::vector<EquationFact> read_facts_file(const std::string& path);

std::string render_facts(const std::vector<EquationFact>& facts);

/// Thresholds and feature constraints. Absent thresholds are unlimited.
/// `forbidden` may use any power feature or `nested`; `required` uses
/// variable containment only, and is satisfied per feature by at least one
/// selected equation.
struct ConstraintProgram {
  std::optional<long long> max_complexity;
  std::optional<long long> max_loss;
  std::vector<Feature> forbidden;
  std::vector<Feature> required;
};

/// Key-value text: max_complexity, max_loss, forbid (comma list), require
/// (comma list); '#' and '%' start comments.
ConstraintProgram parse_constraints(std::string_view text);
ConstraintProgram read_constraints_file(const std::string& path);

bool eligible(const EquationFact& fact, const ConstraintProgram& program);

struct Selection {
  bool sat = true;
  std::vector<EquationFact> selected;  // ascending id
  std::string violation;               // set when unsat
};

/// The maximal admissible set: every eligible fact is selected; the result is
/// UNSAT exactly when some required feature has no eligible carrier, in which
/// case nothing is selected and the violation names the first unmet
/// requirement.
Selection solve(const std::vector<EquationFact>& facts, const ConstraintProgram& program);

struct Verdict {
  long long id = 0;
  bool eligible = false;
  std::vector<std::string> reasons;
};

/// Per-equation audit: every failed threshold or forbidden feature, plus
/// whether the equation carries each required feature.
std::vector<Verdict> explain(const std::vector<EquationFact>& facts,
                             const ConstraintProgram& program);

/// Human-readable result block (SELECTED EQUATIONS / UNSATISFIABLE).
std::string render_selection(const Selection& selection);

std::string selection_report_json(const Selection& selection, const std::vector<Verdict>& verdicts);

}  // namespace ductsr
