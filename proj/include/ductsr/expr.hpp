#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ductsr/errors.hpp"

namespace ductsr {

enum class Var : std::uint8_t { X, Y, Z, Re };
enum class BinOp : std::uint8_t { Add, Sub, Mul, Div };
enum class UnOp : std::uint8_t { Square, Cube };

const char* name(Var v);

namespace detail {
struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Kind : std::uint8_t { Variable, Constant, Unary, Binary };
  Kind kind;
  Var var{};
  UnOp un{};
  BinOp bin{};
  double value = 0.0;
  NodePtr left;   // unary child or binary lhs
  NodePtr right;  // binary rhs
  std::uint32_t size = 1;  // node count of this subtree
  bool nested = false;     // some unary node has a unary direct child
};
}  // namespace detail

/// Immutable expression tree over the variables X, Y, Z, Re, finite real
/// constants, the binary operators + - * / and the unary operators square and
/// cube. Copies are cheap; subtrees are shared and never mutated, so values
/// may be used from any number of threads at once.
class Expr {
public:
  using Kind = detail::ExprNode::Kind;

  Expr() = default;  // empty; only factories produce usable expressions
  explicit Expr(detail::NodePtr node) : node_(std::move(node)) {}

  explicit operator bool() const { return node_ != nullptr; }

  Kind kind() const { return node_->kind; }
  bool is_variable() const { return node_->kind == Kind::Variable; }
  bool is_constant() const { return node_->kind == Kind::Constant; }
  bool is_unary() const { return node_->kind == Kind::Unary; }
  bool is_binary() const { return node_->kind == Kind::Binary; }
  bool is_leaf() const { return !is_unary() && !is_binary(); }

  Var var() const { return node_->var; }
  double value() const { return node_->value; }
  UnOp unary_op() const { return node_->un; }
  BinOp binary_op() const { return node_->bin; }
  Expr left() const { return Expr(node_->left); }
  Expr right() const { return Expr(node_->right); }
  Expr child() const { return Expr(node_->left); }

  /// Node count of the tree; every node counts as one.
  std::uint32_t size() const { return node_->size; }
  /// True if some unary node has a unary node as its direct child.
  bool has_nested_unary() const { return node_->nested; }

  const detail::ExprNode* node() const { return node_.get(); }
  const detail::NodePtr& share() const { return node_; }

private:
  detail::NodePtr node_;
};

Expr variable(Var v);
Expr constant(double value);  // throws Error if value is not finite
Expr unary(UnOp op, Expr child);
Expr binary(BinOp op, Expr lhs, Expr rhs);

/// Total node count (the complexity measure used on the Pareto frontier).
std::uint32_t complexity(const Expr& e);

/// True when the tree respects the no-nested-unary search restriction.
inline bool satisfies_nesting(const Expr& e) { return !e.has_nested_unary(); }

struct EvalPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double re = 0.0;
};

/// Recursive arithmetic evaluation. Division is unprotected: if any
/// intermediate result is non-finite the whole evaluation is poisoned and a
/// quiet NaN is returned.
double evaluate(const Expr& e, const EvalPoint& p);

/// Syntactic feature flags used by the constraint filter. Detection never
/// expands algebra: has_y2 means a square node whose operand is exactly the
/// variable Y, not any expression that happens to equal Y*Y.
struct ExprFeatures {
  bool contains_x = false, contains_y = false, contains_z = false, contains_re = false;
  bool has_x2 = false, has_y2 = false, has_z2 = false;
  bool has_x3 = false, has_y3 = false, has_z3 = false;
  bool has_x4 = false, has_y4 = false, has_z4 = false;  // square(square(v))
  bool nested = false;  // any unary applied directly to a unary

  bool operator==(const ExprFeatures&) const = default;
};

ExprFeatures extract_features(const Expr& e);

/// Raised on malformed expression text; position is a 0-based byte offset.
class ExprParseError : public Error {
public:
  ExprParseError(const std::string& detail, std::size_t position);
  std::size_t position() const { return position_; }

private:
  std::size_t position_ = 0;
};

/// Parses infix text: + - * /, parentheses, decimal literals (scientific
/// notation accepted), variables X, Y, Z, Re (case-insensitive) and the
/// exponents **2, **3, **4. **4 builds square(square(.)), which is
/// representable but violates the search nesting restriction.
Expr parse_expression(std::string_view text);

/// Canonical infix form; parse_expression(format_expression(e)) rebuilds a
/// structurally identical tree. Constants are printed with shortest
/// round-trip precision.
std::string format_expression(const Expr& e);

bool structurally_equal(const Expr& a, const Expr& b);

/// Constants of the tree in preorder, and a structurally identical tree with
/// the constants replaced. Used by the constant optimizer.
std::vector<double> constants_of(const Expr& e);
Expr with_constants(const Expr& e, const std::vector<double>& values);

}  // namespace ductsr
