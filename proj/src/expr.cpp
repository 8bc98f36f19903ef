#include "ductsr/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

namespace ductsr {

namespace {

using detail::ExprNode;
using detail::NodePtr;
using Kind = ExprNode::Kind;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

const char* name(Var v) {
  switch (v) {
    case Var::X: return "X";
    case Var::Y: return "Y";
    case Var::Z: return "Z";
    case Var::Re: return "Re";
  }
  return "?";
}

Expr variable(Var v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = Kind::Variable;
  n->var = v;
  return Expr(std::move(n));
}

Expr constant(double value) {
  if (!std::isfinite(value)) throw Error("expression constants must be finite");
  auto n = std::make_shared<ExprNode>();
  n->kind = Kind::Constant;
  n->value = value;
  return Expr(std::move(n));
}

Expr unary(UnOp op, Expr child) {
  if (!child) throw Error("unary() requires a child expression");
  auto n = std::make_shared<ExprNode>();
  n->kind = Kind::Unary;
  n->un = op;
  n->size = 1 + child.size();
  n->nested = child.is_unary() || child.has_nested_unary();
  n->left = child.share();
  return Expr(std::move(n));
}

Expr binary(BinOp op, Expr lhs, Expr rhs) {
  if (!lhs || !rhs) throw Error("binary() requires two child expressions");
  auto n = std::make_shared<ExprNode>();
  n->kind = Kind::Binary;
  n->bin = op;
  n->size = 1 + lhs.size() + rhs.size();
  n->nested = lhs.has_nested_unary() || rhs.has_nested_unary();
  n->left = lhs.share();
  n->right = rhs.share();
  return Expr(std::move(n));
}

std::uint32_t complexity(const Expr& e) { return e.size(); }

namespace {

double eval_node(const ExprNode* n, const EvalPoint& p) {
  switch (n->kind) {
    case Kind::Variable:
      switch (n->var) {
        case Var::X: return p.x;
        case Var::Y: return p.y;
        case Var::Z: return p.z;
        case Var::Re: return p.re;
      }
      return kNan;
    case Kind::Constant:
      return n->value;
    case Kind::Unary: {
      const double c = eval_node(n->left.get(), p);
      if (std::isnan(c)) return kNan;
      const double v = n->un == UnOp::Square ? c * c : c * c * c;
      return std::isfinite(v) ? v : kNan;
    }
    case Kind::Binary: {
      const double a = eval_node(n->left.get(), p);
      if (std::isnan(a)) return kNan;
      const double b = eval_node(n->right.get(), p);
      if (std::isnan(b)) return kNan;
      double v = 0.0;
      switch (n->bin) {
        case BinOp::Add: v = a + b; break;
        case BinOp::Sub: v = a - b; break;
        case BinOp::Mul: v = a * b; break;
        case BinOp::Div: v = a / b; break;
      }
      return std::isfinite(v) ? v : kNan;
    }
  }
  return kNan;
}

}  // namespace

double evaluate(const Expr& e, const EvalPoint& p) { return eval_node(e.node(), p); }

namespace {

void scan_features(const ExprNode* n, ExprFeatures& f) {
  switch (n->kind) {
    case Kind::Variable:
      switch (n->var) {
        case Var::X: f.contains_x = true; break;
        case Var::Y: f.contains_y = true; break;
        case Var::Z: f.contains_z = true; break;
        case Var::Re: f.contains_re = true; break;
      }
      return;
    case Kind::Constant:
      return;
    case Kind::Unary: {
      const ExprNode* c = n->left.get();
      if (c->kind == Kind::Unary) f.nested = true;
      if (c->kind == Kind::Variable && n->un == UnOp::Square) {
        if (c->var == Var::X) f.has_x2 = true;
        if (c->var == Var::Y) f.has_y2 = true;
        if (c->var == Var::Z) f.has_z2 = true;
      }
      if (c->kind == Kind::Variable && n->un == UnOp::Cube) {
        if (c->var == Var::X) f.has_x3 = true;
        if (c->var == Var::Y) f.has_y3 = true;
        if (c->var == Var::Z) f.has_z3 = true;
      }
      // fourth power: square applied to the square of a bare variable
      if (n->un == UnOp::Square && c->kind == Kind::Unary && c->un == UnOp::Square &&
          c->left->kind == Kind::Variable) {
        if (c->left->var == Var::X) f.has_x4 = true;
        if (c->left->var == Var::Y) f.has_y4 = true;
        if (c->left->var == Var::Z) f.has_z4 = true;
      }
      scan_features(c, f);
      return;
    }
    case Kind::Binary:
      scan_features(n->left.get(), f);
      scan_features(n->right.get(), f);
      return;
  }
}

}  // namespace

ExprFeatures extract_features(const Expr& e) {
  ExprFeatures f;
  scan_features(e.node(), f);
  return f;
}

ExprParseError::ExprParseError(const std::string& detail, std::size_t position)
    : Error(detail + " at position " + std::to_string(position)), position_(position) {}

namespace {

struct Token {
  enum class Type { Number, Ident, Plus, Minus, Star, Slash, Power, LParen, RParen, End };
  Type type = Type::End;
  std::size_t pos = 0;
  double number = 0.0;
  std::string ident;

  Token() = default;
  Token(Type t, std::size_t p) : type(t), pos(p) {}
};

class Lexer {
public:
  explicit Lexer(std::string_view text) : text_(text) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

private:
  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    tok_ = Token{Token::Type::End, pos_};
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < text_.size() &&
         std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                     text_[pos_] == '_'))
        ++pos_;
      tok_ = Token{Token::Type::Ident, start};
      tok_.ident = std::string(text_.substr(start, pos_ - start));
      return;
    }
    switch (c) {
      case '+': tok_ = Token{Token::Type::Plus, pos_++}; return;
      case '-': tok_ = Token{Token::Type::Minus, pos_++}; return;
      case '*':
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
          tok_ = Token{Token::Type::Power, pos_};
          pos_ += 2;
        } else {
          tok_ = Token{Token::Type::Star, pos_++};
        }
        return;
      case '/': tok_ = Token{Token::Type::Slash, pos_++}; return;
      case '(': tok_ = Token{Token::Type::LParen, pos_++}; return;
      case ')': tok_ = Token{Token::Type::RParen, pos_++}; return;
      default:
        throw ExprParseError(std::string("unexpected character '") + c + "'", pos_);
    }
  }

  void lex_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t mark = pos_ + 1;
      if (mark < text_.size() && (text_[mark] == '+' || text_[mark] == '-')) ++mark;
      if (mark < text_.size() && std::isdigit(static_cast<unsigned char>(text_[mark]))) {
        pos_ = mark;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    auto [end, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || end != last)
      throw ExprParseError("invalid number literal", start);
    tok_ = Token{Token::Type::Number, start};
    tok_.number = value;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Token tok_;
};

class Parser {
public:
  explicit Parser(std::string_view text) : lex_(text) {}

  Expr parse() {
    Expr e = parse_sum();
    const Token& t = lex_.peek();
    if (t.type != Token::Type::End)
      throw ExprParseError("unexpected trailing input", t.pos);
    return e;
  }

private:
  static constexpr int kMaxDepth = 256;

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : parser(p) {
      if (++parser.depth_ > kMaxDepth)
        throw ExprParseError("expression nests too deeply", 0);
    }
    ~DepthGuard() { --parser.depth_; }
    Parser& parser;
  };

  Expr parse_sum() {
    DepthGuard guard(*this);
    Expr lhs = parse_product();
    for (;;) {
      const Token& t = lex_.peek();
      if (t.type == Token::Type::Plus) {
        lex_.take();
        lhs = binary(BinOp::Add, lhs, parse_product());
      } else if (t.type == Token::Type::Minus) {
        lex_.take();
        lhs = binary(BinOp::Sub, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_product() {
    DepthGuard guard(*this);
    Expr lhs = parse_prefix();
    for (;;) {
      const Token& t = lex_.peek();
      if (t.type == Token::Type::Star) {
        lex_.take();
        lhs = binary(BinOp::Mul, lhs, parse_prefix());
      } else if (t.type == Token::Type::Slash) {
        lex_.take();
        lhs = binary(BinOp::Div, lhs, parse_prefix());
      } else {
        return lhs;
      }
    }
  }

  // Unary minus folds into constant operands and otherwise becomes -1 * x;
  // exponents bind tighter, so -Y**2 is -(Y**2).
  Expr parse_prefix() {
    DepthGuard guard(*this);
    const Token& t = lex_.peek();
    if (t.type == Token::Type::Minus) {
      lex_.take();
      Expr operand = parse_prefix();
      if (operand.is_constant()) return constant(-operand.value());
      return binary(BinOp::Mul, constant(-1.0), operand);
    }
    return parse_postfix();
  }

  Expr parse_postfix() {
    Expr base = parse_primary();
    for (;;) {
      const Token& t = lex_.peek();
      if (t.type != Token::Type::Power) return base;
      const std::size_t op_pos = lex_.take().pos;
      const Token exp = lex_.take();
      if (exp.type != Token::Type::Number)
        throw ExprParseError("exponent must be the literal 2, 3 or 4", op_pos);
      if (exp.number == 2.0) {
        base = unary(UnOp::Square, base);
      } else if (exp.number == 3.0) {
        base = unary(UnOp::Cube, base);
      } else if (exp.number == 4.0) {
        base = unary(UnOp::Square, unary(UnOp::Square, base));
      } else {
        throw ExprParseError("exponent must be the literal 2, 3 or 4", exp.pos);
      }
    }
  }

  Expr parse_primary() {
    DepthGuard guard(*this);
    Token t = lex_.take();
    switch (t.type) {
      case Token::Type::Number:
        return constant(t.number);
      case Token::Type::Ident: {
        std::string lower;
        lower.reserve(t.ident.size());
        for (char c : t.ident) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (lower == "x") return variable(Var::X);
        if (lower == "y") return variable(Var::Y);
        if (lower == "z") return variable(Var::Z);
        if (lower == "re") return variable(Var::Re);
        throw ExprParseError("unknown identifier '" + t.ident + "'", t.pos);
      }
      case Token::Type::LParen: {
        Expr inner = parse_sum();
        const Token close = lex_.take();
        if (close.type != Token::Type::RParen)
          throw ExprParseError("expected ')'", close.pos);
        return inner;
      }
      default:
        throw ExprParseError("expected a number, variable or '('", t.pos);
    }
  }

  Lexer lex_;
  int depth_ = 0;
};

}  // namespace

Expr parse_expression(std::string_view text) { return Parser(text).parse(); }

namespace {

// Printing precedence: +,- lowest, then *,/ then ** then atoms. Negative
// constants rank lowest so any parent operator parenthesizes them.
int print_prec(const ExprNode* n) {
  switch (n->kind) {
    case Kind::Constant: return n->value < 0.0 ? 0 : 4;
    case Kind::Variable: return 4;
    case Kind::Unary: return 3;
    case Kind::Binary:
      return (n->bin == BinOp::Add || n->bin == BinOp::Sub) ? 1 : 2;
  }
  return 4;
}

void format_number(double v, std::string& out) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
  (void)ec;
}

void format_node(const ExprNode* n, std::string& out);

void format_child(const ExprNode* n, int parent_prec, bool needs_paren_on_tie,
                  std::string& out) {
  const int prec = print_prec(n);
  const bool paren = prec < parent_prec || (needs_paren_on_tie && prec == parent_prec);
  if (paren) out.push_back('(');
  format_node(n, out);
  if (paren) out.push_back(')');
}

void format_node(const ExprNode* n, std::string& out) {
  switch (n->kind) {
    case Kind::Variable:
      out.append(name(n->var));
      return;
    case Kind::Constant:
      format_number(n->value, out);
      return;
    case Kind::Unary:
      format_child(n->left.get(), 4, false, out);  // parenthesize any non-atom base
      out.append(n->un == UnOp::Square ? "**2" : "**3");
      return;
    case Kind::Binary: {
      const int prec = print_prec(n);
      const char* op = nullptr;
      switch (n->bin) {
        case BinOp::Add: op = "+"; break;
        case BinOp::Sub: op = "-"; break;
        case BinOp::Mul: op = "*"; break;
        case BinOp::Div: op = "/"; break;
      }
      format_child(n->left.get(), prec, false, out);
      out.append(op);
      // parsing is left-associative, so equal-precedence right children need
      // parentheses to keep the original grouping
      format_child(n->right.get(), prec, true, out);
      return;
    }
  }
}

}  // namespace

std::string format_expression(const Expr& e) {
  std::string out;
  format_node(e.node(), out);
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  const ExprNode* x = a.node();
  const ExprNode* y = b.node();
  if (x == y) return true;
  if (x->size != y->size || x->kind != y->kind) return false;
  switch (x->kind) {
    case Kind::Variable: return x->var == y->var;
    case Kind::Constant: return x->value == y->value;
    case Kind::Unary:
      return x->un == y->un && structurally_equal(Expr(x->left), Expr(y->left));
    case Kind::Binary:
      return x->bin == y->bin && structurally_equal(Expr(x->left), Expr(y->left)) &&
             structurally_equal(Expr(x->right), Expr(y->right));
  }
  return false;
}

namespace {

void collect_constants(const ExprNode* n, std::vector<double>& out) {
  switch (n->kind) {
    case Kind::Constant: out.push_back(n->value); return;
    case Kind::Variable: return;
    case Kind::Unary: collect_constants(n->left.get(), out); return;
    case Kind::Binary:
      collect_constants(n->left.get(), out);
      collect_constants(n->right.get(), out);
      return;
  }
}

Expr rebuild_with(const ExprNode* n, const std::vector<double>& values, std::size_t& idx) {
  switch (n->kind) {
    case Kind::Constant:
      if (idx >= values.size()) throw Error("constant count does not match the tree");
      return constant(values[idx++]);
    case Kind::Variable: return variable(n->var);
    case Kind::Unary: return unary(n->un, rebuild_with(n->left.get(), values, idx));
    case Kind::Binary: {
      Expr l = rebuild_with(n->left.get(), values, idx);
      Expr r = rebuild_with(n->right.get(), values, idx);
      return binary(n->bin, l, r);
    }
  }
  throw Error("corrupt expression node");
}

}  // namespace

std::vector<double> constants_of(const Expr& e) {
  std::vector<double> out;
  collect_constants(e.node(), out);
  return out;
}

Expr with_constants(const Expr& e, const std::vector<double>& values) {
  std::size_t idx = 0;
  Expr result = rebuild_with(e.node(), values, idx);
  if (idx != values.size()) throw Error("constant count does not match the tree");
  return result;
}

}  // namespace ductsr
