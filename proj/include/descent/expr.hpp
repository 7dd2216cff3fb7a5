#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "descent/errors.hpp"

namespace descent {

/// Ordered list of distinct variable names; position defines the coordinate
/// index used by evaluation. Fixed for the lifetime of any expression built
/// against it.
class VariableOrder {
 public:
  VariableOrder() : names_(std::make_shared<const std::vector<std::string>>()) {}

  explicit VariableOrder(std::vector<std::string> names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!valid_identifier(names[i]))
        throw std::invalid_argument("VariableOrder: invalid identifier '" + names[i] + "'");
      for (std::size_t j = 0; j < i; ++j)
        if (names[i] == names[j])
          throw std::invalid_argument("VariableOrder: duplicate name '" + names[i] + "'");
    }
    names_ = std::make_shared<const std::vector<std::string>>(std::move(names));
  }

  std::size_t size() const { return names_->size(); }
  const std::string& name(std::size_t i) const { return names_->at(i); }
  const std::vector<std::string>& names() const { return *names_; }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_->size(); ++i)
      if ((*names_)[i] == name) return i;
    return std::nullopt;
  }

  bool operator==(const VariableOrder& o) const {
    return names_ == o.names_ || *names_ == *o.names_;
  }

  static bool valid_identifier(std::string_view s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
  }

 private:
  std::shared_ptr<const std::vector<std::string>> names_;
};

enum class ExprKind : std::uint8_t {
  Constant, Variable, Neg, Add, Sub, Mul, Div, IntPow, Sin, Cos, Exp
};

/// Immutable expression tree for a multivariate scalar function. Subtrees
/// are shared; evaluation is pure, so expressions may be evaluated from many
/// threads concurrently. The smart constructors fold constants and eliminate
/// the identities 0*a, 0+a, a^1, a^0, so symbolic derivatives stay lean.
class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double v) {
    if (!std::isfinite(v))
      throw std::invalid_argument("Expr::constant: non-finite constant");
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Constant;
    n->value = v;
    return Expr(std::move(n), VariableOrder());
  }

  static Expr variable(const VariableOrder& order, std::string_view name) {
    auto idx = order.index_of(name);
    if (!idx)
      throw std::invalid_argument("Expr::variable: undeclared variable '" + std::string(name) + "'");
    return variable(order, *idx);
  }

  static Expr variable(const VariableOrder& order, std::size_t index) {
    if (index >= order.size())
      throw std::invalid_argument("Expr::variable: index out of range");
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Variable;
    n->var_index = index;
    return Expr(std::move(n), order);
  }

  friend Expr operator+(const Expr& a, const Expr& b) {
    auto vars = merged_vars(a, b);
    return Expr(make_add(a.node_, b.node_), std::move(vars));
  }
  friend Expr operator-(const Expr& a, const Expr& b) {
    auto vars = merged_vars(a, b);
    return Expr(make_sub(a.node_, b.node_), std::move(vars));
  }
  friend Expr operator*(const Expr& a, const Expr& b) {
    auto vars = merged_vars(a, b);
    return Expr(make_mul(a.node_, b.node_), std::move(vars));
  }
  friend Expr operator/(const Expr& a, const Expr& b) {
    auto vars = merged_vars(a, b);
    return Expr(make_div(a.node_, b.node_), std::move(vars));
  }
  friend Expr operator-(const Expr& a) { return Expr(make_neg(a.node_), a.vars_); }

  static Expr pow(const Expr& base, int exponent) {
    if (exponent < 0)
      throw std::invalid_argument("Expr::pow: exponent must be non-negative");
    return Expr(make_intpow(base.node_, exponent), base.vars_);
  }
  static Expr sin(const Expr& a) { return Expr(make_unary(ExprKind::Sin, a.node_), a.vars_); }
  static Expr cos(const Expr& a) { return Expr(make_unary(ExprKind::Cos, a.node_), a.vars_); }
  static Expr exp(const Expr& a) { return Expr(make_unary(ExprKind::Exp, a.node_), a.vars_); }

  /// Evaluates at a point (length must match the variable order; pure
  /// constants accept any point). Throws NonFiniteValue if any intermediate
  /// is infinite or undefined.
  double eval(std::span<const double> point) const {
    if (vars_.size() != 0 && point.size() != vars_.size())
      throw std::invalid_argument("Expr::eval: point dimension mismatch");
    return eval_node(*node_, point);
  }

  /// Exact partial derivative with respect to one variable of the order.
  Expr derivative(std::size_t var_index) const {
    if (vars_.size() > 0 && var_index >= vars_.size())
      throw std::invalid_argument("Expr::derivative: variable index out of range");
    return Expr(diff_node(node_, var_index), vars_);
  }

  Expr derivative(std::string_view var_name) const {
    auto idx = vars_.index_of(var_name);
    if (!idx)
      throw std::invalid_argument("Expr::derivative: undeclared variable '" + std::string(var_name) + "'");
    return derivative(*idx);
  }

  /// Same tree, attached to a declared variable order (used by the parser so
  /// that even variable-free expressions remember their declaration).
  Expr bound_to(const VariableOrder& order) const {
    if (vars_.size() != 0) {
      if (!(vars_ == order))
        throw std::invalid_argument("Expr::bound_to: conflicting variable orders");
      return *this;
    }
    return Expr(node_, order);
  }

  ExprKind kind() const { return node_->kind; }
  bool is_constant() const { return node_->kind == ExprKind::Constant; }
  bool is_zero() const {
    return node_->kind == ExprKind::Constant && node_->value == 0.0;
  }
  double constant_value() const {
    if (!is_constant()) throw std::logic_error("Expr::constant_value: not a constant");
    return node_->value;
  }
  const VariableOrder& vars() const { return vars_; }

 private:
  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

  struct Node {
    ExprKind kind = ExprKind::Constant;
    double value = 0.0;       // Constant
    std::size_t var_index = 0;  // Variable
    int exponent = 0;         // IntPow
    NodePtr lhs, rhs;         // children; unary nodes use lhs
  };

  Expr(NodePtr node, VariableOrder vars)
      : node_(std::move(node)), vars_(std::move(vars)) {}

  static VariableOrder merged_vars(const Expr& a, const Expr& b) {
    if (a.vars_.size() == 0) return b.vars_;
    if (b.vars_.size() == 0) return a.vars_;
    if (!(a.vars_ == b.vars_))
      throw std::invalid_argument("Expr: operands use different variable orders");
    return a.vars_;
  }

  static bool node_is_const(const NodePtr& n, double v) {
    return n->kind == ExprKind::Constant && n->value == v;
  }

  static NodePtr make_const(double v) {
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Constant;
    n->value = v;
    return n;
  }

  static NodePtr make_binary(ExprKind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  static NodePtr make_unary(ExprKind k, NodePtr a) {
    if (a->kind == ExprKind::Constant) {
      switch (k) {
        case ExprKind::Neg: return make_const(-a->value);
        case ExprKind::Sin: return make_const(std::sin(a->value));
        case ExprKind::Cos: return make_const(std::cos(a->value));
        case ExprKind::Exp: {
          const double v = std::exp(a->value);
          if (std::isfinite(v)) return make_const(v);
          break;  // overflow: keep the node, evaluation reports it
        }
        default: break;
      }
    }
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = std::move(a);
    return n;
  }

  static NodePtr make_neg(NodePtr a) {
    if (a->kind == ExprKind::Neg) return a->lhs;  // --x = x
    return make_unary(ExprKind::Neg, std::move(a));
  }

  static NodePtr make_add(NodePtr a, NodePtr b) {
    if (a->kind == ExprKind::Constant && b->kind == ExprKind::Constant)
      return make_const(a->value + b->value);
    if (node_is_const(a, 0.0)) return b;
    if (node_is_const(b, 0.0)) return a;
    return make_binary(ExprKind::Add, std::move(a), std::move(b));
  }

  static NodePtr make_sub(NodePtr a, NodePtr b) {
    if (a->kind == ExprKind::Constant && b->kind == ExprKind::Constant)
      return make_const(a->value - b->value);
    if (node_is_const(b, 0.0)) return a;
    if (node_is_const(a, 0.0)) return make_neg(std::move(b));
    return make_binary(ExprKind::Sub, std::move(a), std::move(b));
  }

  static NodePtr make_mul(NodePtr a, NodePtr b) {
    if (a->kind == ExprKind::Constant && b->kind == ExprKind::Constant)
      return make_const(a->value * b->value);
    if (node_is_const(a, 0.0) || node_is_const(b, 0.0)) return make_const(0.0);
    if (node_is_const(a, 1.0)) return b;
    if (node_is_const(b, 1.0)) return a;
    return make_binary(ExprKind::Mul, std::move(a), std::move(b));
  }

  static NodePtr make_div(NodePtr a, NodePtr b) {
    if (a->kind == ExprKind::Constant && b->kind == ExprKind::Constant &&
        b->value != 0.0) {
      const double v = a->value / b->value;
      if (std::isfinite(v)) return make_const(v);
    }
    if (node_is_const(b, 1.0)) return a;
    return make_binary(ExprKind::Div, std::move(a), std::move(b));
  }

  static NodePtr make_intpow(NodePtr a, int exponent) {
    if (exponent == 0) return make_const(1.0);  // x^0 = 1, including at x=0
    if (exponent == 1) return a;
    if (a->kind == ExprKind::Constant) {
      const double v = ipow(a->value, exponent);
      if (std::isfinite(v)) return make_const(v);
    }
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::IntPow;
    n->exponent = exponent;
    n->lhs = std::move(a);
    return n;
  }

  static double ipow(double base, int e) {
    double r = 1.0;
    while (e > 0) {
      if (e & 1) r *= base;
      base *= base;
      e >>= 1;
    }
    return r;
  }

  static double eval_node(const Node& n, std::span<const double> x) {
    double v;
    switch (n.kind) {
      case ExprKind::Constant: return n.value;  // finite by construction
      case ExprKind::Variable:
        if (n.var_index >= x.size())
          throw std::invalid_argument("Expr::eval: point dimension mismatch");
        v = x[n.var_index];
        break;
      case ExprKind::Neg: v = -eval_node(*n.lhs, x); break;
      case ExprKind::Add: v = eval_node(*n.lhs, x) + eval_node(*n.rhs, x); break;
      case ExprKind::Sub: v = eval_node(*n.lhs, x) - eval_node(*n.rhs, x); break;
      case ExprKind::Mul: v = eval_node(*n.lhs, x) * eval_node(*n.rhs, x); break;
      case ExprKind::Div: v = eval_node(*n.lhs, x) / eval_node(*n.rhs, x); break;
      case ExprKind::IntPow: v = ipow(eval_node(*n.lhs, x), n.exponent); break;
      case ExprKind::Sin: v = std::sin(eval_node(*n.lhs, x)); break;
      case ExprKind::Cos: v = std::cos(eval_node(*n.lhs, x)); break;
      case ExprKind::Exp: v = std::exp(eval_node(*n.lhs, x)); break;
      default: throw std::logic_error("Expr::eval: corrupt node");
    }
    if (!std::isfinite(v))
      throw NonFiniteValue("non-finite value in expression evaluation");
    return v;
  }

  static NodePtr diff_node(const NodePtr& n, std::size_t v) {
    switch (n->kind) {
      case ExprKind::Constant: return make_const(0.0);
      case ExprKind::Variable: return make_const(n->var_index == v ? 1.0 : 0.0);
      case ExprKind::Neg: return make_neg(diff_node(n->lhs, v));
      case ExprKind::Add: return make_add(diff_node(n->lhs, v), diff_node(n->rhs, v));
      case ExprKind::Sub: return make_sub(diff_node(n->lhs, v), diff_node(n->rhs, v));
      case ExprKind::Mul:
        return make_add(make_mul(diff_node(n->lhs, v), n->rhs),
                        make_mul(n->lhs, diff_node(n->rhs, v)));
      case ExprKind::Div: {
        NodePtr du = diff_node(n->lhs, v);
        NodePtr dv = diff_node(n->rhs, v);
        if (node_is_const(dv, 0.0)) return make_div(std::move(du), n->rhs);
        if (node_is_const(du, 0.0))
          return make_neg(make_div(make_mul(n->lhs, std::move(dv)),
                                   make_intpow(n->rhs, 2)));
        return make_div(make_sub(make_mul(std::move(du), n->rhs),
                                 make_mul(n->lhs, std::move(dv))),
                        make_intpow(n->rhs, 2));
      }
      case ExprKind::IntPow: {
        if (n->exponent == 0) return make_const(0.0);
        NodePtr inner = make_mul(make_const(static_cast<double>(n->exponent)),
                                 make_intpow(n->lhs, n->exponent - 1));
        return make_mul(std::move(inner), diff_node(n->lhs, v));
      }
      case ExprKind::Sin:
        return make_mul(make_unary(ExprKind::Cos, n->lhs), diff_node(n->lhs, v));
      case ExprKind::Cos:
        return make_mul(make_neg(make_unary(ExprKind::Sin, n->lhs)),
                        diff_node(n->lhs, v));
      case ExprKind::Exp:
        return make_mul(make_unary(ExprKind::Exp, n->lhs), diff_node(n->lhs, v));
      default: throw std::logic_error("Expr::derivative: corrupt node");
    }
  }

  NodePtr node_;
  VariableOrder vars_;
};

/// Recursive-descent parser for the infix expression grammar:
///   expression := term (('+'|'-') term)*
///   term       := unary (('*'|'/') unary)*
///   unary      := '-' unary | power
///   power      := primary ('^' exponent)*
///   primary    := number | identifier | identifier '(' expression ')' | '(' expression ')'
/// Precedence: ^ binds tighter than unary minus, which binds tighter than
/// * and /, which bind tighter than + and -. Exponents must be non-negative
/// integer literals. Function names are sin, cos, exp.
class ExprParser {
 public:
  ExprParser(std::string_view text, VariableOrder vars)
      : text_(text), vars_(std::move(vars)) {}

  Expr parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw SyntaxError("empty expression", 0);
    Expr e = expression();
    skip_ws();
    if (pos_ != text_.size()) throw SyntaxError("unexpected trailing input", pos_);
    return e.bound_to(vars_);
  }

 private:
  Expr expression() {
    Expr e = term();
    while (true) {
      skip_ws();
      if (match('+')) e = e + term();
      else if (match('-')) e = e - term();
      else return e;
    }
  }

  Expr term() {
    Expr e = unary();
    while (true) {
      skip_ws();
      if (match('*')) e = e * unary();
      else if (match('/')) e = e / unary();
      else return e;
    }
  }

  Expr unary() {
    if (++depth_ > max_depth)
      throw SyntaxError("expression too deeply nested", pos_);
    skip_ws();
    Expr e = match('-') ? -unary() : power();
    --depth_;
    return e;
  }

  Expr power() {
    Expr e = primary();
    while (true) {
      skip_ws();
      if (!match('^')) return e;
      e = Expr::pow(e, exponent());
    }
  }

  int exponent() {
    skip_ws();
    const std::size_t at = pos_;
    if (pos_ >= text_.size() ||
        !std::isdigit(static_cast<unsigned char>(text_[pos_])))
      throw NonIntegerExponent("exponent must be a non-negative integer literal", at);
    const double v = number();
    if (v != std::floor(v) || v < 0.0 || v > 1e9)
      throw NonIntegerExponent("exponent must be a non-negative integer literal", at);
    return static_cast<int>(v);
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= text_.size())
      throw SyntaxError("expected a number, variable, or '('", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expression();
      skip_ws();
      if (!match(')')) throw SyntaxError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return Expr::constant(number());
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t at = pos_;
      const std::string id = identifier();
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        ++pos_;
        Expr arg = expression();
        skip_ws();
        if (!match(')')) throw SyntaxError("expected ')'", pos_);
        if (id == "sin") return Expr::sin(arg);
        if (id == "cos") return Expr::cos(arg);
        if (id == "exp") return Expr::exp(arg);
        throw SyntaxError("unknown function '" + id + "'", at);
      }
      auto idx = vars_.index_of(id);
      if (!idx) throw UnknownVariable(id, at);
      return Expr::variable(vars_, *idx);
    }
    throw SyntaxError("expected a number, variable, or '('", pos_);
  }

  double number() {
    const std::size_t at = pos_;
    double v = 0.0;
    auto [end, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (ec == std::errc::result_out_of_range)
      throw SyntaxError("numeric literal out of range", at);
    if (ec != std::errc() || end == text_.data() + pos_)
      throw SyntaxError("expected a number", at);
    pos_ = static_cast<std::size_t>(end - text_.data());
    return v;
  }

  std::string identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool match(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static constexpr std::size_t max_depth = 10000;

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
  VariableOrder vars_;
};

/// Parses expression text against a declared variable order.
inline Expr parse(std::string_view text, const VariableOrder& vars) {
  return ExprParser(text, vars).parse();
}

}  // namespace descent
