#pragma once

// Line-oriented expression language for user-supplied maps:
//
//   # comment
//   f1 = x1^3 + x1
//   f2 = exp(x1) * sin(x2)
//
// Precedence, tightest first: ^ (right-assoc, constant exponent), unary -,
// * and /, + and -. Derivatives come from forward-mode dual numbers.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fninv/errors.hpp"
#include "fninv/map_model.hpp"

namespace fninv::expr {

enum class Func { Neg, Sin, Cos, Exp, Log, Sqrt, Tanh, Abs };
enum class BinOp { Add, Sub, Mul, Div, Pow };

inline const char* func_name(Func f) {
  switch (f) {
    case Func::Neg: return "-";
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sqrt: return "sqrt";
    case Func::Tanh: return "tanh";
    case Func::Abs: return "abs";
  }
  return "?";
}

inline char binop_symbol(BinOp op) {
  switch (op) {
    case BinOp::Add: return '+';
    case BinOp::Sub: return '-';
    case BinOp::Mul: return '*';
    case BinOp::Div: return '/';
    case BinOp::Pow: return '^';
  }
  return '?';
}

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// Immutable expression tree node.
struct Node {
  enum class Kind { Constant, Variable, Unary, Binary };

  Kind kind = Kind::Constant;
  double value = 0.0;      // Constant; also the folded exponent of a Pow node
  std::size_t index = 0;   // Variable, 1-based
  Func func = Func::Neg;   // Unary
  BinOp op = BinOp::Add;   // Binary
  NodePtr lhs;             // Unary operand or binary left
  NodePtr rhs;

  static NodePtr constant(double v) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Constant;
    n->value = v;
    return n;
  }
  static NodePtr variable(std::size_t i) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Variable;
    n->index = i;
    return n;
  }
  static NodePtr unary(Func f, NodePtr arg) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Unary;
    n->func = f;
    n->lhs = std::move(arg);
    return n;
  }
  static NodePtr binary(BinOp op, NodePtr l, NodePtr r) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Binary;
    n->op = op;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }
  static NodePtr power(NodePtr base, NodePtr exponent, double folded) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Binary;
    n->op = BinOp::Pow;
    n->value = folded;
    n->lhs = std::move(base);
    n->rhs = std::move(exponent);
    return n;
  }
};

/// A parsed square map: component k is f_{k+1}(x1..xn).
struct MapDefinition {
  std::size_t n = 0;
  std::vector<NodePtr> components;
  std::string source_text;
};

// ---------------------------------------------------------------------------
// Lexer

namespace detail {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, Equals, End };

inline const char* tok_display(Tok t) {
  switch (t) {
    case Tok::Number: return "number";
    case Tok::Ident: return "identifier";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Caret: return "'^'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Equals: return "'='";
    case Tok::End: return "end of line";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  std::size_t column = 1;  // 1-based
};

/// Tokenizes one line. The End token sits one column past the last token.
inline std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  std::size_t end_col = 1;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.column = i + 1;
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < line.size() && (std::isdigit(static_cast<unsigned char>(line[j])) || line[j] == '.')) ++j;
      if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < line.size() && (line[k] == '+' || line[k] == '-')) ++k;
        if (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) {
          while (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) ++k;
          j = k;
        }
      }
      t.kind = Tok::Number;
      t.text = std::string(line.substr(i, j - i));
      const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
        throw SyntaxError("malformed number '" + t.text + "'", line_no, t.column, {"number"});
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < line.size() &&
             (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_'))
        ++j;
      t.kind = Tok::Ident;
      t.text = std::string(line.substr(i, j - i));
      i = j;
    } else {
      switch (c) {
        case '+': t.kind = Tok::Plus; break;
        case '-': t.kind = Tok::Minus; break;
        case '*': t.kind = Tok::Star; break;
        case '/': t.kind = Tok::Slash; break;
        case '^': t.kind = Tok::Caret; break;
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case ',': t.kind = Tok::Comma; break;
        case '=': t.kind = Tok::Equals; break;
        default:
          throw SyntaxError(std::string("unexpected character '") + c + "'", line_no, i + 1, {});
      }
      t.text = std::string(1, c);
      ++i;
    }
    end_col = i + 1;
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.column = end_col;
  out.push_back(end);
  return out;
}

inline std::optional<Func> lookup_function(const std::string& name) {
  if (name == "sin") return Func::Sin;
  if (name == "cos") return Func::Cos;
  if (name == "exp") return Func::Exp;
  if (name == "log") return Func::Log;
  if (name == "sqrt") return Func::Sqrt;
  if (name == "tanh") return Func::Tanh;
  if (name == "abs") return Func::Abs;
  return std::nullopt;
}

/// Parses "x<k>" / "f<k>" style names; returns k >= 1 or nullopt.
inline std::optional<std::size_t> indexed_name(const std::string& name, char prefix) {
  if (name.size() < 2 || name[0] != prefix) return std::nullopt;
  if (name[1] == '0') return std::nullopt;
  std::size_t k = 0;
  const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), k);
  if (res.ec != std::errc() || res.ptr != name.data() + name.size() || k == 0) return std::nullopt;
  return k;
}

inline std::optional<double> fold_constant(const Node& node);

/// Recursive-descent parser over one line's tokens.
class LineParser {
 public:
  LineParser(std::vector<Token> tokens, std::size_t line_no)
      : toks_(std::move(tokens)), line_(line_no) {}

  NodePtr parse_expression_to_end() {
    NodePtr e = expression();
    if (peek().kind != Tok::End) fail_expected({"operator", "end of line"});
    return e;
  }

  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  std::size_t max_variable() const { return max_var_; }

  [[noreturn]] void fail_expected(std::vector<std::string> expected) const {
    const Token& t = peek();
    const std::string found = t.kind == Tok::End ? "end of line" : "'" + t.text + "'";
    throw SyntaxError("unexpected " + found, line_, t.column, std::move(expected));
  }

  void expect(Tok kind) {
    if (peek().kind != kind) fail_expected({tok_display(kind)});
    take();
  }

 private:
  // sum := product (('+'|'-') product)*
  NodePtr expression() {
    NodePtr lhs = product();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const BinOp op = take().kind == Tok::Plus ? BinOp::Add : BinOp::Sub;
      lhs = Node::binary(op, lhs, product());
    }
    return lhs;
  }

  // product := unary (('*'|'/') unary)*
  NodePtr product() {
    NodePtr lhs = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const BinOp op = take().kind == Tok::Star ? BinOp::Mul : BinOp::Div;
      lhs = Node::binary(op, lhs, unary());
    }
    return lhs;
  }

  // unary := '-' unary | power
  NodePtr unary() {
    if (peek().kind == Tok::Minus) {
      take();
      return Node::unary(Func::Neg, unary());
    }
    return power();
  }

  // power := primary ('^' exponent)?   exponent := '-'* power
  NodePtr power() {
    NodePtr base = primary();
    if (peek().kind != Tok::Caret) return base;
    take();
    const Token at = peek();
    NodePtr exponent = signed_power();
    const auto folded = fold_constant(*exponent);
    if (!folded || !std::isfinite(*folded))
      throw SyntaxError("exponent must be a constant", line_, at.column, {"constant exponent"});
    return Node::power(std::move(base), std::move(exponent), *folded);
  }

  NodePtr signed_power() {
    if (peek().kind == Tok::Minus) {
      take();
      return Node::unary(Func::Neg, signed_power());
    }
    return power();
  }

  NodePtr primary() {
    const Token t = peek();
    switch (t.kind) {
      case Tok::Number:
        take();
        return Node::constant(t.number);
      case Tok::LParen: {
        take();
        NodePtr e = expression();
        expect(Tok::RParen);
        return e;
      }
      case Tok::Ident: {
        take();
        if (auto f = lookup_function(t.text)) return call(*f, t);
        if (auto k = indexed_name(t.text, 'x')) {
          if (peek().kind == Tok::LParen)
            throw ArityError("variable '" + t.text + "' is not a function", line_, t.column);
          max_var_ = std::max(max_var_, *k);
          return Node::variable(*k);
        }
        throw UnknownIdentifier(t.text, line_, t.column);
      }
      default:
        fail_expected({"number", "variable", "function", "'('", "'-'"});
    }
  }

  NodePtr call(Func f, const Token& name) {
    if (peek().kind != Tok::LParen) fail_expected({"'('"});
    take();
    if (peek().kind == Tok::RParen)
      throw ArityError(name.text + " expects 1 argument, got 0", line_, name.column);
    NodePtr arg = expression();
    std::size_t count = 1;
    while (peek().kind == Tok::Comma) {
      take();
      expression();
      ++count;
    }
    if (count != 1)
      throw ArityError(name.text + " expects 1 argument, got " + std::to_string(count), line_,
                       name.column);
    expect(Tok::RParen);
    return Node::unary(f, arg);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t line_;
  std::size_t max_var_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Evaluation

/// First-order dual number a + b*eps.
struct Dual {
  double v = 0.0;
  double d = 0.0;
};

namespace detail {

struct EvalState {
  bool kink = false;
};

inline double check_pow_domain(double base, double exponent) {
  const bool integral = std::floor(exponent) == exponent;
  if (base < 0.0 && !integral)
    throw DomainError("fractional power of a negative number");
  return std::pow(base, exponent);
}

template <typename T>
T eval_node(const Node& node, const std::vector<T>& x, EvalState& st);

inline double apply_unary(Func f, double a, EvalState& st) {
  switch (f) {
    case Func::Neg: return -a;
    case Func::Sin: return std::sin(a);
    case Func::Cos: return std::cos(a);
    case Func::Exp: return std::exp(a);
    case Func::Log:
      if (a <= 0.0) throw DomainError("log of a nonpositive number");
      return std::log(a);
    case Func::Sqrt:
      if (a < 0.0) throw DomainError("sqrt of a negative number");
      return std::sqrt(a);
    case Func::Tanh: return std::tanh(a);
    case Func::Abs:
      if (a == 0.0) st.kink = true;
      return std::abs(a);
  }
  return a;
}

inline Dual apply_unary(Func f, Dual a, EvalState& st) {
  const double v = apply_unary(f, a.v, st);
  switch (f) {
    case Func::Neg: return {v, -a.d};
    case Func::Sin: return {v, std::cos(a.v) * a.d};
    case Func::Cos: return {v, -std::sin(a.v) * a.d};
    case Func::Exp: return {v, v * a.d};
    case Func::Log: return {v, a.d / a.v};
    case Func::Sqrt: return {v, a.d / (2.0 * v)};
    case Func::Tanh: return {v, (1.0 - v * v) * a.d};
    case Func::Abs: {
      // Derivative 0 at the kink; the kink itself is reported via EvalState.
      const double s = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
      return {v, s * a.d};
    }
  }
  return a;
}

inline double apply_binary(BinOp op, double a, double b, double exponent) {
  switch (op) {
    case BinOp::Add: return a + b;
    case BinOp::Sub: return a - b;
    case BinOp::Mul: return a * b;
    case BinOp::Div: return a / b;
    case BinOp::Pow: return check_pow_domain(a, exponent);
  }
  return 0.0;
}

inline Dual apply_binary(BinOp op, Dual a, Dual b, double exponent) {
  switch (op) {
    case BinOp::Add: return {a.v + b.v, a.d + b.d};
    case BinOp::Sub: return {a.v - b.v, a.d - b.d};
    case BinOp::Mul: return {a.v * b.v, a.d * b.v + a.v * b.d};
    case BinOp::Div: return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
    case BinOp::Pow: {
      const double v = check_pow_domain(a.v, exponent);
      if (exponent == 0.0) return {v, 0.0};
      if (exponent == 1.0) return {v, a.d};
      if (a.d == 0.0) return {v, 0.0};
      return {v, exponent * check_pow_domain(a.v, exponent - 1.0) * a.d};
    }
  }
  return {};
}

template <typename T>
T eval_node(const Node& node, const std::vector<T>& x, EvalState& st) {
  switch (node.kind) {
    case Node::Kind::Constant:
      if constexpr (std::is_same_v<T, Dual>) return Dual{node.value, 0.0};
      else return node.value;
    case Node::Kind::Variable:
      return x.at(node.index - 1);
    case Node::Kind::Unary:
      return apply_unary(node.func, eval_node(*node.lhs, x, st), st);
    case Node::Kind::Binary: {
      const T a = eval_node(*node.lhs, x, st);
      if (node.op == BinOp::Pow) return apply_binary(node.op, a, a, node.value);
      return apply_binary(node.op, a, eval_node(*node.rhs, x, st), 0.0);
    }
  }
  return T{};
}

inline std::optional<double> fold_constant(const Node& node) {
  switch (node.kind) {
    case Node::Kind::Constant: return node.value;
    case Node::Kind::Variable: return std::nullopt;
    case Node::Kind::Unary: {
      auto a = fold_constant(*node.lhs);
      if (!a) return std::nullopt;
      EvalState st;
      try {
        return apply_unary(node.func, *a, st);
      } catch (const DomainError&) {
        return std::nullopt;
      }
    }
    case Node::Kind::Binary: {
      auto a = fold_constant(*node.lhs);
      if (!a) return std::nullopt;
      if (node.op == BinOp::Pow) {
        try {
          return check_pow_domain(*a, node.value);
        } catch (const DomainError&) {
          return std::nullopt;
        }
      }
      auto b = fold_constant(*node.rhs);
      if (!b) return std::nullopt;
      return apply_binary(node.op, *a, *b, 0.0);
    }
  }
  return std::nullopt;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public API

/// Parses the map-file format. Each non-blank, non-comment line must read
/// `f<k> = <expression>`; components must be f1..fn exactly once each and
/// n must equal the highest variable index used.
inline MapDefinition parse(std::string_view source) {
  MapDefinition def;
  def.source_text = std::string(source);
  std::vector<NodePtr> slots;
  std::vector<std::size_t> defined_on;
  std::size_t max_var = 0;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= source.size()) {
    std::size_t stop = source.find('\n', start);
    if (stop == std::string_view::npos) stop = source.size();
    std::string_view line = source.substr(start, stop - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = stop + 1;

    auto toks = detail::tokenize(line, line_no);
    if (toks.size() == 1) {
      if (stop == source.size()) break;
      continue;
    }
    detail::LineParser p(std::move(toks), line_no);
    const detail::Token head = p.peek();
    if (head.kind != detail::Tok::Ident) p.fail_expected({"component name f<k>"});
    const auto k = detail::indexed_name(head.text, 'f');
    if (!k) throw UnknownIdentifier(head.text, line_no, head.column);
    p.take();
    p.expect(detail::Tok::Equals);
    NodePtr e = p.parse_expression_to_end();
    max_var = std::max(max_var, p.max_variable());
    if (slots.size() < *k) {
      slots.resize(*k);
      defined_on.resize(*k, 0);
    }
    if (slots[*k - 1])
      throw SyntaxError("component " + head.text + " already defined on line " +
                            std::to_string(defined_on[*k - 1]),
                        line_no, head.column, {});
    slots[*k - 1] = std::move(e);
    defined_on[*k - 1] = line_no;
    if (stop == source.size()) break;
  }

  std::size_t count = 0;
  for (const auto& s : slots)
    if (s) ++count;
  if (count == 0) throw SyntaxError("no components defined", line_no == 0 ? 1 : line_no, 1, {"f1 = <expression>"});
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (!slots[i]) throw NonSquareDefinition(count, std::max(max_var, slots.size()));
  if (count != max_var) throw NonSquareDefinition(count, max_var);

  def.n = count;
  def.components = std::move(slots);
  return def;
}

inline MapDefinition parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open map file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void print_node(const Node& node, std::string& out) {
  switch (node.kind) {
    case Node::Kind::Constant:
      if (node.value < 0.0 || std::signbit(node.value)) {
        out += "(-" + format_number(-node.value) + ")";
      } else {
        out += format_number(node.value);
      }
      return;
    case Node::Kind::Variable:
      out += "x" + std::to_string(node.index);
      return;
    case Node::Kind::Unary:
      if (node.func == Func::Neg) {
        out += "(-";
        print_node(*node.lhs, out);
        out += ")";
      } else {
        out += func_name(node.func);
        out += "(";
        print_node(*node.lhs, out);
        out += ")";
      }
      return;
    case Node::Kind::Binary:
      out += "(";
      print_node(*node.lhs, out);
      out += ' ';
      out += binop_symbol(node.op);
      out += ' ';
      if (node.op == BinOp::Pow) {
        // Exponents are stored folded; print the folded value.
        out += "(" + format_number(node.value) + ")";
      } else {
        print_node(*node.rhs, out);
      }
      out += ")";
      return;
  }
}

}  // namespace detail

/// Fully parenthesized text that parses back to an equivalent tree.
inline std::string print(const NodePtr& node) {
  std::string s;
  detail::print_node(*node, s);
  return s;
}

inline std::string print(const MapDefinition& def) {
  std::string out;
  for (std::size_t k = 0; k < def.components.size(); ++k)
    out += "f" + std::to_string(k + 1) + " = " + print(def.components[k]) + "\n";
  return out;
}

inline Vector evaluate(const MapDefinition& def, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != def.n) throw DimensionMismatch(def.n, x.size(), "expr evaluate");
  std::vector<double> xs(x.data(), x.data() + x.size());
  Vector out(def.n);
  detail::EvalState st;
  for (std::size_t k = 0; k < def.n; ++k)
    out[static_cast<Eigen::Index>(k)] = detail::eval_node(*def.components[k], xs, st);
  if (!out.allFinite()) throw NonFiniteOutput("expr: non-finite value");
  return out;
}

struct AdResult {
  Vector value;
  JacobianMatrix jacobian;
  /// An abs() argument was exactly zero; the derivative there is conventional.
  bool nondifferentiable = false;
};

/// Value and exact Jacobian by n forward passes of dual numbers.
inline AdResult eval_ad(const MapDefinition& def, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != def.n) throw DimensionMismatch(def.n, x.size(), "expr eval_ad");
  const std::size_t n = def.n;
  AdResult r;
  r.value = Vector(n);
  r.jacobian.entries = Matrix(n, n);
  r.jacobian.point = x;
  std::vector<Dual> xs(n);
  detail::EvalState st;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) xs[i] = {x[static_cast<Eigen::Index>(i)], i == j ? 1.0 : 0.0};
    for (std::size_t k = 0; k < n; ++k) {
      const Dual d = detail::eval_node(*def.components[k], xs, st);
      r.value[static_cast<Eigen::Index>(k)] = d.v;
      r.jacobian.entries(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = d.d;
    }
  }
  if (!r.value.allFinite() || !r.jacobian.entries.allFinite())
    throw NonFiniteOutput("expr: non-finite value or derivative");
  r.nondifferentiable = st.kink;
  return r;
}

/// Wraps a definition as a VectorMap with the forward-mode Jacobian and
/// abs-kink information attached.
inline VectorMap to_vector_map(std::shared_ptr<const MapDefinition> def, std::string label) {
  const std::size_t n = def->n;
  auto map = VectorMap(
      n, [def](const Vector& x) { return evaluate(*def, x); },
      [def](const Vector& x) { return eval_ad(*def, x).jacobian.entries; }, std::move(label));
  return map.with_kinks([def](const Vector& x) { return eval_ad(*def, x).nondifferentiable; });
}

inline VectorMap to_vector_map(MapDefinition def, std::string label) {
  return to_vector_map(std::make_shared<const MapDefinition>(std::move(def)), std::move(label));
}

}  // namespace fninv::expr
