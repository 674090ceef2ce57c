#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "alphamcts/error.hpp"
#include "alphamcts/operators.hpp"

namespace alphamcts {

/// One node of a formulaic alpha: a raw-feature leaf or an operator applied to
/// 1-2 children with symbolic window/lag parameters.
struct ExprNode {
  enum class Kind : std::uint8_t { leaf, op };

  Kind kind = Kind::leaf;
  Feature feature = Feature::close;
  OpCode op = OpCode::Neg;
  std::vector<ExprNode> children;
  std::vector<std::string> params;

  bool is_leaf() const noexcept { return kind == Kind::leaf; }

  friend bool operator==(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind) return false;
    if (a.is_leaf()) return a.feature == b.feature;
    return a.op == b.op && a.params == b.params && a.children == b.children;
  }
};

inline ExprNode leaf(Feature f) {
  ExprNode n;
  n.kind = ExprNode::Kind::leaf;
  n.feature = f;
  return n;
}

inline ExprNode apply(OpCode op, std::vector<ExprNode> children, std::vector<std::string> params = {}) {
  ExprNode n;
  n.kind = ExprNode::Kind::op;
  n.op = op;
  n.children = std::move(children);
  n.params = std::move(params);
  return n;
}

/// Parameter name -> positive integer window/lag value.
using ArgumentSet = std::map<std::string, int>;

/// A complete alpha: expression tree, its symbolic parameter names and 1-3
/// candidate argument bindings.
struct AlphaFormula {
  std::string name;
  std::string description;
  ExprNode root;
  std::vector<std::string> param_names;
  std::vector<ArgumentSet> argument_sets;
};

/// Equality that ignores name and description.
inline bool structurally_equal(const AlphaFormula& a, const AlphaFormula& b) {
  return a.root == b.root && a.param_names == b.param_names && a.argument_sets == b.argument_sets;
}

inline void for_each_node(const ExprNode& n, const std::function<void(const ExprNode&)>& fn) {
  fn(n);
  for (const auto& c : n.children) for_each_node(c, fn);
}

inline void for_each_node(ExprNode& n, const std::function<void(ExprNode&)>& fn) {
  fn(n);
  for (auto& c : n.children) for_each_node(c, fn);
}

inline std::size_t node_count(const ExprNode& n) {
  std::size_t k = 1;
  for (const auto& c : n.children) k += node_count(c);
  return k;
}

inline std::size_t op_count(const ExprNode& n) {
  std::size_t k = n.is_leaf() ? 0 : 1;
  for (const auto& c : n.children) k += op_count(c);
  return k;
}

inline std::size_t depth(const ExprNode& n) {
  std::size_t d = 0;
  for (const auto& c : n.children) d = std::max(d, depth(c));
  return d + 1;
}

/// Parameter names in pre-order of first appearance.
inline std::vector<std::string> collect_param_names(const ExprNode& root) {
  std::vector<std::string> out;
  for_each_node(root, [&](const ExprNode& n) {
    for (const auto& p : n.params)
      if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  });
  return out;
}

/// Total lookback: the number of leading days a clean series needs before
/// the formula produces its first value.
inline int lookback(const ExprNode& n, const ArgumentSet& args) {
  int child = 0;
  for (const auto& c : n.children) child = std::max(child, lookback(c, args));
  if (n.is_leaf() || n.params.empty()) return child;
  auto value = [&](std::size_t k) {
    auto it = args.find(n.params[k]);
    return it == args.end() ? 0 : it->second;
  };
  switch (n.op) {
    case OpCode::Delay:
    case OpCode::Diff:
    case OpCode::Pct:
      return child + value(0);
    default:
      return child + value(0) - 1;
  }
}

enum class ParamStyle { symbolic, wildcard, bound };

namespace detail {

inline std::string param_text(const std::string& p, ParamStyle style, const ArgumentSet* args) {
  switch (style) {
    case ParamStyle::wildcard:
      return "t";
    case ParamStyle::bound:
      if (args) {
        auto it = args->find(p);
        if (it != args->end()) return std::to_string(it->second);
      }
      return p;
    case ParamStyle::symbolic:
      break;
  }
  return p;
}

inline int infix_precedence(const ExprNode& n) {
  if (n.is_leaf()) return 5;
  switch (n.op) {
    case OpCode::Add:
    case OpCode::Sub:
      return 1;
    case OpCode::Mul:
    case OpCode::Div:
      return 2;
    case OpCode::Neg:
    case OpCode::Inv:
      return 3;
    case OpCode::Square:
      return 4;
    default:
      return 5;
  }
}

inline void write_infix(const ExprNode& n, ParamStyle style, const ArgumentSet* args, std::string& out);

inline void write_operand(const ExprNode& n, int min_prec, ParamStyle style, const ArgumentSet* args,
                          std::string& out) {
  const bool parens = infix_precedence(n) < min_prec;
  if (parens) out += '(';
  write_infix(n, style, args, out);
  if (parens) out += ')';
}

inline void write_infix(const ExprNode& n, ParamStyle style, const ArgumentSet* args, std::string& out) {
  if (n.is_leaf()) {
    out += feature_name(n.feature);
    return;
  }
  switch (n.op) {
    case OpCode::Neg:
      out += '-';
      write_operand(n.children[0], 3, style, args, out);
      return;
    case OpCode::Inv:
      out += "1/";
      write_operand(n.children[0], 3, style, args, out);
      return;
    case OpCode::Abs:
      out += '|';
      write_infix(n.children[0], style, args, out);
      out += '|';
      return;
    case OpCode::Square:
      write_operand(n.children[0], 5, style, args, out);
      out += "^2";
      return;
    case OpCode::Add:
    case OpCode::Sub:
    case OpCode::Mul:
    case OpCode::Div: {
      const int prec = infix_precedence(n);
      const char sym = n.op == OpCode::Add ? '+' : n.op == OpCode::Sub ? '-' : n.op == OpCode::Mul ? '*' : '/';
      write_operand(n.children[0], prec, style, args, out);
      out += sym;
      write_operand(n.children[1], prec + 1, style, args, out);
      return;
    }
    default:
      break;
  }
  out += op_name(n.op);
  out += '(';
  bool first = true;
  for (const auto& c : n.children) {
    if (!first) out += ',';
    first = false;
    write_infix(c, style, args, out);
  }
  for (const auto& p : n.params) {
    out += ',';
    out += param_text(p, style, args);
  }
  out += ')';
}

inline void write_prefix(const ExprNode& n, ParamStyle style, const ArgumentSet* args, std::string& out) {
  if (n.is_leaf()) {
    out += feature_name(n.feature);
    return;
  }
  out += op_name(n.op);
  out += '(';
  bool first = true;
  for (const auto& c : n.children) {
    if (!first) out += ',';
    first = false;
    write_prefix(c, style, args, out);
  }
  for (const auto& p : n.params) {
    out += ',';
    out += param_text(p, style, args);
  }
  out += ')';
}

}  // namespace detail

/// Readable mathematical form, e.g. `Zscore(Ma(close-vwap,20),30)`.
inline std::string to_infix(const ExprNode& n, ParamStyle style = ParamStyle::symbolic,
                            const ArgumentSet* args = nullptr) {
  std::string out;
  detail::write_infix(n, style, args, out);
  return out;
}

/// Canonical operator-call form, e.g. `Zscore(Ma(Sub(close,vwap),20),30)`.
inline std::string to_prefix(const ExprNode& n, ParamStyle style = ParamStyle::symbolic,
                             const ArgumentSet* args = nullptr) {
  std::string out;
  detail::write_prefix(n, style, args, out);
  return out;
}

inline std::string to_infix(const AlphaFormula& f, std::size_t arg_index) {
  return to_infix(f.root, ParamStyle::bound, arg_index < f.argument_sets.size() ? &f.argument_sets[arg_index] : nullptr);
}

/// Repository identity: canonical tree with the chosen argument set bound.
inline std::string identity_key(const AlphaFormula& f, std::size_t arg_index) {
  return to_prefix(f.root, ParamStyle::bound,
                   arg_index < f.argument_sets.size() ? &f.argument_sets[arg_index] : nullptr);
}

namespace detail {

class InfixParser {
 public:
  explicit InfixParser(std::string_view text) : text_(text) {}

  AlphaFormula parse() {
    AlphaFormula f;
    f.root = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing text");
    // Literal windows were given placeholder names while parsing; number
    // them p1, p2, ... in pre-order so the text reads naturally.
    std::map<std::string, std::string> rename;
    ArgumentSet bound;
    for (const auto& name : collect_param_names(f.root)) {
      if (name.front() != '#') continue;
      const auto fresh = "p" + std::to_string(rename.size() + 1);
      rename[name] = fresh;
      bound[fresh] = numeric_.at(name);
    }
    for_each_node(f.root, [&](ExprNode& n) {
      for (auto& p : n.params)
        if (auto it = rename.find(p); it != rename.end()) p = it->second;
    });
    f.param_names = collect_param_names(f.root);
    if (!bound.empty()) f.argument_sets.push_back(bound);
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw InterchangeError("expression parse error at offset " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool accept(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  std::string identifier() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  ExprNode parse_expr() {
    ExprNode lhs = parse_term();
    while (true) {
      if (accept('+')) {
        lhs = apply(OpCode::Add, {std::move(lhs), parse_term()});
      } else if (peek() == '-') {
        ++pos_;
        lhs = apply(OpCode::Sub, {std::move(lhs), parse_term()});
      } else {
        return lhs;
      }
    }
  }

  ExprNode parse_term() {
    ExprNode lhs = parse_unary();
    while (true) {
      if (accept('*')) {
        lhs = apply(OpCode::Mul, {std::move(lhs), parse_unary()});
      } else if (accept('/')) {
        lhs = apply(OpCode::Div, {std::move(lhs), parse_unary()});
      } else {
        return lhs;
      }
    }
  }

  ExprNode parse_unary() {
    if (accept('-')) return apply(OpCode::Neg, {parse_unary()});
    if (peek() == '1') {
      ++pos_;
      expect('/');
      return apply(OpCode::Inv, {parse_unary()});
    }
    ExprNode base = parse_primary();
    if (accept('^')) {
      if (peek() != '2') fail("only ^2 is supported");
      ++pos_;
      base = apply(OpCode::Square, {std::move(base)});
    }
    return base;
  }

  std::string parse_param() {
    skip_ws();
    if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      int v = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        v = v * 10 + (text_[pos_++] - '0');
      const std::string name = "#" + std::to_string(numeric_.size());
      numeric_[name] = v;
      return name;
    }
    auto id = identifier();
    if (id.empty()) fail("expected parameter");
    return id;
  }

  ExprNode parse_primary() {
    if (accept('(')) {
      ExprNode inner = parse_expr();
      expect(')');
      return inner;
    }
    if (accept('|')) {
      ExprNode inner = parse_expr();
      expect('|');
      return apply(OpCode::Abs, {std::move(inner)});
    }
    const auto id = identifier();
    if (id.empty()) fail("expected operand");
    if (accept('(')) {
      const auto op = op_from_name(id);
      if (!op) fail("unknown operator '" + id + "'");
      const auto& info = op_info(*op);
      std::vector<ExprNode> kids;
      std::vector<std::string> params;
      for (int k = 0; k < info.arity; ++k) {
        if (k > 0) expect(',');
        kids.push_back(parse_expr());
      }
      for (int k = 0; k < info.param_count; ++k) {
        expect(',');
        params.push_back(parse_param());
      }
      expect(')');
      return apply(*op, std::move(kids), std::move(params));
    }
    const auto f = feature_from_name(id);
    if (!f) fail("unknown field '" + id + "'");
    return leaf(*f);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  ArgumentSet numeric_;
};

}  // namespace detail

/// Parses the readable infix/prefix form. Integer parameters become
/// parameters p1, p2, ... bound in a single argument set.
inline AlphaFormula parse_expression(std::string_view text) { return detail::InfixParser(text).parse(); }

}  // namespace alphamcts
