#pragma once

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "gpcentaur/algebra.hpp"
#include "gpcentaur/error.hpp"
#include "gpcentaur/model.hpp"

namespace gpc {

/// Expression tree. There are no subtraction or negation nodes, and power
/// exponents are always numeric literals.
struct ExprNode {
  enum class Kind { Number, Identifier, Product, Quotient, Power, Sum, Paren };

  Kind kind = Kind::Number;
  double value = 0.0;          // Number literal, or the exponent of a Power
  std::string name;            // Identifier
  std::optional<int> index;    // Identifier element index
  std::vector<ExprNode> args;  // operands: two for binary kinds, one for Power/Paren
  int line = 1;
  int column = 1;
};

namespace detail {

enum class Tok { Number, Ident, LBracket, RBracket, LParen, RParen, Plus, Minus, Star, Slash, Caret, Le, Ge, Eq, End, Bad };

inline std::string describe(Tok t) {
  switch (t) {
    case Tok::Number: return "number";
    case Tok::Ident: return "identifier";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Caret: return "'^'";
    case Tok::Le: return "'<='";
    case Tok::Ge: return "'>='";
    case Tok::Eq: return "'='";
    case Tok::End: return "end of input";
    case Tok::Bad: return "invalid character";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    t.column = col_;
    if (pos_ >= src_.size()) return t;
    const char ch = src_[pos_];
    auto single = [&](Tok k) {
      t.kind = k;
      t.text = std::string(1, ch);
      advance();
      return t;
    };
    switch (ch) {
      case '[': return single(Tok::LBracket);
      case ']': return single(Tok::RBracket);
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case '+': return single(Tok::Plus);
      case '-': return single(Tok::Minus);
      case '*': return single(Tok::Star);
      case '/': return single(Tok::Slash);
      case '^': return single(Tok::Caret);
      case '<':
      case '>':
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') {
          t.kind = ch == '<' ? Tok::Le : Tok::Ge;
          t.text = std::string(src_.substr(pos_, 2));
          advance();
          advance();
          return t;
        }
        return single(Tok::Bad);
      case '=':
        t.kind = Tok::Eq;
        advance();
        if (pos_ < src_.size() && src_[pos_] == '=') advance();
        t.text = "=";
        return t;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return number(t);
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return ident(t);
    return single(Tok::Bad);
  }

 private:
  Token number(Token t) {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) { advance(); ++n; }
      return n;
    };
    std::size_t nd = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      nd += digits();
    }
    if (nd == 0) {
      t.kind = Tok::Bad;
      t.text = ".";
      return t;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      const std::size_t save = pos_;
      const int sl = line_, sc = col_;
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
      if (digits() == 0) {  // "2e" is a number followed by an identifier
        pos_ = save;
        line_ = sl;
        col_ = sc;
      }
    }
    t.kind = Tok::Number;
    t.text = std::string(src_.substr(start, pos_ - start));
    errno = 0;
    t.number = std::strtod(t.text.c_str(), nullptr);
    if (errno == ERANGE && std::isinf(t.number)) t.kind = Tok::Bad;
    return t;
  }

  Token ident(Token t) {
    const std::size_t start = pos_;
    for (;;) {
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
      // qualified access: Wing.S
      if (pos_ + 1 < src_.size() && src_[pos_] == '.' &&
          (std::isalpha(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '_')) {
        advance();
        continue;
      }
      break;
    }
    t.kind = Tok::Ident;
    t.text = std::string(src_.substr(start, pos_ - start));
    return t;
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { cur_ = lex_.next(); }

  ExprNode parse_expression_only() {
    ExprNode e = expr();
    expect_end({"'+'", "'*'", "'/'", "'^'", "end of input"});
    return e;
  }

  std::tuple<ExprNode, Relation, ExprNode> parse_relation() {
    ExprNode lhs = expr();
    Relation rel;
    switch (cur_.kind) {
      case Tok::Le: rel = Relation::LessEqual; break;
      case Tok::Ge: rel = Relation::GreaterEqual; break;
      case Tok::Eq: rel = Relation::Equal; break;
      default: fail({"'<='", "'>='", "'='", "'+'", "'*'", "'/'", "'^'"});
    }
    bump();
    ExprNode rhs = expr();
    expect_end({"'+'", "'*'", "'/'", "'^'", "end of input"});
    return {std::move(lhs), rel, std::move(rhs)};
  }

 private:
  static constexpr int kMaxDepth = 200;

  ExprNode expr() {
    ExprNode lhs = term();
    for (;;) {
      if (cur_.kind == Tok::Plus) {
        Token op = cur_;
        bump();
        lhs = binary(ExprNode::Kind::Sum, std::move(lhs), term(), op);
      } else if (cur_.kind == Tok::Minus) {
        subtraction();
      } else {
        return lhs;
      }
    }
  }

  ExprNode term() {
    ExprNode lhs = factor();
    for (;;) {
      if (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
        Token op = cur_;
        bump();
        lhs = binary(op.kind == Tok::Star ? ExprNode::Kind::Product : ExprNode::Kind::Quotient, std::move(lhs), factor(), op);
      } else if (cur_.kind == Tok::Ident || cur_.kind == Tok::Number || cur_.kind == Tok::LParen) {
        throw SyntaxError(ErrorCode::SyntaxError, "implicit multiplication is not allowed before '" + cur_.text + "'",
                          cur_.line, cur_.column, {"'*'", "'/'"});
      } else {
        return lhs;
      }
    }
  }

  ExprNode factor() {
    ExprNode b = base();
    if (cur_.kind != Tok::Caret) return b;
    Token op = cur_;
    bump();
    double e = signed_number();
    ExprNode p;
    p.kind = ExprNode::Kind::Power;
    p.value = e;
    p.line = op.line;
    p.column = op.column;
    p.args.push_back(std::move(b));
    return p;
  }

  double signed_number() {
    bool paren = false;
    if (cur_.kind == Tok::LParen) {
      paren = true;
      bump();
    }
    double sign = 1.0;
    if (cur_.kind == Tok::Minus || cur_.kind == Tok::Plus) {
      if (cur_.kind == Tok::Minus) sign = -1.0;
      bump();
    }
    if (cur_.kind != Tok::Number) {
      throw SyntaxError(ErrorCode::SyntaxError, "exponent must be a numeric literal", cur_.line, cur_.column,
                        {"number", "'-'"});
    }
    double v = sign * cur_.number;
    bump();
    if (paren) {
      if (cur_.kind != Tok::RParen) fail({"')'"});
      bump();
    }
    return v;
  }

  ExprNode base() {
    ExprNode n;
    n.line = cur_.line;
    n.column = cur_.column;
    switch (cur_.kind) {
      case Tok::Number:
        n.kind = ExprNode::Kind::Number;
        n.value = cur_.number;
        bump();
        return n;
      case Tok::Ident:
        n.kind = ExprNode::Kind::Identifier;
        n.name = cur_.text;
        bump();
        if (cur_.kind == Tok::LBracket) {
          bump();
          if (cur_.kind != Tok::Number || cur_.text.find_first_not_of("0123456789") != std::string::npos ||
              cur_.text.size() > 9) {
            throw SyntaxError(ErrorCode::SyntaxError, "index must be a non-negative integer", cur_.line, cur_.column,
                              {"integer"});
          }
          n.index = std::stoi(cur_.text);
          bump();
          if (cur_.kind != Tok::RBracket) fail({"']'"});
          bump();
        }
        return n;
      case Tok::LParen: {
        if (++depth_ > kMaxDepth) {
          throw SyntaxError(ErrorCode::SyntaxError, "expression nested too deeply", cur_.line, cur_.column);
        }
        bump();
        n.kind = ExprNode::Kind::Paren;
        n.args.push_back(expr());
        if (cur_.kind != Tok::RParen) fail({"')'", "'+'", "'*'", "'/'", "'^'"});
        bump();
        --depth_;
        return n;
      }
      case Tok::Minus:
        subtraction();
      default:
        fail({"number", "identifier", "'('"});
    }
  }

  ExprNode binary(ExprNode::Kind k, ExprNode lhs, ExprNode rhs, const Token& op) {
    ExprNode n;
    n.kind = k;
    n.line = op.line;
    n.column = op.column;
    n.args.push_back(std::move(lhs));
    n.args.push_back(std::move(rhs));
    return n;
  }

  [[noreturn]] void subtraction() {
    throw SyntaxError(ErrorCode::SubtractionNotRepresentable,
                      "'-' is not representable: posynomials have only positive terms", cur_.line, cur_.column);
  }

  void expect_end(std::vector<std::string> expected) {
    if (cur_.kind != Tok::End) fail(std::move(expected));
  }

  [[noreturn]] void fail(std::vector<std::string> expected) {
    std::string what = cur_.kind == Tok::End ? "end of input" : "'" + cur_.text + "'";
    if (cur_.kind == Tok::Bad) what = "invalid token " + what;
    std::string list;
    for (const auto& e : expected) list += (list.empty() ? "" : ", ") + e;
    throw SyntaxError(ErrorCode::SyntaxError, "unexpected " + what + ", expected one of " + list, cur_.line, cur_.column,
                      std::move(expected));
  }

  void bump() { cur_ = lex_.next(); }

  Lexer lex_;
  Token cur_;
  int depth_ = 0;
};

}  // namespace detail

/// Parses `expr := term ('+' term)*` with the usual precedence
/// ('^' > '*','/' > '+'). Throws SyntaxError with position on failure.
inline ExprNode parse_expr(std::string_view src) { return detail::Parser(src).parse_expression_only(); }

struct ParsedRelation {
  ExprNode lhs;
  Relation relation = Relation::LessEqual;
  ExprNode rhs;
};

/// Parses "lhs <= rhs", "lhs >= rhs" or "lhs = rhs".
inline ParsedRelation parse_relation(std::string_view src) {
  auto [l, r, h] = detail::Parser(src).parse_relation();
  return {std::move(l), r, std::move(h)};
}

/// Name resolution context for lowering: identifiers resolve from the set
/// at `scope_path` outward.
struct Scope {
  const VariableTable* table = nullptr;
  std::string scope_path;
  bool units = true;
};

/// Folds an expression tree into algebra. The result is a Posynomial; a
/// single-term result is a Monomial.
inline Posynomial lower(const ExprNode& n, const Scope& scope) {
  using K = ExprNode::Kind;
  switch (n.kind) {
    case K::Number:
      return Monomial(n.value);
    case K::Identifier: {
      if (!scope.table) throw Error(ErrorCode::UnknownVariable, "no scope to resolve '" + n.name + "'");
      std::string ident = n.index ? element_key(n.name, *n.index) : n.name;
      VarKey key = resolve_identifier(*scope.table, scope.scope_path, ident);
      auto [base, idx] = split_element(key);
      const auto& info = scope.table->at(base);
      if (idx) broadcast_length({key}, *scope.table);  // range check
      return Monomial::variable(key, scope.units ? info.decl.units : Units{});
    }
    case K::Product:
      return posy_mul(lower(n.args[0], scope), lower(n.args[1], scope));
    case K::Quotient: {
      Posynomial den = lower(n.args[1], scope);
      if (!den.is_monomial()) {
        throw Error(ErrorCode::NotGPRepresentable, "division by a sum is not GP-representable (at " +
                                                       std::to_string(n.line) + ":" + std::to_string(n.column) + ")");
      }
      return posy_div(lower(n.args[0], scope), den.as_monomial());
    }
    case K::Power: {
      Posynomial b = lower(n.args[0], scope);
      if (b.is_monomial()) return mono_pow(b.as_monomial(), n.value);
      if (n.value >= 0.0 && n.value == std::floor(n.value) && n.value <= 64.0) {
        return posy_pow(b, static_cast<unsigned>(n.value));
      }
      throw Error(ErrorCode::NotGPRepresentable, "a sum may only be raised to a non-negative integer power, got " +
                                                     format_number(n.value));
    }
    case K::Sum:
      return posy_add(lower(n.args[0], scope), lower(n.args[1], scope));
    case K::Paren:
      return lower(n.args[0], scope);
  }
  throw Error(ErrorCode::InvalidArgument, "bad expression node");
}

/// Parses, lowers and normalizes one relation written in the set at
/// `scope.scope_path`.
inline NormalizedConstraint lower_constraint(std::string_view text, const Scope& scope) {
  ParsedRelation r = parse_relation(text);
  NormalizedConstraint c = normalize(lower(r.lhs, scope), r.relation, lower(r.rhs, scope));
  c.origin = Origin{std::string(text), scope.scope_path};
  return c;
}

}  // namespace gpc
