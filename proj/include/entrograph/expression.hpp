#pragma once

// Sequence expressions in the variable n:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?        right-associative
//   primary := number | 'n' | func '(' expr (',' expr)* ')' | '(' expr ')'
// Functions: ln, exp (one argument), min, max (two arguments).

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "entrograph/error.hpp"
#include "entrograph/format.hpp"
#include "entrograph/growth.hpp"

namespace entrograph {

class Expression {
 public:
  long double eval(long double n) const { return root_->eval(n); }

  static Expression parse(const std::string& text) {
    Parser p(text);
    Expression e;
    e.root_ = p.parse_all();
    return e;
  }

 private:
  struct Node {
    virtual ~Node() = default;
    virtual long double eval(long double n) const = 0;
  };
  using NodePtr = std::unique_ptr<Node>;

  struct Number : Node {
    long double v;
    explicit Number(long double x) : v(x) {}
    long double eval(long double) const override { return v; }
  };
  struct Variable : Node {
    long double eval(long double n) const override { return n; }
  };
  struct Unary : Node {
    char op;
    NodePtr a;
    Unary(char o, NodePtr x) : op(o), a(std::move(x)) {}
    long double eval(long double n) const override {
      const long double x = a->eval(n);
      switch (op) {
        case '-': return -x;
        case 'l': return std::log(x);
        case 'e': return std::exp(x);
      }
      return x;
    }
  };
  struct Binary : Node {
    char op;
    NodePtr a, b;
    Binary(char o, NodePtr x, NodePtr y) : op(o), a(std::move(x)), b(std::move(y)) {}
    long double eval(long double n) const override {
      const long double x = a->eval(n), y = b->eval(n);
      switch (op) {
        case '+': return x + y;
        case '-': return x - y;
        case '*': return x * y;
        case '/': return x / y;
        case '^': return std::pow(x, y);
        case 'm': return std::min(x, y);
        case 'M': return std::max(x, y);
      }
      return 0;
    }
  };

  class Parser {
   public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr parse_all() {
      NodePtr e = expr();
      skip();
      if (i_ != s_.size()) fail("unexpected character '" + std::string(1, s_[i_]) + "'");
      return e;
    }

   private:
    const std::string& s_;
    std::size_t i_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, i_); }

    void skip() {
      while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    bool accept(char c) {
      skip();
      if (i_ < s_.size() && s_[i_] == c) {
        ++i_;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    NodePtr expr() {
      NodePtr left = term();
      for (;;) {
        if (accept('+')) left = std::make_unique<Binary>('+', std::move(left), term());
        else if (accept('-')) left = std::make_unique<Binary>('-', std::move(left), term());
        else return left;
      }
    }
    NodePtr term() {
      NodePtr left = unary();
      for (;;) {
        if (accept('*')) left = std::make_unique<Binary>('*', std::move(left), unary());
        else if (accept('/')) left = std::make_unique<Binary>('/', std::move(left), unary());
        else return left;
      }
    }
    NodePtr unary() {
      if (accept('-')) return std::make_unique<Unary>('-', unary());
      return power();
    }
    NodePtr power() {
      NodePtr base = primary();
      if (accept('^')) return std::make_unique<Binary>('^', std::move(base), unary());
      return base;
    }
    NodePtr primary() {
      skip();
      if (i_ >= s_.size()) fail("unexpected end of expression");
      const char c = s_[i_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
      if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
      if (accept('(')) {
        NodePtr e = expr();
        expect(')');
        return e;
      }
      fail("unexpected character '" + std::string(1, c) + "'");
    }
    NodePtr number() {
      const std::size_t start = i_;
      while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.')) ++i_;
      if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
        std::size_t j = i_ + 1;
        if (j < s_.size() && (s_[j] == '+' || s_[j] == '-')) ++j;
        if (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) {
          i_ = j;
          while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
        }
      }
      const std::string tok = s_.substr(start, i_ - start);
      char* end = nullptr;
      const long double v = std::strtold(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size()) {
        i_ = start;
        fail("malformed number '" + tok + "'");
      }
      return std::make_unique<Number>(v);
    }
    NodePtr identifier() {
      const std::size_t start = i_;
      while (i_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[i_]))) ++i_;
      const std::string name = s_.substr(start, i_ - start);
      if (name == "n") return std::make_unique<Variable>();
      int arity = 0;
      char code = 0;
      if (name == "ln") arity = 1, code = 'l';
      else if (name == "exp") arity = 1, code = 'e';
      else if (name == "min") arity = 2, code = 'm';
      else if (name == "max") arity = 2, code = 'M';
      else {
        i_ = start;
        fail("unknown identifier '" + name + "'");
      }
      expect('(');
      NodePtr a = expr();
      if (arity == 1) {
        expect(')');
        return std::make_unique<Unary>(code, std::move(a));
      }
      expect(',');
      NodePtr b = expr();
      expect(')');
      return std::make_unique<Binary>(code, std::move(a), std::move(b));
    }
  };

  std::shared_ptr<Node> root_;
};

struct ParseOptions {
  bool clamp_monotone = false;
};

inline GrowthSeries parse_sequence(const std::string& text, std::size_t horizon,
                                   const ParseOptions& opt = {}) {
  if (horizon == 0) throw InvalidArgument("horizon must be positive");
  const Expression e = Expression::parse(text);
  std::vector<long double> v(horizon);
  for (std::size_t n = 1; n <= horizon; ++n) {
    const long double x = e.eval(static_cast<long double>(n));
    if (std::isnan(x)) throw InvalidArgument("undefined value at n=" + std::to_string(n));
    if (x < 0) throw InvalidArgument("negative value at n=" + std::to_string(n));
    v[n - 1] = x;
  }
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1]) {
      if (!opt.clamp_monotone) {
        throw InvalidArgument("non-monotone value at n=" + std::to_string(i + 1));
      }
      v[i] = v[i - 1];
    }
  }
  return GrowthSeries(std::move(v));
}

// Two-line diagnostic: the expression and a caret under the failing column.
inline std::string caret_diagnostic(const std::string& text, const ParseError& e) {
  return text + "\n" + std::string(std::min(e.position(), text.size()), ' ') + "^ " + e.message();
}

// Fixed evaluation transcript compared byte for byte against data/golden/parser.txt.
inline std::string parser_transcript() {
  const std::vector<std::pair<std::string, std::size_t>> cases = {
      {"2*n+5", 8},         {"n^2", 4},           {"n^1.5", 6},           {"exp(0.5*n)", 5},
      {"ln(n+1)", 6},       {"n*ln(n+1)", 6},     {"max(n, 10)", 12},     {"min(n, 3) + n/4", 6},
      {"2^n", 10},          {"n*(n-1)/2", 7},     {"n - 10", 8},          {"2*n +", 3},
      {"sqrt(n)", 3},       {"(n", 3},            {"3 - n^2", 3},         {"1/(n-1)", 3},
  };
  std::ostringstream out;
  for (const auto& [expr, horizon] : cases) {
    out << expr << " @" << horizon << ": ";
    try {
      auto s = parse_sequence(expr, horizon);
      for (std::size_t n = 1; n <= s.horizon(); ++n) out << (n > 1 ? "," : "") << format_real(s(n));
      out << "\n";
    } catch (const ParseError& e) {
      out << "parse error: " << e.what() << "\n";
    } catch (const InvalidArgument& e) {
      out << "error: " << e.what() << "\n";
    }
  }
  return out.str();
}

}  // namespace entrograph
