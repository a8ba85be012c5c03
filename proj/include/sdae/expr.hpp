#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sdae/errors.hpp"

namespace sdae {

// Immutable scalar expression over the variables t and x1..xn.
//
// Grammar (lowest to highest precedence):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | variable | func '(' expr ')' | '(' expr ')'
// Functions: sin cos exp sqrt abs, plus log and sign (produced by the differentiator).
class Expr {
 public:
  enum class Kind { Constant, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
  enum class Function { Sin, Cos, Exp, Sqrt, Abs, Log, Sign };

  // Variable slot 0 is t; slot i >= 1 is x_i.
  static constexpr std::size_t kTime = 0;

  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double value) { return Expr(std::make_shared<Node>(make_node(Kind::Constant, value))); }
  static Expr time() { return variable(kTime); }
  static Expr state(std::size_t i) { return variable(i); }
  static Expr variable(std::size_t slot) {
    Node n = make_node(Kind::Variable);
    n.slot = slot;
    return Expr(std::make_shared<Node>(std::move(n)));
  }
  static Expr negate(Expr a) {
    Node n = make_node(Kind::Negate);
    n.lhs = std::move(a.node_);
    return Expr(std::make_shared<Node>(std::move(n)));
  }
  static Expr binary(Kind k, Expr a, Expr b) {
    Node n = make_node(k);
    n.lhs = std::move(a.node_);
    n.rhs = std::move(b.node_);
    return Expr(std::make_shared<Node>(std::move(n)));
  }
  static Expr call(Function f, Expr a) {
    Node n = make_node(Kind::Call);
    n.function = f;
    n.lhs = std::move(a.node_);
    return Expr(std::make_shared<Node>(std::move(n)));
  }

  Kind kind() const noexcept { return node_->kind; }
  double value() const noexcept { return node_->value; }
  std::size_t slot() const noexcept { return node_->slot; }
  Function function() const noexcept { return node_->function; }
  Expr lhs() const { return Expr(node_->lhs); }
  Expr rhs() const { return Expr(node_->rhs); }

  bool is_constant(double v) const { return kind() == Kind::Constant && value() == v; }

  // True when the tree references no variable other than t.
  bool depends_only_on_time() const { return max_state_slot() == 0; }
  bool depends_on(std::size_t slot) const { return depends_on(*node_, slot); }
  std::size_t max_state_slot() const { return max_slot(*node_); }

  friend bool operator==(const Expr& a, const Expr& b) { return equal(*a.node_, *b.node_); }

  // `x` holds x1..xn; values outside the real domain raise DomainError rather than
  // producing NaN or infinity.
  double eval(double t, std::span<const double> x) const { return eval_node(*node_, t, x); }

  std::string to_string() const {
    std::string out;
    print(*node_, out);
    return out;
  }

  static const char* function_name(Function f) {
    switch (f) {
      case Function::Sin: return "sin";
      case Function::Cos: return "cos";
      case Function::Exp: return "exp";
      case Function::Sqrt: return "sqrt";
      case Function::Abs: return "abs";
      case Function::Log: return "log";
      case Function::Sign: return "sign";
    }
    return "?";
  }

 private:
  struct Node {
    Kind kind;
    double value = 0.0;
    std::size_t slot = 0;
    Function function = Function::Sin;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };
  static Node make_node(Kind k, double value = 0.0) {
    Node n;
    n.kind = k;
    n.value = value;
    return n;
  }

  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static bool equal(const Node& a, const Node& b) {
    if (&a == &b) return true;
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::Constant: return a.value == b.value;
      case Kind::Variable: return a.slot == b.slot;
      case Kind::Negate: return equal(*a.lhs, *b.lhs);
      case Kind::Call: return a.function == b.function && equal(*a.lhs, *b.lhs);
      default: return equal(*a.lhs, *b.lhs) && equal(*a.rhs, *b.rhs);
    }
  }

  static bool depends_on(const Node& n, std::size_t slot) {
    switch (n.kind) {
      case Kind::Constant: return false;
      case Kind::Variable: return n.slot == slot;
      case Kind::Negate:
      case Kind::Call: return depends_on(*n.lhs, slot);
      default: return depends_on(*n.lhs, slot) || depends_on(*n.rhs, slot);
    }
  }

  static std::size_t max_slot(const Node& n) {
    switch (n.kind) {
      case Kind::Constant: return 0;
      case Kind::Variable: return n.slot;
      case Kind::Negate:
      case Kind::Call: return max_slot(*n.lhs);
      default: return std::max(max_slot(*n.lhs), max_slot(*n.rhs));
    }
  }

  [[noreturn]] static void domain(const Node& n, const char* what) {
    std::string s;
    print(n, s);
    throw DomainError(what, s);
  }

  static double checked(const Node& n, double v) {
    if (!std::isfinite(v)) domain(n, "non-finite result");
    return v;
  }

  static double eval_node(const Node& n, double t, std::span<const double> x) {
    switch (n.kind) {
      case Kind::Constant: return n.value;
      case Kind::Variable: return n.slot == kTime ? t : x[n.slot - 1];
      case Kind::Negate: return -eval_node(*n.lhs, t, x);
      case Kind::Add: return checked(n, eval_node(*n.lhs, t, x) + eval_node(*n.rhs, t, x));
      case Kind::Sub: return checked(n, eval_node(*n.lhs, t, x) - eval_node(*n.rhs, t, x));
      case Kind::Mul: return checked(n, eval_node(*n.lhs, t, x) * eval_node(*n.rhs, t, x));
      case Kind::Div: {
        const double num = eval_node(*n.lhs, t, x);
        const double den = eval_node(*n.rhs, t, x);
        if (den == 0.0) domain(n, "division by zero");
        return checked(n, num / den);
      }
      case Kind::Pow: {
        const double base = eval_node(*n.lhs, t, x);
        const double ex = eval_node(*n.rhs, t, x);
        if (base == 0.0 && ex < 0.0) domain(n, "zero raised to a negative power");
        if (base < 0.0 && ex != std::trunc(ex)) domain(n, "negative base with non-integer exponent");
        if (ex == 2.0) return checked(n, base * base);
        if (ex == 3.0) return checked(n, base * base * base);
        return checked(n, std::pow(base, ex));
      }
      case Kind::Call: {
        const double a = eval_node(*n.lhs, t, x);
        switch (n.function) {
          case Function::Sin: return std::sin(a);
          case Function::Cos: return std::cos(a);
          case Function::Exp: return checked(n, std::exp(a));
          case Function::Sqrt:
            if (a < 0.0) domain(n, "square root of a negative number");
            return std::sqrt(a);
          case Function::Abs: return std::abs(a);
          case Function::Log:
            if (a <= 0.0) domain(n, "logarithm of a non-positive number");
            return std::log(a);
          case Function::Sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
        }
      }
    }
    return 0.0;
  }

  static int precedence(const Node& n) {
    switch (n.kind) {
      case Kind::Add:
      case Kind::Sub: return 1;
      case Kind::Mul:
      case Kind::Div: return 2;
      case Kind::Negate: return 3;
      case Kind::Pow: return 4;
      default: return 5;
    }
  }

  static void print_wrapped(const Node& n, bool wrap, std::string& out) {
    if (wrap) out += '(';
    print(n, out);
    if (wrap) out += ')';
  }

  static void print(const Node& n, std::string& out) {
    switch (n.kind) {
      case Kind::Constant: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
        // A negative literal has no surface syntax; it round-trips as a negation.
        if (n.value < 0.0 || (n.value == 0.0 && std::signbit(n.value))) {
          out += "(-";
          std::snprintf(buf, sizeof buf, "%.17g", -n.value);
          out += buf;
          out += ')';
        } else {
          out += buf;
        }
        return;
      }
      case Kind::Variable:
        out += n.slot == kTime ? std::string("t") : "x" + std::to_string(n.slot);
        return;
      case Kind::Negate:
        out += '-';
        print_wrapped(*n.lhs, precedence(*n.lhs) < 3, out);
        return;
      case Kind::Call:
        out += function_name(n.function);
        out += '(';
        print(*n.lhs, out);
        out += ')';
        return;
      case Kind::Pow:
        print_wrapped(*n.lhs, precedence(*n.lhs) < 5, out);
        out += '^';
        print_wrapped(*n.rhs, precedence(*n.rhs) < 3, out);
        return;
      default: {
        const int p = precedence(n);
        const char op = n.kind == Kind::Add ? '+' : n.kind == Kind::Sub ? '-' : n.kind == Kind::Mul ? '*' : '/';
        print_wrapped(*n.lhs, precedence(*n.lhs) < p, out);
        out += op;
        print_wrapped(*n.rhs, precedence(*n.rhs) <= p, out);
        return;
      }
    }
  }

  std::shared_ptr<const Node> node_;
};

namespace detail {

class ExprParser {
 public:
  ExprParser(std::string_view src, std::size_t n) : src_(src), n_(n) {}

  Expr parse() {
    Expr e = parse_sum();
    skip_space();
    if (pos_ != src_.size()) fail("operator or end of input");
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  char peek() {
    skip_space();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }
  std::string describe_here() const {
    if (pos_ >= src_.size()) return "end of input";
    return std::string("'") + src_[pos_] + "'";
  }
  [[noreturn]] void fail(const std::string& expected) const {
    throw ParseError(pos_, expected, describe_here());
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("'") + c + "'");
    ++pos_;
  }

  Expr parse_sum() {
    Expr e = parse_product();
    for (;;) {
      const char c = peek();
      if (c != '+' && c != '-') return e;
      ++pos_;
      e = Expr::binary(c == '+' ? Expr::Kind::Add : Expr::Kind::Sub, std::move(e), parse_product());
    }
  }
  Expr parse_product() {
    Expr e = parse_unary();
    for (;;) {
      const char c = peek();
      if (c != '*' && c != '/') return e;
      ++pos_;
      e = Expr::binary(c == '*' ? Expr::Kind::Mul : Expr::Kind::Div, std::move(e), parse_unary());
    }
  }
  Expr parse_unary() {
    if (peek() == '-') {
      ++pos_;
      return Expr::negate(parse_unary());
    }
    return parse_power();
  }
  Expr parse_power() {
    Expr base = parse_primary();
    if (peek() == '^') {
      ++pos_;
      return Expr::binary(Expr::Kind::Pow, std::move(base), parse_unary());
    }
    return base;
  }

  Expr parse_primary() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail("number, variable, function or '('");
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t count = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++count;
      return count;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) {
      pos_ = start;
      fail("digits");
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("exponent digits");
    }
    const std::string text(src_.substr(start, pos_ - start));
    const double v = std::strtod(text.c_str(), nullptr);
    if (!std::isfinite(v)) {
      pos_ = start;
      fail("finite number");
    }
    return Expr::constant(v);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    if (peek() == '(') {
      static constexpr std::pair<const char*, Expr::Function> table[] = {
          {"sin", Expr::Function::Sin},   {"cos", Expr::Function::Cos}, {"exp", Expr::Function::Exp},
          {"sqrt", Expr::Function::Sqrt}, {"abs", Expr::Function::Abs}, {"log", Expr::Function::Log},
          {"sign", Expr::Function::Sign}};
      for (const auto& [fname, f] : table) {
        if (name == fname) {
          ++pos_;
          Expr arg = parse_sum();
          expect(')');
          return Expr::call(f, std::move(arg));
        }
      }
      throw ParseError(start, "known function (sin, cos, exp, sqrt, abs, log, sign)", "'" + name + "'");
    }
    if (name == "t") return Expr::time();
    if (name.size() >= 2 && name[0] == 'x' && name[1] != '0' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos && name.size() <= 10) {
      const std::size_t i = std::stoul(name.substr(1));
      if (i >= 1 && i <= n_) return Expr::state(i);
    }
    throw UnknownVariable(start, name, n_);
  }

  std::string_view src_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Parses `source` for a problem with state dimension n (variables t, x1..xn).
inline Expr parse_expr(std::string_view source, std::size_t n) {
  if (n == 0) throw std::invalid_argument("parse_expr: state dimension must be >= 1");
  return detail::ExprParser(source, n).parse();
}

namespace detail {

// Light algebraic shortcuts keep derivative trees small; they never change a value
// that would otherwise evaluate successfully.
inline Expr add(Expr a, Expr b) {
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return Expr::binary(Expr::Kind::Add, std::move(a), std::move(b));
}
inline Expr sub(Expr a, Expr b) {
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return Expr::negate(std::move(b));
  return Expr::binary(Expr::Kind::Sub, std::move(a), std::move(b));
}
inline Expr mul(Expr a, Expr b) {
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  return Expr::binary(Expr::Kind::Mul, std::move(a), std::move(b));
}
inline Expr div(Expr a, Expr b) {
  if (a.is_constant(0.0)) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  return Expr::binary(Expr::Kind::Div, std::move(a), std::move(b));
}
inline Expr neg(Expr a) {
  if (a.is_constant(0.0)) return a;
  if (a.kind() == Expr::Kind::Negate) return a.lhs();
  return Expr::negate(std::move(a));
}

}  // namespace detail

// Symbolic partial derivative with respect to variable slot `slot` (0 = t, i = x_i).
// d|u|/du is taken as sign(u), which is 0 at u = 0.
inline Expr differentiate(const Expr& e, std::size_t slot) {
  using detail::add, detail::sub, detail::mul, detail::div, detail::neg;
  using K = Expr::Kind;
  if (!e.depends_on(slot)) return Expr::constant(0.0);
  switch (e.kind()) {
    case K::Constant: return Expr::constant(0.0);
    case K::Variable: return Expr::constant(e.slot() == slot ? 1.0 : 0.0);
    case K::Negate: return neg(differentiate(e.lhs(), slot));
    case K::Add: return add(differentiate(e.lhs(), slot), differentiate(e.rhs(), slot));
    case K::Sub: return sub(differentiate(e.lhs(), slot), differentiate(e.rhs(), slot));
    case K::Mul:
      return add(mul(differentiate(e.lhs(), slot), e.rhs()), mul(e.lhs(), differentiate(e.rhs(), slot)));
    case K::Div: {
      // (u/v)' = u'/v - u v' / v^2
      const Expr u = e.lhs(), v = e.rhs();
      return sub(div(differentiate(u, slot), v),
                 div(mul(u, differentiate(v, slot)), Expr::binary(K::Pow, v, Expr::constant(2.0))));
    }
    case K::Pow: {
      const Expr u = e.lhs(), v = e.rhs();
      if (!v.depends_on(slot)) {
        // v u^(v-1) u'
        Expr reduced = v.kind() == K::Constant ? Expr::constant(v.value() - 1.0)
                                               : sub(v, Expr::constant(1.0));
        Expr power = reduced.is_constant(1.0) ? u : Expr::binary(K::Pow, u, reduced);
        if (reduced.is_constant(0.0)) power = Expr::constant(1.0);
        if (reduced.kind() == K::Constant && reduced.value() < 0.0)
          power = Expr::binary(K::Pow, u, Expr::negate(Expr::constant(-reduced.value())));
        return mul(mul(v, power), differentiate(u, slot));
      }
      // u^v (v' log u + v u'/u)
      return mul(e, add(mul(differentiate(v, slot), Expr::call(Expr::Function::Log, u)),
                        div(mul(v, differentiate(u, slot)), u)));
    }
    case K::Call: {
      const Expr u = e.lhs();
      const Expr du = differentiate(u, slot);
      switch (e.function()) {
        case Expr::Function::Sin: return mul(Expr::call(Expr::Function::Cos, u), du);
        case Expr::Function::Cos: return neg(mul(Expr::call(Expr::Function::Sin, u), du));
        case Expr::Function::Exp: return mul(e, du);
        case Expr::Function::Sqrt: return div(du, mul(Expr::constant(2.0), e));
        case Expr::Function::Abs: return mul(Expr::call(Expr::Function::Sign, u), du);
        case Expr::Function::Log: return div(du, u);
        case Expr::Function::Sign: return Expr::constant(0.0);
      }
    }
  }
  return Expr::constant(0.0);
}

}  // namespace sdae
