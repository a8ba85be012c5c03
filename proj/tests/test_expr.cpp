#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "sdae/expr.hpp"

using namespace sdae;

namespace {

double at(const std::string& src, double t, std::vector<double> x) {
  return parse_expr(src, x.size()).eval(t, x);
}

}  // namespace

TEST(Parse, PrecedenceOfPowerAndSum) {
  const Expr e = parse_expr("t^2+1", 2);
  EXPECT_EQ(e.kind(), Expr::Kind::Add);
  EXPECT_EQ(e.lhs().kind(), Expr::Kind::Pow);
  EXPECT_TRUE(e.rhs().is_constant(1.0));
  EXPECT_EQ(e.to_string(), "t^2+1");
}

TEST(Parse, OperatorRules) {
  EXPECT_DOUBLE_EQ(at("2^3^2", 0, {0}), 512.0);    // right-associative
  EXPECT_DOUBLE_EQ(at("-2^2", 0, {0}), -4.0);      // ^ binds tighter than unary minus
  EXPECT_DOUBLE_EQ(at("8/4/2", 0, {0}), 1.0);      // left-associative
  EXPECT_DOUBLE_EQ(at("10-4-3", 0, {0}), 3.0);
  EXPECT_DOUBLE_EQ(at("2*-3", 0, {0}), -6.0);
  EXPECT_DOUBLE_EQ(at("1.5e2 + 2.5E-1", 0, {0}), 150.25);
  EXPECT_DOUBLE_EQ(at("2^-1", 0, {0}), 0.5);
}

TEST(Parse, CircuitDriftEntry) {
  EXPECT_DOUBLE_EQ(at("-(x1+x1^3)/(t^2+1)", 0, {1, 0}), -2.0);
  EXPECT_DOUBLE_EQ(at("x1^2+2*x1", 0, {1, 0}), 3.0);
  EXPECT_DOUBLE_EQ(at("t^2+1", 1, {0, 0}), 2.0);
}

TEST(Parse, UnknownVariableAtIdentifier) {
  try {
    parse_expr("x3+1", 2);
    FAIL();
  } catch (const UnknownVariable& e) {
    EXPECT_EQ(e.position(), 0u);
    EXPECT_EQ(e.name(), "x3");
  }
  EXPECT_THROW(parse_expr("1 + y", 2), UnknownVariable);
  EXPECT_THROW(parse_expr("x0", 2), UnknownVariable);
  EXPECT_THROW(parse_expr("x01", 2), UnknownVariable);
}

TEST(Parse, MalformedInputReportsPosition) {
  struct Case {
    const char* src;
    std::size_t pos;
  };
  for (const Case& c : {Case{"1+", 2}, Case{"(x1", 3}, Case{"2**3", 2}, Case{"foo(1)", 0}, Case{"1 2", 2},
                        Case{"", 0}, Case{"0x10", 1}, Case{"1_000", 1}}) {
    try {
      parse_expr(c.src, 1);
      ADD_FAILURE() << c.src;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.position(), c.pos) << c.src << ": " << e.what();
      EXPECT_LE(e.position(), std::string(c.src).size());
    }
  }
}

TEST(Eval, DomainErrorsNeverNaN) {
  EXPECT_THROW(at("1/(t-1)", 1, {0}), DomainError);
  EXPECT_THROW(at("sqrt(x1)", 0, {-1}), DomainError);
  EXPECT_THROW(at("log(x1)", 0, {0}), DomainError);
  EXPECT_THROW(at("x1^0.5", 0, {-2}), DomainError);
  EXPECT_THROW(at("exp(1000)", 0, {0}), DomainError);
  try {
    at("2 + 1/(t-1)", 1, {0});
  } catch (const DomainError& e) {
    EXPECT_EQ(e.subexpression(), "1/(t-1)");
  }
}

TEST(Eval, Functions) {
  EXPECT_NEAR(at("sin(t)^2 + cos(t)^2", 0.7, {0}), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(at("abs(x1) + sqrt(4) + exp(0)", 0, {-3}), 6.0);
}

TEST(Differentiate, Examples) {
  const Expr g = parse_expr("x1^2+2*x1", 2);
  EXPECT_DOUBLE_EQ(differentiate(g, 1).eval(0, std::vector<double>{1, 0}), 4.0);
  EXPECT_TRUE(differentiate(parse_expr("3.5", 2), Expr::kTime).is_constant(0.0));
  const Expr f = parse_expr("-(x1+x1^3)/(t^2+1)", 2);
  EXPECT_DOUBLE_EQ(differentiate(f, 1).eval(0, std::vector<double>{1, 0}), -4.0);
  EXPECT_DOUBLE_EQ(differentiate(parse_expr("abs(x1)", 1), 1).eval(0, std::vector<double>{0}), 0.0);
  EXPECT_DOUBLE_EQ(differentiate(parse_expr("abs(x1)", 1), 1).eval(0, std::vector<double>{-2}), -1.0);
}

namespace {

// Random trees drawn from what the parser can produce (literals are nonnegative).
Expr random_tree(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, 9);
  std::uniform_real_distribution<double> c(0.1, 3.0);
  const int k = depth <= 0 ? pick(rng) % 3 : pick(rng);
  switch (k) {
    case 0: return Expr::constant(std::round(c(rng) * 8) / 8);
    case 1: return Expr::time();
    case 2: return Expr::state(1 + rng() % 2);
    case 3: return Expr::negate(random_tree(rng, depth - 1));
    case 4: return Expr::binary(Expr::Kind::Add, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 5: return Expr::binary(Expr::Kind::Sub, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 6: return Expr::binary(Expr::Kind::Mul, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 7: return Expr::binary(Expr::Kind::Div, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 8: {
      const bool integer = rng() % 2;
      return Expr::binary(Expr::Kind::Pow, random_tree(rng, depth - 1),
                          integer ? Expr::constant(static_cast<double>(1 + rng() % 3)) : random_tree(rng, depth - 1));
    }
    default: {
      const auto f = static_cast<Expr::Function>(rng() % 6);  // sin..log
      return Expr::call(f, random_tree(rng, depth - 1));
    }
  }
}

}  // namespace

TEST(Property, PrintParseRoundTrip) {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 2000; ++i) {
    const Expr e = random_tree(rng, 5);
    const std::string s = e.to_string();
    const Expr back = parse_expr(s, 2);
    ASSERT_TRUE(back == e) << s << " reparsed as " << back.to_string();
  }
}

TEST(Property, SymbolicMatchesFiniteDifferences) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2, 2);
  int accepted = 0, attempts = 0;
  while (accepted < 1000 && attempts < 200000) {
    ++attempts;
    const Expr e = random_tree(rng, 4);
    const std::size_t slot = rng() % 3;
    const Expr d = differentiate(e, slot);
    double pt[3] = {u(rng), u(rng), u(rng)};  // t, x1, x2
    auto value = [&](double shift, const Expr& ex) {
      double q[3] = {pt[0], pt[1], pt[2]};
      q[slot] += shift;
      return ex.eval(q[0], std::span<const double>(q + 1, 2));
    };
    try {
      const double base = value(0, e);
      const double sym = value(0, d);
      if (std::abs(base) > 1e4 || std::abs(sym) > 1e4) continue;
      const double h = 1e-6 * (1 + std::abs(pt[slot]));
      const double fd = (value(h, e) - value(-h, e)) / (2 * h);
      const double fd_half = (value(h / 2, e) - value(-h / 2, e)) / h;
      // Skip kinks and near-singular points where the difference quotient itself is unstable.
      if (std::abs(fd - fd_half) > 1e-6 * (1 + std::abs(fd))) continue;
      ++accepted;
      ASSERT_LE(std::abs(sym - fd), 1e-5 * (1 + std::abs(sym)))
          << "d/d[" << slot << "] " << e.to_string() << " = " << d.to_string();
    } catch (const DomainError&) {
    }
  }
  EXPECT_EQ(accepted, 1000);
}
