#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdae/errors.hpp"
#include "sdae/expr.hpp"
#include "sdae/linalg.hpp"
#include "sdae/rng.hpp"

namespace sdae {

// A(t) dX = f(t, X) dt + g(t, X) dW on [0, T], X(0) = x0, with n states and m noises.
// Coefficient grids are row-major. f_jacobian holds d f_i / d x_j.
struct SdaeProblem {
  std::string name;
  std::size_t n = 0;
  std::size_t m = 0;
  double horizon = 1.0;
  std::vector<Expr> a_entries;
  std::vector<Expr> f_entries;
  std::vector<Expr> g_entries;
  std::vector<Expr> f_jacobian;
  Vector x0;

  Matrix a_at(double t) const {
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = a_entries[i * n + j].eval(t, {});
    return a;
  }
  Vector f_at(double t, const Vector& x) const {
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f_entries[i].eval(t, x.values());
    return out;
  }
  Matrix g_at(double t, const Vector& x) const {
    Matrix out(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) out(i, j) = g_entries[i * m + j].eval(t, x.values());
    return out;
  }
  Matrix f_jacobian_at(double t, const Vector& x) const {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out(i, j) = f_jacobian[i * n + j].eval(t, x.values());
    return out;
  }
};

namespace detail {

// Central-difference Jacobian of f; the independent route used to audit the symbolic one.
inline Matrix finite_difference_jacobian(const SdaeProblem& p, double t, const Vector& x) {
  Matrix j(p.n, p.n);
  for (std::size_t c = 0; c < p.n; ++c) {
    const double h = 1e-6 * (1.0 + std::abs(x[c]));
    Vector up = x, down = x;
    up[c] += h;
    down[c] -= h;
    const Vector fu = p.f_at(t, up), fd = p.f_at(t, down);
    for (std::size_t r = 0; r < p.n; ++r) j(r, c) = (fu[r] - fd[r]) / (2.0 * h);
  }
  return j;
}

inline void cross_check_jacobian(const SdaeProblem& p) {
  const RandomStream stream(0x4a41434fu, streams::kDiagnosticsBase + 1);
  std::uint64_t draw = 0;
  for (int point = 0; point < 8; ++point) {
    const double t = p.horizon * stream.uniform_pair(draw++).first;
    Vector x(p.n);
    for (std::size_t i = 0; i < p.n; i += 2) {
      const auto [a, b] = stream.uniform_pair(draw++);
      x[i] = 2.0 * a - 1.0;
      if (i + 1 < p.n) x[i + 1] = 2.0 * b - 1.0;
    }
    Matrix symbolic, numeric;
    try {
      symbolic = p.f_jacobian_at(t, x);
      numeric = finite_difference_jacobian(p, t, x);
    } catch (const DomainError&) {
      continue;
    }
    for (std::size_t r = 0; r < p.n; ++r)
      for (std::size_t c = 0; c < p.n; ++c) {
        const double s = symbolic(r, c), fd = numeric(r, c);
        if (std::abs(s - fd) > 1e-5 * (1.0 + std::abs(s)))
          throw Error("jacobian cross-check failed for d f" + std::to_string(r + 1) + "/d x" +
                      std::to_string(c + 1) + ": symbolic " + std::to_string(s) + " vs finite difference " +
                      std::to_string(fd));
      }
  }
}

}  // namespace detail

// Validates dimensions, derives the symbolic Jacobian of f and audits it against
// central finite differences.
inline SdaeProblem make_problem(std::string name, std::size_t n, std::size_t m, double horizon,
                                std::vector<Expr> a, std::vector<Expr> f, std::vector<Expr> g, Vector x0) {
  if (n == 0) throw std::invalid_argument("problem: n must be >= 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("problem: horizon T must be finite and > 0");
  if (a.size() != n * n || f.size() != n || g.size() != n * m || x0.dim() != n)
    throw std::invalid_argument("problem: coefficient grids do not match n = " + std::to_string(n) +
                                ", m = " + std::to_string(m));
  for (const Expr& e : a)
    if (!e.depends_only_on_time())
      throw std::invalid_argument("problem: leading matrix entry '" + e.to_string() + "' depends on the state");
  for (const auto* grid : {&a, &f, &g})
    for (const Expr& e : *grid)
      if (e.max_state_slot() > n) throw std::invalid_argument("problem: entry references a variable beyond x" + std::to_string(n));

  SdaeProblem p;
  p.name = std::move(name);
  p.n = n;
  p.m = m;
  p.horizon = horizon;
  p.a_entries = std::move(a);
  p.f_entries = std::move(f);
  p.g_entries = std::move(g);
  p.x0 = std::move(x0);
  p.f_jacobian.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p.f_jacobian.push_back(differentiate(p.f_entries[i], j + 1));
  detail::cross_check_jacobian(p);
  return p;
}

// Line-oriented problem description:
//
//   # comment
//   [dimensions]
//   n = 2
//   m = 2
//   [horizon]
//   T = 1
//   [matrix]
//   a[2][1] = t^2 + 1
//   [drift]
//   f[1] = x2
//   [diffusion]
//   g[2][2] = x1^2 + 2*x1
//   [initial]
//   x0 = 1, 0
//
// Indices are 1-based; entries not given are zero. Section headers are optional.
inline SdaeProblem parse_problem(std::string_view text, std::string name = "file") {
  struct Line {
    std::size_t number;
    std::size_t key_col;
    std::size_t value_col;
    std::string key;
    std::string value;
  };
  auto trim_left = [](std::string_view s, std::size_t& col) {
    while (col < s.size() && std::isspace(static_cast<unsigned char>(s[col]))) ++col;
  };
  auto trim_right = [](std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
  };
  static const std::vector<std::string> kSections = {"dimensions", "horizon", "matrix", "drift",
                                                     "diffusion", "initial", "problem"};

  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(start, end - start);
    ++number;
    start = end + 1;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::size_t col = 0;
    trim_left(raw, col);
    if (col == raw.size()) continue;
    if (raw[col] == '[') {
      const auto close = raw.find(']', col);
      if (close == std::string_view::npos) throw ConfigError(number, col + 1, "unterminated section header");
      const std::string section(raw.substr(col + 1, close - col - 1));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end())
        throw ConfigError(number, col + 2, "unknown section '" + section + "'");
      continue;
    }
    const auto eq = raw.find('=', col);
    if (eq == std::string_view::npos) throw ConfigError(number, col + 1, "expected 'key = value'");
    Line l;
    l.number = number;
    l.key_col = col + 1;
    l.key = trim_right(std::string(raw.substr(col, eq - col)));
    std::size_t vcol = eq + 1;
    trim_left(raw, vcol);
    l.value_col = vcol + 1;
    l.value = trim_right(std::string(raw.substr(vcol)));
    lines.push_back(std::move(l));
    if (end == text.size()) break;
  }

  std::map<std::string, const Line*> seen;
  for (const Line& l : lines) {
    if (!seen.emplace(l.key, &l).second) throw ConfigError(l.number, l.key_col, "duplicate key '" + l.key + "'");
  }
  auto number_of = [](const Line& l) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(l.value, &used);
    } catch (const std::exception&) {
      throw ConfigError(l.number, l.value_col, "expected a number, found '" + l.value + "'");
    }
    if (used != l.value.size() || !std::isfinite(v))
      throw ConfigError(l.number, l.value_col + used, "expected a number, found '" + l.value + "'");
    return v;
  };
  auto count_of = [&](const char* key) -> std::size_t {
    const auto it = seen.find(key);
    if (it == seen.end()) throw ConfigError(0, 0, std::string("missing required key '") + key + "'");
    const double v = number_of(*it->second);
    if (v < 0.0 || v != std::floor(v) || v > 1000.0)
      throw ConfigError(it->second->number, it->second->value_col, std::string("'") + key + "' must be a small non-negative integer");
    return static_cast<std::size_t>(v);
  };

  const std::size_t n = count_of("n");
  const std::size_t m = count_of("m");
  if (n == 0) throw ConfigError(seen.at("n")->number, seen.at("n")->value_col, "'n' must be >= 1");
  double horizon = 1.0;
  if (auto it = seen.find("T"); it != seen.end()) horizon = number_of(*it->second);
  if (!(horizon > 0.0)) throw ConfigError(seen.at("T")->number, seen.at("T")->value_col, "'T' must be > 0");
  if (auto it = seen.find("name"); it != seen.end()) name = it->second->value;

  std::vector<Expr> a(n * n), f(n), g(n * m);
  Vector x0(n);
  auto parse_value = [&](const Line& l) {
    try {
      return parse_expr(l.value, n);
    } catch (const ParseError& e) {
      throw ConfigError(l.number, l.value_col + e.position(), e.what());
    }
  };
  // Reads "[i]" groups after the key stem; returns 1-based indices.
  auto indices = [&](const Line& l, std::size_t stem, std::size_t count) {
    std::vector<std::size_t> idx;
    std::size_t pos = stem;
    for (std::size_t k = 0; k < count; ++k) {
      if (pos >= l.key.size() || l.key[pos] != '[')
        throw ConfigError(l.number, l.key_col + pos, "expected '[' in key '" + l.key + "'");
      const auto close = l.key.find(']', pos);
      if (close == std::string::npos) throw ConfigError(l.number, l.key_col + pos, "unterminated index");
      const std::string digits = l.key.substr(pos + 1, close - pos - 1);
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos || digits.size() > 6)
        throw ConfigError(l.number, l.key_col + pos + 1, "index must be a positive integer");
      idx.push_back(std::stoul(digits));
      pos = close + 1;
    }
    if (pos != l.key.size()) throw ConfigError(l.number, l.key_col + pos, "unexpected text after index");
    return idx;
  };
  auto check_range = [&](const Line& l, std::size_t value, std::size_t limit, const char* what) {
    if (value < 1 || value > limit)
      throw ConfigError(l.number, l.key_col, std::string(what) + " index " + std::to_string(value) +
                                                 " outside 1.." + std::to_string(limit));
  };

  for (const Line& l : lines) {
    const std::string& k = l.key;
    if (k == "n" || k == "m" || k == "T" || k == "name") continue;
    if (k == "x0") {
      std::vector<double> values;
      std::size_t pos = 0;
      while (pos <= l.value.size()) {
        auto comma = l.value.find(',', pos);
        if (comma == std::string::npos) comma = l.value.size();
        Line item = l;
        std::size_t c = pos;
        trim_left(l.value, c);
        item.value = trim_right(l.value.substr(c, comma - c));
        item.value_col = l.value_col + c;
        values.push_back(number_of(item));
        pos = comma + 1;
        if (comma == l.value.size()) break;
      }
      if (values.size() != n)
        throw ConfigError(l.number, l.value_col, "x0 has " + std::to_string(values.size()) + " entries, expected " + std::to_string(n));
      x0 = Vector(values);
    } else if (k.rfind("a[", 0) == 0) {
      const auto idx = indices(l, 1, 2);
      check_range(l, idx[0], n, "row");
      check_range(l, idx[1], n, "column");
      Expr e = parse_value(l);
      if (!e.depends_only_on_time()) throw ConfigError(l.number, l.value_col, "matrix entries may depend on t only");
      a[(idx[0] - 1) * n + idx[1] - 1] = std::move(e);
    } else if (k.rfind("f[", 0) == 0) {
      const auto idx = indices(l, 1, 1);
      check_range(l, idx[0], n, "drift");
      f[idx[0] - 1] = parse_value(l);
    } else if (k.rfind("g[", 0) == 0) {
      const auto idx = indices(l, 1, 2);
      check_range(l, idx[0], n, "row");
      check_range(l, idx[1], m, "column");
      g[(idx[0] - 1) * m + idx[1] - 1] = parse_value(l);
    } else {
      throw ConfigError(l.number, l.key_col, "unknown key '" + k + "'");
    }
  }
  return make_problem(std::move(name), n, m, horizon, std::move(a), std::move(f), std::move(g), std::move(x0));
}

// Builtin calibration and example problems.
inline std::vector<std::string> builtin_problem_names() { return {"cubic-circuit", "linear-decay", "pure-brownian"}; }

inline std::optional<SdaeProblem> builtin_problem(std::string_view name) {
  if (name == "cubic-circuit")
    return parse_problem(
        "n = 2\nm = 2\nT = 1\n"
        "a[2][1] = t^2+1\n"
        "f[1] = x2\n"
        "f[2] = -(x1+x1^3)/(t^2+1)\n"
        "g[2][1] = x2\n"
        "g[2][2] = x1^2+2*x1\n"
        "x0 = 1, 0\n",
        "cubic-circuit");
  if (name == "pure-brownian")
    return parse_problem(
        "n = 2\nm = 2\nT = 1\n"
        "a[1][1] = 1\na[2][2] = 1\n"
        "g[1][1] = 1\ng[2][2] = 1\n"
        "x0 = 0, 0\n",
        "pure-brownian");
  if (name == "linear-decay")
    return parse_problem("n = 1\nm = 1\nT = 1\na[1][1] = 1\nf[1] = -x1\nx0 = 1\n", "linear-decay");
  return std::nullopt;
}

class UnknownProblem : public Error {
 public:
  explicit UnknownProblem(const std::string& name)
      : Error("unknown problem '" + name + "'; builtin problems: " + list()) {}

  static std::string list() {
    std::string s;
    for (const auto& n : builtin_problem_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }
};

// A source is a builtin name or a path to a problem file.
inline SdaeProblem load_problem(const std::string& source) {
  if (auto p = builtin_problem(source)) return *std::move(p);
  if (!std::filesystem::is_regular_file(source)) throw UnknownProblem(source);
  std::ifstream in(source, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_problem(text.str(), std::filesystem::path(source).stem().string());
}

}  // namespace sdae
