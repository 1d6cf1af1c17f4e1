#pragma once

// Test-only reference for the expression interpreter: random expression
// trees, a fully parenthesized renderer, and a recursive evaluator over a
// hand-rolled fraction type (numerator/denominator pairs reduced by gcd).
// Nothing here touches truex::Rational or the production parser.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

using Int = boost::multiprecision::cpp_int;

struct Frac {
  Int num = 0;
  Int den = 1;

  static Frac make(Int n, Int d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    Int g = boost::multiprecision::gcd(n < 0 ? Int(-n) : n, d);
    if (g == 0) g = 1;
    return {n / g, d / g};
  }
  std::string str() const { return den == 1 ? num.str() : num.str() + "/" + den.str(); }
};

inline Frac add(const Frac& a, const Frac& b) { return Frac::make(a.num * b.den + b.num * a.den, a.den * b.den); }
inline Frac sub(const Frac& a, const Frac& b) { return Frac::make(a.num * b.den - b.num * a.den, a.den * b.den); }
inline Frac mul(const Frac& a, const Frac& b) { return Frac::make(a.num * b.num, a.den * b.den); }
inline bool less(const Frac& a, const Frac& b) { return a.num * b.den < b.num * a.den; }

inline Int floor_div(const Int& n, const Int& d) {
  Int q = n / d;
  if (n % d != 0 && ((n < 0) != (d < 0))) q -= 1;
  return q;
}

struct Node {
  enum Kind { Lit, Var, Neg, Add, Sub, Mul, Div, Pow, Abs, Min, Max, Floor, Ceil, Round, Mod, Percent };
  Kind kind = Lit;
  Int lit_num = 0;   // literal written as lit_num / 10^lit_places
  int lit_places = 0;
  std::string var;
  std::vector<std::shared_ptr<Node>> kids;
};
using NodePtr = std::shared_ptr<Node>;

struct DivideByZero {};

inline Frac eval(const Node& n, const std::map<std::string, Frac>& env) {
  auto k = [&](size_t i) { return eval(*n.kids[i], env); };
  switch (n.kind) {
    case Node::Lit: {
      Int scale = 1;
      for (int i = 0; i < n.lit_places; ++i) scale *= 10;
      return Frac::make(n.lit_num, scale);
    }
    case Node::Var:
      return env.at(n.var);
    case Node::Neg: {
      Frac a = k(0);
      return {-a.num, a.den};
    }
    case Node::Add:
      return add(k(0), k(1));
    case Node::Sub:
      return sub(k(0), k(1));
    case Node::Mul:
      return mul(k(0), k(1));
    case Node::Div: {
      Frac a = k(0), b = k(1);
      if (b.num == 0) throw DivideByZero{};
      return Frac::make(a.num * b.den, a.den * b.num);
    }
    case Node::Pow: {
      Frac base = k(0);
      Frac e = k(1);  // generator keeps exponents integral and small
      long p = e.num.convert_to<long>();
      bool inv = p < 0;
      if (inv) p = -p;
      Frac r{1, 1};
      for (long i = 0; i < p; ++i) r = mul(r, base);
      if (inv) {
        if (r.num == 0) throw DivideByZero{};
        r = Frac::make(r.den, r.num);
      }
      return r;
    }
    case Node::Abs: {
      Frac a = k(0);
      return {a.num < 0 ? Int(-a.num) : a.num, a.den};
    }
    case Node::Min:
    case Node::Max: {
      Frac best = k(0);
      for (size_t i = 1; i < n.kids.size(); ++i) {
        Frac v = k(i);
        if (n.kind == Node::Min ? less(v, best) : less(best, v)) best = v;
      }
      return best;
    }
    case Node::Floor: {
      Frac a = k(0);
      return {floor_div(a.num, a.den), 1};
    }
    case Node::Ceil: {
      Frac a = k(0);
      return {-floor_div(-a.num, a.den), 1};
    }
    case Node::Round: {
      Frac a = k(0);
      // half away from zero: sign(a) * floor(|a| + 1/2)
      Int absn = a.num < 0 ? Int(-a.num) : a.num;
      Int r = floor_div(2 * absn + a.den, 2 * a.den);
      return {a.num < 0 ? Int(-r) : r, 1};
    }
    case Node::Mod: {
      Frac a = k(0), b = k(1);
      if (b.num == 0) throw DivideByZero{};
      // a - b * floor(a / b)
      Int q = floor_div(a.num * b.den, a.den * b.num);
      return sub(a, mul(b, Frac{q, 1}));
    }
    case Node::Percent:
      return Frac::make(k(0).num, k(0).den * 100);
  }
  return {};
}

inline std::string render(const Node& n) {
  auto k = [&](size_t i) { return render(*n.kids[i]); };
  auto call = [&](const char* name) {
    std::string s = std::string(name) + "(";
    for (size_t i = 0; i < n.kids.size(); ++i) s += (i ? ", " : "") + render(*n.kids[i]);
    return s + ")";
  };
  switch (n.kind) {
    case Node::Lit: {
      std::string digits = n.lit_num.str();
      if (n.lit_places == 0) return digits;
      while (static_cast<int>(digits.size()) <= n.lit_places) digits.insert(0, "0");
      return digits.substr(0, digits.size() - n.lit_places) + "." + digits.substr(digits.size() - n.lit_places);
    }
    case Node::Var:
      return n.var;
    case Node::Neg:
      return "(-(" + k(0) + "))";
    case Node::Add:
      return "(" + k(0) + " + " + k(1) + ")";
    case Node::Sub:
      return "(" + k(0) + " - " + k(1) + ")";
    case Node::Mul:
      return "(" + k(0) + " * " + k(1) + ")";
    case Node::Div:
      return "(" + k(0) + " / " + k(1) + ")";
    case Node::Pow:
      return "(" + k(0) + ")^(" + k(1) + ")";
    case Node::Abs:
      return call("abs");
    case Node::Min:
      return call("min");
    case Node::Max:
      return call("max");
    case Node::Floor:
      return call("floor");
    case Node::Ceil:
      return call("ceil");
    case Node::Round:
      return call("round");
    case Node::Mod:
      return call("mod");
    case Node::Percent:
      return call("percent");
  }
  return {};
}

class Generator {
 public:
  explicit Generator(uint64_t seed) : rng_(seed) {}

  const std::vector<std::string>& variables() const { return vars_; }

  NodePtr expression(int depth) {
    auto node = std::make_shared<Node>();
    if (depth <= 0 || pick(0, 9) < 3) {
      if (pick(0, 2) == 0) {
        node->kind = Node::Var;
        node->var = vars_[pick(0, static_cast<int>(vars_.size()) - 1)];
      } else {
        node->kind = Node::Lit;
        node->lit_places = pick(0, 2) == 0 ? pick(1, 2) : 0;
        node->lit_num = pick(0, 500);
      }
      return node;
    }
    switch (pick(0, 13)) {
      case 0:
        node->kind = Node::Neg;
        node->kids = {expression(depth - 1)};
        break;
      case 1:
      case 2:
        node->kind = Node::Add;
        break;
      case 3:
        node->kind = Node::Sub;
        break;
      case 4:
      case 5:
        node->kind = Node::Mul;
        break;
      case 6:
      case 7:
        node->kind = Node::Div;
        break;
      case 8: {
        node->kind = Node::Pow;
        auto exponent = std::make_shared<Node>();
        exponent->kind = Node::Lit;
        exponent->lit_num = pick(0, 3);
        NodePtr e = exponent;
        if (pick(0, 3) == 0) {
          auto neg = std::make_shared<Node>();
          neg->kind = Node::Neg;
          neg->kids = {exponent};
          e = neg;
        }
        node->kids = {expression(depth - 2), e};
        return node;
      }
      case 9:
        node->kind = pick(0, 1) ? Node::Abs : Node::Percent;
        node->kids = {expression(depth - 1)};
        return node;
      case 10:
        node->kind = pick(0, 1) ? Node::Min : Node::Max;
        node->kids = {expression(depth - 1), expression(depth - 1)};
        if (pick(0, 1)) node->kids.push_back(expression(depth - 1));
        return node;
      case 11: {
        const Node::Kind kinds[] = {Node::Floor, Node::Ceil, Node::Round};
        node->kind = kinds[pick(0, 2)];
        node->kids = {expression(depth - 1)};
        return node;
      }
      default:
        node->kind = Node::Mod;
        break;
    }
    if (node->kids.empty()) node->kids = {expression(depth - 1), expression(depth - 1)};
    return node;
  }

  std::map<std::string, Frac> environment() {
    std::map<std::string, Frac> env;
    for (const auto& v : vars_) env[v] = Frac::make(pick(-50, 50), pick(1, 4));
    return env;
  }

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

 private:
  std::mt19937_64 rng_;
  std::vector<std::string> vars_{"a", "b", "price", "qty", "rate_2"};
};

}  // namespace oracle
