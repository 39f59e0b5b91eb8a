#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>

#include "nlheat/error.hpp"
#include "nlheat/growth.hpp"

namespace nlheat {

// Scalar expressions in one variable x, e.g. "x^2", "exp(-x^2)", "1 + abs(x)^1.5".
// Grammar:
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('-' | '+') unary | power
//   power  := atom ('^' unary)?          right associative, binds tighter than unary minus on the left
//   atom   := number | 'x' | 'pi' | 'e' | name '(' expr ')' | '(' expr ')'
class Expression {
 public:
  using Fn = std::function<double(double)>;

  static Expression parse(std::string_view text) {
    Parser p{text, 0};
    Fn f = p.expr();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected trailing input");
    return Expression(std::string(text), std::move(f));
  }

  double operator()(double x) const { return fn_(x); }
  const std::string& text() const noexcept { return text_; }

 private:
  Expression(std::string text, Fn fn) : text_(std::move(text)), fn_(std::move(fn)) {}

  struct Parser {
    std::string_view s;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw InvalidArgument("expression '" + std::string(s) + "': " + what + " at offset " +
                            std::to_string(pos));
    }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    Fn expr() {
      Fn lhs = term();
      for (;;) {
        if (eat('+')) {
          Fn rhs = term();
          lhs = [lhs, rhs](double x) { return lhs(x) + rhs(x); };
        } else if (eat('-')) {
          Fn rhs = term();
          lhs = [lhs, rhs](double x) { return lhs(x) - rhs(x); };
        } else {
          return lhs;
        }
      }
    }
    Fn term() {
      Fn lhs = unary();
      for (;;) {
        if (eat('*')) {
          Fn rhs = unary();
          lhs = [lhs, rhs](double x) { return lhs(x) * rhs(x); };
        } else if (eat('/')) {
          Fn rhs = unary();
          lhs = [lhs, rhs](double x) { return lhs(x) / rhs(x); };
        } else {
          return lhs;
        }
      }
    }
    Fn unary() {
      if (eat('-')) {
        Fn a = unary();
        return [a](double x) { return -a(x); };
      }
      if (eat('+')) return unary();
      return power();
    }
    Fn power() {
      Fn base = atom();
      if (eat('^')) {
        Fn ex = unary();
        return [base, ex](double x) { return std::pow(base(x), ex(x)); };
      }
      return base;
    }
    Fn atom() {
      skip();
      if (pos >= s.size()) fail("unexpected end of input");
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        Fn inner = expr();
        if (!eat(')')) fail("expected ')'");
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const std::string rest(s.substr(pos));
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(rest, &used);
        } catch (const std::exception&) {
          fail("bad number");
        }
        pos += used;
        return [v](double) { return v; };
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) {
          ++pos;
        }
        const std::string name(s.substr(start, pos - start));
        if (name == "x") return [](double x) { return x; };
        if (name == "pi") return [](double) { return std::numbers::pi; };
        if (name == "e") return [](double) { return std::numbers::e; };
        static const std::map<std::string, double (*)(double)> funcs = {
            {"exp", [](double v) { return std::exp(v); }},
            {"log", [](double v) { return std::log(v); }},
            {"log1p", [](double v) { return std::log1p(v); }},
            {"sqrt", [](double v) { return std::sqrt(v); }},
            {"abs", [](double v) { return std::abs(v); }},
            {"sin", [](double v) { return std::sin(v); }},
            {"cos", [](double v) { return std::cos(v); }},
            {"cosh", [](double v) { return std::cosh(v); }},
            {"tanh", [](double v) { return std::tanh(v); }},
        };
        auto it = funcs.find(name);
        if (it == funcs.end()) fail("unknown name '" + name + "'");
        if (!eat('(')) fail("expected '(' after " + name);
        Fn arg = expr();
        if (!eat(')')) fail("expected ')'");
        auto* f = it->second;
        return [f, arg](double x) { return f(arg(x)); };
      }
      fail(std::string("unexpected character '") + c + "'");
    }
  };

  std::string text_;
  Fn fn_;
};

/// Growth classes written as "name:key=value,key=value", e.g.
/// "xlogx:alpha=0.5", "critical:gamma=1,lo=-0.3,hi=0.3,profile=upper", "power:gamma=2,c0=3".
inline GrowthSpec parse_growth(std::string_view text) {
  const auto colon = text.find(':');
  const std::string name(text.substr(0, colon));
  std::map<std::string, std::string> kv;
  if (colon != std::string_view::npos) {
    std::string rest(text.substr(colon + 1));
    std::size_t start = 0;
    while (start <= rest.size()) {
      const std::size_t comma = rest.find(',', start);
      const std::string item = rest.substr(start, comma == std::string::npos ? std::string::npos
                                                                              : comma - start);
      if (!item.empty()) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InvalidArgument("growth spec item without '=': " + item);
        kv[item.substr(0, eq)] = item.substr(eq + 1);
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  auto take = [&](const char* key) -> double {
    auto it = kv.find(key);
    if (it == kv.end()) throw InvalidArgument(std::string("growth spec needs ") + key);
    try {
      const double v = std::stod(it->second);
      kv.erase(it);
      return v;
    } catch (const std::invalid_argument&) {
      throw InvalidArgument(std::string("growth spec: bad number for ") + key);
    }
  };
  GrowthSpec g;
  if (kv.count("c0")) g.c0 = take("c0");
  if (kv.count("N")) g.dimension = static_cast<int>(take("N"));
  if (auto it = kv.find("sign"); it != kv.end()) {
    if (it->second == "nonneg") {
      g.sign = DataSign::Nonnegative;
    } else if (it->second == "twosided") {
      g.sign = DataSign::TwoSided;
    } else {
      throw InvalidArgument("growth spec: sign must be nonneg or twosided");
    }
    kv.erase(it);
  }
  if (name == "power") {
    g.family = PowerGrowth{take("gamma")};
  } else if (name == "exp") {
    g.family = ExpGrowth{take("gamma")};
  } else if (name == "exppower") {
    const double gamma = take("gamma");
    g.family = ExpPowerGrowth{gamma, take("alpha")};
  } else if (name == "xlogx") {
    g.family = XLogXGrowth{take("alpha")};
  } else if (name == "xsqrtlogx") {
    g.family = XSqrtLogXGrowth{take("alpha")};
  } else if (name == "critical") {
    CriticalPerturbedGrowth c{take("gamma"), take("lo"), take("hi"), BandProfile::Upper};
    if (auto it = kv.find("profile"); it != kv.end()) {
      if (it->second == "upper") {
        c.profile = BandProfile::Upper;
      } else if (it->second == "lower") {
        c.profile = BandProfile::Lower;
      } else if (it->second == "zero") {
        c.profile = BandProfile::Zero;
      } else {
        throw InvalidArgument("growth spec: profile must be upper, lower or zero");
      }
      kv.erase(it);
    }
    g.family = c;
  } else {
    throw InvalidArgument("unknown growth class '" + name + "'");
  }
  if (!kv.empty()) throw InvalidArgument("growth spec: unused key '" + kv.begin()->first + "'");
  validate(g);
  return g;
}

inline bool looks_like_growth(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) return false;
  const std::string_view name = text.substr(0, colon);
  for (std::string_view n : {"power", "exp", "exppower", "xlogx", "xsqrtlogx", "critical"}) {
    if (name == n) return true;
  }
  return false;
}

}  // namespace nlheat
