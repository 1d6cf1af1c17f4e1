#include "truex/rational.hpp"

#include <cctype>
#include <stdexcept>

namespace truex {

namespace {

BigInt pow10(unsigned exponent) {
  BigInt result = 1;
  for (unsigned i = 0; i < exponent; ++i) result *= 10;
  return result;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

// cpp_int reads a leading 0 as an octal prefix, so digits go in stripped.
BigInt digits_to_int(std::string_view digits) {
  while (digits.size() > 1 && digits.front() == '0') digits.remove_prefix(1);
  return BigInt(std::string(digits));
}

std::optional<Rational> parse_decimal(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  long exponent = 0;
  if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    std::string_view exp_part = s.substr(e + 1);
    s = s.substr(0, e);
    bool exp_negative = false;
    if (!exp_part.empty() && (exp_part.front() == '-' || exp_part.front() == '+')) {
      exp_negative = exp_part.front() == '-';
      exp_part.remove_prefix(1);
    }
    if (!all_digits(exp_part) || exp_part.size() > 4) return std::nullopt;
    exponent = std::stol(std::string(exp_part));
    if (exp_negative) exponent = -exponent;
  }
  std::string_view int_part = s;
  std::string_view frac_part;
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    int_part = s.substr(0, dot);
    frac_part = s.substr(dot + 1);
    if (!frac_part.empty() && !all_digits(frac_part)) return std::nullopt;
  }
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  if (!int_part.empty() && !all_digits(int_part)) return std::nullopt;

  std::string digits = std::string(int_part) + std::string(frac_part);
  BigInt numerator = digits_to_int(digits);
  exponent -= static_cast<long>(frac_part.size());
  Rational value;
  if (exponent >= 0) {
    value = Rational(numerator * pow10(static_cast<unsigned>(exponent)));
  } else {
    value = Rational(numerator, pow10(static_cast<unsigned>(-exponent)));
  }
  return negative ? Rational(-value) : value;
}

}  // namespace

std::optional<Rational> parse_rational(std::string_view text) {
  std::string_view s = trim(text);
  if (s.empty()) return std::nullopt;
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    std::string_view num = trim(s.substr(0, slash));
    std::string_view den = trim(s.substr(slash + 1));
    bool negative = false;
    if (!num.empty() && (num.front() == '-' || num.front() == '+')) {
      negative = num.front() == '-';
      num.remove_prefix(1);
    }
    if (!all_digits(num) || !all_digits(den)) return std::nullopt;
    BigInt d = digits_to_int(den);
    if (d == 0) return std::nullopt;
    Rational value(digits_to_int(num), d);
    return negative ? Rational(-value) : value;
  }
  return parse_decimal(s);
}

std::string to_string(const Rational& value) {
  const BigInt num = boost::multiprecision::numerator(value);
  BigInt den = boost::multiprecision::denominator(value);
  if (den == 1) return num.str();

  // Terminating decimal iff the reduced denominator is 2^a * 5^b.
  unsigned twos = 0;
  unsigned fives = 0;
  BigInt rest = den;
  while (rest % 2 == 0) {
    rest /= 2;
    ++twos;
  }
  while (rest % 5 == 0) {
    rest /= 5;
    ++fives;
  }
  if (rest != 1) return num.str() + "/" + den.str();

  const unsigned places = std::max(twos, fives);
  BigInt scaled = abs(num) * pow10(places) / den;
  std::string digits = scaled.str();
  if (digits.size() <= places) digits.insert(0, places - digits.size() + 1, '0');
  std::string out = digits.substr(0, digits.size() - places) + "." + digits.substr(digits.size() - places);
  while (out.back() == '0') out.pop_back();
  if (out.back() == '.') out.pop_back();
  return num < 0 ? "-" + out : out;
}

std::string to_fixed(const Rational& value, int places) {
  if (places < 0) throw std::invalid_argument("to_fixed: negative places");
  const BigInt scale = pow10(static_cast<unsigned>(places));
  const BigInt rounded = round_of(value * scale);
  BigInt magnitude = abs(rounded);
  std::string digits = magnitude.str();
  if (places == 0) return (rounded < 0 ? "-" : "") + digits;
  if (digits.size() <= static_cast<size_t>(places)) digits.insert(0, places - digits.size() + 1, '0');
  std::string out = digits.substr(0, digits.size() - places) + "." + digits.substr(digits.size() - places);
  return (rounded < 0 ? "-" : "") + out;
}

double to_double(const Rational& value) { return value.convert_to<double>(); }

bool is_integer(const Rational& value) { return boost::multiprecision::denominator(value) == 1; }

BigInt floor_of(const Rational& value) {
  const BigInt num = boost::multiprecision::numerator(value);
  const BigInt den = boost::multiprecision::denominator(value);
  BigInt q = num / den;  // truncates toward zero
  if (num % den != 0 && num < 0) q -= 1;
  return q;
}

BigInt ceil_of(const Rational& value) { return -floor_of(-value); }

BigInt round_of(const Rational& value) {
  const Rational half(1, 2);
  if (value >= 0) return floor_of(value + half);
  return -floor_of(-value + half);
}

Rational abs_of(const Rational& value) { return value < 0 ? Rational(-value) : value; }

Rational sqrt_of(const Rational& value, bool* exact) {
  if (value < 0) throw std::domain_error("sqrt of negative value");
  const BigInt num = boost::multiprecision::numerator(value);
  const BigInt den = boost::multiprecision::denominator(value);
  const BigInt num_root = boost::multiprecision::sqrt(num);
  const BigInt den_root = boost::multiprecision::sqrt(den);
  if (num_root * num_root == num && den_root * den_root == den) {
    if (exact) *exact = true;
    return Rational(num_root, den_root);
  }
  if (exact) *exact = false;
  // sqrt(n/d) = sqrt(n*d)/d, scaled by 10^20 for the decimal part.
  const BigInt scale = pow10(20);
  const BigInt radicand = num * den * scale * scale;
  const BigInt root = boost::multiprecision::sqrt(radicand);
  return Rational(root, den * scale);
}

}  // namespace truex
