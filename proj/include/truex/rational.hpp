#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace truex {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Accepts integers ("-12"), decimals ("0.333333", ".5"), scientific
// notation ("1e-4", "2.5E3") and fractions ("1/3"). Surrounding whitespace
// and a leading '+' are tolerated. Returns nullopt on anything else.
std::optional<Rational> parse_rational(std::string_view text);

// Canonical text form: "24", "-0.625", "1/3". Terminating decimals are
// written in decimal notation, everything else as a reduced fraction.
std::string to_string(const Rational& value);

// Fixed-point rendering with half-away-from-zero rounding.
std::string to_fixed(const Rational& value, int places);

double to_double(const Rational& value);

bool is_integer(const Rational& value);
BigInt floor_of(const Rational& value);
BigInt ceil_of(const Rational& value);
// Half away from zero.
BigInt round_of(const Rational& value);

Rational abs_of(const Rational& value);

// Exact when the argument is a perfect square of a rational; otherwise a
// 20-digit truncated decimal approximation and *exact is set to false.
// Precondition: value >= 0.
Rational sqrt_of(const Rational& value, bool* exact);

}  // namespace truex
