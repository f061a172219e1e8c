#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mpmdp {

using Rational = mpq_class;
using Integer = mpz_class;

// Accepts "p/q", "p" and plain decimals like "-2.25". Throws std::invalid_argument.
Rational parse_rational(std::string_view text);

// Canonical "p/q", or "p" when the denominator is one.
std::string to_string(const Rational& r);

std::vector<Rational> parse_vector(std::string_view text);  // comma separated
std::string to_string(const std::vector<Rational>& v);

Integer lcm_denominators(const std::vector<Rational>& values);

inline double to_double(const Rational& r) { return r.get_d(); }

// floor/ceil as signed 64-bit integers; throws if out of range.
std::int64_t floor_int(const Rational& r);
std::int64_t ceil_int(const Rational& r);
std::int64_t to_int64(const Integer& z);

}  // namespace mpmdp
