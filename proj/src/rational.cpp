#include "mpmdp/rational.hpp"

#include <stdexcept>

namespace mpmdp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_integer_text(std::string_view s) {
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) s.remove_prefix(1);
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

Integer parse_integer(std::string_view s) {
  if (!is_integer_text(s)) throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  if (s.front() == '+') s.remove_prefix(1);
  return Integer(std::string(s));
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string_view s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty rational");
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    Integer p = parse_integer(trim(s.substr(0, slash)));
    Integer q = parse_integer(trim(s.substr(slash + 1)));
    if (q == 0) throw std::invalid_argument("zero denominator in '" + std::string(s) + "'");
    Rational r(p, q);
    r.canonicalize();
    return r;
  }
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    std::string_view ip = s.substr(0, dot), fp = s.substr(dot + 1);
    bool neg = !ip.empty() && ip.front() == '-';
    if (!ip.empty() && (ip.front() == '-' || ip.front() == '+')) ip.remove_prefix(1);
    if (ip.empty()) ip = "0";
    if (fp.empty() || !is_integer_text(ip) || !is_integer_text(fp) || fp.front() == '-' || fp.front() == '+')
      throw std::invalid_argument("malformed decimal '" + std::string(s) + "'");
    Integer scale = 1;
    for (std::size_t i = 0; i < fp.size(); ++i) scale *= 10;
    Rational r(Integer(std::string(ip)) * scale + Integer(std::string(fp)), scale);
    r.canonicalize();
    return neg ? Rational(-r) : r;
  }
  return Rational(parse_integer(s));
}

std::string to_string(const Rational& r) {
  if (r.get_den() == 1) return r.get_num().get_str();
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

std::vector<Rational> parse_vector(std::string_view text) {
  std::vector<Rational> out;
  std::string_view s = trim(text);
  if (!s.empty() && s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);
  while (true) {
    auto comma = s.find(',');
    out.push_back(parse_rational(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::string to_string(const std::vector<Rational>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += to_string(v[i]);
  }
  return s + ")";
}

Integer lcm_denominators(const std::vector<Rational>& values) {
  Integer l = 1;
  for (const auto& v : values) mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), v.get_den_mpz_t());
  return l;
}

std::int64_t to_int64(const Integer& z) {
  if (!z.fits_slong_p()) throw std::overflow_error("integer out of 64-bit range: " + z.get_str());
  return z.get_si();
}

std::int64_t floor_int(const Rational& r) {
  Integer q;
  mpz_fdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
  return to_int64(q);
}

std::int64_t ceil_int(const Rational& r) {
  Integer q;
  mpz_cdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
  return to_int64(q);
}

}  // namespace mpmdp
