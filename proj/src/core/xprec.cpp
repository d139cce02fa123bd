#include "xprec.hpp"

#include <cctype>
#include <cstdlib>
#include <string>

namespace fcirk {

DDReal dd_pow10(int n) {
  DDReal result(1.0);
  DDReal base(10.0);
  unsigned e = static_cast<unsigned>(n < 0 ? -n : n);
  while (e != 0) {
    if (e & 1U) result = result * base;
    base = base * base;
    e >>= 1U;
  }
  return n < 0 ? DDReal(1.0) / result : result;
}

std::string to_string(DDReal x, int digits) {
  if (digits < 1) digits = 1;
  if (std::isnan(x.hi)) return "nan";
  if (std::isinf(x.hi)) return x.hi > 0 ? "inf" : "-inf";
  if (x.hi == 0.0) {
    std::string zero = "0.";
    zero.append(static_cast<std::size_t>(digits - 1), '0');
    return zero + "e+00";
  }

  std::string out;
  if (x.hi < 0.0) {
    out.push_back('-');
    x = -x;
  }

  int e = static_cast<int>(std::floor(std::log10(x.hi)));
  DDReal r = x / dd_pow10(e);
  while (r >= DDReal(10.0)) {
    r = r / 10.0;
    ++e;
  }
  while (r < DDReal(1.0)) {
    r = r * 10.0;
    --e;
  }

  // One guard digit for rounding.
  std::string d(static_cast<std::size_t>(digits + 1), '0');
  for (int i = 0; i <= digits; ++i) {
    int digit = static_cast<int>(std::floor(r.hi));
    DDReal rest = r - static_cast<double>(digit);
    if (rest.hi < 0.0) {
      --digit;
      rest = rest + 1.0;
    }
    if (digit > 9) {
      digit = 9;
      rest = rest + 1.0;
    }
    if (digit < 0) digit = 0;
    d[static_cast<std::size_t>(i)] = static_cast<char>('0' + digit);
    r = rest * 10.0;
  }

  const bool round_up = d.back() >= '5';
  d.pop_back();
  if (round_up) {
    int i = digits - 1;
    while (i >= 0 && d[static_cast<std::size_t>(i)] == '9') {
      d[static_cast<std::size_t>(i)] = '0';
      --i;
    }
    if (i >= 0) {
      ++d[static_cast<std::size_t>(i)];
    } else {
      d.insert(d.begin(), '1');
      d.pop_back();
      ++e;
    }
  }

  out.push_back(d[0]);
  if (digits > 1) {
    out.push_back('.');
    out.append(d, 1, std::string::npos);
  }
  out.push_back('e');
  out.push_back(e < 0 ? '-' : '+');
  const int ae = e < 0 ? -e : e;
  if (ae < 10) out.push_back('0');
  out += std::to_string(ae);
  return out;
}

DDReal dd_from_string(std::string_view text) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;

  bool negative = false;
  if (i < n && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }

  DDReal mantissa(0.0);
  int scale = 0;
  bool any_digit = false;
  bool after_point = false;
  for (; i < n; ++i) {
    const char ch = text[i];
    if (ch >= '0' && ch <= '9') {
      mantissa = mantissa * 10.0 + static_cast<double>(ch - '0');
      if (after_point) --scale;
      any_digit = true;
    } else if (ch == '.' && !after_point) {
      after_point = true;
    } else {
      break;
    }
  }
  if (!any_digit) {
    throw ParseError("not a decimal number: '" + std::string(text) + "'");
  }

  if (i < n && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool exp_negative = false;
    if (i < n && (text[i] == '+' || text[i] == '-')) {
      exp_negative = text[i] == '-';
      ++i;
    }
    int exponent = 0;
    bool exp_digit = false;
    for (; i < n && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
      exponent = exponent * 10 + (text[i] - '0');
      exp_digit = true;
      if (exponent > 100000) break;
    }
    if (!exp_digit) {
      throw ParseError("malformed exponent in '" + std::string(text) + "'");
    }
    scale += exp_negative ? -exponent : exponent;
  }
  while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i != n) {
    throw ParseError("trailing characters in number '" + std::string(text) +
                     "'");
  }

  DDReal value = mantissa;
  if (scale > 0) {
    value = value * dd_pow10(scale);
  } else if (scale < 0) {
    value = value / dd_pow10(-scale);
  }
  return negative ? -value : value;
}

}  // namespace fcirk
