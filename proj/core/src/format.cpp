#include "emascale/format.hpp"

#include <charconv>
#include <cstdio>

namespace emascale {

std::string format_shortest(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

std::string format_fixed5(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.5f", value);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

}  // namespace emascale
