#include "llmrerank/ids.hpp"

#include <algorithm>

#include "llmrerank/error.hpp"

namespace llmrerank::detail {

namespace {

bool all_digits(std::string_view s) noexcept {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string_view strip_zeros(std::string_view s) noexcept {
  const auto pos = s.find_first_not_of('0');
  return pos == std::string_view::npos ? s.substr(s.size() - 1) : s.substr(pos);
}

}  // namespace

std::strong_ordering compare_ids(std::string_view a, std::string_view b) noexcept {
  const bool na = all_digits(a);
  const bool nb = all_digits(b);
  if (na != nb) return na ? std::strong_ordering::less : std::strong_ordering::greater;
  if (na) {
    const auto sa = strip_zeros(a);
    const auto sb = strip_zeros(b);
    if (sa.size() != sb.size()) return sa.size() <=> sb.size();
    if (const auto c = sa.compare(sb); c != 0) return c <=> 0;
  }
  return a.compare(b) <=> 0;
}

void check_id(std::string_view value, const char* kind) {
  if (value.empty()) fail(ErrorCode::InvalidArgument, std::string("empty ") + kind);
}

}  // namespace llmrerank::detail
