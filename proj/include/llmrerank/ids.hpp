#pragma once

#include <compare>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

namespace llmrerank {

namespace detail {
std::strong_ordering compare_ids(std::string_view a, std::string_view b) noexcept;
void check_id(std::string_view value, const char* kind);
}  // namespace detail

/// Opaque string identifier. Ordering is "natural": all-digit ids compare
/// numerically (so "7" < "42") and sort before non-numeric ids, which compare
/// lexicographically. Every tie-break in the project uses this order.
template <typename Tag>
class Id {
 public:
  Id() = default;
  explicit Id(std::string value) : value_(std::move(value)) { detail::check_id(value_, Tag::kind); }

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend bool operator==(const Id& a, const Id& b) noexcept { return a.value_ == b.value_; }
  friend std::strong_ordering operator<=>(const Id& a, const Id& b) noexcept {
    return detail::compare_ids(a.value_, b.value_);
  }
  friend std::ostream& operator<<(std::ostream& os, const Id& id) { return os << id.value_; }

 private:
  std::string value_;
};

struct UserTag { static constexpr const char* kind = "user id"; };
struct ItemTag { static constexpr const char* kind = "item id"; };

using UserId = Id<UserTag>;
using ItemId = Id<ItemTag>;

}  // namespace llmrerank

template <typename Tag>
struct std::hash<llmrerank::Id<Tag>> {
  std::size_t operator()(const llmrerank::Id<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
