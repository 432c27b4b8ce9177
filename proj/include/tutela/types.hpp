#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace tutela {

// Fixed-width byte identifier rendered as 0x-prefixed lowercase hex.
template <std::size_t N, typename Tag>
class HexId {
 public:
  static constexpr std::size_t kBytes = N;

  constexpr HexId() = default;
  explicit constexpr HexId(const std::array<std::uint8_t, N>& bytes) : bytes_(bytes) {}

  // Accepts "0x" followed by exactly 2N hex digits, either case.
  static std::optional<HexId> parse(std::string_view text);
  // Throws DomainError on malformed input.
  static HexId from_hex(std::string_view text);

  std::string hex() const;
  const std::array<std::uint8_t, N>& bytes() const { return bytes_; }
  std::array<std::uint8_t, N>& bytes() { return bytes_; }

  friend auto operator<=>(const HexId&, const HexId&) = default;
  friend bool operator==(const HexId&, const HexId&) = default;

 private:
  std::array<std::uint8_t, N> bytes_{};
};

struct AddressTag {};
struct TxHashTag {};

using Address = HexId<20, AddressTag>;
using TxHash = HexId<32, TxHashTag>;

// Amount in wei. 128 bits so token amounts and large ETH values never overflow.
class Wei {
 public:
  using value_type = unsigned __int128;

  constexpr Wei() = default;
  constexpr explicit Wei(value_type v) : v_(v) {}

  static constexpr Wei from_gwei(std::uint64_t gwei) {
    return Wei(static_cast<value_type>(gwei) * 1'000'000'000u);
  }

  // Non-negative decimal integer; nullopt on anything else or overflow.
  static std::optional<Wei> parse(std::string_view text);
  // Decimal ETH amount such as "0.998" scaled by 10^18, exact. nullopt if more than 18 decimals.
  static std::optional<Wei> parse_ether(std::string_view text);

  constexpr value_type value() const { return v_; }
  std::string str() const;
  double ether() const;

  constexpr Wei abs_diff(Wei other) const {
    return Wei(v_ > other.v_ ? v_ - other.v_ : other.v_ - v_);
  }

  friend constexpr auto operator<=>(Wei, Wei) = default;
  friend constexpr bool operator==(Wei, Wei) = default;
  friend constexpr Wei operator+(Wei a, Wei b) { return Wei(a.v_ + b.v_); }
  friend constexpr Wei operator-(Wei a, Wei b) { return Wei(a.v_ - b.v_); }

 private:
  value_type v_ = 0;
};

inline constexpr Wei::value_type kWeiPerEther = 1'000'000'000'000'000'000ull;
inline constexpr Wei::value_type kWeiPerGwei = 1'000'000'000ull;

std::string format_fixed(double value, int decimals);

}  // namespace tutela

template <std::size_t N, typename Tag>
struct std::hash<tutela::HexId<N, Tag>> {
  std::size_t operator()(const tutela::HexId<N, Tag>& id) const noexcept {
    // Ids are hash outputs or random, so the leading bytes are already well mixed.
    std::uint64_t h;
    std::memcpy(&h, id.bytes().data(), sizeof(h));
    return static_cast<std::size_t>(h * 0x9E3779B97F4A7C15ull);
  }
};
