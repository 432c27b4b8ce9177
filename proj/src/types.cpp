#include "tutela/types.hpp"

#include <cstdio>

#include "tutela/error.hpp"

namespace tutela {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

constexpr char kHexDigits[] = "0123456789abcdef";

}  // namespace

template <std::size_t N, typename Tag>
std::optional<HexId<N, Tag>> HexId<N, Tag>::parse(std::string_view text) {
  if (text.size() != 2 + 2 * N || text[0] != '0' || (text[1] != 'x' && text[1] != 'X')) {
    return std::nullopt;
  }
  HexId id;
  for (std::size_t i = 0; i < N; ++i) {
    int hi = hex_value(text[2 + 2 * i]);
    int lo = hex_value(text[3 + 2 * i]);
    if (hi < 0 || lo < 0) return std::nullopt;
    id.bytes_[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return id;
}

template <std::size_t N, typename Tag>
HexId<N, Tag> HexId<N, Tag>::from_hex(std::string_view text) {
  auto id = parse(text);
  if (!id) throw DomainError("malformed hex id: " + std::string(text));
  return *id;
}

template <std::size_t N, typename Tag>
std::string HexId<N, Tag>::hex() const {
  std::string out(2 + 2 * N, '0');
  out[1] = 'x';
  for (std::size_t i = 0; i < N; ++i) {
    out[2 + 2 * i] = kHexDigits[bytes_[i] >> 4];
    out[3 + 2 * i] = kHexDigits[bytes_[i] & 0xF];
  }
  return out;
}

template class HexId<20, AddressTag>;
template class HexId<32, TxHashTag>;

std::optional<Wei> Wei::parse(std::string_view text) {
  if (text.empty() || text.size() > 39) return std::nullopt;
  value_type v = 0;
  constexpr value_type kMax = ~value_type{0};
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    value_type digit = static_cast<value_type>(c - '0');
    if (v > (kMax - digit) / 10) return std::nullopt;
    v = v * 10 + digit;
  }
  return Wei(v);
}

std::optional<Wei> Wei::parse_ether(std::string_view text) {
  auto dot = text.find('.');
  std::string_view whole = text.substr(0, dot);
  std::string frac;
  if (dot != std::string_view::npos) {
    frac = std::string(text.substr(dot + 1));
    if (frac.empty() || frac.size() > 18) return std::nullopt;
  }
  if (whole.empty()) whole = "0";
  frac.resize(18, '0');
  auto w = parse(whole);
  auto f = parse(frac);
  if (!w || !f) return std::nullopt;
  if (w->value() > (~value_type{0} - f->value()) / kWeiPerEther) return std::nullopt;
  return Wei(w->value() * kWeiPerEther + f->value());
}

std::string Wei::str() const {
  if (v_ == 0) return "0";
  std::string out;
  value_type v = v_;
  while (v > 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  return {out.rbegin(), out.rend()};
}

double Wei::ether() const {
  return static_cast<double>(v_ / kWeiPerEther) +
         static_cast<double>(v_ % kWeiPerEther) / static_cast<double>(kWeiPerEther);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

}  // namespace tutela
