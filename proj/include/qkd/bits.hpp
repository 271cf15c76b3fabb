#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qkd {

// A string over {0,1}. Index 0 is the leftmost (first transmitted) bit.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t length) : bits_(length, 0) {}
  BitString(std::initializer_list<int> values) {
    bits_.reserve(values.size());
    for (int v : values) {
      if (v != 0 && v != 1) throw std::invalid_argument("BitString: values must be 0 or 1");
      bits_.push_back(static_cast<std::uint8_t>(v));
    }
  }

  // Parses a literal such as "0110".
  static BitString from_string(std::string_view text) {
    BitString out(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] != '0' && text[i] != '1') {
        throw std::invalid_argument("BitString: expected '0' or '1'");
      }
      out.bits_[i] = text[i] == '1';
    }
    return out;
  }

  // Lowercase hex, most-significant bit first; the last digit is zero-padded.
  static BitString from_hex(std::string_view hex, std::size_t length) {
    if (hex.size() != (length + 3) / 4) {
      throw std::invalid_argument("BitString: hex length does not match bit length");
    }
    BitString out(length);
    for (std::size_t d = 0; d < hex.size(); ++d) {
      const char c = hex[d];
      int nibble = 0;
      if (c >= '0' && c <= '9') {
        nibble = c - '0';
      } else if (c >= 'a' && c <= 'f') {
        nibble = c - 'a' + 10;
      } else {
        throw std::invalid_argument("BitString: invalid hex digit");
      }
      for (int b = 0; b < 4; ++b) {
        const std::size_t i = 4 * d + static_cast<std::size_t>(b);
        const bool bit = (nibble >> (3 - b)) & 1;
        if (i < length) {
          out.bits_[i] = bit;
        } else if (bit) {
          throw std::invalid_argument("BitString: nonzero padding in hex");
        }
      }
    }
    return out;
  }

  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out((bits_.size() + 3) / 4, '0');
    for (std::size_t d = 0; d < out.size(); ++d) {
      int nibble = 0;
      for (int b = 0; b < 4; ++b) {
        const std::size_t i = 4 * d + static_cast<std::size_t>(b);
        nibble = (nibble << 1) | (i < bits_.size() ? bits_[i] : 0);
      }
      out[d] = kDigits[nibble];
    }
    return out;
  }

  std::string to_string() const {
    std::string out(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = bits_[i] ? '1' : '0';
    return out;
  }

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  bool at(std::size_t i) const { return bits_.at(i) != 0; }
  void set(std::size_t i, bool value) { bits_.at(i) = value; }
  void flip(std::size_t i) { bits_.at(i) ^= 1; }
  void push_back(bool value) { bits_.push_back(value); }

  std::size_t weight() const {
    std::size_t w = 0;
    for (auto b : bits_) w += b;
    return w;
  }

  // Restriction to the given indices, in the order given.
  BitString select(std::span<const std::size_t> indices) const {
    BitString out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) out.bits_[i] = bits_.at(indices[i]);
    return out;
  }

  BitString& operator^=(const BitString& other) {
    if (other.size() != size()) throw std::invalid_argument("BitString: length mismatch in xor");
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] ^= other.bits_[i];
    return *this;
  }
  friend BitString operator^(BitString a, const BitString& b) { return a ^= b; }

  friend bool operator==(const BitString&, const BitString&) = default;
  friend auto operator<=>(const BitString&, const BitString&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

inline std::size_t hamming_distance(const BitString& a, const BitString& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

}  // namespace qkd
