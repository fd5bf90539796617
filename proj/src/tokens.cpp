#include "seqsteal/tokens.hpp"

#include <charconv>

#include "seqsteal/errors.hpp"

namespace seqsteal {

TokenString append(const TokenString& h, Token o) {
  TokenString out;
  out.reserve(h.size() + 1);
  out.insert(out.end(), h.begin(), h.end());
  out.push_back(o);
  return out;
}

TokenString concat(const TokenString& h, const TokenString& f) {
  TokenString out;
  out.reserve(h.size() + f.size());
  out.insert(out.end(), h.begin(), h.end());
  out.insert(out.end(), f.begin(), f.end());
  return out;
}

TokenString prefix(const TokenString& x, std::size_t len) {
  if (len > x.size()) throw LengthError("prefix longer than string");
  return TokenString(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(len));
}

std::string history_key(const TokenString& h) {
  std::string key;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i) key.push_back('-');
    key += std::to_string(h[i]);
  }
  return key;
}

TokenString parse_history_key(std::string_view key) {
  TokenString h;
  if (key.empty()) return h;
  std::size_t pos = 0;
  while (pos <= key.size()) {
    std::size_t end = key.find('-', pos);
    if (end == std::string_view::npos) end = key.size();
    Token value = 0;
    auto [ptr, ec] = std::from_chars(key.data() + pos, key.data() + end, value);
    if (ec != std::errc() || ptr != key.data() + end) {
      throw ValidationError("malformed history key '" + std::string(key) + "'");
    }
    h.push_back(value);
    pos = end + 1;
  }
  return h;
}

std::uint64_t count_strings(int alphabet_size, int len) {
  std::uint64_t n = 1;
  for (int i = 0; i < len; ++i) n *= static_cast<std::uint64_t>(alphabet_size);
  return n;
}

std::uint64_t string_index(const TokenString& x, int alphabet_size) {
  std::uint64_t idx = 0;
  for (Token t : x) idx = idx * static_cast<std::uint64_t>(alphabet_size) + static_cast<std::uint64_t>(t);
  return idx;
}

TokenString string_at(std::uint64_t index, int alphabet_size, int len) {
  TokenString x(static_cast<std::size_t>(len));
  for (int i = len - 1; i >= 0; --i) {
    x[static_cast<std::size_t>(i)] = static_cast<Token>(index % static_cast<std::uint64_t>(alphabet_size));
    index /= static_cast<std::uint64_t>(alphabet_size);
  }
  return x;
}

std::vector<TokenString> enumerate_strings(int alphabet_size, int len) {
  std::uint64_t n = count_strings(alphabet_size, len);
  std::vector<TokenString> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(string_at(i, alphabet_size, len));
  return out;
}

void check_tokens(const TokenString& x, int alphabet_size) {
  for (Token t : x) {
    if (t < 0 || t >= alphabet_size) {
      throw ParameterError("token " + std::to_string(t) + " outside alphabet of size " +
                           std::to_string(alphabet_size));
    }
  }
}

}  // namespace seqsteal
