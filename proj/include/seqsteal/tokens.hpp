#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace seqsteal {

using Token = int;

/// A string over the alphabet {0, ..., O-1}. Histories, futures and full
/// sequences all use this type.
using TokenString = std::vector<Token>;

/// h followed by o.
TokenString append(const TokenString& h, Token o);

/// h followed by f.
TokenString concat(const TokenString& h, const TokenString& f);

/// First `len` tokens of x.
TokenString prefix(const TokenString& x, std::size_t len);

/// Dash-joined decimal tokens; the empty string maps to "".
std::string history_key(const TokenString& h);
TokenString parse_history_key(std::string_view key);

/// Number of strings of length `len` over an alphabet of size O.
std::uint64_t count_strings(int alphabet_size, int len);

/// Position of x in the lexicographic enumeration of strings of its length
/// (first token most significant).
std::uint64_t string_index(const TokenString& x, int alphabet_size);

/// Inverse of string_index.
TokenString string_at(std::uint64_t index, int alphabet_size, int len);

/// All strings of length `len` in lexicographic order.
std::vector<TokenString> enumerate_strings(int alphabet_size, int len);

/// Throws ParameterError if any token is outside [0, O).
void check_tokens(const TokenString& x, int alphabet_size);

}  // namespace seqsteal
