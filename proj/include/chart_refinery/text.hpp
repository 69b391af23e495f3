#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace chart_refinery {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::string_view trim_left(std::string_view s);
// Splits on "\n", "\r\n" or a lone "\r"; a trailing terminator adds no empty line.
std::vector<std::string_view> split_lines(std::string_view text);

// Replaces every invalid or truncated UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view text);

// Lowercased alphanumeric words with English stopwords removed.
std::vector<std::string> content_tokens(std::string_view text);
bool is_stopword(std::string_view word);

}  // namespace chart_refinery
