#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kcmp {

/// Lowercase, trim, collapse internal whitespace runs to a single space.
std::string normalize_text(std::string_view text);

/// Splits a free-text list reply ("1. cup, 2) plate\n- bowl") into normalized
/// items: separators are commas, semicolons and newlines; leading numbering,
/// bullets, quotes and trailing periods are stripped; empty items dropped.
std::vector<std::string> parse_list_reply(std::string_view reply);

/// Whitespace tokenization of the normalized text.
std::vector<std::string> tokenize_words(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace kcmp
