#include "kcmp/text.hpp"

#include <cctype>
#include <sstream>

namespace kcmp {

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

namespace {

std::string clean_item(std::string item) {
  item = normalize_text(item);
  std::size_t i = 0;
  // "1." / "2)" / "-" / "*" / "•" prefixes
  while (i < item.size() && std::isdigit(static_cast<unsigned char>(item[i]))) ++i;
  if (i > 0 && i < item.size() && (item[i] == '.' || item[i] == ')'))
    item.erase(0, i + 1);
  else if (!item.empty() && (item[0] == '-' || item[0] == '*'))
    item.erase(0, 1);
  else if (item.rfind("\xE2\x80\xA2", 0) == 0)
    item.erase(0, 3);
  item = normalize_text(item);
  auto strip = [](char c) { return c == '"' || c == '\'' || c == '.' || c == '`'; };
  while (!item.empty() && strip(item.front())) item.erase(0, 1);
  while (!item.empty() && strip(item.back())) item.pop_back();
  return normalize_text(item);
}

}  // namespace

std::vector<std::string> parse_list_reply(std::string_view reply) {
  std::vector<std::string> items;
  std::string current;
  auto flush = [&] {
    auto cleaned = clean_item(current);
    if (!cleaned.empty()) items.push_back(std::move(cleaned));
    current.clear();
  };
  for (char c : reply) {
    if (c == ',' || c == ';' || c == '\n')
      flush();
    else
      current.push_back(c);
  }
  flush();
  return items;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in(normalize_text(text));
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace kcmp
