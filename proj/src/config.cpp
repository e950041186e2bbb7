#include "kcmp/config.hpp"

#include <cctype>
#include <charconv>

#include "kcmp/calibration.hpp"
#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"

namespace kcmp {

using nlohmann::json;

namespace {

class TomlLine {
 public:
  TomlLine(std::string_view text, std::size_t line_no) : s_(text), line_(line_no) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidInput("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }

  std::string key() {
    skip_ws();
    if (pos_ < s_.size() && (s_[pos_] == '"' || s_[pos_] == '\'')) return string_value();
    const auto start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                s_[pos_] == '-'))
      ++pos_;
    if (start == pos_) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key()};
    while (consume('.')) parts.push_back(key());
    return parts;
  }

  json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') {
      ++pos_;
      json arr = json::array();
      if (consume(']')) return arr;
      do {
        arr.push_back(value());
      } while (consume(','));
      expect(']');
      return arr;
    }
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return number();
  }

 private:
  std::string string_value() {
    const char quote = s_[pos_++];
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != quote) {
      char c = s_[pos_++];
      if (c == '\\' && quote == '"') {
        if (pos_ >= s_.size()) break;
        switch (s_[pos_++]) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail("unsupported escape");
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  json number() {
    const auto start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == '-' || s_[pos_] == '+' || s_[pos_] == '_'))
      ++pos_;
    std::string tok;
    for (char c : s_.substr(start, pos_ - start))
      if (c != '_') tok += c;
    if (tok.empty()) fail("expected a value");
    if (tok.find_first_of(".eE") == std::string::npos) {
      std::int64_t v = 0;
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec == std::errc() && p == tok.data() + tok.size()) return v;
    }
    double d = 0.0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (ec != std::errc() || p != tok.data() + tok.size()) fail("cannot parse value '" + tok + "'");
    return d;
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

json& descend(json& root, const std::vector<std::string>& path, TomlLine& line) {
  json* node = &root;
  for (const auto& part : path) {
    if (node->is_array()) node = &node->back();
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    if (!node->is_object() && !node->is_array()) line.fail("'" + part + "' is not a table");
  }
  return *node;
}

}  // namespace

json parse_toml(std::string_view text) {
  json root = json::object();
  json* current = &root;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    TomlLine line(text.substr(start, end - start), ++line_no);
    start = end + 1;
    if (line.at_end()) continue;
    if (line.consume('[')) {
      const bool array_table = line.consume('[');
      auto path = line.dotted_key();
      line.expect(']');
      if (array_table) line.expect(']');
      if (!line.at_end()) line.fail("trailing characters after table header");
      const auto leaf = path.back();
      path.pop_back();
      json& parent = descend(root, path, line);
      if (array_table) {
        if (!parent.contains(leaf)) parent[leaf] = json::array();
        if (!parent[leaf].is_array()) line.fail("'" + leaf + "' is not an array of tables");
        parent[leaf].push_back(json::object());
        current = &parent[leaf].back();
      } else {
        if (!parent.contains(leaf)) parent[leaf] = json::object();
        current = &parent[leaf];
      }
      continue;
    }
    auto path = line.dotted_key();
    line.expect('=');
    auto v = line.value();
    if (!line.at_end()) line.fail("trailing characters after value");
    const auto leaf = path.back();
    path.pop_back();
    json& target = descend(*current, path, line);
    if (target.contains(leaf)) line.fail("duplicate key '" + leaf + "'");
    target[leaf] = std::move(v);
  }
  return root;
}

void RunConfig::validate() const {
  if (attack.num_alternatives < 1) throw InvalidInput("K (alternatives per probe) must be >= 1");
  if (attack.top_n < 1) throw InvalidInput("N (retained probes) must be >= 1");
  if (attack.repeats < 1) throw InvalidInput("R (repeats) must be >= 1");
  if (!(attack.temperature >= 0.0 && attack.temperature <= 2.0)) throw InvalidInput("temperature must lie in [0, 2]");
  if (attack.concurrency < 1) throw InvalidInput("concurrency must be >= 1");
  if (attack.rationality_trials < 1) throw InvalidInput("rationality trials must be >= 1");
  if (set_trials < 1) throw InvalidInput("set-level trials must be >= 1");
  for (int k : set_sizes)
    if (k < 1) throw InvalidInput("set sizes must be >= 1");
  for (const auto& [role, ep] : endpoints) {
    parse_role(role);
    if (ep.requests_per_minute < 0) throw InvalidInput("requests_per_minute must be >= 0 for " + role);
    if (!(ep.timeout_seconds > 0)) throw InvalidInput("timeout_seconds must be > 0 for " + role);
  }
}

std::filesystem::path RunConfig::cache_path() const {
  return cache_dir.empty() ? std::filesystem::path(workdir) / "cache" : std::filesystem::path(cache_dir);
}

json RunConfig::to_json() const {
  json eps = json::object();
  for (const auto& [role, ep] : endpoints)
    eps[role] = {{"base_url", ep.base_url},
                 {"model", ep.model},
                 {"requests_per_minute", ep.requests_per_minute},
                 {"timeout_seconds", ep.timeout_seconds}};
  return json{{"paths", {{"manifest", manifest}, {"workdir", workdir}, {"cache_dir", cache_dir}}},
              {"attack",
               {{"k", attack.num_alternatives},
                {"n", attack.top_n == kSelectAll ? json("all") : json(attack.top_n)},
                {"r", attack.repeats},
                {"temperature", attack.temperature},
                {"seed", attack.seed},
                {"concurrency", attack.concurrency},
                {"rationality_trials", attack.rationality_trials}}},
              {"endpoints", std::move(eps)},
              {"eval", {{"set_sizes", set_sizes}, {"trials", set_trials}}}};
}

void RunConfig::apply(const json& j) {
  try {
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      manifest = p.value("manifest", manifest);
      workdir = p.value("workdir", workdir);
      cache_dir = p.value("cache_dir", cache_dir);
    }
    if (j.contains("attack")) {
      const auto& a = j["attack"];
      attack.num_alternatives = a.value("k", attack.num_alternatives);
      if (a.contains("n")) {
        const auto& n = a["n"];
        if (n.is_string()) {
          if (n.get<std::string>() != "all") throw InvalidInput("attack.n must be a positive integer or \"all\"");
          attack.top_n = kSelectAll;
        } else {
          const auto v = n.get<std::int64_t>();
          if (v < 1) throw InvalidInput("attack.n must be >= 1");
          attack.top_n = static_cast<std::size_t>(v);
        }
      }
      attack.repeats = a.value("r", attack.repeats);
      attack.temperature = a.value("temperature", attack.temperature);
      attack.seed = a.value("seed", attack.seed);
      attack.concurrency = a.value("concurrency", attack.concurrency);
      attack.rationality_trials = a.value("rationality_trials", attack.rationality_trials);
    }
    if (j.contains("endpoints")) {
      for (const auto& [role, e] : j["endpoints"].items()) {
        auto& ep = endpoints[role];
        ep.base_url = e.value("base_url", ep.base_url);
        ep.model = e.value("model", ep.model);
        ep.requests_per_minute = e.value("requests_per_minute", ep.requests_per_minute);
        ep.timeout_seconds = e.value("timeout_seconds", ep.timeout_seconds);
      }
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      if (e.contains("set_sizes")) set_sizes = e["set_sizes"].get<std::vector<int>>();
      set_trials = e.value("trials", set_trials);
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& file, RunConfig base) {
  const auto text = read_file(file);
  base.apply(file.extension() == ".json" ? json::parse(text) : parse_toml(text));
  base.validate();
  return base;
}

}  // namespace kcmp
