#include "kcmp/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/text.hpp"

namespace kcmp {

using nlohmann::json;

std::string prompts::rationality_instruction(const std::string& masked_description,
                                             const std::string& alternative) {
  return std::string(kRationalityPrefix) +
         " Part of the scene is hidden by a mask.\n"
         "Description: " + masked_description + "\n"
         "Question: is \"" + alternative +
         "\" semantically appropriate to fill the masked region described above? Answer yes or no.";
}

std::string caption_image(const std::string& image_png, ModelClient& captioner, std::string_view instruction) {
  BackendRequest request;
  request.role = Role::captioner;
  request.instruction = std::string(instruction);
  request.image_png = image_png;
  auto response = captioner.query(request);
  auto text = normalize_text(*response.text);
  if (text.empty()) throw BackendError("captioner returned an empty reply", 0, request.cache_key());
  return *response.text;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ProtocolError("embedding length mismatch: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  const double na = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
  const double nb = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
  if (na == 0.0 || nb == 0.0) throw DegenerateEmbedding("zero-norm embedding vector");
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double clip_relevance(const std::string& caption, const std::string& crop_png, ModelClient& embedder) {
  BackendRequest text_req;
  text_req.role = Role::embedder;
  text_req.instruction = caption;
  BackendRequest image_req;
  image_req.role = Role::embedder;
  image_req.image_png = crop_png;
  const auto tv = embedder.query(text_req);
  const auto iv = embedder.query(image_req);
  return cosine_similarity(*tv.vector, *iv.vector);
}

std::optional<bool> parse_yes_no(std::string_view reply) {
  auto s = normalize_text(reply);
  auto strip = [](char c) { return c == '.' || c == '!' || c == '"' || c == '\'' || c == ',' || c == '`'; };
  while (!s.empty() && strip(s.back())) s.pop_back();
  while (!s.empty() && strip(s.front())) s.erase(0, 1);
  if (s == "yes") return true;
  if (s == "no") return false;
  return std::nullopt;
}

RationalityScore rationality(const std::string& masked_description, const std::string& alternative,
                             ModelClient& reasoner, int trials, double temperature) {
  if (trials < 1) throw InvalidInput("rationality needs at least one trial");
  const auto instruction = prompts::rationality_instruction(masked_description, alternative);
  int affirmative = 0;
  int counted = 0;
  for (int t = 0; t < trials; ++t) {
    BackendRequest request;
    request.role = Role::reasoner;
    request.instruction = instruction;
    request.temperature = temperature;
    request.max_tokens = 8;
    request.nonce = static_cast<std::uint32_t>(t);
    auto verdict = parse_yes_no(*reasoner.query(request).text);
    if (!verdict) {
      request.instruction = instruction + std::string(prompts::kRationalityReprompt);
      verdict = parse_yes_no(*reasoner.query(request).text);
    }
    if (!verdict) continue;
    ++counted;
    affirmative += *verdict ? 1 : 0;
  }
  if (counted == 0)
    throw RationalityUnavailable("no parseable plausibility judgment for '" + alternative + "'");
  return {alternative, static_cast<double>(affirmative) / counted, counted};
}

double filter_score(double u, std::span<const double> rs) {
  if (rs.empty()) throw InvalidInput("filter_score needs at least one rationality score");
  return (u + std::accumulate(rs.begin(), rs.end(), 0.0)) / static_cast<double>(rs.size() + 1);
}

std::vector<CalibrationRecord> select_top_n(std::vector<CalibrationRecord> records, std::size_t n) {
  if (n == 0) throw InvalidInput("top-N selection needs N >= 1");
  std::stable_sort(records.begin(), records.end(), [](const CalibrationRecord& a, const CalibrationRecord& b) {
    if (a.filter_f != b.filter_f) return a.filter_f > b.filter_f;
    return a.order < b.order;
  });
  for (std::size_t i = 0; i < records.size(); ++i) records[i].selected = i < n;
  return records;
}

CalibrationResult calibrate_probe_set(const ProbeSet& set, const std::string& sample_image_png,
                                      const Backends& backends, const CalibrationOptions& options) {
  CalibrationResult result;
  result.captions.sample_id = set.sample_id;
  result.captions.caption = caption_image(sample_image_png, backends.for_role(Role::captioner));

  std::vector<CalibrationRecord> records;
  for (const auto& probe : set.probes) {
    try {
      const auto description =
          caption_image(probe.artifact_png, backends.for_role(Role::captioner), prompts::kDescribeMasked);
      result.captions.masked_descriptions[probe.probe_id] = description;

      CalibrationRecord rec;
      rec.probe_id = probe.probe_id;
      rec.order = probe.order;
      rec.relevance_u = clip_relevance(result.captions.caption, probe.crop_png, backends.for_role(Role::embedder));
      std::vector<double> rs;
      for (const auto& alt : probe.alternatives()) {
        rec.rationality.push_back(rationality(description, alt, backends.for_role(Role::reasoner),
                                              options.rationality_trials, options.reasoner_temperature));
        rs.push_back(rec.rationality.back().r);
      }
      rec.filter_f = filter_score(rec.relevance_u, rs);
      records.push_back(std::move(rec));
    } catch (const RationalityUnavailable& e) {
      result.excluded.emplace_back(probe.probe_id, e.what());
    } catch (const DegenerateEmbedding& e) {
      result.excluded.emplace_back(probe.probe_id, e.what());
    }
  }
  result.records = select_top_n(std::move(records), options.top_n);
  return result;
}

void write_calibration(const std::filesystem::path& file, const CalibrationResult& result) {
  std::ostringstream out;
  for (const auto& rec : result.records) {
    json rs = json::array();
    json alts = json::array();
    json trials = json::array();
    for (const auto& r : rec.rationality) {
      rs.push_back(r.r);
      alts.push_back(r.alternative);
      trials.push_back(r.trials);
    }
    out << json{{"probe_id", rec.probe_id}, {"order", rec.order},  {"u", rec.relevance_u},
                {"r", rs},                  {"alternatives", alts}, {"trials", trials},
                {"f", rec.filter_f},        {"selected", rec.selected}}
               .dump()
        << '\n';
  }
  for (const auto& [probe_id, reason] : result.excluded)
    out << json{{"probe_id", probe_id}, {"excluded", reason}, {"selected", false}}.dump() << '\n';
  write_file_atomic(file, out.str());
}

std::vector<CalibrationRecord> read_calibration(const std::filesystem::path& file) {
  std::vector<CalibrationRecord> records;
  std::istringstream in(read_file(file));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    if (j.contains("excluded")) continue;
    CalibrationRecord rec;
    rec.probe_id = j.at("probe_id").get<std::string>();
    rec.order = j.value("order", 0);
    rec.relevance_u = j.at("u").get<double>();
    const auto rs = j.at("r").get<std::vector<double>>();
    const auto alts = j.value("alternatives", std::vector<std::string>(rs.size()));
    const auto trials = j.value("trials", std::vector<int>(rs.size(), 0));
    for (std::size_t i = 0; i < rs.size(); ++i)
      rec.rationality.push_back({i < alts.size() ? alts[i] : "", rs[i], i < trials.size() ? trials[i] : 0});
    rec.filter_f = j.at("f").get<double>();
    rec.selected = j.at("selected").get<bool>();
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace kcmp
