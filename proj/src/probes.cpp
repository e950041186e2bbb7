#include "kcmp/probes.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/text.hpp"

namespace kcmp {

using nlohmann::json;

std::string_view probe_kind_name(ProbeKind kind) { return kind == ProbeKind::shape ? "shape" : "color"; }

ProbeKind parse_probe_kind(std::string_view name) {
  if (name == "shape") return ProbeKind::shape;
  if (name == "color") return ProbeKind::color;
  throw InvalidInput("unknown probe kind '" + std::string(name) + "'");
}

std::vector<std::string> Probe::alternatives() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (i != true_index) out.push_back(candidates[i]);
  return out;
}

namespace prompts {

std::string alternatives_instruction(int count) {
  return std::string(kAlternativesPrefix) + std::to_string(count) +
         " potential alternative objects that could plausibly fill the masked region. Reply with a "
         "comma-separated list of object names only.";
}

std::string observed_colors_instruction() {
  return std::string(kObservedColorsPrefix) +
         " shown in this image patch. Reply with a comma-separated list of color names only.";
}

std::string unobserved_colors_instruction(int count) {
  return std::string(kUnobservedColorsPrefix) + " for the object shown in this image patch: give at least " +
         std::to_string(count) +
         " colors the object could reasonably have but does not have here. Reply with a comma-separated "
         "list of color names only.";
}

std::string probe_prompt(ProbeKind kind, const std::vector<std::string>& candidates) {
  std::string out(kind == ProbeKind::shape ? kObjectProbeHeader : kColorProbeHeader);
  out += "\nOptions:\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out += static_cast<char>('A' + i);
    out += ". " + candidates[i] + "\n";
  }
  out += "Answer:";
  return out;
}

}  // namespace prompts

// ---- segmentation ----------------------------------------------------------

ObjectRegion make_region(std::string object_id, const RgbImage& image, Bitmap mask,
                         std::optional<std::string> label) {
  if (mask.width() != image.width() || mask.height() != image.height())
    throw InvalidInput("mask dimensions differ from image dimensions");
  ObjectRegion region;
  region.object_id = std::move(object_id);
  region.bbox = mask.bbox();
  if (region.bbox.w == 0) throw InvalidInput("empty object mask");
  region.crop = RgbImage(region.bbox.w, region.bbox.h);
  for (int y = 0; y < region.bbox.h; ++y)
    for (int x = 0; x < region.bbox.w; ++x)
      if (mask.test(region.bbox.x + x, region.bbox.y + y))
        region.crop.set(x, y, image.at(region.bbox.x + x, region.bbox.y + y));
  region.mask = std::move(mask);
  if (label) {
    auto normalized = normalize_text(*label);
    if (!normalized.empty()) region.label_text = std::move(normalized);
  }
  return region;
}

std::vector<ObjectRegion> segment_objects(const SampleRecord& sample, const RgbImage& image,
                                          ModelClient& segmenter) {
  BackendRequest request;
  request.role = Role::segmenter;
  request.instruction = "segment";
  request.image_png = encode_png(image);
  const auto response = segmenter.query(request);

  struct Candidate {
    Bitmap mask;
    std::optional<std::string> label;
    std::size_t area;
  };
  std::vector<Candidate> found;
  for (const auto& m : *response.masks) {
    if (m.width != image.width() || m.height != image.height())
      throw ProtocolError("segmenter returned a " + std::to_string(m.width) + "x" + std::to_string(m.height) +
                          " mask for a " + std::to_string(image.width()) + "x" +
                          std::to_string(image.height()) + " image (sample " + sample.sample_id + ")");
    auto mask = decode_rle(m.width, m.height, m.rle);
    const auto area = mask.count();
    if (area == 0) continue;
    found.push_back({std::move(mask), m.label, area});
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const Candidate& a, const Candidate& b) { return a.area > b.area; });

  std::vector<ObjectRegion> regions;
  regions.reserve(found.size());
  for (std::size_t i = 0; i < found.size(); ++i)
    regions.push_back(make_region("o" + std::to_string(i), image, std::move(found[i].mask), found[i].label));
  return regions;
}

// ---- raster preparation ----------------------------------------------------

RgbImage mask_object(const RgbImage& image, const ObjectRegion& region) {
  if (region.mask.width() != image.width() || region.mask.height() != image.height())
    throw InvalidInput("mask_object: mask dimensions differ from image dimensions");
  RgbImage out = image;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      if (region.mask.test(x, y)) out.set(x, y, kBlack);
  return out;
}

std::uint8_t luma601(Rgb c) {
  const double y = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
  return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

RgbImage grayscale_with_box(const RgbImage& image, const ObjectRegion& region, Rgb box_color,
                            int box_width) {
  if (region.mask.width() != image.width() || region.mask.height() != image.height())
    throw InvalidInput("grayscale_with_box: mask dimensions differ from image dimensions");
  const auto& b = region.bbox;
  if (b.x < 0 || b.y < 0 || b.w <= 0 || b.h <= 0 || b.x + b.w > image.width() || b.y + b.h > image.height())
    throw InvalidInput("grayscale_with_box: bbox outside image");
  if (box_width < 1) throw InvalidInput("grayscale_with_box: box width must be positive");

  RgbImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const auto g = luma601(image.at(x, y));
      out.set(x, y, {g, g, g});
    }
  for (int y = b.y; y < b.y + b.h; ++y)
    for (int x = b.x; x < b.x + b.w; ++x) {
      const int edge = std::min({x - b.x, b.x + b.w - 1 - x, y - b.y, b.y + b.h - 1 - y});
      if (edge < box_width) out.set(x, y, box_color);
    }
  return out;
}

// ---- probe assembly --------------------------------------------------------

namespace {

BackendRequest generator_request(std::string instruction, std::string image_png, double temperature,
                                 std::uint32_t nonce) {
  BackendRequest r;
  r.role = Role::generator;
  r.instruction = std::move(instruction);
  r.image_png = std::move(image_png);
  r.temperature = temperature;
  r.nonce = nonce;
  return r;
}

std::string probe_id_for(const std::string& sample_id, const std::string& object_id, ProbeKind kind) {
  return sample_id + "-" + object_id + "-" + std::string(probe_kind_name(kind));
}

Probe assemble(const SampleRecord& sample, const ObjectRegion& region, ProbeKind kind, std::string truth,
               std::vector<std::string> distractors, std::string artifact_png, Rng& rng) {
  Probe probe;
  probe.probe_id = probe_id_for(sample.sample_id, region.object_id, kind);
  probe.sample_id = sample.sample_id;
  probe.object_id = region.object_id;
  probe.kind = kind;
  probe.artifact_png = std::move(artifact_png);
  probe.crop_png = encode_png(region.crop);

  std::vector<std::string> options;
  options.push_back(truth);
  for (auto& d : distractors) options.push_back(std::move(d));
  probe.candidates = seeded_shuffle(std::move(options), rng);
  probe.true_index = static_cast<std::size_t>(
      std::find(probe.candidates.begin(), probe.candidates.end(), truth) - probe.candidates.begin());
  probe.prompt_text = prompts::probe_prompt(kind, probe.candidates);
  return probe;
}

}  // namespace

Probe build_shape_probe(const SampleRecord& sample, const RgbImage& image, const ObjectRegion& region,
                        ModelClient& generator, const ProbeOptions& options, Rng& rng) {
  const int k = options.num_alternatives;
  if (k < 1) throw InvalidInput("number of alternatives must be at least 1");

  std::string truth;
  if (region.label_text) {
    truth = normalize_text(*region.label_text);
  } else {
    auto reply = generator.query(generator_request(std::string(prompts::kLabelObject), encode_png(region.crop),
                                                   0.0, 0));
    auto items = parse_list_reply(*reply.text);
    if (!items.empty()) truth = items.front();
  }
  if (truth.empty())
    throw ProbeConstructionError("no label for object " + region.object_id + " of " + sample.sample_id);

  const auto masked_png = encode_png(mask_object(image, region));
  std::vector<std::string> alternatives;
  std::set<std::string> seen{truth};
  for (int attempt = 0; attempt <= options.refill_retries && static_cast<int>(alternatives.size()) < k;
       ++attempt) {
    auto reply = generator.query(generator_request(prompts::alternatives_instruction(k), masked_png,
                                                   options.generator_temperature,
                                                   static_cast<std::uint32_t>(attempt)));
    for (auto& item : parse_list_reply(*reply.text)) {
      if (static_cast<int>(alternatives.size()) == k) break;
      if (seen.insert(item).second) alternatives.push_back(std::move(item));
    }
  }
  if (static_cast<int>(alternatives.size()) < k)
    throw ProbeConstructionError("only " + std::to_string(alternatives.size()) + " distinct alternatives for " +
                                 sample.sample_id + "/" + region.object_id);

  return assemble(sample, region, ProbeKind::shape, std::move(truth), std::move(alternatives), masked_png, rng);
}

Probe build_color_probe(const SampleRecord& sample, const RgbImage& image, const ObjectRegion& region,
                        ModelClient& generator, const ProbeOptions& options, Rng& rng) {
  const int k = options.num_alternatives;
  if (k < 1) throw InvalidInput("number of alternatives must be at least 1");
  const auto crop_png = encode_png(region.crop);

  // E+: observed colors, in reply order, deduplicated.
  std::vector<std::string> observed;
  std::set<std::string> observed_set;
  for (int attempt = 0; attempt <= options.refill_retries && observed.empty(); ++attempt) {
    auto reply = generator.query(generator_request(prompts::observed_colors_instruction(), crop_png, 0.0,
                                                   static_cast<std::uint32_t>(attempt)));
    for (auto& c : parse_list_reply(*reply.text))
      if (observed_set.insert(c).second) observed.push_back(std::move(c));
  }
  if (observed.empty())
    throw ProbeConstructionError("no observed colors for " + sample.sample_id + "/" + region.object_id);

  // E- \ E+: plausible unobserved colors.
  std::vector<std::string> unobserved;
  std::set<std::string> unobserved_set;
  for (int attempt = 0; attempt <= options.refill_retries && static_cast<int>(unobserved.size()) < k;
       ++attempt) {
    auto reply = generator.query(generator_request(prompts::unobserved_colors_instruction(k + 2), crop_png,
                                                   options.generator_temperature,
                                                   static_cast<std::uint32_t>(attempt)));
    for (auto& c : parse_list_reply(*reply.text))
      if (!observed_set.count(c) && unobserved_set.insert(c).second) unobserved.push_back(std::move(c));
  }
  if (static_cast<int>(unobserved.size()) < k)
    throw ProbeConstructionError("only " + std::to_string(unobserved.size()) + " unobserved colors for " +
                                 sample.sample_id + "/" + region.object_id);

  auto truth = observed[static_cast<std::size_t>(rng.uniform_below(observed.size()))];
  std::vector<std::string> negatives;
  for (auto i : sample_without_replacement(unobserved.size(), static_cast<std::size_t>(k), rng))
    negatives.push_back(unobserved[i]);

  auto artifact = encode_png(grayscale_with_box(image, region, options.box_color, options.box_width));
  return assemble(sample, region, ProbeKind::color, std::move(truth), std::move(negatives), std::move(artifact),
                  rng);
}

ProbeSet build_probe_set(const SampleRecord& sample, const RgbImage& image, const Backends& backends,
                         const ProbeOptions& options, std::uint64_t seed) {
  ProbeSet set;
  set.sample_id = sample.sample_id;
  const auto regions = segment_objects(sample, image, backends.for_role(Role::segmenter));
  set.region_count = regions.size();
  int order = 0;
  for (const auto& region : regions) {
    for (ProbeKind kind : {ProbeKind::shape, ProbeKind::color}) {
      auto rng = Rng::derive(seed, probe_id_for(sample.sample_id, region.object_id, kind));
      try {
        Probe probe = kind == ProbeKind::shape
                          ? build_shape_probe(sample, image, region, backends.for_role(Role::generator), options, rng)
                          : build_color_probe(sample, image, region, backends.for_role(Role::generator), options, rng);
        probe.order = order++;
        set.probes.push_back(std::move(probe));
      } catch (const ProbeConstructionError& e) {
        set.failures.push_back({region.object_id, std::string(probe_kind_name(kind)), e.what()});
      }
    }
  }
  return set;
}

// ---- files -----------------------------------------------------------------

std::filesystem::path write_probe_set(const std::filesystem::path& dir, const ProbeSet& set) {
  validate_sample_id(set.sample_id);
  std::filesystem::create_directories(dir);
  json probes = json::array();
  for (const auto& p : set.probes) {
    const auto artifact = p.probe_id + ".png";
    const auto crop = p.probe_id + ".crop.png";
    write_file_atomic(dir / artifact, p.artifact_png);
    write_file_atomic(dir / crop, p.crop_png);
    probes.push_back({{"probe_id", p.probe_id},
                      {"kind", probe_kind_name(p.kind)},
                      {"object_id", p.object_id},
                      {"order", p.order},
                      {"artifact_path", artifact},
                      {"crop_path", crop},
                      {"candidates", p.candidates},
                      {"true_index", p.true_index},
                      {"prompt_text", p.prompt_text}});
  }
  json failures = json::array();
  for (const auto& f : set.failures)
    failures.push_back({{"object_id", f.object_id}, {"kind", f.kind}, {"reason", f.reason}});
  json doc{{"sample_id", set.sample_id},
           {"region_count", set.region_count},
           {"probes", std::move(probes)},
           {"failures", std::move(failures)}};
  const auto path = dir / (set.sample_id + ".json");
  write_file_atomic(path, doc.dump(2) + "\n");
  return path;
}

ProbeSet read_probe_set(const std::filesystem::path& file) {
  const auto doc = json::parse(read_file(file));
  const auto dir = file.parent_path();
  ProbeSet set;
  set.sample_id = doc.at("sample_id").get<std::string>();
  set.region_count = doc.value("region_count", std::size_t{0});
  for (const auto& pj : doc.at("probes")) {
    Probe p;
    p.probe_id = pj.at("probe_id").get<std::string>();
    p.sample_id = set.sample_id;
    p.object_id = pj.value("object_id", "");
    p.kind = parse_probe_kind(pj.at("kind").get<std::string>());
    p.order = pj.value("order", 0);
    p.artifact_png = read_file(dir / pj.at("artifact_path").get<std::string>());
    if (pj.contains("crop_path")) p.crop_png = read_file(dir / pj.at("crop_path").get<std::string>());
    p.candidates = pj.at("candidates").get<std::vector<std::string>>();
    p.true_index = pj.at("true_index").get<std::size_t>();
    p.prompt_text = pj.at("prompt_text").get<std::string>();
    if (p.true_index >= p.candidates.size())
      throw InvalidInput("probe " + p.probe_id + " has true_index outside its candidates");
    set.probes.push_back(std::move(p));
  }
  if (doc.contains("failures"))
    for (const auto& fj : doc["failures"])
      set.failures.push_back({fj.value("object_id", ""), fj.value("kind", ""), fj.value("reason", "")});
  return set;
}

}  // namespace kcmp
