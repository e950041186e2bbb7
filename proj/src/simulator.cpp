#include "kcmp/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/text.hpp"

namespace kcmp {

void SimulatorConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_member) || !prob(p_nonmember) || !prob(reasoner_yes))
    throw InvalidInput("simulator probabilities must lie in [0, 1]");
  if (p_grounded && (!prob(*p_grounded) || *p_grounded < p_member))
    throw InvalidInput("p_grounded must lie in [p_member, 1]");
  if (noise_vs_temperature < 0.0) throw InvalidInput("noise slope must be non-negative");
}

std::string simulate_target_answer(const std::vector<std::string>& candidates, std::size_t true_index,
                                   double p_true, double noise, Rng& rng) {
  const auto n = candidates.size();
  if (n == 0 || true_index >= n) throw InvalidInput("simulate_target_answer: bad candidate list");
  const double u_noise = rng.uniform01();
  const double u_true = rng.uniform01();
  const auto any = static_cast<std::size_t>(rng.uniform_below(n));
  const auto wrong = n > 1 ? static_cast<std::size_t>(rng.uniform_below(n - 1)) : 0;
  if (u_noise < noise) return candidates[any];
  if (u_true < p_true || n == 1) return candidates[true_index];
  return candidates[wrong >= true_index ? wrong + 1 : wrong];
}

namespace {

std::string probe_key(std::string_view prompt, std::string_view image_png) {
  std::string material(prompt);
  material.push_back('\0');
  material += sha256_hex(image_png);
  return sha256_hex(material);
}

Rng request_rng(std::uint64_t seed, const BackendRequest& r, std::string_view salt) {
  // Temperature is deliberately excluded: it acts only through the noise slope.
  std::string material(role_name(r.role));
  material += '\0' + r.instruction + '\0' + (r.image_png.empty() ? std::string() : sha256_hex(r.image_png)) +
              '\0' + std::to_string(r.nonce) + '\0' + std::string(salt);
  return Rng::derive(seed, material);
}

BackendResponse text_reply(std::string text) {
  BackendResponse r;
  r.text = std::move(text);
  return r;
}

int count_after(std::string_view text, std::string_view prefix) {
  auto pos = text.find(prefix);
  if (pos == std::string_view::npos) return 3;
  pos += prefix.size();
  while (pos < text.size() && !std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
  int n = 0;
  while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) n = n * 10 + (text[pos++] - '0');
  return n > 0 ? n : 3;
}

/// Palette colors present in the image, most frequent first.
std::vector<std::string> visible_colors(const RgbImage& image) {
  const auto& palette = sim_palette();
  std::vector<std::size_t> counts(palette.size(), 0);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const auto c = image.at(x, y);
      for (std::size_t i = 0; i < palette.size(); ++i)
        if (palette[i].rgb == c) {
          ++counts[i];
          break;
        }
    }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < palette.size(); ++i)
    if (counts[i] > 0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  std::vector<std::string> names;
  for (auto i : order) names.emplace_back(palette[i].name);
  return names;
}

}  // namespace

// ---- target ----------------------------------------------------------------

SimulatedTarget::SimulatedTarget(SimulatorConfig config) : config_(std::move(config)) { config_.validate(); }

void SimulatedTarget::register_probe(const Probe& probe, bool grounded) {
  std::lock_guard lock(mutex_);
  truths_[probe_key(probe.prompt_text, probe.artifact_png)] = {probe.sample_id, probe.candidates, probe.true_index,
                                                                grounded};
}

BackendResponse SimulatedTarget::invoke(const BackendRequest& request) {
  if (request.role != Role::target) throw ProtocolError("simulated target only answers target requests");
  ProbeTruth truth;
  {
    std::lock_guard lock(mutex_);
    auto it = truths_.find(probe_key(request.instruction, request.image_png));
    if (it == truths_.end()) return text_reply("I am not sure.");
    truth = it->second;
  }
  double p = config_.p_nonmember;
  if (config_.members.count(truth.sample_id))
    p = (truth.grounded && config_.p_grounded) ? *config_.p_grounded : config_.p_member;
  const double noise = std::clamp(config_.noise_vs_temperature * request.temperature, 0.0, 1.0);
  auto rng = request_rng(config_.seed, request, "target");
  return text_reply(simulate_target_answer(truth.candidates, truth.true_index, p, noise, rng));
}

// ---- palette & vocabulary --------------------------------------------------

const std::vector<NamedColor>& sim_palette() {
  static const std::vector<NamedColor> palette{
      {"red", {220, 40, 40}},     {"green", {40, 170, 60}},  {"blue", {40, 80, 220}},
      {"yellow", {235, 210, 40}}, {"orange", {240, 140, 30}}, {"purple", {140, 60, 180}},
      {"pink", {240, 130, 180}},  {"brown", {130, 80, 40}},  {"white", {245, 245, 245}},
      {"cyan", {40, 200, 210}},
  };
  return palette;
}

const std::vector<std::string_view>& sim_vocabulary() {
  static const std::vector<std::string_view> vocab{
      "cup",  "plate",  "bowl",   "vase",   "book",  "lamp",     "chair",  "clock",
      "bottle", "phone", "pillow", "basket", "candle", "kettle", "shoe",  "hat",
      "umbrella", "guitar", "teddy bear", "laptop", "backpack", "flower pot", "mug", "toy car",
  };
  return vocab;
}

// ---- assistant -------------------------------------------------------------

SimulatedAssistant::SimulatedAssistant(SimulatorConfig config) : config_(std::move(config)) { config_.validate(); }

void SimulatedAssistant::register_scene(const std::string& image_png, std::vector<SceneMask> masks) {
  std::lock_guard lock(mutex_);
  scenes_[sha256_hex(image_png)] = std::move(masks);
}

BackendResponse SimulatedAssistant::invoke(const BackendRequest& request) {
  switch (request.role) {
    case Role::segmenter: return segment(request);
    case Role::captioner: return caption(request);
    case Role::generator: return generate(request);
    case Role::reasoner: return reason(request);
    case Role::embedder: return embed(request);
    case Role::target: break;
  }
  throw ProtocolError("simulated assistant does not play the target role");
}

std::vector<Bitmap> uniform_color_components(const RgbImage& image, std::size_t min_area) {
  const int w = image.width();
  const int h = image.height();
  std::map<Rgb, std::size_t> freq;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) ++freq[image.at(x, y)];
  Rgb background = kBlack;
  std::size_t best = 0;
  for (const auto& [c, n] : freq)
    if (n > best) {
      best = n;
      background = c;
    }

  std::vector<int> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<Bitmap> out;
  std::vector<std::pair<int, int>> stack;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      const auto c = image.at(x0, y0);
      if (seen[y0 * w + x0] || c == background || c == kBlack) continue;
      Bitmap mask(w, h);
      std::size_t area = 0;
      stack.assign(1, {x0, y0});
      seen[y0 * w + x0] = 1;
      while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        mask.set(x, y);
        ++area;
        const int nx[4] = {x + 1, x - 1, x, x};
        const int ny[4] = {y, y, y + 1, y - 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
          auto& s = seen[ny[k] * w + nx[k]];
          if (s || image.at(nx[k], ny[k]) != c) continue;
          s = 1;
          stack.emplace_back(nx[k], ny[k]);
        }
      }
      if (area >= min_area) out.push_back(std::move(mask));
    }
  return out;
}

BackendResponse SimulatedAssistant::segment(const BackendRequest& request) {
  std::vector<SceneMask> masks;
  {
    std::lock_guard lock(mutex_);
    if (auto it = scenes_.find(sha256_hex(request.image_png)); it != scenes_.end()) masks = it->second;
  }
  if (masks.empty())
    for (auto& m : uniform_color_components(decode_image(request.image_png))) masks.push_back({std::move(m), {}});
  BackendResponse r;
  r.masks.emplace();
  for (const auto& m : masks) r.masks->push_back({m.mask.width(), m.mask.height(), encode_rle(m.mask), m.label});
  return r;
}

BackendResponse SimulatedAssistant::caption(const BackendRequest& request) {
  if (request.image_png.empty()) return text_reply("an empty scene.");
  const auto colors = visible_colors(decode_image(request.image_png));
  if (colors.empty()) return text_reply("a plain image with no distinct objects.");
  if (request.instruction.find("blacked-out") != std::string::npos) {
    return text_reply("a scene where one region is hidden; around it are " + join(colors, ", ") + " objects.");
  }
  if (colors.size() == 1) return text_reply("a photo of a " + colors[0] + " object on a plain background.");
  return text_reply("a photo of a " + colors[0] + " object and a " + colors[1] + " object on a plain background.");
}

BackendResponse SimulatedAssistant::generate(const BackendRequest& request) {
  auto rng = request_rng(config_.seed, request, "generator");
  const auto& text = request.instruction;
  const auto& vocab = sim_vocabulary();
  const auto& palette = sim_palette();

  if (text.rfind(prompts::kAlternativesPrefix, 0) == 0) {
    const int k = std::min<int>(count_after(text, prompts::kAlternativesPrefix), static_cast<int>(vocab.size()));
    std::vector<std::string> names;
    for (auto i : sample_without_replacement(vocab.size(), static_cast<std::size_t>(k), rng))
      names.emplace_back(vocab[i]);
    return text_reply(join(names, ", "));
  }
  if (text.rfind(prompts::kObservedColorsPrefix, 0) == 0) {
    const auto colors = visible_colors(decode_image(request.image_png));
    return text_reply(colors.empty() ? "gray" : colors.front());
  }
  if (text.rfind(prompts::kUnobservedColorsPrefix, 0) == 0) {
    const int k = std::min<int>(count_after(text, "at least"), static_cast<int>(palette.size()));
    std::vector<std::string> names;
    for (auto i : sample_without_replacement(palette.size(), static_cast<std::size_t>(k), rng))
      names.emplace_back(palette[i].name);
    return text_reply(join(names, ", "));
  }
  if (text == prompts::kLabelObject) {
    const auto h = fnv1a64(request.image_png);
    return text_reply(std::string(vocab[h % vocab.size()]));
  }
  return text_reply("unknown request");
}

BackendResponse SimulatedAssistant::reason(const BackendRequest& request) {
  auto rng = request_rng(config_.seed, request, "reasoner");
  return text_reply(rng.bernoulli(config_.reasoner_yes) ? "Yes." : "No.");
}

std::vector<double> SimulatedAssistant::embed_image(const RgbImage& image) {
  const auto& palette = sim_palette();
  std::vector<double> v(palette.size() + 8, 0.0);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const auto c = image.at(x, y);
      for (std::size_t i = 0; i < palette.size(); ++i)
        if (palette[i].rgb == c) {
          v[i] += 1.0;
          break;
        }
    }
  return v;
}

std::vector<double> SimulatedAssistant::embed_text(const std::string& text) {
  const auto& palette = sim_palette();
  std::vector<double> v(palette.size() + 8, 0.0);
  for (auto word : tokenize_words(text)) {
    while (!word.empty() && !std::isalnum(static_cast<unsigned char>(word.back()))) word.pop_back();
    auto it = std::find_if(palette.begin(), palette.end(), [&](const NamedColor& c) { return c.name == word; });
    if (it != palette.end())
      v[static_cast<std::size_t>(it - palette.begin())] += 1.0;
    else if (!word.empty())
      v[palette.size() + fnv1a64(word) % 8] += 0.1;
  }
  return v;
}

BackendResponse SimulatedAssistant::embed(const BackendRequest& request) {
  BackendResponse r;
  r.vector = request.image_png.empty() ? embed_text(request.instruction) : embed_image(decode_image(request.image_png));
  return r;
}

}  // namespace kcmp
