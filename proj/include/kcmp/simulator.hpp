#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kcmp/backends.hpp"
#include "kcmp/probes.hpp"
#include "kcmp/raster.hpp"
#include "kcmp/rng.hpp"

namespace kcmp {

struct SimulatorConfig {
  std::set<std::string> members;  // sample ids the simulated target "memorized"
  double p_member = 0.7;
  double p_nonmember = 0.25;
  std::optional<double> p_grounded;   // members' accuracy on grounded probes
  double noise_vs_temperature = 0.0;  // P(random answer) = clamp(slope * temperature)
  double reasoner_yes = 0.5;          // helper reasoner's P("yes")
  std::uint64_t seed = 0;

  void validate() const;
};

/// Answer policy of the simulated target. With probability `noise` the reply is
/// a uniformly random candidate; otherwise the true candidate with probability
/// `p_true`, else a uniformly random wrong one. Always consumes four draws so
/// runs that differ only in `noise` or `p_true` stay coupled.
std::string simulate_target_answer(const std::vector<std::string>& candidates, std::size_t true_index,
                                   double p_true, double noise, Rng& rng);

/// What the test harness tells the simulated target about a probe, outside the
/// prompt: which sample it belongs to and which candidate is right.
struct ProbeTruth {
  std::string sample_id;
  std::vector<std::string> candidates;
  std::size_t true_index = 0;
  bool grounded = false;
};

/// Target model stand-in. Each reply is a pure function of (seed, prompt,
/// image, nonce), so results do not depend on scheduling, and temperature only
/// enters through the noise slope.
class SimulatedTarget final : public ModelBackend {
 public:
  explicit SimulatedTarget(SimulatorConfig config);

  void register_probe(const Probe& probe, bool grounded = false);
  BackendResponse invoke(const BackendRequest& request) override;
  std::string backend_id() const override { return "sim-target"; }

  const SimulatorConfig& config() const { return config_; }

 private:
  SimulatorConfig config_;
  std::mutex mutex_;
  std::map<std::string, ProbeTruth> truths_;
};

struct NamedColor {
  std::string_view name;
  Rgb rgb;
};
/// Fixed palette shared by the synthetic scenes and the simulated helpers.
const std::vector<NamedColor>& sim_palette();
/// Object nouns used for labels and generated alternatives.
const std::vector<std::string_view>& sim_vocabulary();

/// Stand-in for every helper role (segmenter, captioner, generator, reasoner,
/// embedder). Segmentation uses registered scene masks when the image is known
/// and falls back to connected components of uniform non-background color.
/// Captions and embeddings are built from palette colors visible in the image.
class SimulatedAssistant final : public ModelBackend {
 public:
  explicit SimulatedAssistant(SimulatorConfig config);

  struct SceneMask {
    Bitmap mask;
    std::optional<std::string> label;
  };
  void register_scene(const std::string& image_png, std::vector<SceneMask> masks);

  BackendResponse invoke(const BackendRequest& request) override;
  std::string backend_id() const override { return "sim-assistant"; }

  /// Palette-histogram image embedding and palette-word text embedding, exposed for tests.
  static std::vector<double> embed_image(const RgbImage& image);
  static std::vector<double> embed_text(const std::string& text);

 private:
  BackendResponse segment(const BackendRequest& request);
  BackendResponse caption(const BackendRequest& request);
  BackendResponse generate(const BackendRequest& request);
  BackendResponse reason(const BackendRequest& request);
  BackendResponse embed(const BackendRequest& request);

  SimulatorConfig config_;
  std::mutex mutex_;
  std::map<std::string, std::vector<SceneMask>> scenes_;
};

/// Connected components (4-neighbour) of identical color, excluding the most
/// frequent color and pure black, with at least `min_area` pixels.
std::vector<Bitmap> uniform_color_components(const RgbImage& image, std::size_t min_area = 12);

}  // namespace kcmp
