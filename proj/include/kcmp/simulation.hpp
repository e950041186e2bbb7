#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kcmp/attack.hpp"
#include "kcmp/calibration.hpp"
#include "kcmp/probes.hpp"
#include "kcmp/sample.hpp"
#include "kcmp/simulator.hpp"

namespace kcmp {

struct SceneObject {
  std::string label;
  std::string color_name;
  Rgb color;
  BoundingBox box;
};

/// Synthetic image: axis-aligned objects of distinct palette colors, one per
/// quadrant, on a uniform background that is not a palette color.
struct Scene {
  int width = 64;
  int height = 48;
  Rgb background{64, 64, 64};
  std::vector<SceneObject> objects;
};

Scene make_scene(Rng& rng, int n_objects = 4);
RgbImage render_scene(const Scene& scene);
std::vector<SimulatedAssistant::SceneMask> scene_masks(const Scene& scene);

struct SyntheticSample {
  SampleRecord record;  // image held in record.image_bytes (PNG)
  Scene scene;
};

/// `n` scenes with ids "{prefix}{index:04}" and no labels.
std::vector<SyntheticSample> synthesize_pool(std::size_t n, std::uint64_t seed, std::string_view prefix = "s");

/// `n_members` samples labeled 1 followed by `n_nonmembers` labeled 0.
std::vector<SyntheticSample> synthesize_benchmark(std::size_t n_members, std::size_t n_nonmembers,
                                                  std::uint64_t seed);

/// Ids of samples labeled 1, for SimulatorConfig::members.
std::set<std::string> labeled_members(const std::vector<SyntheticSample>& samples);

struct SimulationOptions {
  SimulatorConfig sim;
  AttackConfig attack;
  ProbeOptions probe;
  CalibrationOptions calibration;
  /// Objects with area rank below this are described by the simulated
  /// captioner and count as grounded for the simulated target.
  std::size_t grounded_objects = 2;
};

struct SimulationRun {
  std::vector<SampleInputs> inputs;
  AttackOutcome outcome;
  std::vector<FailureRecord> construction_failures;
  std::shared_ptr<SimulatedTarget> target_backend;
  std::shared_ptr<ModelClient> target;
  std::shared_ptr<ModelClient> assistant;
};

/// Full pipeline (segment, probe, calibrate, attack) against simulator
/// backends with in-memory caches. Deterministic for fixed seeds.
SimulationRun run_simulation(const std::vector<SyntheticSample>& samples, const SimulationOptions& options);

}  // namespace kcmp
