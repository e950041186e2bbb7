#include "kcmp/simulation.hpp"

#include <cstdio>
#include <mutex>

#include "kcmp/error.hpp"
#include "kcmp/parallel.hpp"

namespace kcmp {

Scene make_scene(Rng& rng, int n_objects) {
  Scene scene;
  const auto& palette = sim_palette();
  const auto& vocab = sim_vocabulary();
  n_objects = std::clamp(n_objects, 1, 4);
  const auto colors = sample_without_replacement(palette.size(), static_cast<std::size_t>(n_objects), rng);
  const auto labels = sample_without_replacement(vocab.size(), static_cast<std::size_t>(n_objects), rng);
  const int qw = scene.width / 2;
  const int qh = scene.height / 2;
  for (int i = 0; i < n_objects; ++i) {
    SceneObject obj;
    obj.label = std::string(vocab[labels[i]]);
    obj.color_name = std::string(palette[colors[i]].name);
    obj.color = palette[colors[i]].rgb;
    obj.box.w = 8 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(qw - 10)));
    obj.box.h = 6 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(qh - 8)));
    const int ox = (i % 2) * qw;
    const int oy = (i / 2) * qh;
    obj.box.x = ox + 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(qw - obj.box.w - 1)));
    obj.box.y = oy + 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(qh - obj.box.h - 1)));
    scene.objects.push_back(std::move(obj));
  }
  return scene;
}

RgbImage render_scene(const Scene& scene) {
  RgbImage image(scene.width, scene.height, scene.background);
  for (const auto& obj : scene.objects)
    for (int y = obj.box.y; y < obj.box.y + obj.box.h; ++y)
      for (int x = obj.box.x; x < obj.box.x + obj.box.w; ++x) image.set(x, y, obj.color);
  return image;
}

std::vector<SimulatedAssistant::SceneMask> scene_masks(const Scene& scene) {
  std::vector<SimulatedAssistant::SceneMask> masks;
  for (const auto& obj : scene.objects) {
    Bitmap mask(scene.width, scene.height);
    for (int y = obj.box.y; y < obj.box.y + obj.box.h; ++y)
      for (int x = obj.box.x; x < obj.box.x + obj.box.w; ++x) mask.set(x, y);
    masks.push_back({std::move(mask), obj.label});
  }
  return masks;
}

std::vector<SyntheticSample> synthesize_pool(std::size_t n, std::uint64_t seed, std::string_view prefix) {
  std::vector<SyntheticSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%04zu", i);
    SyntheticSample s;
    s.record.sample_id = std::string(prefix) + id;
    auto rng = Rng::derive(seed, "scene/" + s.record.sample_id);
    s.scene = make_scene(rng);
    s.record.image_bytes = encode_png(render_scene(s.scene));
    s.record.source = "synthetic";
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SyntheticSample> synthesize_benchmark(std::size_t n_members, std::size_t n_nonmembers,
                                                  std::uint64_t seed) {
  auto pool = synthesize_pool(n_members + n_nonmembers, seed, "s");
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i].record.label = i < n_members ? 1 : 0;
  return pool;
}

std::set<std::string> labeled_members(const std::vector<SyntheticSample>& samples) {
  std::set<std::string> ids;
  for (const auto& s : samples)
    if (s.record.label == 1) ids.insert(s.record.sample_id);
  return ids;
}

SimulationRun run_simulation(const std::vector<SyntheticSample>& samples, const SimulationOptions& options) {
  SimulationRun run;
  auto assistant_backend = std::make_shared<SimulatedAssistant>(options.sim);
  run.target_backend = std::make_shared<SimulatedTarget>(options.sim);
  run.assistant = std::make_shared<ModelClient>(assistant_backend, std::make_shared<ResponseCache>());
  run.target = std::make_shared<ModelClient>(run.target_backend, std::make_shared<ResponseCache>());
  Backends backends{run.assistant, run.assistant, run.assistant, run.assistant, run.assistant, run.target};

  auto probe_opts = options.probe;
  probe_opts.num_alternatives = options.attack.num_alternatives;
  auto calib_opts = options.calibration;
  calib_opts.top_n = options.attack.top_n;
  calib_opts.rationality_trials = options.attack.rationality_trials;

  for (const auto& s : samples) assistant_backend->register_scene(s.record.image_bytes, scene_masks(s.scene));

  run.inputs.resize(samples.size());
  std::vector<std::optional<FailureRecord>> failures(samples.size());
  parallel_for(samples.size(), options.attack.concurrency, [&](std::size_t i) {
    const auto& s = samples[i];
    auto& input = run.inputs[i];
    input.sample_id = s.record.sample_id;
    input.label = s.record.label;
    try {
      const auto image = decode_image(s.record.image_bytes);
      auto set = build_probe_set(s.record, image, backends, probe_opts, options.attack.seed);
      for (const auto& p : set.probes) {
        const bool grounded = std::stoul(p.object_id.substr(1)) < options.grounded_objects;
        run.target_backend->register_probe(p, grounded);
      }
      auto calibration = calibrate_probe_set(set, s.record.image_bytes, backends, calib_opts);
      input.calibration = std::move(calibration.records);
      input.probes = std::move(set.probes);
    } catch (const Error& e) {
      failures[i] = FailureRecord{s.record.sample_id, "construction", e.what()};
    }
  });
  for (auto& f : failures)
    if (f) run.construction_failures.push_back(std::move(*f));

  run.outcome = run_attack(run.inputs, *run.target, options.attack);
  return run;
}

}  // namespace kcmp
