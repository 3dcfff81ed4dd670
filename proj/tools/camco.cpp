// camco: run, compare and inspect joint camera-design experiments.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "camco/errors.hpp"
#include "camco/harness.hpp"
#include "camco/render.hpp"

namespace {

int cmd_run(const std::string& method, const std::string& scenario, std::uint64_t seed, const std::string& out,
            bool fast, const std::string& catalogue, const std::string& config, const std::string& camera,
            const CLI::App& sub) {
  camco::RunSpec spec;
  if (!config.empty()) {
    std::ifstream in(config);
    if (!in) throw camco::UsageError("cannot read config " + config);
    spec = camco::spec_from_manifest(camco::Json::parse(in));
  } else {
    spec.fast = fast;
    spec.config = camco::default_joint_config(fast);
  }
  // Explicit flags override the config file.
  if (sub.count("--method") || config.empty()) spec.method = camco::method_from_string(method);
  if (sub.count("--scenario") || config.empty()) spec.scenario = camco::scenario_preset(scenario);
  if (sub.count("--seed") || config.empty()) spec.seed = seed;
  if (sub.count("--catalogue")) {
    spec.catalogue_path = catalogue;
    spec.expected_catalogue_hash.reset();
  }
  if (sub.count("--camera")) spec.config.fixed_camera = camera;
  if (sub.count("--fast") && config.empty()) spec.fast = true;
  spec.out = out;

  const auto outcome = camco::run(spec);
  const auto& s = outcome.summary;
  std::cout << s.at("method").get<std::string>() << " on " << s.at("scenario").get<std::string>() << " (seed "
            << spec.seed << "): map " << s.at("map").get<double>() << ", tp_ratio " << s.at("tp_ratio").get<double>()
            << ", fitness " << s.at("fitness").get<double>() << ", sensor "
            << s.at("design").at("sensor").at("name").get<std::string>() << "\n";
  return 0;
}

int cmd_render(const std::string& scenario_name, std::uint64_t seed, const std::string& camera, int episode, int frame,
               double exposure, double gain, const std::string& out, const std::string& episode_json) {
  const auto& cat = camco::SensorCatalogue::builtin();
  const auto design = camera == "flir" ? camco::flir_design(cat) : camco::basler_design(cat);
  const auto scenario = camco::scenario_preset(scenario_name);
  camco::WorldConfig wc;
  wc.illumination = scenario.illumination;
  const auto world = camco::generate_world(wc, seed, episode);
  if (!episode_json.empty()) {
    std::ofstream js(episode_json);
    js << camco::to_json(world).dump(2) << "\n";
  }
  const auto bundle = camco::render_base_frame(world, design, frame, wc);
  const camco::DynamicParams params{exposure, gain};
  const auto pred = camco::rescale_for_pixel_size(params, design.sensor.pixel_um, scenario.calibration.p0_um);
  const auto img = camco::forward_render(bundle, pred, design, scenario, seed);
  camco::write_pgm(img, out);
  std::cout << img.width << "x" << img.height << " frame, illumination " << bundle.illumination_level << ", "
            << bundle.ground_truth.objects.size() << " visible of " << bundle.in_fov_180_count << " targets\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint camera hardware / exposure-control / perception optimisation"};
  app.require_subcommand(1);

  std::string method = "joint-dfgrad", scenario = "calibrated", out, catalogue, config, camera = "basler";
  std::uint64_t seed = 0;
  bool fast = false;
  auto* run = app.add_subcommand("run", "Run one method on one scenario");
  run->add_option("--method", method, "joint-dfgrad | fixed-camera+neural | ga-camera+average | ablation-no-ga | "
                                      "ablation-fixed-perturb | ablation-frozen-detector");
  run->add_option("--scenario", scenario, "calibrated | noise-x10 | noise-x20 | blur-x2 | blur-x4");
  run->add_option("--seed", seed, "Run seed");
  run->add_option("--out", out, "Output directory")->required();
  run->add_flag("--fast", fast, "Reduced 6 x 12 x 30 schedule (not paper scale)");
  run->add_option("--catalogue", catalogue, "Sensor catalogue CSV (default: built in)");
  run->add_option("--config", config, "Run manifest to reproduce");
  run->add_option("--camera", camera, "Fixed camera for fixed-camera+neural: basler | flir");

  std::vector<std::string> dirs;
  std::string csv;
  auto* cmp = app.add_subcommand("compare", "Tabulate completed runs of one scenario");
  cmp->add_option("dirs", dirs, "Run directories")->required()->expected(2, -1);
  cmp->add_option("--csv", csv, "Also write the table as CSV");

  int episode = 0, frame = 0;
  double exposure = 5.0, gain = 10.0;
  std::string pgm = "frame.pgm", episode_json;
  auto* ren = app.add_subcommand("render", "Render one frame to PGM for inspection");
  ren->add_option("--scenario", scenario);
  ren->add_option("--seed", seed);
  ren->add_option("--camera", camera);
  ren->add_option("--episode", episode);
  ren->add_option("--frame", frame);
  ren->add_option("--exposure", exposure, "ms");
  ren->add_option("--gain", gain, "dB");
  ren->add_option("--out", pgm);
  ren->add_option("--episode-json", episode_json, "Write the episode replay file here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(method, scenario, seed, out, fast, catalogue, config, camera, *run);
    if (*cmp) {
      std::cout << camco::compare({dirs.begin(), dirs.end()},
                                  csv.empty() ? std::nullopt : std::optional<std::filesystem::path>(csv));
      return 0;
    }
    if (*ren) return cmd_render(scenario, seed, camera, episode, frame, exposure, gain, pgm, episode_json);
  } catch (const camco::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
