#include "camco/harness.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "camco/errors.hpp"

namespace camco {

namespace {

std::string fmt(double v, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

JointConfig default_joint_config(bool fast) {
  JointConfig c;
  if (fast) {
    c.hardware.population = 6;
    c.hardware.generations = 12;
    c.train.schedule.k = 30;
    c.test_frames = 90;
    c.pretrain_designs = 72;
    c.pretrain_frames = 30;
  }
  return c;
}

RunSpec spec_from_manifest(const Json& m) {
  RunSpec s;
  try {
    s.method = method_from_string(m.at("method").get<std::string>());
    s.scenario = scenario_from_json(m.at("scenario"));
    s.seed = m.at("seed").get<std::uint64_t>();
    s.fast = m.value("fast", false);
    s.config = joint_config_from_json(m.at("config"));
    s.config.method = s.method;
    if (m.contains("catalogue")) {
      const auto& c = m.at("catalogue");
      const auto source = c.at("source").get<std::string>();
      if (source != "builtin") s.catalogue_path = source;
      s.expected_catalogue_hash = c.at("hash").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return s;
}

RunOutcome run(const RunSpec& spec) {
  const SensorCatalogue catalogue =
      spec.catalogue_path ? SensorCatalogue::load_csv(*spec.catalogue_path) : SensorCatalogue::builtin();
  const std::string cat_hash = catalogue.hash();
  if (spec.expected_catalogue_hash && *spec.expected_catalogue_hash != cat_hash) {
    throw ConfigError("sensor catalogue hash " + cat_hash + " does not match the manifest's " +
                      *spec.expected_catalogue_hash);
  }
  JointConfig cfg = spec.config;
  cfg.method = spec.method;
  cfg.validate();
  spec.scenario.validate();

  RunOutcome outcome;
  Json& manifest = outcome.manifest;
  manifest["method"] = to_string(spec.method);
  manifest["scenario"] = to_json(spec.scenario);
  manifest["seed"] = spec.seed;
  manifest["fast"] = spec.fast;
  manifest["catalogue"] = {{"source", spec.catalogue_path ? spec.catalogue_path->string() : "builtin"},
                           {"entries", catalogue.size()},
                           {"hash", cat_hash}};
  manifest["config"] = to_json(cfg);

  const auto& out = spec.out;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
    if (spec.write_checkpoints) std::filesystem::create_directories(out / "checkpoints");
  }

  GenerationCallback on_gen;
  if (!out.empty() && spec.write_checkpoints) {
    on_gen = [&](int g, TrainState& state) {
      std::vector<nn::ParamRef> all = state.acc_params;
      all.insert(all.end(), state.detector_params.begin(), state.detector_params.end());
      char name[32];
      std::snprintf(name, sizeof name, "gen_%02d", g);
      nn::save_checkpoint(out / "checkpoints" / name, all);
    };
  }

  outcome.result = joint_optimise(spec.scenario, cfg, catalogue, spec.seed, on_gen);
  const auto& res = outcome.result;

  const auto& final_gen = res.generations.back();
  double final_exposure = 0.0;
  for (const auto& c : final_gen) final_exposure += c.mean_exposure_ms;
  final_exposure /= static_cast<double>(final_gen.size());

  Json& summary = outcome.summary;
  summary["method"] = to_string(spec.method);
  summary["scenario"] = spec.scenario.name;
  summary["seed"] = spec.seed;
  summary["fast"] = spec.fast;
  summary["catalogue_hash"] = cat_hash;
  summary["design"] = to_json(res.best);
  summary["train_fitness"] = res.best_fitness;
  summary["map"] = res.test.map_score;
  summary["tp_ratio"] = res.test.tp_ratio_180;
  summary["fitness"] = res.test.weighted_fitness;
  summary["test"] = {{"frames", res.test.frames},
                     {"map", res.test.map_score},
                     {"tp_ratio", res.test.tp_ratio_180},
                     {"weighted_fitness", res.test.weighted_fitness},
                     {"mean_exposure_ms", res.test.mean_exposure_ms},
                     {"mean_gain_db", res.test.mean_gain_db}};
  summary["final_generation_mean_exposure_ms"] = final_exposure;
  summary["frames_rendered"] = res.frames_rendered;
  summary["ga_loss_applications"] = res.ga_applications;
  summary["pretrain_frames"] = res.pretrain_frames;
  summary["average_ae_zero_mean_events"] = res.average_zero_mean_events;

  if (out.empty()) return outcome;

  write_text(out / "summary.json", summary.dump(2) + "\n");

  if (spec.write_history) {
    std::ostringstream h;
    h << "step,scenario,design_id,E_t,G_t,map,tp_ratio,fitness,generation,candidate,frame,ga_applied,l_task,l_ga,"
         "E_pred,G_pred\n";
    for (const auto& r : res.history) {
      const auto& rec = r.record;
      h << r.step << ',' << csv_field(spec.scenario.name) << ',' << r.design_id << ','
        << fmt(rec.rendered.exposure_ms) << ',' << fmt(rec.rendered.gain_db) << ',' << fmt(rec.report.map_score)
        << ',' << fmt(rec.report.tp_ratio_180) << ',' << fmt(rec.report.weighted_fitness) << ',' << r.generation
        << ',' << r.candidate << ',' << r.frame << ',' << (rec.ga_applied ? 1 : 0) << ',' << fmt(rec.l_task) << ','
        << fmt(rec.l_ga) << ',' << fmt(rec.predicted.exposure_ms) << ',' << fmt(rec.predicted.gain_db) << '\n';
    }
    write_text(out / "history.csv", h.str());
  }

  std::ostringstream series;
  series << "generation,best_fitness,mean_fitness,best_design_id,best_pixel_um,best_focal_mm,mean_exposure_ms\n";
  std::ostringstream cands;
  cands << "generation,candidate,design_id,x_m,z_m,focal_mm,sensor,pixel_um,width_mm,height_mm,evaluated_fitness,"
           "fitness,mean_exposure_ms,mean_gain_db\n";
  const int n = cfg.hardware.population;
  for (const auto& gen : res.generations) {
    std::size_t best = 0;
    double mean = 0.0, mean_e = 0.0;
    for (std::size_t c = 0; c < gen.size(); ++c) {
      if (gen[c].fitness > gen[best].fitness) best = c;
      mean += gen[c].fitness;
      mean_e += gen[c].mean_exposure_ms;
      const auto& d = gen[c].design;
      cands << gen[c].generation << ',' << gen[c].candidate << ',' << gen[c].generation * n + gen[c].candidate << ','
            << fmt(d.x_m) << ',' << fmt(d.z_m) << ',' << fmt(d.focal_mm) << ',' << csv_field(d.sensor.name) << ','
            << fmt(d.sensor.pixel_um) << ',' << fmt(d.sensor.width_mm) << ',' << fmt(d.sensor.height_mm) << ','
            << fmt(gen[c].evaluated_fitness) << ',' << fmt(gen[c].fitness) << ',' << fmt(gen[c].mean_exposure_ms)
            << ',' << fmt(gen[c].mean_gain_db) << '\n';
    }
    const auto k = static_cast<double>(gen.size());
    series << gen[best].generation << ',' << fmt(gen[best].fitness) << ',' << fmt(mean / k) << ','
           << gen[best].generation * n + gen[best].candidate << ',' << fmt(gen[best].design.sensor.pixel_um) << ','
           << fmt(gen[best].design.focal_mm) << ',' << fmt(mean_e / k) << '\n';
  }
  write_text(out / "fitness_series.csv", series.str());
  write_text(out / "candidates.csv", cands.str());
  return outcome;
}

std::string compare(const std::vector<std::filesystem::path>& run_dirs,
                    const std::optional<std::filesystem::path>& csv_out) {
  if (run_dirs.size() < 2) throw UsageError("compare needs at least two run directories");
  std::vector<Json> runs;
  for (const auto& d : run_dirs) runs.push_back(read_json(d / "summary.json"));
  const auto scenario = runs.front().at("scenario").get<std::string>();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto other = runs[i].at("scenario").get<std::string>();
    if (other != scenario) {
      throw ConfigError("runs cover different scenarios: '" + scenario + "' (" + run_dirs.front().string() +
                        ") vs '" + other + "' (" + run_dirs[i].string() + ")");
    }
  }

  const std::vector<std::string> metrics{"map", "tp_ratio", "fitness"};
  std::map<std::string, double> best;
  for (const auto& m : metrics) {
    best[m] = -1e300;
    for (const auto& r : runs) best[m] = std::max(best[m], r.at(m).get<double>());
  }

  std::ostringstream md;
  std::ostringstream csv;
  md << "Scenario: " << scenario << "\n\n";
  md << "| method | seed | x (m) | z (m) | f (mm) | sensor | w×h (mm) | pixel (µm) | map | tp_ratio | fitness |\n";
  md << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  csv << "method,seed,x_m,z_m,focal_mm,sensor,width_mm,height_mm,pixel_um,map,tp_ratio,fitness\n";
  for (const auto& r : runs) {
    const auto& d = r.at("design");
    const auto& s = d.at("sensor");
    md << "| " << r.at("method").get<std::string>() << " | " << r.at("seed").get<std::uint64_t>() << " | "
       << fmt(d.at("x_m").get<double>(), 4) << " | " << fmt(d.at("z_m").get<double>(), 4) << " | "
       << fmt(d.at("focal_mm").get<double>(), 4) << " | " << s.at("name").get<std::string>() << " | "
       << fmt(s.at("width_mm").get<double>(), 4) << "×" << fmt(s.at("height_mm").get<double>(), 4) << " | "
       << fmt(s.at("pixel_um").get<double>(), 4);
    for (const auto& m : metrics) {
      const double v = r.at(m).get<double>();
      md << " | " << fmt(v, 4) << (v == best[m] ? " *" : "");
    }
    md << " |\n";
    csv << csv_field(r.at("method").get<std::string>()) << ',' << r.at("seed").get<std::uint64_t>() << ','
        << fmt(d.at("x_m").get<double>()) << ',' << fmt(d.at("z_m").get<double>()) << ','
        << fmt(d.at("focal_mm").get<double>()) << ',' << csv_field(s.at("name").get<std::string>()) << ','
        << fmt(s.at("width_mm").get<double>()) << ',' << fmt(s.at("height_mm").get<double>()) << ','
        << fmt(s.at("pixel_um").get<double>());
    for (const auto& m : metrics) csv << ',' << fmt(r.at(m).get<double>());
    csv << '\n';
  }
  if (csv_out) write_text(*csv_out, csv.str());
  return md.str();
}

}  // namespace camco
