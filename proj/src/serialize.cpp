#include "camco/serialize.hpp"

#include "camco/errors.hpp"

namespace camco {

namespace {

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

Json to_json(const nn::AdamConfig& a) {
  return {{"learning_rate", a.learning_rate},
          {"beta1", a.beta1},
          {"beta2", a.beta2},
          {"epsilon", a.epsilon},
          {"weight_decay", a.weight_decay}};
}

nn::AdamConfig adam_from_json(const Json& j, nn::AdamConfig a) {
  read(j, "learning_rate", a.learning_rate);
  read(j, "beta1", a.beta1);
  read(j, "beta2", a.beta2);
  read(j, "epsilon", a.epsilon);
  read(j, "weight_decay", a.weight_decay);
  return a;
}

Json to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const char* kind_name(IlluminationKind k) {
  switch (k) {
    case IlluminationKind::Constant: return "constant";
    case IlluminationKind::Sinusoidal: return "sinusoidal";
    case IlluminationKind::AbruptStep: return "abrupt-step";
  }
  return "constant";
}

IlluminationKind kind_from_name(const std::string& s) {
  for (auto k : {IlluminationKind::Constant, IlluminationKind::Sinusoidal, IlluminationKind::AbruptStep}) {
    if (s == kind_name(k)) return k;
  }
  throw ConfigError("unknown illumination kind '" + s + "'");
}

}  // namespace

Json to_json(const DynamicParams& p) { return {{"exposure_ms", p.exposure_ms}, {"gain_db", p.gain_db}}; }

Json to_json(const CameraDesign& d) {
  return {{"x_m", d.x_m},
          {"z_m", d.z_m},
          {"focal_mm", d.focal_mm},
          {"sensor",
           {{"name", d.sensor.name},
            {"catalogue_index", d.sensor.catalogue_index},
            {"width_mm", d.sensor.width_mm},
            {"height_mm", d.sensor.height_mm},
            {"pixel_um", d.sensor.pixel_um},
            {"pixels_wide", d.sensor.pixels_wide()},
            {"pixels_high", d.sensor.pixels_high()}}},
          {"raw_sensor_genes", d.raw_sensor_genes},
          {"horizontal_fov_deg", d.horizontal_fov_deg()},
          {"vertical_fov_deg", d.vertical_fov_deg()}};
}

CameraDesign design_from_json(const Json& j, const SensorCatalogue& catalogue) {
  CameraDesign d;
  read(j, "x_m", d.x_m);
  read(j, "z_m", d.z_m);
  read(j, "focal_mm", d.focal_mm);
  read(j, "raw_sensor_genes", d.raw_sensor_genes);
  return clamp_design(d, catalogue);
}

Json to_json(const ScenarioConfig& s) {
  const auto& c = s.calibration;
  return {{"name", s.name},
          {"noise_multiplier", s.noise_multiplier},
          {"blur_multiplier", s.blur_multiplier},
          {"illumination", to_string(s.illumination)},
          {"episode_seed", s.episode_seed},
          {"calibration",
           {{"anchor", to_json(c.anchor)},
            {"p0_um", c.p0_um},
            {"sigma_p", c.noise.sigma_p},
            {"sigma_r", c.noise.sigma_r},
            {"white_level", c.noise.white_level}}}};
}

ScenarioConfig scenario_from_json(const Json& j) {
  ScenarioConfig s;
  if (j.contains("name")) s = scenario_preset(j.at("name").get<std::string>());
  read(j, "noise_multiplier", s.noise_multiplier);
  read(j, "blur_multiplier", s.blur_multiplier);
  if (j.contains("illumination")) s.illumination = illumination_mode_from_string(j.at("illumination").get<std::string>());
  read(j, "episode_seed", s.episode_seed);
  if (j.contains("calibration")) {
    const auto& c = j.at("calibration");
    if (c.contains("anchor")) {
      read(c.at("anchor"), "exposure_ms", s.calibration.anchor.exposure_ms);
      read(c.at("anchor"), "gain_db", s.calibration.anchor.gain_db);
    }
    read(c, "p0_um", s.calibration.p0_um);
    read(c, "sigma_p", s.calibration.noise.sigma_p);
    read(c, "sigma_r", s.calibration.noise.sigma_r);
    read(c, "white_level", s.calibration.noise.white_level);
  }
  // The noise model's anchor always follows the calibration anchor.
  s.calibration.noise.e0_ms = s.calibration.anchor.exposure_ms;
  s.calibration.noise.g0_linear = s.calibration.anchor.gain_linear();
  s.validate();
  return s;
}

Json to_json(const JointConfig& c) {
  const auto& w = c.world;
  const auto& sch = c.train.schedule;
  return {{"method", to_string(c.method)},
          {"hardware",
           {{"population", c.hardware.population},
            {"generations", c.hardware.generations},
            {"offspring_fraction", c.hardware.offspring_fraction},
            {"mutation_low", c.hardware.mutation_low},
            {"mutation_high", c.hardware.mutation_high}}},
          {"schedule", {{"k", sch.k}, {"n", sch.n}, {"i", sch.i}, {"w_task", sch.w_task}, {"w_ga", sch.w_ga}}},
          {"acc_optimizer", to_json(c.train.acc_optimizer)},
          {"detector_optimizer", to_json(c.train.detector_optimizer)},
          {"world",
           {{"min_targets", w.min_targets},
            {"max_targets", w.max_targets},
            {"v_max", w.v_max},
            {"range_min_m", w.range_min_m},
            {"range_max_m", w.range_max_m},
            {"bearing_max_deg", w.bearing_max_deg},
            {"frame_dt_s", w.frame_dt_s},
            {"phi_max", w.phi_max},
            {"phi_ratio", w.phi_ratio},
            {"sinusoid_period", w.sinusoid_period},
            {"abrupt_period", w.abrupt_period},
            {"ego_period", w.ego_period},
            {"ego_reference_depth_m", w.ego_reference_depth_m},
            {"target_reflectance_min", w.target_reflectance_min},
            {"target_reflectance_max", w.target_reflectance_max},
            {"supersample", w.supersample}}},
          {"bounds",
           {{"x", {c.bounds.x_min, c.bounds.x_max}},
            {"z", {c.bounds.z_min, c.bounds.z_max}},
            {"f", {c.bounds.f_min, c.bounds.f_max}}}},
          {"fixed_camera", c.fixed_camera},
          {"reevaluate_survivors", c.reevaluate_survivors},
          {"shared_episode", c.shared_episode},
          {"test_frames", c.test_frames},
          {"pretrain_designs", c.pretrain_designs},
          {"pretrain_frames", c.pretrain_frames}};
}

JointConfig joint_config_from_json(const Json& j) {
  JointConfig c;
  if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
  if (j.contains("hardware")) {
    const auto& h = j.at("hardware");
    read(h, "population", c.hardware.population);
    read(h, "generations", c.hardware.generations);
    read(h, "offspring_fraction", c.hardware.offspring_fraction);
    read(h, "mutation_low", c.hardware.mutation_low);
    read(h, "mutation_high", c.hardware.mutation_high);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    read(s, "k", c.train.schedule.k);
    read(s, "n", c.train.schedule.n);
    read(s, "i", c.train.schedule.i);
    read(s, "w_task", c.train.schedule.w_task);
    read(s, "w_ga", c.train.schedule.w_ga);
  }
  if (j.contains("acc_optimizer")) c.train.acc_optimizer = adam_from_json(j.at("acc_optimizer"), c.train.acc_optimizer);
  if (j.contains("detector_optimizer")) {
    c.train.detector_optimizer = adam_from_json(j.at("detector_optimizer"), c.train.detector_optimizer);
  }
  if (j.contains("world")) {
    const auto& w = j.at("world");
    auto& o = c.world;
    read(w, "min_targets", o.min_targets);
    read(w, "max_targets", o.max_targets);
    read(w, "v_max", o.v_max);
    read(w, "range_min_m", o.range_min_m);
    read(w, "range_max_m", o.range_max_m);
    read(w, "bearing_max_deg", o.bearing_max_deg);
    read(w, "frame_dt_s", o.frame_dt_s);
    read(w, "phi_max", o.phi_max);
    read(w, "phi_ratio", o.phi_ratio);
    read(w, "sinusoid_period", o.sinusoid_period);
    read(w, "abrupt_period", o.abrupt_period);
    read(w, "ego_period", o.ego_period);
    read(w, "ego_reference_depth_m", o.ego_reference_depth_m);
    read(w, "target_reflectance_min", o.target_reflectance_min);
    read(w, "target_reflectance_max", o.target_reflectance_max);
    read(w, "supersample", o.supersample);
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    std::array<double, 2> r{};
    if (b.contains("x")) {
      read(b, "x", r);
      c.bounds.x_min = r[0];
      c.bounds.x_max = r[1];
    }
    if (b.contains("z")) {
      read(b, "z", r);
      c.bounds.z_min = r[0];
      c.bounds.z_max = r[1];
    }
    if (b.contains("f")) {
      read(b, "f", r);
      c.bounds.f_min = r[0];
      c.bounds.f_max = r[1];
    }
  }
  read(j, "fixed_camera", c.fixed_camera);
  read(j, "reevaluate_survivors", c.reevaluate_survivors);
  read(j, "shared_episode", c.shared_episode);
  read(j, "test_frames", c.test_frames);
  read(j, "pretrain_designs", c.pretrain_designs);
  read(j, "pretrain_frames", c.pretrain_frames);
  c.validate();
  return c;
}

Json to_json(const World& w) {
  Json targets = Json::array();
  for (const auto& t : w.targets) {
    targets.push_back({{"class_id", t.class_id},
                       {"position", to_json(t.position)},
                       {"size", t.size},
                       {"reflectance", t.reflectance},
                       {"velocity", to_json(t.velocity)}});
  }
  return {{"seed", w.seed},
          {"episode_index", w.episode_index},
          {"ego_speed_max", w.ego_speed_max},
          {"ego_phase", w.ego_phase},
          {"sky_reflectance", w.sky_reflectance},
          {"road_reflectance", w.road_reflectance},
          {"illumination",
           {{"kind", kind_name(w.illumination.kind)},
            {"phi_min", w.illumination.phi_min},
            {"phi_max", w.illumination.phi_max},
            {"period_frames", w.illumination.period_frames},
            {"phase_frames", w.illumination.phase_frames}}},
          {"targets", targets}};
}

World world_from_json(const Json& j) {
  World w;
  try {
    read(j, "seed", w.seed);
    read(j, "episode_index", w.episode_index);
    read(j, "ego_speed_max", w.ego_speed_max);
    read(j, "ego_phase", w.ego_phase);
    read(j, "sky_reflectance", w.sky_reflectance);
    read(j, "road_reflectance", w.road_reflectance);
    if (j.contains("illumination")) {
      const auto& il = j.at("illumination");
      w.illumination.kind = kind_from_name(il.at("kind").get<std::string>());
      read(il, "phi_min", w.illumination.phi_min);
      read(il, "phi_max", w.illumination.phi_max);
      read(il, "period_frames", w.illumination.period_frames);
      read(il, "phase_frames", w.illumination.phase_frames);
    }
    for (const auto& t : j.at("targets")) {
      Target tg;
      read(t, "class_id", tg.class_id);
      tg.position = vec3_from_json(t.at("position"));
      read(t, "size", tg.size);
      read(t, "reflectance", tg.reflectance);
      tg.velocity = vec3_from_json(t.at("velocity"));
      w.targets.push_back(tg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("episode file: ") + e.what());
  }
  return w;
}

}  // namespace camco
