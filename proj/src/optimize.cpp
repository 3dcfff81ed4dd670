#include "camco/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "camco/errors.hpp"

namespace camco {

// ---------------------------------------------------------------- GA core

void GaConfig::validate() const {
  if (population < 2) throw ConfigError("GA population must be at least 2");
  if (generations < 1) throw ConfigError("GA needs at least one generation");
  if (!(offspring_fraction > 0.0 && offspring_fraction < 1.0)) {
    throw ConfigError("GA offspring fraction must lie in (0, 1)");
  }
  if (!(mutation_low < mutation_high)) throw ConfigError("GA mutation range must satisfy low < high");
}

int GaConfig::survivors() const {
  const int s = static_cast<int>(std::ceil((1.0 - offspring_fraction) * population - 1e-9));
  return std::clamp(s, 1, population);
}

GaStep ga_generation(const std::vector<Genome>& population, std::span<const double> fitness, const GaConfig& cfg,
                     Rng& rng, const RepairFn& repair) {
  cfg.validate();
  if (static_cast<int>(population.size()) != cfg.population || fitness.size() != population.size()) {
    throw ConfigError("ga_generation: population and fitness sizes must equal the configured population");
  }
  std::vector<double> f(fitness.begin(), fitness.end());
  for (double& v : f) {
    if (std::isnan(v)) v = -std::numeric_limits<double>::infinity();
  }
  std::vector<int> order(population.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return f[a] > f[b]; });

  const int s = cfg.survivors();
  GaStep out;
  for (int k = 0; k < s; ++k) {
    out.population.push_back(population[order[k]]);
    out.survivor_of.push_back(order[k]);
  }
  while (static_cast<int>(out.population.size()) < cfg.population) {
    const int a = uniform_int(rng, 0, s - 1);
    int b = a;
    if (s > 1) {
      b = uniform_int(rng, 0, s - 2);
      if (b >= a) ++b;
    }
    const Genome& pa = out.population[a];
    const Genome& pb = out.population[b];
    Genome child(pa.size());
    for (std::size_t j = 0; j < child.size(); ++j) {
      child[j] = uniform(rng, 0.0, 1.0) < 0.5 ? pa[j] : pb[j];
      child[j] *= uniform(rng, cfg.mutation_low, cfg.mutation_high);
    }
    out.population.push_back(repair ? repair(std::move(child)) : std::move(child));
    out.survivor_of.push_back(-1);
  }
  return out;
}

// ------------------------------------------------------- perturbation GA

Perturbation clamp_perturbation(const Perturbation& p) {
  return {std::clamp(p.p_e, -kPerturbExposureCapMs, kPerturbExposureCapMs),
          std::clamp(p.p_g, -kPerturbGainCapDb, kPerturbGainCapDb)};
}

DynamicParams apply_perturbation(const DynamicParams& pred, const Perturbation& p) {
  const auto c = clamp_perturbation(p);
  return DynamicParams{pred.exposure_ms + c.p_e, pred.gain_db + c.p_g}.clamped();
}

std::vector<Perturbation> fixed_perturbations(double fraction) {
  const double pe = fraction * kExposureMaxMs;
  const double pg = fraction * kGainMaxDb;
  return {{pe, pg}, {pe, -pg}, {-pe, pg}, {-pe, -pg}};
}

std::vector<Perturbation> random_perturbations(int n, Rng& rng) {
  std::vector<Perturbation> out(static_cast<std::size_t>(n));
  for (auto& p : out) {
    p.p_e = uniform(rng, -kPerturbExposureCapMs, kPerturbExposureCapMs);
    p.p_g = uniform(rng, -kPerturbGainCapDb, kPerturbGainCapDb);
  }
  return out;
}

GaConfig perturbation_ga_config(int n) { return {n, 1, 0.5, 0.9, 1.1}; }

PerturbationChoice perturb_and_select(const DynamicParams& pred, std::span<const Perturbation> population,
                                      FrameRenderer& renderer, const FrameBundle& frame, const Detector& det,
                                      double p_um, double p0_um) {
  if (population.empty()) throw ConfigError("perturb_and_select: empty perturbation population");
  static const std::vector<double> kAp50{0.5};
  PerturbationChoice out;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < population.size(); ++k) {
    const DynamicParams target = apply_perturbation(pred, population[k]);
    const auto tr = renderer.render(rescale_for_pixel_size(target, p_um, p0_um));
    const double f = evaluate(det, tr.output, frame, kAp50).ap50;
    out.fitness.push_back(f);
    if (f > best) {
      best = f;
      out.index = static_cast<int>(k);
      out.best = clamp_perturbation(population[k]);
      out.target = target;
    }
  }
  return out;
}

double ga_loss(const DynamicParams& target, const DynamicParams& pred) {
  return 0.5 * (std::abs(target.exposure_ms - pred.exposure_ms) / kExposureRangeMs +
                std::abs(target.gain_db - pred.gain_db) / kGainRangeDb);
}

ParamGradient ga_loss_gradient(const DynamicParams& target, const DynamicParams& pred) {
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  return {0.5 * sign(pred.exposure_ms - target.exposure_ms) / kExposureRangeMs,
          0.5 * sign(pred.gain_db - target.gain_db) / kGainRangeDb};
}

void Schedule::validate() const {
  if (k <= 0 || n <= 0 || i <= 0 || !(w_task > 0.0) || !(w_ga > 0.0)) {
    throw ConfigError("schedule values must all be positive");
  }
}

// ------------------------------------------------------------- training

namespace {

constexpr std::uint64_t kTagAcc = 0xacc;
constexpr std::uint64_t kTagDetector = 0xde7;
constexpr std::uint64_t kTagPerturb = 0x9e27;
constexpr std::uint64_t kTagDesign = 0xd5;
constexpr std::uint64_t kTagWorld = 0x3041d;
constexpr std::uint64_t kTagNoise = 0x401;
constexpr std::uint64_t kTagHardware = 0x4a2d;
constexpr std::uint64_t kTagTest = 0x7e57;
constexpr std::uint64_t kTagPretrain = 0x92e;

std::vector<Perturbation> to_perturbations(const std::vector<Genome>& g) {
  std::vector<Perturbation> out;
  for (const auto& x : g) out.push_back({x[0], x[1]});
  return out;
}

std::vector<Genome> to_genomes(const std::vector<Perturbation>& p) {
  std::vector<Genome> out;
  for (const auto& x : p) out.push_back({x.p_e, x.p_g});
  return out;
}

ParamGradient chain_rescale(const ParamGradient& d_rendered, const DynamicParams& pred, double p_um, double p0_um) {
  const auto j = rescale_jacobian(pred, p_um, p0_um);
  return {d_rendered.exposure_ms * j[0] + d_rendered.gain_db * j[2],
          d_rendered.exposure_ms * j[1] + d_rendered.gain_db * j[3]};
}

struct TaskPass {
  DynamicParams pred;
  DynamicParams rendered;
  RenderTrace trace;
  TaskLoss loss;
  ParamGradient d_pred;  ///< d l_task / d(E_pred, G_pred)
};

// Shared by training and by the gradient probe: predict, rescale, render,
// detector loss with pixel gradient, chained back to the prediction.
TaskPass task_pass(TrainState& state, const FrameBundle& frame, const CameraDesign& design, FrameRenderer& renderer,
                   const ScenarioConfig& scenario, const RenderTrace* frozen, bool need_gradient) {
  const double p = design.sensor.pixel_um;
  const double p0 = scenario.calibration.p0_um;
  TaskPass tp;
  const auto features = state.detector.pooled_features(state.prev_image);
  tp.pred = state.acc.predict(state.prev_image, state.prev_params, features);
  tp.rendered = rescale_for_pixel_size(tp.pred, p, p0);
  tp.trace = frozen ? renderer.render_frozen(tp.rendered, *frozen) : renderer.render(tp.rendered);
  tp.loss = state.detector.loss_and_backward(tp.trace.output, frame.ground_truth, need_gradient);
  if (need_gradient) tp.d_pred = chain_rescale(render_backward(tp.trace, tp.loss.d_image), tp.pred, p, p0);
  return tp;
}

EvalReport evaluate_output(const DetectorOutput& out, const FrameBundle& frame) {
  static const std::vector<double> kThresholds = coco_thresholds();
  const auto classes = out.cell_classes();
  std::vector<double> scores(out.scores.data(), out.scores.data() + out.scores.size());
  return evaluate_scores(scores, classes, frame.ground_truth, frame.in_fov_180_count, kThresholds);
}

}  // namespace

TrainState::TrainState(std::uint64_t seed, const TrainConfig& cfg)
    : acc(derive_seed(seed, {kTagAcc})),
      detector(derive_seed(seed, {kTagDetector})),
      acc_optimizer(cfg.acc_optimizer),
      detector_optimizer(cfg.detector_optimizer),
      perturb_rng(derive_seed(seed, {kTagPerturb})) {
  cfg.schedule.validate();
  perturbations = random_perturbations(cfg.schedule.n, perturb_rng);
  acc.collect(acc_params);
  detector.collect(detector_params);
}

void begin_episode(TrainState& state, const FrameBundle& first, const CameraDesign& design,
                   const ScenarioConfig& scenario, std::uint64_t noise_seed) {
  const DynamicParams anchor = scenario.calibration.anchor;
  FrameRenderer renderer(first, design, scenario, noise_seed);
  state.prev_image =
      renderer.render(rescale_for_pixel_size(anchor, design.sensor.pixel_um, scenario.calibration.p0_um)).output;
  state.prev_params = anchor;
  state.average.current = anchor;
}

StepRecord dfgrad_step(TrainState& state, const FrameBundle& frame, const CameraDesign& design,
                       const ScenarioConfig& scenario, std::uint64_t noise_seed, const TrainConfig& cfg) {
  FrameRenderer renderer(frame, design, scenario, noise_seed);
  StepRecord rec;
  state.acc.zero_grad();
  state.detector.zero_grad();

  if (cfg.control == ExposureControl::Average) {
    const DynamicParams params = state.average.current;
    const auto tr = renderer.render(params);
    const auto tl = state.detector.loss_and_backward(tr.output, frame.ground_truth, false);
    if (cfg.train_detector) state.detector_optimizer.step(state.detector_params);
    rec.predicted = params;
    rec.rendered = params;
    rec.l_task = tl.total;
    rec.report = evaluate_output(tl.output, frame);
    average_ae_step(state.average, tr.output, static_cast<int>(tr.white_level));
    state.prev_image = tr.output;
    state.prev_params = params;
    ++state.step_index;
    return rec;
  }

  const auto& sched = cfg.schedule;
  auto tp = task_pass(state, frame, design, renderer, scenario, nullptr, cfg.train_acc);
  rec.predicted = tp.pred;
  rec.rendered = tp.rendered;
  rec.l_task = tp.loss.total;

  std::optional<PerturbationChoice> choice;
  const double p = design.sensor.pixel_um;
  const double p0 = scenario.calibration.p0_um;
  if (cfg.perturb == PerturbMode::Ga) {
    if (frame.illumination_step) {
      state.perturbations = random_perturbations(sched.n, state.perturb_rng);
      ++state.perturbation_resets;
    }
    choice = perturb_and_select(tp.pred, state.perturbations, renderer, frame, state.detector, p, p0);
    const auto next = ga_generation(to_genomes(state.perturbations), choice->fitness,
                                    perturbation_ga_config(sched.n), state.perturb_rng, [](Genome g) {
                                      const auto c = clamp_perturbation({g[0], g[1]});
                                      return Genome{c.p_e, c.p_g};
                                    });
    state.perturbations = to_perturbations(next.population);
  } else if (cfg.perturb == PerturbMode::Fixed) {
    const auto fixed = fixed_perturbations();
    choice = perturb_and_select(tp.pred, fixed, renderer, frame, state.detector, p, p0);
  }
  if (choice) rec.best_perturbation = choice->index;

  rec.ga_applied = choice.has_value() && sched.ga_step(state.step_index);
  ParamGradient total{sched.w_task * tp.d_pred.exposure_ms, sched.w_task * tp.d_pred.gain_db};
  if (rec.ga_applied) {
    rec.l_ga = ga_loss(choice->target, tp.pred);
    const auto g = ga_loss_gradient(choice->target, tp.pred);
    total.exposure_ms += sched.w_ga * g.exposure_ms;
    total.gain_db += sched.w_ga * g.gain_db;
    ++state.ga_applications;
  }
  if (cfg.train_acc) {
    state.acc.backward(total);
    state.acc_optimizer.step(state.acc_params);
  }
  if (cfg.train_detector) state.detector_optimizer.step(state.detector_params);

  rec.report = evaluate_output(tp.loss.output, frame);
  state.prev_image = std::move(tp.trace.output);
  state.prev_params = tp.pred;
  ++state.step_index;
  return rec;
}

ObjectiveProbe acc_objective(TrainState& state, const FrameBundle& frame, const CameraDesign& design,
                             FrameRenderer& renderer, const ScenarioConfig& scenario, const Schedule& schedule,
                             const std::optional<DynamicParams>& ga_target, const RenderTrace* frozen,
                             bool compute_gradient) {
  state.acc.zero_grad();
  auto tp = task_pass(state, frame, design, renderer, scenario, frozen, compute_gradient);
  state.detector.zero_grad();
  ObjectiveProbe out;
  out.value = schedule.w_task * tp.loss.total;
  ParamGradient total{schedule.w_task * tp.d_pred.exposure_ms, schedule.w_task * tp.d_pred.gain_db};
  if (ga_target) {
    out.value += schedule.w_ga * ga_loss(*ga_target, tp.pred);
    const auto g = ga_loss_gradient(*ga_target, tp.pred);
    total.exposure_ms += schedule.w_ga * g.exposure_ms;
    total.gain_db += schedule.w_ga * g.gain_db;
  }
  if (compute_gradient) {
    state.acc.backward(total);
    for (const auto& pr : state.acc_params) out.gradient.insert(out.gradient.end(), pr.grad.begin(), pr.grad.end());
    state.acc.zero_grad();
  }
  out.trace = std::move(tp.trace);
  return out;
}

// ------------------------------------------------------------ joint loop

std::string to_string(Method m) {
  switch (m) {
    case Method::JointDfgrad: return "joint-dfgrad";
    case Method::FixedCameraNeural: return "fixed-camera+neural";
    case Method::GaCameraAverage: return "ga-camera+average";
    case Method::AblationNoGa: return "ablation-no-ga";
    case Method::AblationFixedPerturb: return "ablation-fixed-perturb";
    case Method::AblationFrozenDetector: return "ablation-frozen-detector";
  }
  return "joint-dfgrad";
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"joint-dfgrad",   "fixed-camera+neural",    "ga-camera+average",
                                              "ablation-no-ga", "ablation-fixed-perturb", "ablation-frozen-detector"};
  return names;
}

Method method_from_string(const std::string& s) {
  for (auto m : {Method::JointDfgrad, Method::FixedCameraNeural, Method::GaCameraAverage, Method::AblationNoGa,
                 Method::AblationFixedPerturb, Method::AblationFrozenDetector}) {
    if (to_string(m) == s) return m;
  }
  throw UsageError("unknown method '" + s + "'");
}

void JointConfig::validate() const {
  hardware.validate();
  train.schedule.validate();
  if (test_frames < 0 || pretrain_designs < 0 || pretrain_frames < 0) {
    throw ConfigError("frame counts must be non-negative");
  }
  if (fixed_camera != "basler" && fixed_camera != "flir") {
    throw ConfigError("fixed camera must be 'basler' or 'flir'");
  }
}

TrainConfig JointConfig::effective_train() const {
  TrainConfig t = train;
  switch (method) {
    case Method::JointDfgrad: t.perturb = PerturbMode::Ga; break;
    case Method::FixedCameraNeural:
    case Method::AblationNoGa: t.perturb = PerturbMode::None; break;
    case Method::GaCameraAverage:
      t.control = ExposureControl::Average;
      t.perturb = PerturbMode::None;
      t.train_acc = false;
      break;
    case Method::AblationFixedPerturb: t.perturb = PerturbMode::Fixed; break;
    case Method::AblationFrozenDetector:
      t.perturb = PerturbMode::Ga;
      t.train_detector = false;
      break;
  }
  return t;
}

namespace {

// Detector pretraining on random designs under AverageAE exposure.
long pretrain_detector(TrainState& state, const ScenarioConfig& scenario, const JointConfig& cfg,
                       const WorldConfig& world, const SensorCatalogue& catalogue, std::uint64_t seed) {
  TrainConfig pre = cfg.train;
  pre.control = ExposureControl::Average;
  pre.perturb = PerturbMode::None;
  pre.train_acc = false;
  pre.train_detector = true;
  const long saved_step = state.step_index;
  long frames = 0;
  const std::uint64_t world_seed = derive_seed(seed, {kTagPretrain, kTagWorld, scenario.episode_seed});
  for (int d = 0; d < cfg.pretrain_designs; ++d) {
    const auto design = random_design(derive_seed(seed, {kTagPretrain, kTagDesign, static_cast<std::uint64_t>(d)}),
                                      catalogue, cfg.bounds);
    const World w = generate_world(world, world_seed, d);
    for (int t = 0; t < cfg.pretrain_frames; ++t) {
      const auto bundle = render_base_frame(w, design, t, world);
      const auto noise = derive_seed(seed, {kTagPretrain, kTagNoise, static_cast<std::uint64_t>(d),
                                            static_cast<std::uint64_t>(t)});
      if (t == 0) begin_episode(state, bundle, design, scenario, noise);
      dfgrad_step(state, bundle, design, scenario, noise, pre);
      ++frames;
    }
  }
  state.step_index = saved_step;
  return frames;
}

TestReport run_test(TrainState& state, const CameraDesign& design, const ScenarioConfig& scenario,
                    const JointConfig& cfg, const TrainConfig& train, const WorldConfig& world, std::uint64_t seed) {
  TestReport r;
  const int k = train.schedule.k;
  const std::uint64_t world_seed = derive_seed(seed, {kTagTest, kTagWorld, scenario.episode_seed});
  const double p = design.sensor.pixel_um;
  const double p0 = scenario.calibration.p0_um;
  double sum_map = 0.0, sum_tp = 0.0, sum_fit = 0.0, sum_e = 0.0, sum_g = 0.0;
  for (int ep = 0; r.frames < cfg.test_frames; ++ep) {
    const World w = generate_world(world, world_seed, ep);
    for (int t = 0; t < k && r.frames < cfg.test_frames; ++t) {
      const auto bundle = render_base_frame(w, design, t, world);
      const auto noise =
          derive_seed(seed, {kTagTest, kTagNoise, static_cast<std::uint64_t>(ep), static_cast<std::uint64_t>(t)});
      if (t == 0) begin_episode(state, bundle, design, scenario, noise);
      FrameRenderer renderer(bundle, design, scenario, noise);
      DynamicParams rendered;
      DynamicParams pred;
      if (train.control == ExposureControl::Average) {
        pred = rendered = state.average.current;
      } else {
        pred = state.acc.infer(state.prev_image, state.prev_params, state.detector.pooled_features(state.prev_image));
        rendered = rescale_for_pixel_size(pred, p, p0);
      }
      const auto tr = renderer.render(rendered);
      const auto rep = evaluate(state.detector, tr.output, bundle, coco_thresholds());
      if (train.control == ExposureControl::Average) {
        average_ae_step(state.average, tr.output, static_cast<int>(tr.white_level));
      }
      state.prev_image = tr.output;
      state.prev_params = pred;
      sum_map += rep.map_score;
      sum_tp += rep.tp_ratio_180;
      sum_fit += rep.weighted_fitness;
      sum_e += rendered.exposure_ms;
      sum_g += rendered.gain_db;
      ++r.frames;
    }
  }
  if (r.frames > 0) {
    r.map_score = sum_map / r.frames;
    r.tp_ratio_180 = sum_tp / r.frames;
    r.weighted_fitness = sum_fit / r.frames;
    r.mean_exposure_ms = sum_e / r.frames;
    r.mean_gain_db = sum_g / r.frames;
  }
  return r;
}

}  // namespace

JointResult joint_optimise(const ScenarioConfig& scenario, const JointConfig& cfg, const SensorCatalogue& catalogue,
                           std::uint64_t seed, const GenerationCallback& on_generation) {
  scenario.validate();
  cfg.validate();
  const TrainConfig train = cfg.effective_train();
  WorldConfig world = cfg.world;
  world.illumination = scenario.illumination;

  TrainState state(seed, train);
  JointResult res;
  if (cfg.method == Method::AblationFrozenDetector) {
    res.pretrain_frames = pretrain_detector(state, scenario, cfg, world, catalogue, seed);
  }

  const bool fixed_camera = cfg.method == Method::FixedCameraNeural;
  const int n = cfg.hardware.population;
  const int k = train.schedule.k;
  const RepairFn repair = [&](Genome g) { return design_to_genes(design_from_genes(g, catalogue, cfg.bounds)); };

  std::vector<Genome> population;
  for (int c = 0; c < n; ++c) {
    const CameraDesign d =
        fixed_camera ? (cfg.fixed_camera == "flir" ? flir_design(catalogue) : basler_design(catalogue))
                     : random_design(derive_seed(seed, {kTagDesign, static_cast<std::uint64_t>(c)}), catalogue,
                                     cfg.bounds);
    population.push_back(design_to_genes(d));
  }
  std::vector<int> survivor_of(static_cast<std::size_t>(n), -1);
  std::vector<double> previous_fitness;
  Rng hw_rng(derive_seed(seed, {kTagHardware}));
  const std::uint64_t world_seed = derive_seed(seed, {kTagWorld, scenario.episode_seed});

  for (int g = 0; g < cfg.hardware.generations; ++g) {
    const World shared = generate_world(world, world_seed, g);
    std::vector<CandidateResult> gen;
    std::vector<double> fitness;
    for (int c = 0; c < n; ++c) {
      CandidateResult cr;
      cr.generation = g;
      cr.candidate = c;
      cr.design = design_from_genes(population[c], catalogue, cfg.bounds);
      // Either every candidate replays the generation's episode, or each
      // candidate drives on to a fresh one.
      const int episode = cfg.shared_episode ? g : g * n + c;
      const World w = cfg.shared_episode ? shared : generate_world(world, world_seed, episode);
      double sum_fit = 0.0, sum_e = 0.0, sum_g = 0.0;
      for (int t = 0; t < k; ++t) {
        const auto bundle = render_base_frame(w, cr.design, t, world);
        const auto noise =
            derive_seed(seed, {kTagNoise, static_cast<std::uint64_t>(episode), static_cast<std::uint64_t>(t)});
        if (t == 0) begin_episode(state, bundle, cr.design, scenario, noise);
        StepRow row;
        row.step = state.step_index;
        row.generation = g;
        row.candidate = c;
        row.design_id = g * n + c;
        row.frame = t;
        row.record = dfgrad_step(state, bundle, cr.design, scenario, noise, train);
        sum_fit += row.record.report.weighted_fitness;
        sum_e += row.record.rendered.exposure_ms;
        sum_g += row.record.rendered.gain_db;
        res.history.push_back(std::move(row));
        ++res.frames_rendered;
      }
      cr.evaluated_fitness = sum_fit / k;
      cr.mean_exposure_ms = sum_e / k;
      cr.mean_gain_db = sum_g / k;
      const int from = survivor_of[c];
      cr.fitness = (from >= 0 && !cfg.reevaluate_survivors) ? previous_fitness[from] : cr.evaluated_fitness;
      fitness.push_back(cr.fitness);
      gen.push_back(std::move(cr));
    }
    res.generations.push_back(gen);
    if (on_generation) on_generation(g, state);
    if (g + 1 < cfg.hardware.generations && !fixed_camera) {
      auto step = ga_generation(population, fitness, cfg.hardware, hw_rng, repair);
      population = std::move(step.population);
      survivor_of = std::move(step.survivor_of);
      previous_fitness = fitness;
    }
  }

  const auto& last = res.generations.back();
  std::size_t best = 0;
  for (std::size_t c = 1; c < last.size(); ++c) {
    if (last[c].fitness > last[best].fitness) best = c;
  }
  res.best = last[best].design;
  res.best_fitness = last[best].fitness;
  res.ga_applications = state.ga_applications;
  res.test = run_test(state, res.best, scenario, cfg, train, world, seed);
  res.average_zero_mean_events = state.average.zero_mean_events;
  return res;
}

}  // namespace camco
