#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camco/acc.hpp"
#include "camco/design.hpp"
#include "camco/nn.hpp"
#include "camco/render.hpp"
#include "camco/rng.hpp"
#include "camco/scenario.hpp"
#include "camco/scene.hpp"
#include "camco/task.hpp"

namespace camco {

using Genome = std::vector<double>;

struct GaConfig {
  int population = 10;
  int generations = 35;
  double offspring_fraction = 0.5;
  double mutation_low = 0.8;
  double mutation_high = 1.2;

  void validate() const;
  /// ⌈(1 − offspring_fraction)·population⌉.
  [[nodiscard]] int survivors() const;
};

struct GaStep {
  std::vector<Genome> population;
  /// For each new member: index of the surviving parent in the previous
  /// population, or -1 for an offspring.
  std::vector<int> survivor_of;
};

using RepairFn = std::function<Genome(Genome)>;

/// Elitist truncation followed by uniform crossover of two distinct survivors
/// and per-gene multiplicative mutation, then `repair`. Survivors come first,
/// in fitness order (lowest index first on ties).
GaStep ga_generation(const std::vector<Genome>& population, std::span<const double> fitness, const GaConfig& cfg,
                     Rng& rng, const RepairFn& repair = {});

/// Additive offsets on the controller prediction (ms, dB).
struct Perturbation {
  double p_e = 0.0;
  double p_g = 0.0;
};

inline constexpr double kPerturbFraction = 0.05;
inline constexpr double kPerturbExposureCapMs = kPerturbFraction * kExposureRangeMs;
inline constexpr double kPerturbGainCapDb = kPerturbFraction * kGainRangeDb;

/// Clamps each offset to its ±5 % cap.
Perturbation clamp_perturbation(const Perturbation& p);
/// (E_pred + p_e, G_pred + p_g), clamped to the controller bounds.
DynamicParams apply_perturbation(const DynamicParams& pred, const Perturbation& p);

/// The four (±p_e, ±p_g) combinations at `fraction` of the parameter maxima.
std::vector<Perturbation> fixed_perturbations(double fraction = 0.025);

/// n perturbations uniform within the caps.
std::vector<Perturbation> random_perturbations(int n, Rng& rng);

GaConfig perturbation_ga_config(int n = 4);

struct PerturbationChoice {
  int index = 0;
  Perturbation best;
  DynamicParams target;  ///< perturbed prediction that was rendered (before pixel rescaling)
  std::vector<double> fitness;
};

/// Renders the frame once per perturbation (pixel-rescaled like the main
/// render) and scores AP at 0.5 overlap. Ties go to the lowest index.
PerturbationChoice perturb_and_select(const DynamicParams& pred, std::span<const Perturbation> population,
                                      FrameRenderer& renderer, const FrameBundle& frame, const Detector& det,
                                      double p_um, double p0_um);

/// Range-normalised L1 between the GA target and the prediction, averaged
/// over exposure and gain.
double ga_loss(const DynamicParams& target, const DynamicParams& pred);
/// Subgradient of ga_loss with respect to the prediction, target held fixed.
ParamGradient ga_loss_gradient(const DynamicParams& target, const DynamicParams& pred);

struct Schedule {
  int k = 45;  ///< frames per hardware candidate
  int n = 4;   ///< perturbation population
  int i = 4;   ///< GA loss applied when step_index % i == 0
  double w_task = 7.0;
  double w_ga = 1.0;

  void validate() const;
  [[nodiscard]] bool ga_step(long step_index) const { return step_index % i == 0; }
};

enum class ExposureControl { Neural, Average };
enum class PerturbMode { Ga, Fixed, None };

struct TrainConfig {
  nn::AdamConfig acc_optimizer{1e-5, 0.9, 0.999, 1e-8, 0.0};
  nn::AdamConfig detector_optimizer{1e-3, 0.9, 0.999, 1e-8, 1e-6};
  Schedule schedule{};
  ExposureControl control = ExposureControl::Neural;
  PerturbMode perturb = PerturbMode::Ga;
  bool train_acc = true;
  bool train_detector = true;
};

/// Networks, optimiser moments, perturbation population and counters.
struct TrainState {
  TrainState(std::uint64_t seed, const TrainConfig& cfg);
  // Parameter views point into the networks, so the state stays in place.
  TrainState(const TrainState&) = delete;
  TrainState& operator=(const TrainState&) = delete;

  AccNetwork acc;
  Detector detector;
  nn::AdamOptimizer acc_optimizer;
  nn::AdamOptimizer detector_optimizer;
  std::vector<Perturbation> perturbations;
  Rng perturb_rng;

  // Per-episode controller memory.
  Image prev_image;
  DynamicParams prev_params{};
  AverageAeState average{};

  long step_index = 0;
  long ga_applications = 0;
  long perturbation_resets = 0;

  std::vector<nn::ParamRef> acc_params;
  std::vector<nn::ParamRef> detector_params;
};

/// Starts a new episode for a design: the controller sees the first frame
/// rendered at the calibration anchor as its "previous" image.
void begin_episode(TrainState& state, const FrameBundle& first, const CameraDesign& design,
                   const ScenarioConfig& scenario, std::uint64_t noise_seed);

struct StepRecord {
  DynamicParams predicted;  ///< controller output (calibration-pixel units)
  DynamicParams rendered;   ///< after pixel-size rescaling
  EvalReport report;
  double l_task = 0.0;
  double l_ga = 0.0;
  bool ga_applied = false;
  int best_perturbation = -1;
};

/// One training frame: predict, rescale, render, task loss and pixel
/// gradient, perturbation renders and selection, combined update, evaluation.
StepRecord dfgrad_step(TrainState& state, const FrameBundle& frame, const CameraDesign& design,
                       const ScenarioConfig& scenario, std::uint64_t noise_seed, const TrainConfig& cfg);

/// w_task·l_task + w_ga·l_ga for one frame as a function of the controller
/// parameters, with its reverse-mode gradient (flattened over acc_params).
/// With `frozen` set, the blur length and noise realisation are taken from
/// that trace, which makes the objective smooth in the parameters away from
/// clipping and ReLU kinks. Detector parameters are left untouched.
struct ObjectiveProbe {
  double value = 0.0;
  std::vector<double> gradient;
  RenderTrace trace;
};
ObjectiveProbe acc_objective(TrainState& state, const FrameBundle& frame, const CameraDesign& design,
                             FrameRenderer& renderer, const ScenarioConfig& scenario, const Schedule& schedule,
                             const std::optional<DynamicParams>& ga_target, const RenderTrace* frozen,
                             bool compute_gradient);

enum class Method {
  JointDfgrad,
  FixedCameraNeural,
  GaCameraAverage,
  AblationNoGa,
  AblationFixedPerturb,
  AblationFrozenDetector
};

std::string to_string(Method m);
Method method_from_string(const std::string& s);
const std::vector<std::string>& method_names();

struct JointConfig {
  Method method = Method::JointDfgrad;
  GaConfig hardware{};
  TrainConfig train{};
  WorldConfig world{};
  DesignBounds bounds{};
  std::string fixed_camera = "basler";  ///< basler | flir, for the fixed-camera method
  bool reevaluate_survivors = false;   ///< use the latest evaluation for survivors instead of their first
  bool shared_episode = false;  ///< all candidates of a generation replay one episode
  int test_frames = 900;
  int pretrain_designs = 350;  ///< frozen-detector ablation
  int pretrain_frames = 45;

  void validate() const;
  /// Training configuration implied by the method.
  [[nodiscard]] TrainConfig effective_train() const;
};

struct StepRow {
  long step = 0;
  int generation = 0;
  int candidate = 0;
  int design_id = 0;
  int frame = 0;
  StepRecord record;
};

struct CandidateResult {
  int generation = 0;
  int candidate = 0;
  CameraDesign design;
  double evaluated_fitness = 0.0;  ///< mean over this candidate's k frames
  double fitness = 0.0;            ///< value used for selection
  double mean_exposure_ms = 0.0;   ///< mean rendered E_t
  double mean_gain_db = 0.0;
};

struct TestReport {
  int frames = 0;
  double map_score = 0.0;
  double tp_ratio_180 = 0.0;
  double weighted_fitness = 0.0;
  double mean_exposure_ms = 0.0;
  double mean_gain_db = 0.0;
};

struct JointResult {
  CameraDesign best;
  double best_fitness = 0.0;
  std::vector<StepRow> history;
  std::vector<std::vector<CandidateResult>> generations;
  TestReport test;
  long frames_rendered = 0;  ///< training frames
  long ga_applications = 0;
  long pretrain_frames = 0;
  int average_zero_mean_events = 0;
};

using GenerationCallback = std::function<void(int generation, TrainState& state)>;

/// Hardware GA outer loop with continual training of the controller and
/// detector across all candidates, then a frozen-network test on held-out
/// episodes.
JointResult joint_optimise(const ScenarioConfig& scenario, const JointConfig& cfg, const SensorCatalogue& catalogue,
                           std::uint64_t seed, const GenerationCallback& on_generation = {});

}  // namespace camco
