#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "s2vae/evaluate.hpp"
#include "s2vae/optimizer.hpp"

namespace s2vae::train {

struct TrainConfig {
  int steps = 200;
  int batch_size = 16;
  double peak_lr = 1e-4;
  double warmup_frac = 0.05;
  AdamWConfig adam;
  double grad_clip = 1.0;
  int eval_every = 50;        // 0 disables periodic eval (start and end still run)
  int checkpoint_every = 0;   // 0 disables periodic checkpoints
  int head_hidden = 64;
  double kappa_max = 1e4;     // bounded-kappa audit: every kappa in (0, kappa_max)
  int eval_batch = 32;
  /// Stops after this many steps without changing the schedule; -1 runs all.
  int stop_after = -1;

  Schedule schedule() const;
  void validate() const;
};

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  std::map<std::string, double> terms;
  double feature_recon = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  double kappa_min = 0.0;
  double kappa_mean = 0.0;
  double kappa_max = 0.0;
  double kappa_grad_var = 0.0;  // variance of dL/dkappa over the batch
};

struct EvalPoint {
  int step = 0;
  MetricRecord metrics;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EvalPoint&)> on_eval;
  /// Called with the number of completed steps when a checkpoint is due.
  std::function<void(int)> on_checkpoint;
};

struct TrainRun {
  std::uint64_t seed = 0;
  std::vector<StepRecord> history;
  std::vector<EvalPoint> evals;  // first entry is before any update
  bool aborted = false;
  std::string abort_reason;
  bool kappa_bounded = true;

  const MetricRecord& initial() const { return evals.front().metrics; }
  const MetricRecord& final() const { return evals.back().metrics; }
  /// Mean over the run of the per-step kappa gradient variance.
  double mean_kappa_grad_var() const;
};

/// Trains model and task heads together; heads see detached reconstructions
/// so their loss never reaches the VAE. On a non-finite loss or gradient the
/// run stops before the offending update, leaving the last good parameters.
TrainRun train(nn::S2Vae& model, TaskHeads& heads, const data::Dataset& ds, const TrainConfig& cfg,
               const loss::LossWeights& w, std::uint64_t seed, const TrainHooks& hooks = {});

/// Column names of the metrics log, in order.
std::vector<std::string> metrics_columns();
std::string metrics_row(const StepRecord& r, const EvalPoint* eval);

struct ArmResult {
  std::string name;
  nn::ModelConfig model_cfg;
  bool failed = false;
  std::string error;
  TrainRun run;
  MetricRecord test;
  std::shared_ptr<nn::S2Vae> model;
  std::shared_ptr<TaskHeads> heads;
};

struct AblationResult {
  std::vector<ArmResult> arms;  // product_spherical, gaussian, single_sphere
  double compression = 0.0;     // input floats per token / latent floats per token
  bool product_ge_gaussian = false;
  bool single_unstable_or_worse = false;
  std::string verdict;
};

/// The three bottleneck variants of `base` at equal latent width.
std::vector<std::pair<std::string, nn::ModelConfig>> ablation_arms(const nn::ModelConfig& base);

/// Trains every arm with the same seed, data and budget; arms run on up to
/// `threads` workers. An arm that throws is recorded as failed.
AblationResult run_ablation(const nn::ModelConfig& base, const data::Dataset& ds, const TrainConfig& cfg,
                            const loss::LossWeights& w, std::uint64_t seed, int threads = 1);

/// Worker count from S2VAE_THREADS, else 1.
int thread_count_from_env();

}  // namespace s2vae::train
