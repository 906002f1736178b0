#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fdrl/checkpoint.hpp"
#include "fdrl/config.hpp"
#include "fdrl/dataset.hpp"
#include "fdrl/metrics.hpp"
#include "fdrl/model.hpp"
#include "fdrl/objectives.hpp"
#include "fdrl/optim.hpp"

namespace fdrl {

enum class LambdaSchedule { Dann, Constant };

struct TrainConfig {
  int d_in = 64;
  int d = 32;
  int hidden = 0;  // 0: use d
  int classes = 4;
  int heads = 4;

  double alpha = 1.0;
  double beta = 0.5;
  double gamma = 1.0;

  double lr = 1e-5;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int batch_size = 8;
  int epochs = 100;
  std::uint64_t seed = 1;

  Toggles toggles;
  LambdaSchedule lambda_schedule = LambdaSchedule::Dann;
  double lambda_value = 1.0;  // used by the constant schedule
  double grad_clip = 0.0;     // global-norm clip, 0 = off
  bool select_best_epoch = false;

  int resolved_hidden() const { return hidden > 0 ? hidden : d; }
  ModelDims model_dims() const;
  AdamWConfig optimizer() const;
  void validate() const;
};

/// Ablation presets matching the published system rows:
/// none/s0 full model; s1 no alignment and no disparity; s2 no global
/// discriminator; s3 no local discriminators; s4 no alignment; s5 no
/// disparity; s6 no predictor constraint.
Toggles ablation_toggles(const std::string& name);

/// Adversarial weight for an epoch. The ramp follows
/// lambda(p) = 2 / (1 + exp(-10 p)) - 1 with p = epoch / (epochs - 1);
/// single-epoch runs use p = 1.
double lambda_at_epoch(const TrainConfig& cfg, int epoch);

TrainConfig train_config_from(const Config& cfg);
Config config_from(const TrainConfig& cfg);

/// Keys accepted in train config files and --set overrides.
const std::vector<std::string>& train_config_keys();

struct FoldResult {
  FdrlModel model;
  std::vector<LossReport> loss_log;
  MetricsReport metrics;
  std::vector<double> mu_by_epoch;
  std::vector<double> lambda_by_epoch;
};

/// End-to-end optimization of one fold: per step, forward the toggled
/// branches, compose the total with the current mu, backward, AdamW update;
/// per epoch, refresh mu from the epoch accumulators and advance the lambda
/// schedule. diag (when given) receives occasional progress notes.
FoldResult train_fold(const TrainConfig& cfg, const Dataset& ds, int fold,
                      std::ostream* diag = nullptr);

MetricsReport evaluate(FdrlModel& model, const Dataset& ds, const std::vector<int>& indices);

struct Embeddings {
  Eigen::MatrixXd S_a, S_t, P_a, P_t;  // n x d each
  std::vector<int> labels;
};

Embeddings compute_embeddings(FdrlModel& model, const Dataset& ds,
                              const std::vector<int>& indices);

/// In-sample accuracy of a linear softmax probe trained on frozen rows.
double linear_probe_accuracy(const Eigen::MatrixXd& X, const std::vector<int>& y, int classes,
                             std::uint64_t seed);

struct ProbeReport {
  double modality_acc_shared = 0.0;   // expect near chance after training
  double modality_acc_private = 0.0;  // expect high
  double emotion_acc_shared = 0.0;
  Eigen::VectorXd class_centroid_dist;  // |mean S_a - mean S_t| per class
  double mean_centroid_dist = 0.0;
  std::string to_text() const;
};

ProbeReport probe_disentanglement(FdrlModel& model, const Dataset& ds,
                                  const std::vector<int>& indices, std::uint64_t seed);

/// Checkpoint round-trip. The echo block must contain the model dims.
CheckpointData model_to_checkpoint(FdrlModel& model, const std::string& config_echo);
FdrlModel model_from_checkpoint(const CheckpointData& data);

}  // namespace fdrl
