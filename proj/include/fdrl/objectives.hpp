#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fdrl/model.hpp"

namespace fdrl {

/// Which loss terms participate in the total objective. Disabled terms are
/// not built at all and contribute exactly zero. The named ablation presets
/// map onto these switches.
struct Toggles {
  bool alignment_global = true;
  bool alignment_local = true;
  bool disparity_adv = true;
  bool disparity_orth = true;
  bool predictor = true;
};

/// Global alignment loss: cross-entropy of the gradient-reversed global
/// discriminator on [S_a; S_t] against modality labels, per-sample mean.
Tensor loss_global_align(Tape& tape, Tensor S_a, Tensor S_t, Mlp2& disc, double lambda);

struct LocalAlignLoss {
  Tensor sum;                    // sum over classes
  Tensor mean;                   // sum / C, the term entering the total objective
  std::vector<Tensor> per_class; // per-class per-sample-mean losses
  Eigen::VectorXd class_mass;    // total predicted probability mass per class
};

/// Per-class alignment losses on probability-weighted shared codes.
/// probs_a/probs_t rows must sum to 1; they are treated as constants.
LocalAlignLoss loss_local_align(Tape& tape, Tensor S_a, Tensor S_t,
                                const Eigen::MatrixXd& probs_a, const Eigen::MatrixXd& probs_t,
                                std::vector<Mlp2>& discs, double lambda);

/// Modality discriminator loss on stacked private codes, minimized jointly
/// (no gradient reversal): 1/2 sum over modalities of per-sample-mean CE.
Tensor loss_modality_adversarial(Tape& tape, const LatentPack& pack, Mlp2& disc);

/// Orthogonal constraint: |S_a' P_a|_F^2 / B^2 + |S_t' P_t|_F^2 / B^2.
Tensor loss_orthogonal(Tape& tape, const LatentPack& pack);

struct DisparityLoss {
  Tensor adversarial;  // L_p
  Tensor orthogonal;   // L_d
};

DisparityLoss loss_disparity(Tape& tape, const LatentPack& pack, Mlp2& modality_disc);

/// Mean of the three predictor cross-entropies on S_a + S_t, P_a and P_t
/// against the emotion labels, weighted 1/3 each.
Tensor loss_predictor(Tape& tape, const LatentPack& pack, PredictorParams& pred,
                      const std::vector<int>& emotion_labels);

Tensor loss_task(Tensor task_logits, const std::vector<int>& emotion_labels);

/// Loss terms present in the current step's graph; invalid handles mark
/// toggled-off terms.
struct LossTerms {
  Tensor task;
  Tensor global_align;
  Tensor local_mean;
  Tensor disparity_adv;
  Tensor disparity_orth;
  Tensor predictor;
};

/// total = task + alpha * [(1 - mu) global + mu local] + beta * (adv + orth)
///       + gamma * predictor, with absent terms contributing exactly 0.
Tensor compose_total(Tape& tape, const LossTerms& terms, double mu, double alpha, double beta,
                     double gamma);

/// One training step's scalar losses. L_l is the per-class mean, the value
/// entering the total objective; per-class values are kept alongside.
struct LossReport {
  long step = 0;
  int epoch = 0;
  double L_task = 0, L_g = 0, L_l = 0, L_p = 0, L_d = 0, L_f = 0, L_total = 0;
  double mu = 0, lambda = 0;
  std::vector<double> L_l_c;

  static std::string csv_header();
  std::string csv_row() const;
  /// Recompute the total from the stored terms; used to check coherence.
  double recompose(double alpha, double beta, double gamma, const Toggles& t) const;
};

/// Epoch accumulators for the proxy distances and the dynamic factor mu.
/// mu starts at 0.5 and changes only at epoch boundaries.
class DynamicFactorState {
 public:
  explicit DynamicFactorState(int classes, double initial_mu = 0.5);

  /// Record one batch: per-sample-mean global and per-class losses over
  /// `rows` stacked rows, plus the per-class probability mass in the batch.
  void accumulate(double global_mean_loss, const std::vector<double>& per_class_mean_loss,
                  Eigen::Index rows, const Eigen::VectorXd& class_mass);

  /// Epoch boundary: recompute mu from the accumulated losses and reset.
  /// Returns false when the update had to be skipped (no data, or a zero
  /// denominator); mu then retains its previous value.
  bool update_mu();

  double mu() const { return mu_; }
  double global_distance() const { return d_global_; }
  double local_distance_mean() const { return d_local_mean_; }

 private:
  int classes_;
  double mu_;
  double d_global_ = 0.0;
  double d_local_mean_ = 0.0;
  double global_sum_ = 0.0;
  double global_rows_ = 0.0;
  std::vector<double> local_sum_;
  double local_rows_ = 0.0;
  std::vector<double> mass_;
};

}  // namespace fdrl
