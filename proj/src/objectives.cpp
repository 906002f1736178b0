#include "fdrl/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fdrl {

Tensor loss_global_align(Tape& tape, Tensor S_a, Tensor S_t, Mlp2& disc, double lambda) {
  Tensor stacked = row_stack(S_a, S_t);
  Tensor logits = global_domain_logits(tape, stacked, disc, lambda);
  return cross_entropy(logits, modality_labels(S_a.rows()));
}

LocalAlignLoss loss_local_align(Tape& tape, Tensor S_a, Tensor S_t,
                                const Eigen::MatrixXd& probs_a, const Eigen::MatrixXd& probs_t,
                                std::vector<Mlp2>& discs, double lambda) {
  if (probs_a.cols() != probs_t.cols())
    throw ConfigError("loss_local_align: probability class counts disagree");
  Eigen::MatrixXd probs(probs_a.rows() + probs_t.rows(), probs_a.cols());
  probs << probs_a, probs_t;
  Tensor stacked = row_stack(S_a, S_t);
  std::vector<Tensor> logits = local_domain_logits(tape, stacked, probs, discs, lambda);
  std::vector<int> y_m = modality_labels(S_a.rows());

  LocalAlignLoss out;
  out.per_class.reserve(logits.size());
  for (Tensor& l : logits) out.per_class.push_back(cross_entropy(l, y_m));
  Tensor total = out.per_class.front();
  for (std::size_t c = 1; c < out.per_class.size(); ++c) total = add(total, out.per_class[c]);
  out.sum = total;
  out.mean = scale(total, 1.0 / static_cast<double>(out.per_class.size()));
  out.class_mass = probs.colwise().sum();
  return out;
}

Tensor loss_modality_adversarial(Tape& tape, const LatentPack& pack, Mlp2& disc) {
  Tensor stacked = row_stack(pack.P_a, pack.P_t);
  Tensor logits = modality_disc_logits(tape, stacked, disc);
  // mean over the 2B stacked rows = 1/2 sum of the two per-modality means
  return cross_entropy(logits, modality_labels(pack.batch()));
}

Tensor loss_orthogonal(Tape&, const LatentPack& pack) {
  const double b2 = static_cast<double>(pack.batch()) * static_cast<double>(pack.batch());
  Tensor term_a = scale(frobenius_sq(matmul(transpose(pack.S_a), pack.P_a)), 1.0 / b2);
  Tensor term_t = scale(frobenius_sq(matmul(transpose(pack.S_t), pack.P_t)), 1.0 / b2);
  return add(term_a, term_t);
}

DisparityLoss loss_disparity(Tape& tape, const LatentPack& pack, Mlp2& modality_disc) {
  return DisparityLoss{loss_modality_adversarial(tape, pack, modality_disc),
                       loss_orthogonal(tape, pack)};
}

Tensor loss_predictor(Tape& tape, const LatentPack& pack, PredictorParams& pred,
                      const std::vector<int>& emotion_labels) {
  Tensor s_sum = add(pack.S_a, pack.S_t);
  Tensor l_s = cross_entropy(predict_fine(tape, s_sum, pred), emotion_labels);
  Tensor l_pa = cross_entropy(predict_fine(tape, pack.P_a, pred), emotion_labels);
  Tensor l_pt = cross_entropy(predict_fine(tape, pack.P_t, pred), emotion_labels);
  return scale(add(add(l_s, l_pa), l_pt), 1.0 / 3.0);
}

Tensor loss_task(Tensor task_logits, const std::vector<int>& emotion_labels) {
  return cross_entropy(task_logits, emotion_labels);
}

Tensor compose_total(Tape&, const LossTerms& terms, double mu, double alpha, double beta,
                     double gamma) {
  if (alpha < 0 || beta < 0 || gamma < 0)
    throw ConfigError("trade-off parameters must be non-negative");
  if (!terms.task.valid()) throw ConfigError("compose_total: task loss is required");
  Tensor total = terms.task;
  if (terms.global_align.valid()) total = add(total, scale(terms.global_align, alpha * (1.0 - mu)));
  if (terms.local_mean.valid()) total = add(total, scale(terms.local_mean, alpha * mu));
  if (terms.disparity_adv.valid()) total = add(total, scale(terms.disparity_adv, beta));
  if (terms.disparity_orth.valid()) total = add(total, scale(terms.disparity_orth, beta));
  if (terms.predictor.valid()) total = add(total, scale(terms.predictor, gamma));
  return total;
}

std::string LossReport::csv_header() {
  return "step,epoch,L_task,L_g,L_l,L_p,L_d,L_f,L_total,mu,lambda";
}

namespace {
void append_g17(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  s += buf;
}
}  // namespace

std::string LossReport::csv_row() const {
  std::string s = std::to_string(step) + "," + std::to_string(epoch);
  for (double v : {L_task, L_g, L_l, L_p, L_d, L_f, L_total, mu, lambda}) {
    s += ',';
    append_g17(s, v);
  }
  return s;
}

double LossReport::recompose(double alpha, double beta, double gamma, const Toggles& t) const {
  double total = L_task;
  if (t.alignment_global) total += alpha * (1.0 - mu) * L_g;
  if (t.alignment_local) total += alpha * mu * L_l;
  if (t.disparity_adv) total += beta * L_p;
  if (t.disparity_orth) total += beta * L_d;
  if (t.predictor) total += gamma * L_f;
  return total;
}

DynamicFactorState::DynamicFactorState(int classes, double initial_mu)
    : classes_(classes),
      mu_(initial_mu),
      local_sum_(static_cast<std::size_t>(classes), 0.0),
      mass_(static_cast<std::size_t>(classes), 0.0) {}

void DynamicFactorState::accumulate(double global_mean_loss,
                                    const std::vector<double>& per_class_mean_loss,
                                    Eigen::Index rows, const Eigen::VectorXd& class_mass) {
  if (static_cast<int>(per_class_mean_loss.size()) != classes_ || class_mass.size() != classes_)
    throw ConfigError("DynamicFactorState: class count mismatch");
  const double w = static_cast<double>(rows);
  global_sum_ += global_mean_loss * w;
  global_rows_ += w;
  local_rows_ += w;
  for (int c = 0; c < classes_; ++c) {
    local_sum_[c] += per_class_mean_loss[c] * w;
    mass_[c] += class_mass(c);
  }
}

namespace {
double a_distance(double mean_loss) {
  double clamped = std::clamp(mean_loss, 0.0, 0.5);
  return 2.0 * (1.0 - 2.0 * clamped);
}
}  // namespace

bool DynamicFactorState::update_mu() {
  const bool have_global = global_rows_ > 0.0;
  const bool have_local = local_rows_ > 0.0;
  double d_g = have_global ? a_distance(global_sum_ / global_rows_) : 0.0;
  double d_l_sum = 0.0;
  int included = 0;
  if (have_local) {
    for (int c = 0; c < classes_; ++c) {
      if (mass_[c] < 1e-6) continue;  // unobserved subdomain
      d_l_sum += a_distance(local_sum_[c] / local_rows_);
      ++included;
    }
  }
  global_sum_ = 0.0;
  global_rows_ = 0.0;
  local_rows_ = 0.0;
  std::fill(local_sum_.begin(), local_sum_.end(), 0.0);
  std::fill(mass_.begin(), mass_.end(), 0.0);

  if (!have_global || included == 0) return false;
  const double d_l = d_l_sum / static_cast<double>(included);
  d_global_ = d_g;
  d_local_mean_ = d_l;
  const double denom = d_g + d_l;
  if (denom <= 0.0) return false;
  mu_ = std::clamp(d_g / denom, 0.0, 1.0);
  return true;
}

}  // namespace fdrl
