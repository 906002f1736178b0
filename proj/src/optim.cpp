#include "fdrl/optim.hpp"

#include <cmath>

namespace fdrl {

AdamW::AdamW(AdamWConfig cfg, const std::vector<Param*>& params) : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Param* p : params) {
    m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(const std::vector<Param*>& params, const std::vector<Eigen::MatrixXd>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw DimensionError("AdamW: parameter/gradient count does not match optimizer state");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd& p = params[i]->value;
    const Eigen::MatrixXd& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw DimensionError("AdamW: gradient shape mismatch for " + params[i]->name);
    p -= cfg_.lr * cfg_.weight_decay * p;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Eigen::ArrayXXd m_hat = m_[i].array() / bc1;
    Eigen::ArrayXXd v_hat = v_[i].array() / bc2;
    p.array() -= cfg_.lr * m_hat / (v_hat.sqrt() + cfg_.eps);
  }
}

void clip_global_norm(std::vector<Eigen::MatrixXd>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const Eigen::MatrixXd& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (Eigen::MatrixXd& g : grads) g *= scale;
}

}  // namespace fdrl
