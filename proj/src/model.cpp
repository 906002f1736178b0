#include "fdrl/model.hpp"

#include <cmath>

#include "fdrl/rng.hpp"

namespace fdrl {

void Mlp2::collect(std::vector<Param*>& out) {
  out.push_back(&W1);
  out.push_back(&b1);
  out.push_back(&W2);
  out.push_back(&b2);
}

void PredictorParams::collect(std::vector<Param*>& out) {
  out.push_back(&W);
  out.push_back(&b);
}

void FusionParams::collect(std::vector<Param*>& out) {
  for (FusionHead& h : heads) {
    out.push_back(&h.Wq);
    out.push_back(&h.Wk);
    out.push_back(&h.Wv);
  }
  out.push_back(&Wtask);
}

std::vector<int> modality_labels(Eigen::Index batch) {
  std::vector<int> y(static_cast<std::size_t>(2 * batch), 0);
  for (Eigen::Index i = batch; i < 2 * batch; ++i) y[static_cast<std::size_t>(i)] = 1;
  return y;
}

void ModelDims::validate() const {
  if (d_in < 1 || hidden < 1 || d < 1 || classes < 1 || heads < 1)
    throw ConfigError("model dims must all be >= 1");
  if (d % heads != 0)
    throw ConfigError("d = " + std::to_string(d) + " is not divisible by heads = " +
                      std::to_string(heads));
}

namespace {

Param init_weight(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
  Eigen::MatrixXd w(in, out);
  double bound = std::sqrt(1.0 / static_cast<double>(in));
  rng.fill_uniform(w, -bound, bound);
  return Param(name, std::move(w));
}

Param init_bias(const std::string& name, Eigen::Index out) {
  return Param(name, Eigen::MatrixXd::Zero(1, out));
}

Mlp2 init_mlp2(const std::string& prefix, Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
               Rng& rng) {
  Mlp2 m;
  m.W1 = init_weight(prefix + ".W1", in, hidden, rng);
  m.b1 = init_bias(prefix + ".b1", hidden);
  m.W2 = init_weight(prefix + ".W2", hidden, out, rng);
  m.b2 = init_bias(prefix + ".b2", out);
  return m;
}

}  // namespace

FdrlModel FdrlModel::init(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  FdrlModel m;
  m.dims = dims;
  m.shared_encoder = init_mlp2("shared", dims.d_in, dims.hidden, dims.d, rng);
  m.private_a = init_mlp2("private_a", dims.d_in, dims.hidden, dims.d, rng);
  m.private_t = init_mlp2("private_t", dims.d_in, dims.hidden, dims.d, rng);
  m.align_global = init_mlp2("align_global", dims.d, dims.hidden, 2, rng);
  m.align_local.reserve(dims.classes);
  for (int c = 0; c < dims.classes; ++c)
    m.align_local.push_back(
        init_mlp2("align_local." + std::to_string(c), dims.d, dims.hidden, 2, rng));
  m.modality_disc = init_mlp2("modality_disc", dims.d, dims.hidden, 2, rng);
  m.predictor.W = init_weight("predictor.W", dims.d, dims.classes, rng);
  m.predictor.b = init_bias("predictor.b", dims.classes);
  const Eigen::Index d_h = dims.d / dims.heads;
  m.fusion.dim = dims.d;
  m.fusion.heads.resize(dims.heads);
  for (int h = 0; h < dims.heads; ++h) {
    std::string p = "fusion.head" + std::to_string(h);
    m.fusion.heads[h].Wq = init_weight(p + ".Wq", dims.d, d_h, rng);
    m.fusion.heads[h].Wk = init_weight(p + ".Wk", dims.d, d_h, rng);
    m.fusion.heads[h].Wv = init_weight(p + ".Wv", dims.d, d_h, rng);
  }
  m.fusion.Wtask = init_weight("fusion.Wtask", 4 * dims.d, dims.classes, rng);
  return m;
}

std::vector<Param*> FdrlModel::params() {
  std::vector<Param*> out;
  shared_encoder.collect(out);
  private_a.collect(out);
  private_t.collect(out);
  align_global.collect(out);
  for (Mlp2& d : align_local) d.collect(out);
  modality_disc.collect(out);
  predictor.collect(out);
  fusion.collect(out);
  return out;
}

Tensor mlp2_forward(Tape& tape, Tensor x, Mlp2& mlp) {
  if (x.cols() != mlp.in_dim())
    throw DimensionError("mlp2_forward: input width " + std::to_string(x.cols()) +
                         " does not match " + std::to_string(mlp.in_dim()));
  Tensor h = relu(add_bias(matmul(x, tape.lift(mlp.W1)), tape.lift(mlp.b1)));
  return add_bias(matmul(h, tape.lift(mlp.W2)), tape.lift(mlp.b2));
}

LatentPack encode(Tape& tape, const Eigen::MatrixXd& H_a, const Eigen::MatrixXd& H_t,
                  Mlp2& shared, Mlp2& priv_a, Mlp2& priv_t) {
  if (H_a.rows() != H_t.rows())
    throw ValidationError("encode: modality batch sizes disagree, " + std::to_string(H_a.rows()) +
                          " vs " + std::to_string(H_t.rows()));
  if (H_a.cols() != shared.in_dim() || H_t.cols() != shared.in_dim())
    throw ValidationError("encode: feature width " + std::to_string(H_a.cols()) +
                          " does not match encoder input " + std::to_string(shared.in_dim()));
  Tensor ha = tape.leaf(H_a);
  Tensor ht = tape.leaf(H_t);
  LatentPack pack;
  pack.S_a = mlp2_forward(tape, ha, shared);
  pack.S_t = mlp2_forward(tape, ht, shared);
  pack.P_a = mlp2_forward(tape, ha, priv_a);
  pack.P_t = mlp2_forward(tape, ht, priv_t);
  return pack;
}

Tensor global_domain_logits(Tape& tape, Tensor S, Mlp2& disc, double lambda) {
  return mlp2_forward(tape, grad_reverse(S, lambda), disc);
}

std::vector<Tensor> local_domain_logits(Tape& tape, Tensor S, const Eigen::MatrixXd& class_probs,
                                        std::vector<Mlp2>& discs, double lambda) {
  const Eigen::Index classes = class_probs.cols();
  if (static_cast<std::size_t>(classes) != discs.size())
    throw ConfigError("local_domain_logits: " + std::to_string(classes) +
                      " probability columns for " + std::to_string(discs.size()) +
                      " discriminators");
  if (class_probs.rows() != S.rows())
    throw DimensionError("local_domain_logits: " + std::to_string(class_probs.rows()) +
                         " probability rows for " + std::to_string(S.rows()) + " codes");
  for (Eigen::Index r = 0; r < class_probs.rows(); ++r) {
    if (std::abs(class_probs.row(r).sum() - 1.0) > 1e-6)
      throw ValidationError("local_domain_logits: probability row " + std::to_string(r) +
                            " sums to " + std::to_string(class_probs.row(r).sum()));
  }
  Tensor reversed = grad_reverse(S, lambda);
  std::vector<Tensor> logits;
  logits.reserve(classes);
  for (Eigen::Index c = 0; c < classes; ++c)
    logits.push_back(mlp2_forward(tape, scale_rows(reversed, class_probs.col(c)), discs[c]));
  return logits;
}

Tensor modality_disc_logits(Tape& tape, Tensor P, Mlp2& disc) {
  return mlp2_forward(tape, P, disc);
}

Tensor predict_fine(Tape& tape, Tensor x, PredictorParams& pred) {
  return add_bias(matmul(x, tape.lift(pred.W)), tape.lift(pred.b));
}

Tensor self_attention(Tape& tape, Tensor x, FusionParams& fusion,
                      std::vector<Eigen::MatrixXd>* attn_out) {
  if (x.cols() != fusion.dim)
    throw DimensionError("self_attention: input width " + std::to_string(x.cols()) +
                         " does not match fusion dim " + std::to_string(fusion.dim));
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(fusion.head_dim()));
  std::vector<Tensor> outs;
  outs.reserve(fusion.heads.size());
  for (FusionHead& h : fusion.heads) {
    Tensor q = matmul(x, tape.lift(h.Wq));
    Tensor k = matmul(x, tape.lift(h.Wk));
    Tensor v = matmul(x, tape.lift(h.Wv));
    Tensor attn = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_dh));
    if (attn_out) attn_out->push_back(attn.value());
    outs.push_back(matmul(attn, v));
  }
  return outs.size() == 1 ? outs.front() : concat_cols(outs);
}

FusionOut fuse(Tape& tape, const LatentPack& pack, FusionParams& fusion) {
  const Eigen::Index batch = pack.batch();
  std::vector<Tensor> flat;
  flat.reserve(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    Tensor stacked = row_stack(
        {row(pack.S_a, i), row(pack.S_t, i), row(pack.P_a, i), row(pack.P_t, i)});
    flat.push_back(flatten_rows(self_attention(tape, stacked, fusion)));
  }
  FusionOut out;
  out.features = batch == 1 ? flat.front() : row_stack(flat);
  out.logits = matmul(out.features, tape.lift(fusion.Wtask));
  return out;
}

}  // namespace fdrl
