#pragma once

#include <cstdint>
#include <vector>

#include "fdrl/ops.hpp"

namespace fdrl {

/// Two fully connected layers with a ReLU between them.
/// Backs both the encoders (in -> hidden -> d) and the discriminators
/// (d -> hidden -> 2).
struct Mlp2 {
  Param W1, b1, W2, b2;

  Eigen::Index in_dim() const { return W1.value.rows(); }
  Eigen::Index hidden_dim() const { return W1.value.cols(); }
  Eigen::Index out_dim() const { return W2.value.cols(); }
  void collect(std::vector<Param*>& out);
};

using EncoderParams = Mlp2;
using DiscriminatorParams = Mlp2;

/// One-layer perceptron mapping d -> C.
struct PredictorParams {
  Param W, b;
  void collect(std::vector<Param*>& out);
};

struct FusionHead {
  Param Wq, Wk, Wv;  // each d x d_h, no bias
};

/// Multi-head self-attention over the four stacked codes plus the task head.
struct FusionParams {
  std::vector<FusionHead> heads;
  Param Wtask;  // 4d x C
  Eigen::Index dim = 0;
  Eigen::Index head_dim() const { return dim / static_cast<Eigen::Index>(heads.size()); }
  void collect(std::vector<Param*>& out);
};

/// Per-batch shared and private codes, all B x d.
/// Row order convention for stacked views: the speech block first (modality
/// label 0), then the text block (label 1).
struct LatentPack {
  Tensor S_a, S_t, P_a, P_t;
  Eigen::Index batch() const { return S_a.rows(); }
};

/// Modality labels for a [speech block; text block] stack of 2B rows.
std::vector<int> modality_labels(Eigen::Index batch);

struct ModelDims {
  int d_in = 64;
  int hidden = 32;
  int d = 32;
  int classes = 4;
  int heads = 4;
  void validate() const;
};

struct FdrlModel {
  ModelDims dims;
  Mlp2 shared_encoder;
  Mlp2 private_a;
  Mlp2 private_t;
  Mlp2 align_global;              // global domain discriminator, behind the GRL
  std::vector<Mlp2> align_local;  // one subdomain discriminator per class, behind the GRL
  Mlp2 modality_disc;             // private-code modality discriminator, no GRL
  PredictorParams predictor;
  FusionParams fusion;

  /// Weights ~ uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)), zero biases.
  static FdrlModel init(const ModelDims& dims, std::uint64_t seed);

  /// All parameters in a fixed declaration order.
  std::vector<Param*> params();
};

Tensor mlp2_forward(Tape& tape, Tensor x, Mlp2& mlp);

/// S_a = E_s(H_a), S_t = E_s(H_t) with one shared parameter set;
/// P_a = E_a(H_a), P_t = E_t(H_t).
LatentPack encode(Tape& tape, const Eigen::MatrixXd& H_a, const Eigen::MatrixXd& H_t,
                  Mlp2& shared, Mlp2& priv_a, Mlp2& priv_t);

/// Discriminator logits on gradient-reversed shared codes. Forward value is
/// independent of lambda.
Tensor global_domain_logits(Tape& tape, Tensor S, Mlp2& disc, double lambda);

/// Per-class discriminator logits on probability-weighted, gradient-reversed
/// shared codes. class_probs rows must sum to 1 (tolerance 1e-6) and are
/// treated as constants: no gradient flows back into the predictor.
std::vector<Tensor> local_domain_logits(Tape& tape, Tensor S, const Eigen::MatrixXd& class_probs,
                                        std::vector<Mlp2>& discs, double lambda);

/// Plain discriminator logits on private codes; this branch is minimized
/// jointly, no gradient reversal.
Tensor modality_disc_logits(Tape& tape, Tensor P, Mlp2& disc);

/// Affine emotion logits.
Tensor predict_fine(Tape& tape, Tensor x, PredictorParams& pred);

/// Multi-head self-attention with Q = K = V = x (n x d). When attn_out is
/// given, each head's attention weight matrix is appended to it.
Tensor self_attention(Tape& tape, Tensor x, FusionParams& fusion,
                      std::vector<Eigen::MatrixXd>* attn_out = nullptr);

struct FusionOut {
  Tensor features;  // B x 4d, per-sample flattened attention output
  Tensor logits;    // B x C
};

/// Per sample: stack [S_a; S_t; P_a; P_t] rows into a 4 x d matrix, run
/// self-attention, flatten, then apply the task head.
FusionOut fuse(Tape& tape, const LatentPack& pack, FusionParams& fusion);

}  // namespace fdrl
