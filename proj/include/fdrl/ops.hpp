#pragma once

#include <vector>

#include "fdrl/autodiff.hpp"

namespace fdrl {

// Differentiable operations over tape tensors. Every function records the
// forward value and a reverse-mode rule on the operands' tape. Shape
// mismatches throw DimensionError naming both shapes.

Tensor matmul(Tensor a, Tensor b);

/// Elementwise sum of two same-shape tensors.
Tensor add(Tensor a, Tensor b);

/// x + bias broadcast over rows; bias is 1 x n.
Tensor add_bias(Tensor x, Tensor bias);

/// Multiply by a compile-time constant.
Tensor scale(Tensor x, double c);

/// Elementwise max(0, x). Subgradient at exactly 0 is 0.
Tensor relu(Tensor x);

/// Row-wise softmax, stabilized by subtracting the row max.
Tensor softmax_rows(Tensor x);

/// Mean over the batch of -log softmax(logits)[label]. Returns 1x1.
Tensor cross_entropy(Tensor logits, const std::vector<int>& labels);

/// Sum of squared entries. Returns 1x1.
Tensor frobenius_sq(Tensor x);

/// Identity forward; backward multiplies the incoming gradient by -lambda.
Tensor grad_reverse(Tensor x, double lambda);

Tensor transpose(Tensor x);

/// Column means: m x n -> 1 x n.
Tensor mean_rows(Tensor x);

/// Row slice: m x n -> 1 x n.
Tensor row(Tensor x, Eigen::Index i);

/// Vertical stack.
Tensor row_stack(Tensor a, Tensor b);
Tensor row_stack(const std::vector<Tensor>& xs);

/// Horizontal concatenation (each row concatenated).
Tensor concat_cols(Tensor a, Tensor b);
Tensor concat_cols(const std::vector<Tensor>& xs);

/// Row-major flatten: m x n -> 1 x (m*n).
Tensor flatten_rows(Tensor x);

/// Scale row i by w[i]. The weights are constants: no gradient flows to them.
Tensor scale_rows(Tensor x, const Eigen::VectorXd& w);

}  // namespace fdrl
