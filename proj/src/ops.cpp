#include "fdrl/ops.hpp"

#include <cmath>
#include <utility>

namespace fdrl {

namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Tape& same_tape(Tensor a, Tensor b) {
  if (&a.tape() != &b.tape()) throw Error("ops: operands live on different tapes");
  return a.tape();
}

}  // namespace

Tensor matmul(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  const Eigen::MatrixXd& av = a.value();
  const Eigen::MatrixXd& bv = b.value();
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(av) + " * " +
                         shape_str(bv));
  std::size_t ia = a.id(), ib = b.id();
  return t.make(av * bv, [ia, ib](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ia) += g * tp.value_of(ib).transpose();
    tp.grad_mut(ib) += tp.value_of(ia).transpose() * g;
  });
}

Tensor add(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  const Eigen::MatrixXd& av = a.value();
  const Eigen::MatrixXd& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw DimensionError("add: shapes disagree, " + shape_str(av) + " vs " + shape_str(bv));
  std::size_t ia = a.id(), ib = b.id();
  return t.make(av + bv, [ia, ib](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ia) += g;
    tp.grad_mut(ib) += g;
  });
}

Tensor add_bias(Tensor x, Tensor bias) {
  Tape& t = same_tape(x, bias);
  const Eigen::MatrixXd& xv = x.value();
  const Eigen::MatrixXd& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols())
    throw DimensionError("add_bias: bias must be 1x" + std::to_string(xv.cols()) + ", got " +
                         shape_str(bv));
  std::size_t ix = x.id(), ib = bias.id();
  Eigen::MatrixXd out = xv;
  out.rowwise() += bv.row(0);
  return t.make(std::move(out), [ix, ib](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ix) += g;
    tp.grad_mut(ib) += g.colwise().sum();
  });
}

Tensor scale(Tensor x, double c) {
  std::size_t ix = x.id();
  return x.tape().make(c * x.value(), [ix, c](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ix) += c * g;
  });
}

Tensor relu(Tensor x) {
  std::size_t ix = x.id();
  return x.tape().make(x.value().cwiseMax(0.0), [ix](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ix) += (tp.value_of(ix).array() > 0.0).cast<double>().matrix().cwiseProduct(g);
  });
}

Tensor softmax_rows(Tensor x) {
  const Eigen::MatrixXd& xv = x.value();
  Eigen::MatrixXd out(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    Eigen::ArrayXd z = xv.row(r).array() - xv.row(r).maxCoeff();
    Eigen::ArrayXd e = z.exp();
    out.row(r) = (e / e.sum()).matrix().transpose();
  }
  std::size_t ix = x.id();
  // d softmax: per row, grad_x = s .* (g - <g, s>)
  return x.tape().make(out, [ix, out](Tape& tp, const Eigen::MatrixXd& g) {
    Eigen::MatrixXd gx(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      double dot = g.row(r).dot(out.row(r));
      gx.row(r) = out.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    tp.grad_mut(ix) += gx;
  });
}

Tensor cross_entropy(Tensor logits, const std::vector<int>& labels) {
  const Eigen::MatrixXd& lv = logits.value();
  const Eigen::Index batch = lv.rows();
  const Eigen::Index classes = lv.cols();
  if (static_cast<Eigen::Index>(labels.size()) != batch)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         shape_str(lv) + " logits");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw ValidationError("cross_entropy: label " + std::to_string(labels[i]) + " at row " +
                            std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
  }
  Eigen::MatrixXd probs(batch, classes);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < batch; ++r) {
    double m = lv.row(r).maxCoeff();
    Eigen::ArrayXd z = lv.row(r).array() - m;
    Eigen::ArrayXd e = z.exp();
    double sum = e.sum();
    probs.row(r) = (e / sum).matrix().transpose();
    loss -= z(labels[r]) - std::log(sum);
  }
  loss /= static_cast<double>(batch);
  std::size_t il = logits.id();
  Eigen::MatrixXd scaled = probs;
  for (Eigen::Index r = 0; r < batch; ++r) scaled(r, labels[r]) -= 1.0;
  scaled /= static_cast<double>(batch);
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = loss;
  return logits.tape().make(out, [il, scaled](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(il) += g(0, 0) * scaled;
  });
}

Tensor frobenius_sq(Tensor x) {
  std::size_t ix = x.id();
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = x.value().squaredNorm();
  return x.tape().make(out, [ix](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ix) += 2.0 * g(0, 0) * tp.value_of(ix);
  });
}

Tensor grad_reverse(Tensor x, double lambda) {
  if (lambda < 0.0)
    throw ValidationError("grad_reverse: lambda must be >= 0, got " + std::to_string(lambda));
  std::size_t ix = x.id();
  return x.tape().make(x.value(), [ix, lambda](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ix) -= lambda * g;
  });
}

Tensor transpose(Tensor x) {
  std::size_t ix = x.id();
  return x.tape().make(x.value().transpose(), [ix](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ix) += g.transpose();
  });
}

Tensor mean_rows(Tensor x) {
  std::size_t ix = x.id();
  const Eigen::Index m = x.rows();
  Eigen::MatrixXd out = x.value().colwise().mean();
  return x.tape().make(out, [ix, m](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ix) += g.replicate(m, 1) / static_cast<double>(m);
  });
}

Tensor row(Tensor x, Eigen::Index i) {
  const Eigen::MatrixXd& xv = x.value();
  if (i < 0 || i >= xv.rows())
    throw DimensionError("row: index " + std::to_string(i) + " outside " + shape_str(xv));
  std::size_t ix = x.id();
  return x.tape().make(xv.row(i), [ix, i](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ix).row(i) += g.row(0);
  });
}

Tensor row_stack(Tensor a, Tensor b) { return row_stack(std::vector<Tensor>{a, b}); }

Tensor row_stack(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw DimensionError("row_stack: no operands");
  Tape& t = xs.front().tape();
  const Eigen::Index n = xs.front().cols();
  Eigen::Index total = 0;
  for (const Tensor& x : xs) {
    same_tape(xs.front(), x);
    if (x.cols() != n)
      throw DimensionError("row_stack: column counts disagree, " + std::to_string(n) + " vs " +
                           std::to_string(x.cols()));
    total += x.rows();
  }
  Eigen::MatrixXd out(total, n);
  std::vector<std::pair<std::size_t, Eigen::Index>> parts;  // (id, rows)
  Eigen::Index at = 0;
  for (const Tensor& x : xs) {
    out.middleRows(at, x.rows()) = x.value();
    parts.emplace_back(x.id(), x.rows());
    at += x.rows();
  }
  return t.make(std::move(out), [parts](Tape& tp, const Eigen::MatrixXd& g) {
    Eigen::Index at = 0;
    for (const auto& [id, m] : parts) {
      tp.grad_mut(id) += g.middleRows(at, m);
      at += m;
    }
  });
}

Tensor concat_cols(Tensor a, Tensor b) { return concat_cols(std::vector<Tensor>{a, b}); }

Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw DimensionError("concat_cols: no operands");
  Tape& t = xs.front().tape();
  const Eigen::Index m = xs.front().rows();
  Eigen::Index total = 0;
  for (const Tensor& x : xs) {
    same_tape(xs.front(), x);
    if (x.rows() != m)
      throw DimensionError("concat_cols: row counts disagree, " + std::to_string(m) + " vs " +
                           std::to_string(x.rows()));
    total += x.cols();
  }
  Eigen::MatrixXd out(m, total);
  std::vector<std::pair<std::size_t, Eigen::Index>> parts;  // (id, cols)
  Eigen::Index at = 0;
  for (const Tensor& x : xs) {
    out.middleCols(at, x.cols()) = x.value();
    parts.emplace_back(x.id(), x.cols());
    at += x.cols();
  }
  return t.make(std::move(out), [parts](Tape& tp, const Eigen::MatrixXd& g) {
    Eigen::Index at = 0;
    for (const auto& [id, n] : parts) {
      tp.grad_mut(id) += g.middleCols(at, n);
      at += n;
    }
  });
}

Tensor flatten_rows(Tensor x) {
  const Eigen::MatrixXd& xv = x.value();
  const Eigen::Index m = xv.rows(), n = xv.cols();
  Eigen::MatrixXd out(1, m * n);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < n; ++c) out(0, r * n + c) = xv(r, c);
  std::size_t ix = x.id();
  return x.tape().make(std::move(out), [ix, m, n](Tape& tp, const Eigen::MatrixXd& g) {
    Eigen::MatrixXd& gx = tp.grad_mut(ix);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < n; ++c) gx(r, c) += g(0, r * n + c);
  });
}

Tensor scale_rows(Tensor x, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd& xv = x.value();
  if (w.size() != xv.rows())
    throw DimensionError("scale_rows: " + std::to_string(w.size()) + " weights for " +
                         shape_str(xv));
  std::size_t ix = x.id();
  return x.tape().make(w.asDiagonal() * xv, [ix, w](Tape& tp, const Eigen::MatrixXd& g) {
    tp.grad_mut(ix) += w.asDiagonal() * g;
  });
}

}  // namespace fdrl
