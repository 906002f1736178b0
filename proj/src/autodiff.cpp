#include "fdrl/autodiff.hpp"

#include <atomic>

namespace fdrl {

namespace {
std::atomic<std::uint64_t> g_tape_serial{1};
}

const Eigen::MatrixXd& Tensor::value() const {
  if (!valid()) throw Error("Tensor: access to an invalid handle");
  return tape_->value_of(id_);
}

const Eigen::MatrixXd& Tensor::grad() const {
  if (!valid()) throw Error("Tensor: access to an invalid handle");
  return tape_->grad_of(id_);
}

double Tensor::scalar() const {
  const Eigen::MatrixXd& v = value();
  if (v.rows() != 1 || v.cols() != 1)
    throw DimensionError("Tensor: scalar() on a " + std::to_string(v.rows()) + "x" +
                         std::to_string(v.cols()) + " value");
  return v(0, 0);
}

Eigen::Index Tensor::rows() const { return value().rows(); }
Eigen::Index Tensor::cols() const { return value().cols(); }

Tape& Tensor::tape() const {
  if (!valid()) throw Error("Tensor: access to an invalid handle");
  return *tape_;
}

Tape::Tape() : serial_(g_tape_serial.fetch_add(1)) {}

Tensor Tape::leaf(Eigen::MatrixXd value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr});
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::lift(Param& p) {
  if (p.lift_serial == serial_ && p.leaf.valid()) return p.leaf;
  Tensor t = leaf(p.value);
  p.leaf = t;
  p.lift_serial = serial_;
  return t;
}

Tensor Tape::make(Eigen::MatrixXd value, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), {}, std::move(backward)});
  return Tensor(this, nodes_.size() - 1);
}

const Eigen::MatrixXd& Tape::grad_of(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() != 0)
    throw Error("Tape: gradient requested before backward()");
  return n.grad;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.valid() || &loss.tape() != this) throw Error("Tape: loss lives on another tape");
  const Eigen::MatrixXd& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw DimensionError("Tape: backward() needs a 1x1 loss, got " + std::to_string(lv.rows()) +
                         "x" + std::to_string(lv.cols()));
  for (Node& n : nodes_) n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  nodes_[loss.id()].grad(0, 0) = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) n.backward(*this, n.grad);
  }
  ran_backward_ = true;
}

}  // namespace fdrl
