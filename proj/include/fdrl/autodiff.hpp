#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fdrl/errors.hpp"

namespace fdrl {

class Tape;

/// Handle to one value recorded on a Tape. Cheap to copy, owns nothing.
/// A default-constructed Tensor is invalid and may be used as "absent".
class Tensor {
 public:
  Tensor() = default;

  bool valid() const { return tape_ != nullptr; }
  const Eigen::MatrixXd& value() const;
  const Eigen::MatrixXd& grad() const;
  double scalar() const;  // value of a 1x1 tensor
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  Tape& tape() const;
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Named trainable matrix that outlives any single tape. Forward passes lift
/// it onto the current tape with Tape::lift, which memoizes per tape so that
/// a parameter used twice accumulates both gradient contributions on one leaf.
struct Param {
  std::string name;
  Eigen::MatrixXd value;

  Param() = default;
  Param(std::string n, Eigen::MatrixXd v) : name(std::move(n)), value(std::move(v)) {}

  /// Leaf handle on the tape this param was last lifted onto.
  Tensor leaf;
  std::uint64_t lift_serial = 0;

  /// Gradient recorded by the last backward pass.
  const Eigen::MatrixXd& grad() const { return leaf.grad(); }
};

/// Dynamic per-forward-pass tape. Nodes are appended in construction order,
/// which is a topological order; backward walks it once in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Eigen::MatrixXd&)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding an input or constant value.
  Tensor leaf(Eigen::MatrixXd value);

  /// Leaf for a trainable parameter, memoized per tape.
  Tensor lift(Param& p);

  /// Interior node produced by an operation.
  Tensor make(Eigen::MatrixXd value, BackwardFn backward);

  /// Reverse pass seeded with d(loss)/d(loss) = 1. loss must be 1x1.
  /// Visits every node exactly once, newest first.
  void backward(const Tensor& loss);

  const Eigen::MatrixXd& value_of(std::size_t id) const { return nodes_[id].value; }
  const Eigen::MatrixXd& grad_of(std::size_t id) const;
  /// Accumulation target during backward; zero-sized until then.
  Eigen::MatrixXd& grad_mut(std::size_t id) { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }
  std::uint64_t serial() const { return serial_; }
  bool ran_backward() const { return ran_backward_; }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::uint64_t serial_;
  bool ran_backward_ = false;
};

}  // namespace fdrl
