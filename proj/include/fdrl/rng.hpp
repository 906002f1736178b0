#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace fdrl {

// Seeded generator with hand-rolled distributions. mt19937_64 output is
// pinned by the standard and the transforms below avoid the
// implementation-defined std:: distributions, so a given seed produces the
// same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite
    double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // [0, n)
  std::uint64_t integer(std::uint64_t n) { return engine_() % n; }

  void fill_uniform(Eigen::MatrixXd& m, double lo, double hi) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform(lo, hi);
  }

  void fill_normal(Eigen::MatrixXd& m, double mean = 0.0, double sd = 1.0) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = mean + sd * normal();
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fdrl
