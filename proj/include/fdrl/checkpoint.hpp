#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace fdrl {

/// Versioned binary container of named tensors plus a config echo block.
struct CheckpointData {
  std::string config_echo;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

  const Eigen::MatrixXd* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

}  // namespace fdrl
