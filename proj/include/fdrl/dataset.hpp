#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdrl/errors.hpp"

namespace fdrl {

/// One sample: pooled speech and text feature vectors plus the emotion label.
struct FeatureRecord {
  Eigen::VectorXd h_a;
  Eigen::VectorXd h_t;
  int label = 0;
};

struct DatasetManifest {
  int d_in = 0;
  int classes = 0;
  std::vector<std::string> class_names;
  std::size_t count = 0;
  std::vector<int> folds;  // 1-based fold index per record
  std::string provenance;

  int fold_count() const;
  void validate() const;
};

/// Ground-truth latent factors kept alongside synthetic data, same record
/// order as the feature file.
struct GroundTruthFactors {
  Eigen::MatrixXd z_shared;     // count x shared_dim
  Eigen::MatrixXd z_private_a;  // count x private_dim_a
  Eigen::MatrixXd z_private_t;  // count x private_dim_t
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<FeatureRecord> records;
  std::optional<GroundTruthFactors> truth;
};

/// Binary feature container plus `.manifest` / `.factors` sidecars.
void save_features(const std::string& path, const Dataset& ds);

/// Load a feature file. `.csv` paths are parsed as the text alternative
/// (header row, then ha_*..., ht_..., label per line); anything else is read
/// as the binary container. Sidecars are picked up when present.
Dataset load_features(const std::string& path);

struct SynthSpec {
  int feature_dim = 64;
  int shared_dim = 8;
  int private_dim_a = 8;
  int private_dim_t = 8;
  int classes = 4;
  double separation = 4.0;
  double noise_scale = 0.5;
  std::uint64_t map_seed = 42;  // fixes the latent-to-feature maps
  std::size_t samples = 2000;
  int folds = 5;
  void validate() const;
};

/// Two-modality synthetic data with known shared/private structure:
/// labels depend only on the class-conditioned shared factor; each modality
/// mixes it with a modality-specific factor through fixed random maps.
/// A pure function of (spec, seed).
Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

struct FoldSplit {
  std::vector<int> train_indices;
  std::vector<int> test_indices;
};

FoldSplit kfold_split(const Dataset& ds, int fold);

/// Deterministic shuffled train batches for one epoch; the final partial
/// batch is kept.
std::vector<std::vector<int>> train_batches(const FoldSplit& split, int batch_size,
                                            std::uint64_t seed, int epoch);

/// Gather batch matrices (rows follow `indices`).
void gather_batch(const Dataset& ds, const std::vector<int>& indices, Eigen::MatrixXd& H_a,
                  Eigen::MatrixXd& H_t, std::vector<int>& labels);

}  // namespace fdrl
