#pragma once

#include <string>
#include <vector>

#include "visrec/ball_tree.hpp"
#include "visrec/checkpoint.hpp"
#include "visrec/feature_store.hpp"
#include "visrec/image.hpp"
#include "visrec/network.hpp"

namespace visrec {

// Loads extractors + feature matrix + index as one consistent unit and
// answers image queries. Refuses to assemble when the matrix was built by
// different checkpoints (fingerprints) or the index by a different matrix
// (embedded checksum). Immutable after construction; safe for concurrent
// queries.
class QueryEngine {
 public:
  static QueryEngine load(const std::vector<std::string>& checkpoint_paths,
                          const std::string& fmx_path,
                          const std::string& btx_path);

  // concatenated embedding across all extractors, in load order
  std::vector<float> embed(const Image& img) const;

  RankingResult query(const Image& img, int64_t k, bool exclude_self) const;

  const FeatureMatrix& matrix() const { return matrix_; }
  const BallTree& tree() const { return tree_; }
  const std::vector<Network<float>>& models() const { return models_; }
  int64_t feature_dim() const { return matrix_.dim; }

 private:
  QueryEngine() = default;
  std::vector<Network<float>> models_;
  FeatureMatrix matrix_;
  BallTree tree_;
};

// distances are reported at 6 decimal places everywhere
double round6(double v);

}  // namespace visrec
