#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "visrec/feature_store.hpp"

namespace visrec {

// sqrt of the 64-bit accumulated squared difference
double euclidean(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  int64_t row = 0;
  double distance = 0;
};

struct RankingEntry {
  std::string id;
  int64_t row = 0;
  double distance = 0;
  int rank = 0;  // 1-based
};

struct RankingResult {
  std::vector<RankingEntry> entries;
};

struct QueryStats {
  int64_t point_distance_evals = 0;
  int64_t node_distance_evals = 0;
};

// Exact nearest-neighbor index: nested bounding balls over the feature rows.
// Construction splits on the widest-spread dimension at the median (left
// half gets the extra point on odd counts) down to leaf_size, so a given
// matrix always builds the same tree.
class BallTree {
 public:
  static constexpr int kDefaultLeafSize = 32;

  static BallTree build(const FeatureMatrix& m,
                        int leaf_size = kDefaultLeafSize);

  // min(k, n) neighbors ordered by (distance, row); exact w.r.t. linear
  // scan, pruning with the bound max(0, d(q, centroid) - radius).
  std::vector<Neighbor> knn(const FeatureMatrix& m,
                            std::span<const float> query, int64_t k,
                            QueryStats* stats = nullptr) const;

  int leaf_size() const { return leaf_size_; }
  int64_t dim() const { return dim_; }
  int64_t rows() const { return static_cast<int64_t>(perm_.size()); }
  size_t node_count() const { return nodes_.size(); }

  // all stored points inside their ball, leaf ranges an exact partition
  void audit(const FeatureMatrix& m) const;  // throws DataError

  // .btx: magic "BTX1", version, embedded .fmx checksum, leaf size, dims,
  // node array, row permutation, trailing CRC-64.
  void save(const std::string& path, uint64_t fmx_crc) const;
  struct Loaded {
    BallTree tree;
    uint64_t fmx_crc = 0;
  };
  static Loaded load(const std::string& path);

 private:
  struct Node {
    double radius = 0;
    int32_t left = -1;   // internal nodes only
    int32_t right = -1;
    int64_t begin = 0;  // leaf range into perm_
    int64_t end = 0;
  };

  int32_t build_node(const FeatureMatrix& m, int64_t lo, int64_t hi);
  const double* centroid(size_t node) const {
    return centroids_.data() + node * static_cast<size_t>(dim_);
  }

  int leaf_size_ = kDefaultLeafSize;
  int64_t dim_ = 0;
  std::vector<Node> nodes_;          // nodes_[0] is the root
  std::vector<double> centroids_;    // node_count x dim
  std::vector<int64_t> perm_;        // leaf ranges index this permutation
};

// knn mapped to item ids. With exclude_self, a rank-1 hit at distance
// < 1e-9 (matching query_id when one is given) is dropped and the list
// extended by one.
RankingResult recommend(const BallTree& tree, const FeatureMatrix& m,
                        std::span<const float> query, int64_t k,
                        bool exclude_self, const std::string& query_id = "");

}  // namespace visrec
