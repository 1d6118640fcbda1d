#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "visrec/dataset.hpp"
#include "visrec/network.hpp"

namespace visrec {

// Row-major n x D matrix of concatenated embeddings, one row per catalog
// item. dims holds the per-extractor widths (D = sum), fingerprints the
// CRC-64 of each contributing checkpoint file so an index can be refused
// when paired with different extractors.
struct FeatureMatrix {
  std::vector<std::string> ids;
  std::vector<uint32_t> dims;
  std::vector<uint64_t> fingerprints;
  int64_t dim = 0;
  std::vector<float> data;

  int64_t rows() const { return static_cast<int64_t>(ids.size()); }
  std::span<const float> row(int64_t i) const {
    return {data.data() + i * dim, static_cast<size_t>(dim)};
  }
  int64_t find_row(const std::string& id) const;  // -1 when absent
};

// Concatenation in declared extractor order.
std::vector<float> concat_features(
    const std::vector<std::vector<float>>& parts);

// Extracts features for every dataset sample with each model in inference
// mode (row order = dataset order) and concatenates them per row.
FeatureMatrix build_matrix(const std::vector<const Network<float>*>& models,
                           const std::vector<uint64_t>& fingerprints,
                           const Dataset& ds, int batch_size,
                           int threads = 1);

// .fmx: magic "FMX1", u32 version, u64 rows, u32 extractor count,
// u32 dims[], u64 fingerprints[], u64 id-table offset, float32 data block,
// length-prefixed UTF-8 id table, trailing CRC-64.
void save_matrix(const FeatureMatrix& m, const std::string& path);
FeatureMatrix load_matrix(const std::string& path);

}  // namespace visrec
