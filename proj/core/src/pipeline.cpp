#include "visrec/pipeline.hpp"

#include <cmath>

#include "visrec/checksum.hpp"
#include "visrec/errors.hpp"

namespace visrec {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

QueryEngine QueryEngine::load(
    const std::vector<std::string>& checkpoint_paths,
    const std::string& fmx_path, const std::string& btx_path) {
  if (checkpoint_paths.empty()) {
    throw ConfigError("query engine: no checkpoints given");
  }
  QueryEngine engine;
  engine.matrix_ = load_matrix(fmx_path);
  if (engine.matrix_.fingerprints.size() != checkpoint_paths.size()) {
    throw DataError(
        "index built with different extractors: expected " +
        std::to_string(engine.matrix_.fingerprints.size()) +
        " checkpoints, got " + std::to_string(checkpoint_paths.size()));
  }
  int64_t dim_sum = 0;
  for (size_t i = 0; i < checkpoint_paths.size(); ++i) {
    uint64_t fp = file_crc64(checkpoint_paths[i]);
    if (fp != engine.matrix_.fingerprints[i]) {
      throw DataError("index built with different extractors: checkpoint " +
                      checkpoint_paths[i] + " does not match fingerprint " +
                      std::to_string(i));
    }
    engine.models_.push_back(
        network_from_checkpoint(load_checkpoint(checkpoint_paths[i])));
    if (engine.models_.back().feature_dim() !=
        static_cast<int>(engine.matrix_.dims[i])) {
      throw DataError("feature matrix width does not match checkpoint " +
                      checkpoint_paths[i]);
    }
    dim_sum += engine.models_.back().feature_dim();
  }
  if (dim_sum != engine.matrix_.dim) {
    throw DataError("feature matrix width mismatch");
  }
  if (!btx_path.empty()) {
    BallTree::Loaded loaded = BallTree::load(btx_path);
    if (loaded.fmx_crc != file_crc64(fmx_path)) {
      throw DataError(
          "index was built from a different feature matrix (checksum "
          "mismatch): " +
          btx_path);
    }
    if (loaded.tree.dim() != engine.matrix_.dim ||
        loaded.tree.rows() != engine.matrix_.rows()) {
      throw DataError("index shape does not match the feature matrix");
    }
    engine.tree_ = std::move(loaded.tree);
  } else {
    engine.tree_ = BallTree::build(engine.matrix_);
  }
  return engine;
}

std::vector<float> QueryEngine::embed(const Image& img) const {
  std::vector<std::vector<float>> parts;
  parts.reserve(models_.size());
  for (const auto& net : models_) {
    std::vector<float> input = to_model_input(img, net.spec());
    parts.push_back(net.extract_features(input.data(), 1));
  }
  return concat_features(parts);
}

RankingResult QueryEngine::query(const Image& img, int64_t k,
                                 bool exclude_self) const {
  std::vector<float> features = embed(img);
  return recommend(tree_, matrix_, features, k, exclude_self);
}

}  // namespace visrec
