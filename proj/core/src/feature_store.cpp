#include "visrec/feature_store.hpp"

#include <algorithm>
#include <cmath>

#include "visrec/binio.hpp"
#include "visrec/errors.hpp"
#include "visrec/parallel.hpp"

namespace visrec {

int64_t FeatureMatrix::find_row(const std::string& id) const {
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return static_cast<int64_t>(i);
  }
  return -1;
}

std::vector<float> concat_features(
    const std::vector<std::vector<float>>& parts) {
  if (parts.empty()) {
    throw DataError("concat_features: need at least one part");
  }
  std::vector<float> out;
  size_t total = 0;
  for (const auto& p : parts) total += p.size();
  out.reserve(total);
  for (const auto& p : parts) {
    for (float v : p) {
      if (!std::isfinite(v)) {
        throw DataError("concat_features: non-finite feature value");
      }
      out.push_back(v);
    }
  }
  return out;
}

FeatureMatrix build_matrix(const std::vector<const Network<float>*>& models,
                           const std::vector<uint64_t>& fingerprints,
                           const Dataset& ds, int batch_size, int threads) {
  if (models.empty()) throw ConfigError("build_matrix: no extractors given");
  if (fingerprints.size() != models.size()) {
    throw ConfigError("build_matrix: fingerprint per extractor required");
  }
  if (ds.samples.empty()) throw DataError("build_matrix: empty dataset");
  if (batch_size < 1) throw ConfigError("build_matrix: batch_size must be >= 1");

  FeatureMatrix m;
  m.fingerprints = fingerprints;
  for (const auto* net : models) {
    m.dims.push_back(static_cast<uint32_t>(net->feature_dim()));
    m.dim += net->feature_dim();
  }
  const int64_t n = static_cast<int64_t>(ds.size());
  m.ids.reserve(static_cast<size_t>(n));
  for (const auto& s : ds.samples) m.ids.push_back(s.id);
  m.data.assign(static_cast<size_t>(n * m.dim), 0.0f);

  int64_t col_base = 0;
  for (const auto* net : models) {
    const ModelSpec& spec = net->spec();
    const int64_t px =
        static_cast<int64_t>(spec.input_h) * spec.input_w * spec.input_c;
    const int d = net->feature_dim();
    const int64_t num_batches = (n + batch_size - 1) / batch_size;
    parallel_for(num_batches, threads, [&](int64_t b) {
      int64_t lo = b * batch_size;
      int64_t hi = std::min(n, lo + batch_size);
      std::vector<float> batch(static_cast<size_t>(hi - lo) * px);
      for (int64_t i = lo; i < hi; ++i) {
        write_model_input(ds.samples[static_cast<size_t>(i)].image, spec,
                          batch.data() + (i - lo) * px);
      }
      std::vector<float> feats =
          net->extract_features(batch.data(), static_cast<int>(hi - lo));
      for (int64_t i = lo; i < hi; ++i) {
        std::copy_n(feats.begin() + (i - lo) * d, d,
                    m.data.begin() + i * m.dim + col_base);
      }
    });
    col_base += d;
  }
  for (float v : m.data) {
    if (!std::isfinite(v)) {
      throw DataError("build_matrix: extractor produced non-finite values");
    }
  }
  return m;
}

void save_matrix(const FeatureMatrix& m, const std::string& path) {
  ByteWriter w;
  w.magic("FMX1");
  w.u32(1);  // version
  w.u64(static_cast<uint64_t>(m.rows()));
  w.u32(static_cast<uint32_t>(m.dims.size()));
  for (uint32_t d : m.dims) w.u32(d);
  for (uint64_t f : m.fingerprints) w.u64(f);
  // id-table offset: filled after the data block is sized
  size_t header_size = w.size() + 8;
  uint64_t id_table_offset =
      header_size + m.data.size() * sizeof(float);
  w.u64(id_table_offset);
  w.f32_array(m.data.data(), m.data.size());
  for (const std::string& id : m.ids) w.str(id);
  write_file_with_crc(path, w);
}

FeatureMatrix load_matrix(const std::string& path) {
  std::string bytes = read_file_check_crc(path, "feature matrix");
  ByteReader r(bytes);
  r.expect_magic("FMX1", "feature matrix");
  uint32_t version = r.u32();
  if (version != 1) {
    throw DataError("feature matrix: unsupported version " +
                    std::to_string(version));
  }
  uint64_t n = r.u64();
  uint32_t extractors = r.u32();
  if (extractors == 0) throw DataError("feature matrix: no extractors");
  FeatureMatrix m;
  for (uint32_t i = 0; i < extractors; ++i) {
    m.dims.push_back(r.u32());
    m.dim += m.dims.back();
  }
  for (uint32_t i = 0; i < extractors; ++i) m.fingerprints.push_back(r.u64());
  uint64_t id_table_offset = r.u64();
  if (m.dim < 1) throw DataError("feature matrix: zero width");
  m.data.resize(static_cast<size_t>(n * static_cast<uint64_t>(m.dim)));
  r.f32_array(m.data.data(), m.data.size());
  if (r.pos() != id_table_offset) {
    throw DataError("feature matrix: id table offset mismatch");
  }
  m.ids.reserve(static_cast<size_t>(n));
  for (uint64_t i = 0; i < n; ++i) m.ids.push_back(r.str());
  if (r.remaining() != 0) throw DataError("feature matrix: trailing bytes");
  return m;
}

}  // namespace visrec
