#include "visrec/ball_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "visrec/binio.hpp"
#include "visrec/errors.hpp"

namespace visrec {

double euclidean(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DataError("euclidean: length mismatch " + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

namespace {

double dist_point_row(std::span<const float> q, const float* row,
                      int64_t dim) {
  double acc = 0.0;
  for (int64_t i = 0; i < dim; ++i) {
    double d = static_cast<double>(q[static_cast<size_t>(i)]) -
               static_cast<double>(row[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

double dist_point_centroid(std::span<const float> q, const double* c,
                           int64_t dim) {
  double acc = 0.0;
  for (int64_t i = 0; i < dim; ++i) {
    double d = static_cast<double>(q[static_cast<size_t>(i)]) - c[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// worse-first ordering for the bounded candidate heap
struct WorseFirst {
  bool operator()(const Neighbor& a, const Neighbor& b) const {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.row < b.row;
  }
};

bool better(const Neighbor& a, const Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.row < b.row;
}

}  // namespace

int32_t BallTree::build_node(const FeatureMatrix& m, int64_t lo, int64_t hi) {
  const int32_t idx = static_cast<int32_t>(nodes_.size());
  nodes_.emplace_back();
  centroids_.resize(centroids_.size() + static_cast<size_t>(dim_), 0.0);

  double* c = centroids_.data() + static_cast<size_t>(idx) * dim_;
  for (int64_t i = lo; i < hi; ++i) {
    const float* row = m.data.data() + perm_[static_cast<size_t>(i)] * dim_;
    for (int64_t d = 0; d < dim_; ++d) c[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(hi - lo);
  for (int64_t d = 0; d < dim_; ++d) c[d] *= inv;

  double radius = 0.0;
  for (int64_t i = lo; i < hi; ++i) {
    const float* row = m.data.data() + perm_[static_cast<size_t>(i)] * dim_;
    double acc = 0.0;
    for (int64_t d = 0; d < dim_; ++d) {
      double diff = static_cast<double>(row[d]) - c[d];
      acc += diff * diff;
    }
    radius = std::max(radius, std::sqrt(acc));
  }
  nodes_[static_cast<size_t>(idx)].radius = radius;

  if (hi - lo <= leaf_size_) {
    nodes_[static_cast<size_t>(idx)].begin = lo;
    nodes_[static_cast<size_t>(idx)].end = hi;
    return idx;
  }

  // widest-spread dimension, ties to the lowest index
  int64_t split_dim = 0;
  double best_spread = -1.0;
  for (int64_t d = 0; d < dim_; ++d) {
    float mn = m.data[static_cast<size_t>(perm_[static_cast<size_t>(lo)] *
                                          dim_ + d)];
    float mx = mn;
    for (int64_t i = lo + 1; i < hi; ++i) {
      float v = m.data[static_cast<size_t>(perm_[static_cast<size_t>(i)] *
                                           dim_ + d)];
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    double spread = static_cast<double>(mx) - static_cast<double>(mn);
    if (spread > best_spread) {
      best_spread = spread;
      split_dim = d;
    }
  }
  std::sort(perm_.begin() + lo, perm_.begin() + hi,
            [&](int64_t a, int64_t b) {
              float va = m.data[static_cast<size_t>(a * dim_ + split_dim)];
              float vb = m.data[static_cast<size_t>(b * dim_ + split_dim)];
              if (va != vb) return va < vb;
              return a < b;
            });
  const int64_t mid = lo + (hi - lo + 1) / 2;  // left gets ceil(count/2)
  int32_t left = build_node(m, lo, mid);
  int32_t right = build_node(m, mid, hi);
  nodes_[static_cast<size_t>(idx)].left = left;
  nodes_[static_cast<size_t>(idx)].right = right;
  return idx;
}

BallTree BallTree::build(const FeatureMatrix& m, int leaf_size) {
  if (m.rows() < 1) throw DataError("ball tree: empty feature matrix");
  if (leaf_size < 1) throw ConfigError("ball tree: leaf_size must be >= 1");
  BallTree t;
  t.leaf_size_ = leaf_size;
  t.dim_ = m.dim;
  t.perm_.resize(static_cast<size_t>(m.rows()));
  std::iota(t.perm_.begin(), t.perm_.end(), int64_t{0});
  t.nodes_.reserve(static_cast<size_t>(2 * m.rows() / leaf_size + 2));
  t.build_node(m, 0, m.rows());
  return t;
}

std::vector<Neighbor> BallTree::knn(const FeatureMatrix& m,
                                    std::span<const float> query, int64_t k,
                                    QueryStats* stats) const {
  if (static_cast<int64_t>(query.size()) != dim_) {
    throw DataError("knn: query dimension " + std::to_string(query.size()) +
                    " does not match index dimension " + std::to_string(dim_));
  }
  if (k < 1) throw ConfigError("knn: k must be >= 1");
  const int64_t want = std::min<int64_t>(k, rows());

  std::priority_queue<Neighbor, std::vector<Neighbor>, WorseFirst> heap;
  QueryStats local;

  // admits a candidate if the heap is not full or it beats the worst entry
  auto consider = [&](int64_t row, double dist) {
    Neighbor cand{row, dist};
    if (static_cast<int64_t>(heap.size()) < want) {
      heap.push(cand);
    } else if (better(cand, heap.top())) {
      heap.pop();
      heap.push(cand);
    }
  };

  // visit a subtree unless its lower bound provably cannot improve the heap;
  // the small slack keeps borderline ties visited despite rounding
  auto prunable = [&](double lower_bound) {
    if (static_cast<int64_t>(heap.size()) < want) return false;
    double worst = heap.top().distance;
    return lower_bound > worst + 1e-9 * (1.0 + worst);
  };

  struct Visit {
    int32_t node;
    double bound;
  };
  std::vector<Visit> stack;
  auto bound_of = [&](int32_t node) {
    ++local.node_distance_evals;
    double dc = dist_point_centroid(query, centroid(static_cast<size_t>(node)),
                                    dim_);
    return std::max(0.0, dc - nodes_[static_cast<size_t>(node)].radius);
  };
  stack.push_back({0, bound_of(0)});
  while (!stack.empty()) {
    Visit v = stack.back();
    stack.pop_back();
    if (prunable(v.bound)) continue;
    const Node& node = nodes_[static_cast<size_t>(v.node)];
    if (node.left < 0) {
      for (int64_t i = node.begin; i < node.end; ++i) {
        int64_t row = perm_[static_cast<size_t>(i)];
        ++local.point_distance_evals;
        consider(row, dist_point_row(query, m.data.data() + row * dim_, dim_));
      }
      continue;
    }
    Visit a{node.left, bound_of(node.left)};
    Visit b{node.right, bound_of(node.right)};
    if (a.bound > b.bound) std::swap(a, b);
    // nearer child on top of the stack, visited first
    stack.push_back(b);
    stack.push_back(a);
  }

  std::vector<Neighbor> out(heap.size());
  for (size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top();
    heap.pop();
  }
  if (stats) *stats = local;
  return out;
}

void BallTree::audit(const FeatureMatrix& m) const {
  if (m.dim != dim_ || m.rows() != rows()) {
    throw DataError("audit: matrix does not match tree");
  }
  std::vector<int> seen(static_cast<size_t>(rows()), 0);
  // every node ball must contain all points below it
  struct Frame {
    int32_t node;
    int64_t lo, hi;
  };
  std::vector<Frame> stack{{0, 0, rows()}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const Node& node = nodes_[static_cast<size_t>(f.node)];
    const double* c = centroid(static_cast<size_t>(f.node));
    for (int64_t i = f.lo; i < f.hi; ++i) {
      int64_t row = perm_[static_cast<size_t>(i)];
      double acc = 0.0;
      const float* p = m.data.data() + row * dim_;
      for (int64_t d = 0; d < dim_; ++d) {
        double diff = static_cast<double>(p[d]) - c[d];
        acc += diff * diff;
      }
      if (std::sqrt(acc) > node.radius * (1.0 + 1e-9) + 1e-12) {
        throw DataError("audit: point outside its node ball");
      }
    }
    if (node.left < 0) {
      if (node.begin != f.lo || node.end != f.hi) {
        throw DataError("audit: leaf range mismatch");
      }
      for (int64_t i = node.begin; i < node.end; ++i) {
        if (seen[static_cast<size_t>(perm_[static_cast<size_t>(i)])]++) {
          throw DataError("audit: row appears in two leaves");
        }
      }
    } else {
      // child ranges follow the build split rule
      int64_t mid = f.lo + (f.hi - f.lo + 1) / 2;
      stack.push_back({node.left, f.lo, mid});
      stack.push_back({node.right, mid, f.hi});
    }
  }
  for (int v : seen) {
    if (v != 1) throw DataError("audit: leaf partition does not cover rows");
  }
}

void BallTree::save(const std::string& path, uint64_t fmx_crc) const {
  ByteWriter w;
  w.magic("BTX1");
  w.u32(1);  // version
  w.u64(fmx_crc);
  w.u32(static_cast<uint32_t>(leaf_size_));
  w.u64(static_cast<uint64_t>(dim_));
  w.u64(static_cast<uint64_t>(rows()));
  w.u64(static_cast<uint64_t>(nodes_.size()));
  for (const Node& n : nodes_) {
    w.f64(n.radius);
    w.u32(static_cast<uint32_t>(n.left));
    w.u32(static_cast<uint32_t>(n.right));
    w.u64(static_cast<uint64_t>(n.begin));
    w.u64(static_cast<uint64_t>(n.end));
  }
  w.f64_array(centroids_.data(), centroids_.size());
  for (int64_t p : perm_) w.u64(static_cast<uint64_t>(p));
  write_file_with_crc(path, w);
}

BallTree::Loaded BallTree::load(const std::string& path) {
  std::string bytes = read_file_check_crc(path, "ball tree");
  ByteReader r(bytes);
  r.expect_magic("BTX1", "ball tree");
  uint32_t version = r.u32();
  if (version != 1) {
    throw DataError("ball tree: unsupported version " +
                    std::to_string(version));
  }
  Loaded out;
  out.fmx_crc = r.u64();
  BallTree& t = out.tree;
  t.leaf_size_ = static_cast<int>(r.u32());
  t.dim_ = static_cast<int64_t>(r.u64());
  uint64_t n_rows = r.u64();
  uint64_t n_nodes = r.u64();
  t.nodes_.resize(n_nodes);
  for (Node& n : t.nodes_) {
    n.radius = r.f64();
    n.left = static_cast<int32_t>(r.u32());
    n.right = static_cast<int32_t>(r.u32());
    n.begin = static_cast<int64_t>(r.u64());
    n.end = static_cast<int64_t>(r.u64());
  }
  t.centroids_.resize(n_nodes * static_cast<size_t>(t.dim_));
  r.f64_array(t.centroids_.data(), t.centroids_.size());
  t.perm_.resize(n_rows);
  for (int64_t& p : t.perm_) p = static_cast<int64_t>(r.u64());
  if (r.remaining() != 0) throw DataError("ball tree: trailing bytes");
  return out;
}

RankingResult recommend(const BallTree& tree, const FeatureMatrix& m,
                        std::span<const float> query, int64_t k,
                        bool exclude_self, const std::string& query_id) {
  int64_t fetch = exclude_self ? k + 1 : k;
  std::vector<Neighbor> found = tree.knn(m, query, fetch);
  size_t start = 0;
  if (exclude_self && !found.empty() && found.front().distance < 1e-9) {
    if (query_id.empty() ||
        m.ids[static_cast<size_t>(found.front().row)] == query_id) {
      start = 1;
    }
  }
  RankingResult res;
  for (size_t i = start;
       i < found.size() && res.entries.size() < static_cast<size_t>(k); ++i) {
    RankingEntry e;
    e.row = found[i].row;
    e.id = m.ids[static_cast<size_t>(found[i].row)];
    e.distance = found[i].distance;
    e.rank = static_cast<int>(res.entries.size()) + 1;
    res.entries.push_back(std::move(e));
  }
  return res;
}

}  // namespace visrec
