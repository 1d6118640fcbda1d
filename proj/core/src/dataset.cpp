#include "visrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "visrec/errors.hpp"
#include "visrec/image_io.hpp"
#include "visrec/rng.hpp"

namespace fs = std::filesystem;

namespace visrec {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

Dataset load_manifest(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ConfigError("manifest not found: " + path);
  fs::path base = fs::path(path).parent_path();

  Dataset ds;
  ds.task_name = fs::path(path).stem().string();
  bool classes_fixed = false;
  std::unordered_map<std::string, int> class_index;
  std::unordered_set<std::string> seen_ids;

  auto row_error = [&](int line_no, const std::string& msg) {
    throw DataError(path + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (header_seen) continue;
      const std::string key = "classes:";
      std::string body = trim(t.substr(1));
      if (body.compare(0, key.size(), key) == 0) {
        for (const auto& name : split_csv(trim(body.substr(key.size())))) {
          if (name.empty()) row_error(line_no, "empty class name");
          if (class_index.count(name))
            row_error(line_no, "duplicate class name '" + name + "'");
          class_index[name] = static_cast<int>(ds.class_names.size());
          ds.class_names.push_back(name);
        }
        classes_fixed = true;
      }
      continue;
    }
    if (!header_seen) {
      if (t != "id,path,label") {
        row_error(line_no, "expected header 'id,path,label', got '" + t + "'");
      }
      header_seen = true;
      continue;
    }
    auto fields = split_csv(t);
    if (fields.size() != 3) {
      row_error(line_no, "expected 3 fields, got " +
                             std::to_string(fields.size()));
    }
    const std::string& id = fields[0];
    const std::string& rel = fields[1];
    const std::string& label_name = fields[2];
    if (id.empty()) row_error(line_no, "empty sample id");
    if (!seen_ids.insert(id).second)
      row_error(line_no, "duplicate sample id '" + id + "'");
    if (label_name.empty()) row_error(line_no, "empty label");

    int label;
    auto it = class_index.find(label_name);
    if (it != class_index.end()) {
      label = it->second;
    } else if (classes_fixed) {
      row_error(line_no, "unknown label '" + label_name +
                             "' (classes are fixed by the manifest header)");
      label = -1;  // unreachable
    } else {
      label = static_cast<int>(ds.class_names.size());
      class_index[label_name] = label;
      ds.class_names.push_back(label_name);
    }

    fs::path img_path = fs::path(rel).is_absolute() ? fs::path(rel)
                                                    : base / rel;
    LabeledSample sample;
    sample.id = id;
    sample.source_path = img_path.string();
    sample.label = label;
    if (opts.load_images) {
      if (!fs::exists(img_path)) {
        row_error(line_no, "image file missing: " + img_path.string());
      }
      try {
        sample.image = load_image(img_path.string());
      } catch (const std::exception& e) {
        row_error(line_no, "cannot decode image " + img_path.string() + ": " +
                               e.what());
      }
      if (opts.channels > 0 && sample.image.channels != opts.channels) {
        sample.image = broadcast_channels(sample.image, opts.channels);
      }
      if (opts.target_h > 0 && opts.target_w > 0) {
        sample.image =
            resize_bilinear(sample.image, opts.target_h, opts.target_w);
      }
    }
    ds.samples.push_back(std::move(sample));
  }
  if (!header_seen || ds.samples.empty()) {
    throw DataError(path + ": empty dataset");
  }
  return ds;
}

void save_manifest(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "# classes: ";
  for (size_t i = 0; i < ds.class_names.size(); ++i) {
    if (i) out << ",";
    out << ds.class_names[i];
  }
  out << "\n";
  out << "id,path,label\n";
  for (const auto& s : ds.samples) {
    out << s.id << "," << s.source_path << ","
        << ds.class_names.at(static_cast<size_t>(s.label)) << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

Split split_dataset(const Dataset& ds, double train_ratio, uint64_t seed) {
  if (ds.samples.empty()) throw ConfigError("split: dataset is empty");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw ConfigError("split: train_ratio must be in (0,1)");
  }
  const size_t n = ds.samples.size();
  const size_t n_train =
      static_cast<size_t>(std::floor(static_cast<double>(n) * train_ratio));
  if (n_train == 0 || n_train == n) {
    throw ConfigError("split: ratio " + std::to_string(train_ratio) +
                      " yields an empty split for N=" + std::to_string(n));
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  shuffle(order, rng);

  Split sp;
  sp.train.class_names = ds.class_names;
  sp.val.class_names = ds.class_names;
  sp.train.task_name = ds.task_name;
  sp.val.task_name = ds.task_name;
  sp.train.samples.reserve(n_train);
  sp.val.samples.reserve(n - n_train);
  for (size_t i = 0; i < n; ++i) {
    (i < n_train ? sp.train : sp.val).samples.push_back(ds.samples[order[i]]);
  }
  return sp;
}

}  // namespace visrec
