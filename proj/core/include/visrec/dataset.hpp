#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "visrec/image.hpp"

namespace visrec {

struct LabeledSample {
  std::string id;           // unique within the dataset
  std::string source_path;  // where the image was read from
  Image image;
  int label = 0;  // index into Dataset::class_names
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::vector<std::string> class_names;
  std::string task_name;

  size_t size() const { return samples.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

struct Split {
  Dataset train;
  Dataset val;
};

struct LoadOptions {
  // Working resolution applied at load; 0 keeps the native size.
  int target_h = 64;
  int target_w = 64;
  // Broadcast grayscale to this many channels; 0 keeps native channels.
  int channels = 3;
  // Skip image decoding entirely (manifest structure only).
  bool load_images = true;
};

// Manifest CSV: optional leading '#' comment lines (a line of the form
// "# classes: a,b,c" fixes the class order), then a header "id,path,label"
// and one sample per row. Relative image paths resolve against the
// manifest's directory.
Dataset load_manifest(const std::string& path, const LoadOptions& opts = {});

// Writes the manifest back out (classes line, header, one row per sample)
// using each sample's source_path. load_manifest(save_manifest(d)) preserves
// ids, labels and class order.
void save_manifest(const Dataset& ds, const std::string& path);

// Deterministic shuffle by seed, then train = floor(N * train_ratio).
Split split_dataset(const Dataset& ds, double train_ratio, uint64_t seed);

}  // namespace visrec
