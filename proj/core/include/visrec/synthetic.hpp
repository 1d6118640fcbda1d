#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "visrec/dataset.hpp"

namespace visrec {

// Procedural catalog of flat-color scenes: one of four shapes (circle,
// square, triangle, cross) filled with one of three surface patterns
// (solid, stripes, dots) on a light background, with jittered geometry,
// random palette and mild pixel noise. Every item is fully determined by
// its seed, and carries both a shape and a pattern label.

struct SynthItem {
  Image image;
  int shape = 0;    // index into synth_shape_names()
  int texture = 0;  // index into synth_texture_names()
};

SynthItem synth_item(uint64_t seed, int size = 64);

const std::vector<std::string>& synth_shape_names();
const std::vector<std::string>& synth_texture_names();
std::vector<std::string> synth_joint_names();  // "<shape>_<texture>"

enum class SynthLabel { shape, texture, joint };

// In-memory dataset; item ids are "item-NNNNNN" and image i is generated
// from hash(seed, i), so a prefix of a larger catalog is stable.
Dataset synth_dataset(int count, uint64_t seed, SynthLabel kind,
                      const std::string& task_name, int size = 64);

// Writes count .imgf32 images plus shape.csv / texture.csv / joint.csv
// manifests into dir.
void write_synth_catalog(const std::string& dir, int count, uint64_t seed,
                         int size = 64);

}  // namespace visrec
