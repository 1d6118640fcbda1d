#pragma once

#include <cstdint>
#include <vector>

namespace visrec {

// Dense H x W x C float image, values in [0,1], row-major.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

// Bilinear resize to exactly target_h x target_w, output clamped to [0,1].
// Grid mapping keeps corners fixed, so same-size resize is the identity.
Image resize_bilinear(const Image& img, int target_h, int target_w);

// Broadcast a single-channel image to `channels` (used when a model expects
// 3-channel input); identity when counts already match.
Image broadcast_channels(const Image& img, int channels);

}  // namespace visrec
