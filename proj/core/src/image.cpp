#include "visrec/image.hpp"

#include <algorithm>
#include <cmath>

#include "visrec/errors.hpp"

namespace visrec {

Image resize_bilinear(const Image& img, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1) {
    throw ConfigError("resize: target size must be >= 1");
  }
  if (img.empty()) throw ConfigError("resize: empty image");
  if (target_h == img.height && target_w == img.width) return img;

  Image out(target_h, target_w, img.channels);
  const int C = img.channels;
  const double sy = target_h > 1
                        ? static_cast<double>(img.height - 1) / (target_h - 1)
                        : 0.0;
  const double sx = target_w > 1
                        ? static_cast<double>(img.width - 1) / (target_w - 1)
                        : 0.0;
  const double oy = target_h > 1 ? 0.0 : (img.height - 1) / 2.0;
  const double ox = target_w > 1 ? 0.0 : (img.width - 1) / 2.0;

  for (int y = 0; y < target_h; ++y) {
    double fy = oy + sy * y;
    int y0 = static_cast<int>(std::floor(fy));
    int y1 = std::min(y0 + 1, img.height - 1);
    y0 = std::clamp(y0, 0, img.height - 1);
    double wy = fy - std::floor(fy);
    for (int x = 0; x < target_w; ++x) {
      double fx = ox + sx * x;
      int x0 = static_cast<int>(std::floor(fx));
      int x1 = std::min(x0 + 1, img.width - 1);
      x0 = std::clamp(x0, 0, img.width - 1);
      double wx = fx - std::floor(fx);
      for (int c = 0; c < C; ++c) {
        double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        double v = (1.0 - wy) * top + wy * bot;
        out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

Image broadcast_channels(const Image& img, int channels) {
  if (img.channels == channels) return img;
  if (img.channels != 1) {
    throw DataError("cannot convert " + std::to_string(img.channels) +
                    "-channel image to " + std::to_string(channels) +
                    " channels");
  }
  Image out(img.height, img.width, channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float v = img.at(y, x, 0);
      for (int c = 0; c < channels; ++c) out.at(y, x, c) = v;
    }
  }
  return out;
}

}  // namespace visrec
