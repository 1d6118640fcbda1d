#include "visrec/augment.hpp"

#include <algorithm>
#include <cmath>

#include "visrec/errors.hpp"

namespace visrec {

namespace {

constexpr double kPi = 3.14159265358979323846;

// bilinear sample with coordinates clamped into the frame (edge replication)
float sample_clamped(const Image& img, double fy, double fx, int c) {
  fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
  int y0 = static_cast<int>(std::floor(fy));
  int x0 = static_cast<int>(std::floor(fx));
  int y1 = std::min(y0 + 1, img.height - 1);
  int x1 = std::min(x0 + 1, img.width - 1);
  double wy = fy - y0;
  double wx = fx - x0;
  double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
  double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
  return static_cast<float>(
      std::clamp((1.0 - wy) * top + wy * bot, 0.0, 1.0));
}

struct Hsl {
  double h, s, l;  // h in [0,360), s and l in [0,1]
};

Hsl rgb_to_hsl(double r, double g, double b) {
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double l = (mx + mn) / 2.0;
  if (mx == mn) return {0.0, 0.0, l};
  double d = mx - mn;
  double s = l > 0.5 ? d / (2.0 - mx - mn) : d / (mx + mn);
  double h;
  if (mx == r) {
    h = 60.0 * std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d + 2.0);
  } else {
    h = 60.0 * ((r - g) / d + 4.0);
  }
  if (h < 0.0) h += 360.0;
  return {h, s, l};
}

void hsl_to_rgb(const Hsl& hsl, double& r, double& g, double& b) {
  double c = (1.0 - std::fabs(2.0 * hsl.l - 1.0)) * hsl.s;
  double hp = hsl.h / 60.0;
  double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double m = hsl.l - c / 2.0;
  double rp = 0, gp = 0, bp = 0;
  if (hp < 1)      { rp = c; gp = x; }
  else if (hp < 2) { rp = x; gp = c; }
  else if (hp < 3) { gp = c; bp = x; }
  else if (hp < 4) { gp = x; bp = c; }
  else if (hp < 5) { rp = x; bp = c; }
  else             { rp = c; bp = x; }
  r = std::clamp(rp + m, 0.0, 1.0);
  g = std::clamp(gp + m, 0.0, 1.0);
  b = std::clamp(bp + m, 0.0, 1.0);
}

}  // namespace

void hsl_to_rgb_color(double h, double s, double l, float& r, float& g,
                      float& b) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  double rr, gg, bb;
  hsl_to_rgb({h, std::clamp(s, 0.0, 1.0), std::clamp(l, 0.0, 1.0)}, rr, gg,
             bb);
  r = static_cast<float>(rr);
  g = static_cast<float>(gg);
  b = static_cast<float>(bb);
}

void AugmentConfig::validate() const {
  auto bad = [](const std::string& what) {
    throw ConfigError("augment config: " + what);
  };
  if (!(rotation_max_deg >= 0) || !std::isfinite(rotation_max_deg))
    bad("rotation_max_deg must be finite and >= 0");
  if (!(hsl_shift_max >= 0) || !std::isfinite(hsl_shift_max))
    bad("hsl_shift_max must be finite and >= 0");
  if (!(shear_max >= 0) || shear_max >= 1 || !std::isfinite(shear_max))
    bad("shear_max must be in [0,1)");
  if (!(aspect_min > 0) || !(aspect_min <= aspect_max) ||
      !std::isfinite(aspect_max))
    bad("need 0 < aspect_min <= aspect_max, both finite");
  if (!(vflip_prob >= 0 && vflip_prob <= 1))
    bad("vflip_prob must be in [0,1]");
}

Image rotate(const Image& img, double angle_deg) {
  if (std::fabs(angle_deg) > 180.0)
    throw ConfigError("rotate: |angle| must be <= 180");
  if (angle_deg == 0.0) return img;
  double theta = angle_deg * kPi / 180.0;
  double ct = std::cos(theta);
  double st = std::sin(theta);
  double cy = (img.height - 1) / 2.0;
  double cx = (img.width - 1) / 2.0;
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    double dy = y - cy;
    for (int x = 0; x < img.width; ++x) {
      double dx = x - cx;
      double sx = cx + ct * dx + st * dy;
      double sy = cy - st * dx + ct * dy;
      for (int c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = sample_clamped(img, sy, sx, c);
      }
    }
  }
  return out;
}

Image hsl_shift(const Image& img, double dh_deg, double ds, double dl) {
  if (img.channels != 3)
    throw DataError("hsl_shift: image must have 3 channels");
  Image out(img.height, img.width, 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      Hsl hsl = rgb_to_hsl(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      hsl.h = std::fmod(hsl.h + dh_deg, 360.0);
      if (hsl.h < 0.0) hsl.h += 360.0;
      hsl.s = std::clamp(hsl.s + ds, 0.0, 1.0);
      hsl.l = std::clamp(hsl.l + dl, 0.0, 1.0);
      double r, g, b;
      hsl_to_rgb(hsl, r, g, b);
      out.at(y, x, 0) = static_cast<float>(r);
      out.at(y, x, 1) = static_cast<float>(g);
      out.at(y, x, 2) = static_cast<float>(b);
    }
  }
  return out;
}

Image shear(const Image& img, double factor) {
  if (std::fabs(factor) >= 1.0)
    throw ConfigError("shear: |factor| must be < 1");
  if (factor == 0.0) return img;
  double cy = (img.height - 1) / 2.0;
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    double shift = factor * (y - cy);
    for (int x = 0; x < img.width; ++x) {
      double sx = x - shift;
      for (int c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = sample_clamped(img, y, sx, c);
      }
    }
  }
  return out;
}

Image aspect_jitter(const Image& img, double factor) {
  if (!(factor > 0.0)) throw ConfigError("aspect_jitter: factor must be > 0");
  int rw = std::max(1, static_cast<int>(std::lround(img.width * factor)));
  if (rw == img.width) return img;
  Image scaled = resize_bilinear(img, img.height, rw);
  Image out(img.height, img.width, img.channels);
  int offset = (rw - img.width) / 2;  // negative when padding
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      int sx = std::clamp(x + offset, 0, rw - 1);
      for (int c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = scaled.at(y, sx, c);
      }
    }
  }
  return out;
}

Image vflip(const Image& img) {
  Image out(img.height, img.width, img.channels);
  size_t row = static_cast<size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) {
    std::copy_n(img.data.begin() + static_cast<size_t>(y) * row, row,
                out.data.begin() + static_cast<size_t>(img.height - 1 - y) * row);
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        out.at(y, img.width - 1 - x, c) = img.at(y, x, c);
      }
    }
  }
  return out;
}

Image augment(const Image& img, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  double angle = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg);
  double dh = rng.uniform(-cfg.hsl_shift_max, cfg.hsl_shift_max);
  double ds = rng.uniform(-cfg.hsl_shift_max, cfg.hsl_shift_max) / 100.0;
  double dl = rng.uniform(-cfg.hsl_shift_max, cfg.hsl_shift_max) / 100.0;
  double sh = rng.uniform(-cfg.shear_max, cfg.shear_max);
  double aspect = rng.uniform(cfg.aspect_min, cfg.aspect_max);
  bool flip = rng.bernoulli(cfg.vflip_prob);

  Image out = img;
  if (angle != 0.0) out = rotate(out, angle);
  if (sh != 0.0) out = shear(out, sh);
  if (aspect != 1.0) out = aspect_jitter(out, aspect);
  if (out.channels == 3 && (dh != 0.0 || ds != 0.0 || dl != 0.0)) {
    out = hsl_shift(out, dh, ds, dl);
  }
  if (flip) {
    out = cfg.flip_axis == FlipAxis::vertical ? vflip(out) : hflip(out);
  }
  return out;
}

}  // namespace visrec
