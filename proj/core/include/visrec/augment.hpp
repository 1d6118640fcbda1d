#pragma once

#include "visrec/image.hpp"
#include "visrec/rng.hpp"

namespace visrec {

enum class FlipAxis { vertical, horizontal };

struct AugmentConfig {
  double rotation_max_deg = 3.0;
  double hsl_shift_max = 6.0;  // hue in degrees; S/L in percentage points
  double shear_max = 0.25;
  double aspect_min = 0.875;
  double aspect_max = 1.125;
  double vflip_prob = 0.5;
  FlipAxis flip_axis = FlipAxis::vertical;

  void validate() const;  // throws ConfigError

  static AugmentConfig disabled() {
    AugmentConfig c;
    c.rotation_max_deg = 0;
    c.hsl_shift_max = 0;
    c.shear_max = 0;
    c.aspect_min = 1;
    c.aspect_max = 1;
    c.vflip_prob = 0;
    return c;
  }
};

// All transforms keep the input shape and value range [0,1]; out-of-frame
// samples use edge replication.

// Rotation about the image center, bilinear resampling. |angle| <= 180 deg.
Image rotate(const Image& img, double angle_deg);

// Per pixel RGB -> HSL, hue shifted by dh degrees (wrapping), saturation and
// lightness shifted additively then clamped, HSL -> RGB. 3-channel only.
Image hsl_shift(const Image& img, double dh_deg, double ds, double dl);

// Horizontal shear x' = x + factor * (y - cy) about the center. |factor| < 1.
Image shear(const Image& img, double factor);

// Width rescaled by `factor`, then center-cropped or edge-padded back to the
// original width; height unchanged.
Image aspect_jitter(const Image& img, double factor);

Image vflip(const Image& img);
Image hflip(const Image& img);

// hue in degrees, saturation/lightness in [0,1]
void hsl_to_rgb_color(double h, double s, double l, float& r, float& g,
                      float& b);

// Draws angle ~ U[-rot,rot], HSL deltas ~ U[-m,m] (S/L scaled to fractions),
// shear ~ U[-s,s], aspect ~ U[amin,amax], flip ~ Bernoulli(p) and applies
// rotate -> shear -> aspect -> hsl -> flip. Same Rng state, same output.
Image augment(const Image& img, const AugmentConfig& cfg, Rng& rng);

}  // namespace visrec
