#include "visrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "visrec/augment.hpp"
#include "visrec/binio.hpp"
#include "visrec/errors.hpp"
#include "visrec/image_io.hpp"
#include "visrec/rng.hpp"

namespace fs = std::filesystem;

namespace visrec {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Palette {
  float bg[3];
  float fg[3];
  float fg2[3];
};

Palette draw_palette(Rng& rng) {
  Palette p;
  double bg_hue = rng.uniform(0, 360);
  hsl_to_rgb_color(bg_hue, rng.uniform(0.05, 0.4), rng.uniform(0.7, 0.9),
                   p.bg[0], p.bg[1], p.bg[2]);
  double fg_hue = bg_hue + rng.uniform(100, 260);
  double fg_sat = rng.uniform(0.55, 1.0);
  double fg_light = rng.uniform(0.25, 0.45);
  hsl_to_rgb_color(fg_hue, fg_sat, fg_light, p.fg[0], p.fg[1], p.fg[2]);
  hsl_to_rgb_color(fg_hue + rng.uniform(-30, 30), fg_sat,
                   std::min(0.95, fg_light + rng.uniform(0.3, 0.45)),
                   p.fg2[0], p.fg2[1], p.fg2[2]);
  return p;
}

struct Geometry {
  int shape;
  double cx, cy;       // center
  double r;            // characteristic radius
  double cos_t, sin_t; // shape orientation
  int texture;
  double tex_cos, tex_sin;  // pattern orientation
  double tex_period;
};

bool inside_shape(const Geometry& g, double px, double py) {
  // shape-local coordinates
  double dx = px - g.cx;
  double dy = py - g.cy;
  double x = g.cos_t * dx + g.sin_t * dy;
  double y = -g.sin_t * dx + g.cos_t * dy;
  switch (g.shape) {
    case 0:  // circle
      return x * x + y * y <= g.r * g.r;
    case 1:  // square
      return std::max(std::fabs(x), std::fabs(y)) <= g.r * 0.82;
    case 2: {  // upward triangle with circumradius r
      double yy = y + g.r * 0.25;
      if (yy < -g.r * 0.75 || yy > g.r * 0.75) return false;
      double half_width = (yy + g.r * 0.75) * 0.577;  // tan(30 deg) slope
      return std::fabs(x) <= half_width;
    }
    default: {  // cross
      double arm = g.r * 0.34;
      return (std::fabs(x) <= arm && std::fabs(y) <= g.r) ||
             (std::fabs(y) <= arm && std::fabs(x) <= g.r);
    }
  }
}

bool pattern_secondary(const Geometry& g, double px, double py) {
  switch (g.texture) {
    case 0:  // solid
      return false;
    case 1: {  // stripes
      double t = g.tex_cos * px + g.tex_sin * py;
      double phase = std::fmod(t, g.tex_period);
      if (phase < 0) phase += g.tex_period;
      return phase < g.tex_period * 0.5;
    }
    default: {  // dots
      double u = g.tex_cos * px + g.tex_sin * py;
      double v = -g.tex_sin * px + g.tex_cos * py;
      double fu = std::fmod(u, g.tex_period);
      double fv = std::fmod(v, g.tex_period);
      if (fu < 0) fu += g.tex_period;
      if (fv < 0) fv += g.tex_period;
      double du = fu - g.tex_period * 0.5;
      double dv = fv - g.tex_period * 0.5;
      double dot_r = g.tex_period * 0.32;
      return du * du + dv * dv <= dot_r * dot_r;
    }
  }
}

}  // namespace

const std::vector<std::string>& synth_shape_names() {
  static const std::vector<std::string> names = {"circle", "square",
                                                 "triangle", "cross"};
  return names;
}

const std::vector<std::string>& synth_texture_names() {
  static const std::vector<std::string> names = {"solid", "stripes", "dots"};
  return names;
}

std::vector<std::string> synth_joint_names() {
  std::vector<std::string> names;
  for (const auto& s : synth_shape_names()) {
    for (const auto& t : synth_texture_names()) {
      names.push_back(s + "_" + t);
    }
  }
  return names;
}

SynthItem synth_item(uint64_t seed, int size) {
  if (size < 16) throw ConfigError("synth_item: size must be >= 16");
  Rng rng(seed);
  SynthItem item;
  item.shape = static_cast<int>(rng.below(4));
  item.texture = static_cast<int>(rng.below(3));

  Palette pal = draw_palette(rng);
  Geometry g;
  g.shape = item.shape;
  g.texture = item.texture;
  double half = size / 2.0;
  g.cx = half + rng.uniform(-size * 0.08, size * 0.08);
  g.cy = half + rng.uniform(-size * 0.08, size * 0.08);
  g.r = rng.uniform(size * 0.28, size * 0.4);
  double theta = rng.uniform(-15.0, 15.0) * kPi / 180.0;
  g.cos_t = std::cos(theta);
  g.sin_t = std::sin(theta);
  double tex_theta = rng.uniform(0.0, kPi);
  g.tex_cos = std::cos(tex_theta);
  g.tex_sin = std::sin(tex_theta);
  g.tex_period = rng.uniform(size * 0.09, size * 0.15);

  Image img(size, size, 3);
  // 2x2 supersampling for soft edges
  static const double sub[4][2] = {
      {0.25, 0.25}, {0.25, 0.75}, {0.75, 0.25}, {0.75, 0.75}};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      float acc[3] = {0, 0, 0};
      for (const auto& s : sub) {
        double px = x + s[0];
        double py = y + s[1];
        const float* color = pal.bg;
        if (inside_shape(g, px, py)) {
          color = pattern_secondary(g, px, py) ? pal.fg2 : pal.fg;
        }
        acc[0] += color[0];
        acc[1] += color[1];
        acc[2] += color[2];
      }
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = acc[c] * 0.25f;
    }
  }
  const double noise = 0.02;
  for (float& v : img.data) {
    v = static_cast<float>(
        std::clamp(v + rng.normal(0.0, noise), 0.0, 1.0));
  }
  item.image = std::move(img);
  return item;
}

namespace {

constexpr uint64_t kSynthStream = 0x5f3759df;

std::string item_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "item-%06d", index);
  return buf;
}

int label_of(const SynthItem& item, SynthLabel kind) {
  switch (kind) {
    case SynthLabel::shape: return item.shape;
    case SynthLabel::texture: return item.texture;
    default: return item.shape * 3 + item.texture;
  }
}

std::vector<std::string> names_of(SynthLabel kind) {
  switch (kind) {
    case SynthLabel::shape: return synth_shape_names();
    case SynthLabel::texture: return synth_texture_names();
    default: return synth_joint_names();
  }
}

}  // namespace

Dataset synth_dataset(int count, uint64_t seed, SynthLabel kind,
                      const std::string& task_name, int size) {
  if (count < 1) throw ConfigError("synth_dataset: count must be >= 1");
  Dataset ds;
  ds.task_name = task_name;
  ds.class_names = names_of(kind);
  ds.samples.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    SynthItem item = synth_item(hash_combine(seed, kSynthStream,
                                             static_cast<uint64_t>(i)),
                                size);
    LabeledSample s;
    s.id = item_id(i);
    s.source_path = "synth://" + s.id;
    s.image = std::move(item.image);
    s.label = label_of(item, kind);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void write_synth_catalog(const std::string& dir, int count, uint64_t seed,
                         int size) {
  fs::create_directories(dir);
  fs::create_directories(fs::path(dir) / "images");
  struct ManifestSpec {
    const char* file;
    SynthLabel kind;
  };
  const ManifestSpec manifests[] = {
      {"shape.csv", SynthLabel::shape},
      {"texture.csv", SynthLabel::texture},
      {"joint.csv", SynthLabel::joint},
  };
  std::vector<SynthItem> items;
  items.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    items.push_back(synth_item(
        hash_combine(seed, kSynthStream, static_cast<uint64_t>(i)), size));
    std::string rel = "images/" + item_id(i) + ".imgf32";
    write_file((fs::path(dir) / rel).string(),
               encode_imgf32(items.back().image));
  }
  for (const auto& spec : manifests) {
    std::ofstream out(fs::path(dir) / spec.file, std::ios::trunc);
    if (!out) throw DataError("cannot write manifest in " + dir);
    auto names = names_of(spec.kind);
    out << "# classes: ";
    for (size_t i = 0; i < names.size(); ++i) {
      if (i) out << ",";
      out << names[i];
    }
    out << "\nid,path,label\n";
    for (int i = 0; i < count; ++i) {
      out << item_id(i) << ",images/" << item_id(i) << ".imgf32,"
          << names[static_cast<size_t>(label_of(items[static_cast<size_t>(i)],
                                                spec.kind))]
          << "\n";
    }
  }
}

}  // namespace visrec
