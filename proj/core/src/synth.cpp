#include "artdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <thread>

#include "artdet/errors.hpp"

namespace artdet {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Capsule {
  double ax, ay, bx, by, r;
  [[nodiscard]] bool contains(double x, double y) const {
    const double dx = bx - ax;
    const double dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double px = ax + t * dx - x;
    const double py = ay + t * dy - y;
    return px * px + py * py <= r * r;
  }
};

// Head disc plus torso, arm and leg strokes.
struct Figure {
  double hx, hy, hr;
  std::vector<Capsule> parts;
  double x0, y0, x1, y1;  // loose bounds for rasterising

  [[nodiscard]] bool contains(double x, double y) const {
    if ((x - hx) * (x - hx) + (y - hy) * (y - hy) <= hr * hr) return true;
    for (const auto& c : parts) {
      if (c.contains(x, y)) return true;
    }
    return false;
  }
};

Figure make_figure(double cx, double top, double h, double wscale,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double deg = std::numbers::pi / 180.0;
  Figure f;
  f.hr = 0.1 * h;
  f.hx = cx;
  f.hy = top + f.hr;
  const double neck_y = top + 0.2 * h;
  const double hip_x = cx + (u(rng) - 0.5) * 0.1 * h * wscale;
  const double hip_y = top + 0.55 * h;
  f.parts.push_back({cx, neck_y, hip_x, hip_y, 0.08 * h * wscale});
  const double shoulder_y = neck_y + 0.03 * h;
  for (int side : {-1, 1}) {
    const double a = (10 + 110 * u(rng)) * deg;
    const double len = 0.33 * h;
    f.parts.push_back({cx, shoulder_y, cx + side * std::sin(a) * len * wscale,
                       shoulder_y + std::cos(a) * len, 0.035 * h});
  }
  for (int side : {-1, 1}) {
    const double a = (3 + 27 * u(rng)) * deg;
    const double len = 0.44 * h;
    f.parts.push_back({hip_x, hip_y, hip_x + side * std::sin(a) * len * wscale,
                       hip_y + std::cos(a) * len, 0.045 * h});
  }
  f.x0 = f.hx - f.hr;
  f.x1 = f.hx + f.hr;
  f.y0 = f.hy - f.hr;
  f.y1 = f.hy + f.hr;
  for (const auto& c : f.parts) {
    f.x0 = std::min({f.x0, c.ax - c.r, c.bx - c.r});
    f.x1 = std::max({f.x1, c.ax + c.r, c.bx + c.r});
    f.y0 = std::min({f.y0, c.ay - c.r, c.by - c.r});
    f.y1 = std::max({f.y1, c.ay + c.r, c.by + c.r});
  }
  return f;
}

double luminance(Rgb c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, 255);
  return {static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)),
          static_cast<std::uint8_t>(d(rng))};
}

// A colour whose luminance differs from `ref` by at least `gap`.
Rgb contrasting(Rgb ref, double gap, std::mt19937_64& rng) {
  for (int tries = 0; tries < 64; ++tries) {
    const Rgb c = random_color(rng);
    if (std::abs(luminance(c) - luminance(ref)) >= gap) return c;
  }
  return luminance(ref) > 127 ? Rgb{20, 20, 20} : Rgb{235, 235, 235};
}

Rgb mix(Rgb a, Rgb b, double t) {
  auto m = [t](std::uint8_t x, std::uint8_t y) {
    return static_cast<std::uint8_t>(std::lround(x + (y - x) * t));
  };
  return {m(a.r, b.r), m(a.g, b.g), m(a.b, b.b)};
}

struct Canvas {
  Image img;
  std::vector<int> owner;  // person index per pixel, -1 for anything else
  Canvas(int w, int h, Rgb fill)
      : img(w, h, fill), owner(static_cast<std::size_t>(w) * h, -1) {}
  void put(int x, int y, Rgb c, int who) {
    img.set(x, y, c);
    owner[static_cast<std::size_t>(y) * img.width() + x] = who;
  }
};

void paint_background(Canvas& cv, Rgb base, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Rgb other = mix(base, random_color(rng), 0.35);
  const double angle = u(rng) * 2 * std::numbers::pi;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  const int w = cv.img.width();
  const int h = cv.img.height();
  const double span = std::abs(ca) * w + std::abs(sa) * h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double t = (ca * x + sa * y) / span;
      t = t - std::floor(t);
      cv.img.set(x, y, mix(base, other, t));
    }
  }
  // Low-contrast patches.
  std::uniform_int_distribution<int> npatch(1, 4);
  const int n = npatch(rng);
  for (int i = 0; i < n; ++i) {
    const int pw = 10 + static_cast<int>(u(rng) * w * 0.5);
    const int ph = 10 + static_cast<int>(u(rng) * h * 0.5);
    const int px = static_cast<int>(u(rng) * (w - 1));
    const int py = static_cast<int>(u(rng) * (h - 1));
    const Rgb c = mix(base, random_color(rng), 0.25);
    for (int y = py; y < std::min(h, py + ph); ++y) {
      for (int x = px; x < std::min(w, px + pw); ++x) cv.img.set(x, y, c);
    }
  }
}

void paint_distractor(Canvas& cv, Rgb color, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int w = cv.img.width();
  const int h = cv.img.height();
  const double cx = u(rng) * w;
  const double cy = u(rng) * h;
  const int kind = static_cast<int>(u(rng) * 4);
  const double s = 6 + u(rng) * 22;
  const double ar = 0.4 + u(rng) * 1.2;
  const double ang = u(rng) * std::numbers::pi;
  const Capsule stick{cx - std::cos(ang) * s, cy - std::sin(ang) * s,
                      cx + std::cos(ang) * s, cy + std::sin(ang) * s,
                      1.5 + u(rng) * 3};
  const int x0 = std::max(0, static_cast<int>(cx - 2 * s - 4));
  const int x1 = std::min(w - 1, static_cast<int>(cx + 2 * s + 4));
  const int y0 = std::max(0, static_cast<int>(cy - 2 * s - 4));
  const int y1 = std::min(h - 1, static_cast<int>(cy + 2 * s + 4));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      bool in = false;
      switch (kind) {
        case 0: in = dx * dx + dy * dy <= s * s * 0.5; break;
        case 1: in = std::abs(dx) <= s * ar * 0.7 && std::abs(dy) <= s * 0.7; break;
        case 2: in = (dx * dx) / (s * s * ar * ar) + (dy * dy) / (s * s * 0.3) <= 1; break;
        default: in = stick.contains(x + 0.5, y + 0.5); break;
      }
      if (in) cv.put(x, y, color, -1);
    }
  }
}

constexpr int kPlacementAttempts = 20;
constexpr double kMaxFigureOverlap = 0.2;

struct Placed {
  Figure fig;
  int pixels = 0;  // full silhouette area
};

}  // namespace

const std::vector<std::string>& synth_style_names() {
  static const std::vector<std::string> names{"filled", "outline", "textured",
                                              "inverted", "noisy"};
  return names;
}

void SynthConfig::validate() const {
  if (count < 0) throw ConfigError("synth count must be >= 0");
  if (width < 32 || height < 32) throw ConfigError("synth images must be >= 32x32");
  if (min_people < 0 || max_people < min_people) {
    throw ConfigError("synth people range must satisfy 0 <= min <= max");
  }
  if (min_person_height < 8 || max_person_height < min_person_height ||
      max_person_height > height) {
    throw ConfigError("synth person heights must satisfy 8 <= min <= max <= image height");
  }
  if (max_distractors < 0) throw ConfigError("synth distractors must be >= 0");
  if (styles.empty()) throw ConfigError("synth needs at least one style");
  const auto& known = synth_style_names();
  for (const auto& s : styles) {
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw ConfigError("unknown synth style '" + s + "'");
    }
  }
  if (!(occlusion_prob >= 0 && occlusion_prob <= 1)) {
    throw ConfigError("occlusion probability must lie in [0, 1]");
  }
  if (!(difficult_prob >= 0 && difficult_prob <= 1)) {
    throw ConfigError("difficult probability must lie in [0, 1]");
  }
}

SynthImage render_synthetic(const SynthConfig& cfg, const std::string& split,
                            int index) {
  std::mt19937_64 rng(splitmix(cfg.seed ^ splitmix(fnv1a(split)) ^
                               splitmix(static_cast<std::uint64_t>(index) + 1)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int w = cfg.width;
  const int h = cfg.height;
  const std::string style =
      cfg.styles[std::uniform_int_distribution<std::size_t>(0, cfg.styles.size() - 1)(rng)];

  Rgb bg = random_color(rng);
  if (style == "inverted") bg = mix(bg, Rgb{0, 0, 0}, 0.75);
  Canvas cv(w, h, bg);
  paint_background(cv, bg, rng);

  Rgb fg = contrasting(bg, 90, rng);
  if (style == "inverted") fg = mix(fg, Rgb{255, 255, 255}, 0.6);
  const Rgb fg2 = contrasting(fg, 70, rng);

  const int nd = std::uniform_int_distribution<int>(0, cfg.max_distractors)(rng);
  for (int i = 0; i < nd; ++i) {
    // Half the clutter shares the figure colour so colour alone is no cue.
    paint_distractor(cv, u(rng) < 0.5 ? fg : contrasting(bg, 60, rng), rng);
  }

  const int np = std::uniform_int_distribution<int>(cfg.min_people, cfg.max_people)(rng);
  std::vector<Placed> people;
  const double stripe_angle = u(rng) * std::numbers::pi;
  const double stripe_period = 3 + u(rng) * 4;
  for (int p = 0; p < np; ++p) {
    // Figures may overlap, but not so much that two become one blob.
    Placed pl;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const double ph = cfg.min_person_height +
                        u(rng) * (cfg.max_person_height - cfg.min_person_height);
      const double wscale = 0.8 + 0.4 * u(rng);
      const double half_w = 0.42 * ph * wscale;
      const double cx = half_w + u(rng) * std::max(0.0, w - 2 * half_w);
      const double top = u(rng) * std::max(0.0, h - ph);
      pl.fig = make_figure(cx, top, ph, wscale, rng);
      const BBox mine{pl.fig.x0, pl.fig.y0, pl.fig.x1, pl.fig.y1};
      placed = std::none_of(people.begin(), people.end(), [&](const Placed& o) {
        return iou(mine, {o.fig.x0, o.fig.y0, o.fig.x1, o.fig.y1}) > kMaxFigureOverlap;
      });
    }
    if (!placed) break;
    const Figure& f = pl.fig;
    const int x0 = std::max(0, static_cast<int>(std::floor(f.x0)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(f.x1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(f.y0)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(f.y1)));
    std::vector<std::pair<int, int>> mask;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (f.contains(x + 0.5, y + 0.5)) mask.emplace_back(x, y);
      }
    }
    pl.pixels = static_cast<int>(mask.size());
    for (auto [x, y] : mask) {
      Rgb c = fg;
      if (style == "textured") {
        const double t = (x * std::cos(stripe_angle) + y * std::sin(stripe_angle)) /
                         stripe_period;
        if (static_cast<long>(std::floor(t)) % 2 != 0) c = fg2;
      } else if (style == "outline") {
        const bool edge = !f.contains(x - 0.5, y + 0.5) || !f.contains(x + 1.5, y + 0.5) ||
                          !f.contains(x + 0.5, y - 0.5) || !f.contains(x + 0.5, y + 1.5);
        if (!edge) {
          // Interior keeps whatever lies beneath but now belongs to the figure.
          cv.owner[static_cast<std::size_t>(y) * w + x] = p;
          continue;
        }
      }
      cv.put(x, y, c, p);
    }
    people.push_back(std::move(pl));

    if (u(rng) < cfg.occlusion_prob) {
      const double bw = f.x1 - f.x0;
      const double bh = f.y1 - f.y0;
      const double ow = bw * (0.4 + 0.6 * u(rng));
      const double oh = bh * (0.2 + 0.4 * u(rng));
      const double ox = f.x0 + u(rng) * (bw - ow * 0.5) - ow * 0.25;
      const double oy = f.y0 + u(rng) * (bh - oh);
      const Rgb oc = contrasting(fg, 50, rng);
      for (int y = std::max(0, static_cast<int>(oy)); y < std::min(h, static_cast<int>(oy + oh)); ++y) {
        for (int x = std::max(0, static_cast<int>(ox)); x < std::min(w, static_cast<int>(ox + ow)); ++x) {
          cv.put(x, y, oc, -1);
        }
      }
    }
  }

  if (style == "noisy") {
    std::normal_distribution<double> noise(0.0, 28.0);
    for (auto& v : cv.img.bytes()) {
      v = static_cast<std::uint8_t>(std::clamp(v + noise(rng), 0.0, 255.0));
    }
  }

  char name[64];
  std::snprintf(name, sizeof name, "images/%s_%05d.png", split.c_str(), index);
  SynthImage out;
  out.entry.path = name;
  out.entry.width = w;
  out.entry.height = h;
  out.entry.style = style;
  for (std::size_t p = 0; p < people.size(); ++p) {
    int x0 = w, y0 = h, x1 = -1, y1 = -1, vis = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (cv.owner[static_cast<std::size_t>(y) * w + x] != static_cast<int>(p)) continue;
        ++vis;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
    const double keep_roll = u(rng);
    if (vis == 0) continue;
    Annotation a;
    a.image_id = out.entry.path;
    a.box = {static_cast<double>(x0), static_cast<double>(y0),
             static_cast<double>(x1 + 1), static_cast<double>(y1 + 1)};
    a.style = style;
    const double visible = static_cast<double>(vis) / std::max(1, people[p].pixels);
    a.difficult = visible < kDifficultVisible || a.box.height() < kDifficultHeight ||
                  keep_roll < cfg.difficult_prob;
    out.entry.boxes.push_back(std::move(a));
  }
  out.image = std::move(cv.img);
  return out;
}

std::vector<SynthImage> generate_in_memory(const SynthConfig& cfg,
                                           const std::string& split) {
  cfg.validate();
  std::vector<SynthImage> out;
  out.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) out.push_back(render_synthetic(cfg, split, i));
  return out;
}

DatasetManifest generate_synthetic(const SynthConfig& cfg, const std::string& split,
                                   const std::filesystem::path& out_dir,
                                   int threads) {
  cfg.validate();
  if (!is_valid_split(split)) throw ConfigError("unknown split '" + split + "'");
  std::filesystem::create_directories(out_dir / "images");
  std::vector<ImageEntry> entries(cfg.count);
  const int workers = std::max(1, threads);
  auto work = [&](int first) {
    for (int i = first; i < cfg.count; i += workers) {
      SynthImage s = render_synthetic(cfg, split, i);
      write_png(s.image, out_dir / s.entry.path);
      entries[i] = std::move(s.entry);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work, t);
  }
  DatasetManifest m;
  m.split = split;
  m.styles = cfg.styles;
  std::sort(m.styles.begin(), m.styles.end());
  m.entries = std::move(entries);
  save_manifest(m, out_dir / (split + ".jsonl"));
  return m;
}

}  // namespace artdet
