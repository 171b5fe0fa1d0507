#include <scsc/operators.hpp>
#include <scsc/rng.hpp>
#include <scsc/synthetic.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scsc {

namespace {

double smoothstep(double edge, double v) {
  // Soft edge of width `edge` around v = 0 (inside for v < 0).
  const double t = std::clamp(0.5 - v / edge, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

Signal synthetic_scene(Geometry g, std::uint64_t seed, std::uint64_t index) {
  Rng rng = Rng::derive(seed, Stream::synthetic, index);
  const int h = g.height, w = g.width;
  const double scale = std::max(h, w);
  Signal img(h, w);

  const double gx = rng.uniform() - 0.5, gy = rng.uniform() - 0.5, base = 0.3 + 0.4 * rng.uniform();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(y, x) = base + 0.3 * (gx * x + gy * y) / scale;

  const int shapes = 6 + int(rng.below(6));
  for (int s = 0; s < shapes; ++s) {
    const double cy = rng.uniform() * h, cx = rng.uniform() * w;
    const double ry = (0.05 + 0.25 * rng.uniform()) * scale;
    const double rx = (0.05 + 0.25 * rng.uniform()) * scale;
    const double theta = rng.uniform() * std::numbers::pi;
    const double level = rng.uniform();
    const double edge = 0.5 + 2.0 * rng.uniform();
    const bool bar = rng.uniform() < 0.4;
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double u = (ct * (x - cx) + st * (y - cy)) / rx;
        const double v = (-st * (x - cx) + ct * (y - cy)) / ry;
        const double dist = bar ? std::max(std::abs(u), std::abs(v)) : std::hypot(u, v);
        const double inside = smoothstep(edge / std::min(rx, ry), dist - 1.0);
        img(y, x) = (1.0 - inside) * img(y, x) + inside * level;
      }
  }

  const int gratings = 1 + int(rng.below(3));
  for (int s = 0; s < gratings; ++s) {
    const double cy = rng.uniform() * h, cx = rng.uniform() * w;
    const double radius = (0.1 + 0.2 * rng.uniform()) * scale;
    const double theta = rng.uniform() * std::numbers::pi;
    const double period = 3.0 + 6.0 * rng.uniform();
    const double amp = 0.05 + 0.15 * rng.uniform();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double r2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (radius * radius);
        const double phase = 2.0 * std::numbers::pi *
                             (std::cos(theta) * x + std::sin(theta) * y) / period;
        img(y, x) += amp * std::exp(-r2) * std::sin(phase);
      }
  }

  for (Index i = 0; i < img.size(); ++i) img.data()[i] += 0.01 * rng.normal();
  return img.cwiseMax(0.0).cwiseMin(1.0);
}

SyntheticCodes synthesize_from_dictionary(const Dictionary& dict, Geometry g, double density,
                                          std::uint64_t seed) {
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("code density must be in (0, 1]");
  Rng rng = Rng::derive(seed, Stream::synthetic, 0x5eedULL);
  CodeMap z(dict.num_filters(), g);
  for (Index i = 0; i < z.size(); ++i) {
    if (rng.uniform() < density) {
      const double mag = 0.5 + rng.uniform();
      z.coeffs()[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
  }
  Signal x = DictOperator(dict, g).apply(z);
  return {std::move(z), std::move(x)};
}

}  // namespace scsc
