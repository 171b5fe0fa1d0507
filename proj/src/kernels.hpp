#pragma once

#include <algorithm>

// Footprint kernels shared by every operator. A coefficient at (y0, x0)
// paired with filter entry (a, b) touches output pixel
// (y0 + a - c, x0 + b - c), c = side / 2, and nothing outside the image.

namespace scsc::detail {

struct Footprint {
  int a_begin, a_end;  // filter rows
  int b_begin, b_end;  // filter cols
  int dy, dx;          // output pixel = (y0 + a - c, x0 + b - c) -> offset
};

inline Footprint footprint(int y0, int x0, int side, int height, int width) {
  const int c = side / 2;
  Footprint f;
  f.dy = y0 - c;
  f.dx = x0 - c;
  f.a_begin = std::max(0, -f.dy);
  f.a_end = std::min(side, height - f.dy);
  f.b_begin = std::max(0, -f.dx);
  f.b_end = std::min(side, width - f.dx);
  return f;
}

// out(y0 + a - c, x0 + b - c) += scale * filter(a, b)
inline void scatter_add(double* out, int height, int width, const double* filter, int side,
                        int y0, int x0, double scale) {
  const Footprint f = footprint(y0, x0, side, height, width);
  for (int a = f.a_begin; a < f.a_end; ++a) {
    double* row = out + (f.dy + a) * width + f.dx;
    const double* frow = filter + a * side;
    for (int b = f.b_begin; b < f.b_end; ++b) row[b] += scale * frow[b];
  }
}

// sum_{a,b} in(y0 + a - c, x0 + b - c) * filter(a, b)
inline double gather_dot(const double* in, int height, int width, const double* filter, int side,
                         int y0, int x0) {
  const Footprint f = footprint(y0, x0, side, height, width);
  double acc = 0.0;
  for (int a = f.a_begin; a < f.a_end; ++a) {
    const double* row = in + (f.dy + a) * width + f.dx;
    const double* frow = filter + a * side;
    for (int b = f.b_begin; b < f.b_end; ++b) acc += row[b] * frow[b];
  }
  return acc;
}

// out(a, b) += scale * in(y0 + a - c, x0 + b - c)
inline void gather_patch_add(const double* in, int height, int width, int side, int y0, int x0,
                             double scale, double* out) {
  const Footprint f = footprint(y0, x0, side, height, width);
  for (int a = f.a_begin; a < f.a_end; ++a) {
    const double* row = in + (f.dy + a) * width + f.dx;
    double* orow = out + a * side;
    for (int b = f.b_begin; b < f.b_end; ++b) orow[b] += scale * row[b];
  }
}

}  // namespace scsc::detail
