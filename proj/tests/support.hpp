#pragma once

#include <scsc/scsc.hpp>

#include <filesystem>
#include <string>

namespace scsc::testing {

inline Signal random_signal(Geometry g, std::uint64_t seed) {
  Rng rng(seed);
  Signal s(g.height, g.width);
  for (Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
  return s;
}

inline Dictionary random_filters(int k, int side, std::uint64_t seed) {
  Rng rng(seed);
  Dictionary d(k, side);
  for (Index i = 0; i < d.coeffs().size(); ++i) d.coeffs()[i] = rng.normal();
  return d;
}

// Codes with roughly `density` nonzeros; density 1 gives dense normal codes.
inline CodeMap random_codes(int k, Geometry g, std::uint64_t seed, double density = 1.0) {
  Rng rng(seed);
  CodeMap z(k, g);
  for (Index i = 0; i < z.size(); ++i) {
    const double v = rng.normal();
    if (rng.uniform() < density) z.coeffs()[i] = v;
  }
  return z;
}

inline double rel_diff(const Eigen::Ref<const Eigen::VectorXd>& a,
                       const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline Vector flat(const Signal& s) { return Eigen::Map<const Vector>(s.data(), s.size()); }

// Fresh empty directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("scsc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace scsc::testing
