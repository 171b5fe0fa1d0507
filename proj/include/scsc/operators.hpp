#pragma once

#include <scsc/core.hpp>
#include <scsc/rng.hpp>

#include <cstdint>
#include <vector>

namespace scsc {

// The stacked convolution D = [D_1, ..., D_K] acting on codes. Zero-padded,
// "same"-mode output; nothing is ever materialized.
class DictOperator {
 public:
  DictOperator(const Dictionary& dict, Geometry geometry);

  const Dictionary& dictionary() const { return *dict_; }
  const Geometry& geometry() const { return geometry_; }

  // D z = sum_k d_k * z_k.
  Signal apply(const CodeMap& codes) const;
  // D^T r: per-filter correlation of r with d_k.
  CodeMap adjoint(const Signal& residual) const;

 private:
  const Dictionary* dict_;
  Geometry geometry_;
};

// The code-built operator Z = [Z_1, ..., Z_K] acting on flattened filters.
// Only the nonzero coefficients of the code map are visited.
class CodeOperator {
 public:
  CodeOperator(const CodeMap& codes, int filter_side);

  int num_filters() const { return num_filters_; }
  int filter_side() const { return side_; }
  const Geometry& geometry() const { return geometry_; }
  Index nonzeros() const { return Index(entries_.size()); }

  // Z f = sum_k d_k * z_k for flattened filters f of length K*M.
  Signal apply(const Vector& filters) const;
  // Z^T r, length K*M.
  Vector adjoint(const Signal& residual) const;

  // Restrictions to one block: Z_k f_k and Z_k^T r.
  void apply_block_add(int k, const double* filter, double scale, Signal& out) const;
  void adjoint_block(int k, const Signal& residual, double* out) const;

  struct Entry {
    int y;
    int x;
    double value;
  };
  std::span<const Entry> entries(int k) const {
    return {entries_.data() + offsets_[k], entries_.data() + offsets_[k + 1]};
  }

 private:
  int num_filters_;
  int side_;
  Geometry geometry_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> offsets_;
};

inline Signal dict_apply(const DictOperator& op, const CodeMap& codes) { return op.apply(codes); }
inline CodeMap dict_adjoint(const DictOperator& op, const Signal& r) { return op.adjoint(r); }
inline Signal code_apply(const CodeOperator& op, const Vector& f) { return op.apply(f); }
inline Vector code_adjoint(const CodeOperator& op, const Signal& r) { return op.adjoint(r); }

// The iteration's random subset of the D*K code positions, sorted.
struct SubsampleMask {
  std::vector<std::int64_t> indices;
  Index total = 0;  // D*K
  double rate = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;

  Index size() const { return Index(indices.size()); }
};

// Exactly ceil(p*D*K) distinct positions, uniform without replacement,
// deterministic in (seed, iteration).
SubsampleMask sample_mask(Index signal_size, int num_filters, double rate, std::uint64_t seed,
                          std::uint64_t iteration);

SubsampleMask full_mask(Index signal_size, int num_filters);

// M z: gather coefficients at mask positions.
Vector subsample(const SubsampleMask& mask, const CodeMap& codes);
// M^T v: scatter, zero elsewhere.
CodeMap upsample(const SubsampleMask& mask, const Vector& reduced, int num_filters,
                 Geometry geometry);

// A = D M^T restricted to the mask's columns, optionally followed by a
// diagonal observation selector W (A = W D M^T).
class MaskedDictOperator {
 public:
  MaskedDictOperator(const Dictionary& dict, Geometry geometry, const SubsampleMask& mask,
                     const Grid* observation = nullptr);

  Index cols() const { return Index(cols_.size()); }
  const Geometry& geometry() const { return geometry_; }
  const Dictionary& dictionary() const { return *dict_; }

  Signal apply(const Vector& reduced) const;
  Vector adjoint(const Signal& residual) const;

  struct Column {
    int k;
    int y;
    int x;
  };
  const std::vector<Column>& columns() const { return cols_; }
  const Grid* observation() const { return observation_; }

 private:
  const Dictionary* dict_;
  Geometry geometry_;
  const Grid* observation_;
  std::vector<Column> cols_;
};

}  // namespace scsc
