#pragma once

#include <cstdint>
#include <functional>

#include "incstab/linalg.hpp"

namespace incstab {

/// Axis-aligned closed box [lo, hi].
struct Box {
  Vec lo;
  Vec hi;

  Eigen::Index dim() const { return lo.size(); }
  /// Throws InvalidSetError when lo > hi anywhere or the sizes differ.
  void validate() const;
  bool contains(const Vec& x, double tol = 0.0) const;
  /// Maps a point of the unit cube onto the box.
  Vec from_unit(const Vec& unit) const;
  /// Concatenation (lo1, lo2), (hi1, hi2).
  static Box product(const Box& a, const Box& b);
};

enum class SamplingScheme { kSobol, kUniform };

/// `n` points of the unit cube [0,1)^dim, one per row. Sobol points skip the
/// origin of the sequence so the first row is not the box corner.
Mat unit_samples(std::size_t dim, std::size_t n, SamplingScheme scheme = SamplingScheme::kSobol,
                 std::uint64_t seed = 0);

/// Thread count used when a caller passes 0.
unsigned default_threads();

/// Splits [0, n) into contiguous chunks, one per worker.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace incstab
