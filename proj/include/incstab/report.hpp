#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace incstab {

/// Outcome of a sampled check. Serialized as
/// {pass, n_samples, max_violation, worst_point} plus optional extras.
struct VerificationReport {
  std::string label;
  bool pass = true;
  std::size_t n_samples = 0;
  std::size_t skipped = 0;
  double max_violation = -std::numeric_limits<double>::infinity();
  std::vector<double> worst_point;
  std::size_t worst_index = 0;
  std::vector<std::string> warnings;
  std::map<std::string, double> values;

  /// Keeps the larger violation; ties go to the lower sample index.
  void absorb(double violation, std::size_t index, std::vector<double> point);
  /// Merges a partial report computed over a disjoint sample range.
  void merge(const VerificationReport& other);

  std::string to_json(int indent = 2) const;
};

/// Deterministic combination of several reports into one JSON array.
std::string reports_to_json(const std::vector<VerificationReport>& reports, int indent = 2);

}  // namespace incstab
