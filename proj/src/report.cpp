#include "incstab/report.hpp"

#include <cmath>

#include "json.hpp"

namespace incstab {

namespace {

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json to_json_value(const VerificationReport& r) {
  nlohmann::json j;
  if (!r.label.empty()) j["label"] = r.label;
  j["pass"] = r.pass;
  j["n_samples"] = r.n_samples;
  j["max_violation"] = finite_or_null(r.max_violation);
  j["worst_point"] = r.worst_point;
  if (r.skipped > 0) j["skipped"] = r.skipped;
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  for (const auto& [k, v] : r.values) j["values"][k] = finite_or_null(v);
  return j;
}

}  // namespace

void VerificationReport::absorb(double violation, std::size_t index, std::vector<double> point) {
  if (violation > max_violation || (violation == max_violation && index < worst_index)) {
    max_violation = violation;
    worst_index = index;
    worst_point = std::move(point);
  }
}

void VerificationReport::merge(const VerificationReport& other) {
  n_samples += other.n_samples;
  skipped += other.skipped;
  if (other.max_violation > max_violation ||
      (other.max_violation == max_violation && other.worst_index < worst_index)) {
    max_violation = other.max_violation;
    worst_index = other.worst_index;
    worst_point = other.worst_point;
  }
  pass = pass && other.pass;
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

std::string VerificationReport::to_json(int indent) const { return to_json_value(*this).dump(indent); }

std::string reports_to_json(const std::vector<VerificationReport>& reports, int indent) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(to_json_value(r));
  return arr.dump(indent);
}

}  // namespace incstab
