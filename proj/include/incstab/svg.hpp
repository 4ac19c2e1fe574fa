#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "incstab/dynamics.hpp"
#include "incstab/sampling.hpp"

namespace incstab {

/// Minimal phase-plane plot: the first two state coordinates as polylines
/// plus outlined boxes. Coordinates outside `view` are drawn clipped by the viewer.
class PhasePlot {
 public:
  explicit PhasePlot(Box view, int size_px = 480);
  void add_box(const Box& b, const std::string& stroke, const std::string& fill = "none");
  void add_trajectory(const Trajectory& tr, const std::string& stroke);
  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  double px(double x) const;
  double py(double y) const;

  Box view_;
  int size_;
  std::vector<std::string> items_;
};

}  // namespace incstab
