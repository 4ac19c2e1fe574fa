#include "incstab/svg.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "incstab/errors.hpp"

namespace incstab {

PhasePlot::PhasePlot(Box view, int size_px) : view_(std::move(view)), size_(size_px) {
  view_.validate();
  if (view_.dim() < 2) throw DimensionError("phase plot needs at least two state coordinates");
}

double PhasePlot::px(double x) const {
  const double w = view_.hi(0) - view_.lo(0);
  return w > 0 ? (x - view_.lo(0)) / w * size_ : 0.5 * size_;
}

double PhasePlot::py(double y) const {
  const double h = view_.hi(1) - view_.lo(1);
  return h > 0 ? (view_.hi(1) - y) / h * size_ : 0.5 * size_;
}

void PhasePlot::add_box(const Box& b, const std::string& stroke, const std::string& fill) {
  char buf[256];
  const double x0 = px(b.lo(0)), x1 = px(b.hi(0)), y0 = py(b.hi(1)), y1 = py(b.lo(1));
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" stroke=\"%s\" fill=\"%s\" "
                "fill-opacity=\"0.4\"/>",
                x0, y0, x1 - x0, y1 - y0, stroke.c_str(), fill.c_str());
  items_.emplace_back(buf);
}

void PhasePlot::add_trajectory(const Trajectory& tr, const std::string& stroke) {
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
  char buf[64];
  for (const Vec& x : tr.states) {
    if (x.size() < 2) throw DimensionError("phase plot needs at least two state coordinates");
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(x(0)), py(x(1)));
    os << buf;
  }
  os << "\"/>";
  items_.push_back(os.str());
}

std::string PhasePlot::str() const {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_ << "\" height=\"" << size_
     << "\" viewBox=\"0 0 " << size_ << ' ' << size_ << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& s : items_) os << s << '\n';
  os << "</svg>\n";
  return os.str();
}

void PhasePlot::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << str();
}

}  // namespace incstab
