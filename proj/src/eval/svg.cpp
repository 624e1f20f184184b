// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/eval/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace dasm {

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void axes(std::ostringstream& os, const Frame& f, const std::string& xl, const std::string& yl, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << f.py(f.y0)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << kLeft << "\" y2=\"" << kTop << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 5, y = f.y0 + (f.y1 - f.y0) * i / 5;
    os << "<text x=\"" << f.px(x) << "\" y=\"" << f.py(f.y0) + 16 << "\" text-anchor=\"middle\">" << fmt_num(x) << "</text>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">" << fmt_num(y) << "</text>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(y) << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << f.py(y)
       << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(xl) << "</text>\n";
  os << "<text transform=\"translate(18," << kHeight / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape(yl)
     << "</text>\n";
}

}  // namespace

std::string roc_svg(const PsdsResult& result, double e_max, const std::string& title) {
  std::ostringstream os;
  Frame f{0, e_max, 0, 1};
  axes(os, f, "false positives per hour", "effective TPR", title + "  (PSDS " + fmt_num(result.score) + ")");
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < result.curve_efpr.size(); ++i) {
    const double x0 = result.curve_efpr[i];
    const double x1 = i + 1 < result.curve_efpr.size() ? result.curve_efpr[i + 1] : e_max;
    const double y = result.curve_tpr[i];
    os << f.px(x0) << "," << f.py(y) << " " << f.px(x1) << "," << f.py(y) << " ";
  }
  os << "\"/>\n</svg>\n";
  return os.str();
}

std::string line_chart_svg(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& x_label,
                           const std::string& y_label, const std::string& title) {
  std::ostringstream os;
  double x0 = 0, x1 = 1, y1 = 1;
  if (!xs.empty()) {
    x0 = std::min(0.0, *std::min_element(xs.begin(), xs.end()));
    x1 = std::max(x0 + 1e-9, *std::max_element(xs.begin(), xs.end()));
  }
  if (!ys.empty()) y1 = std::max(1e-9, *std::max_element(ys.begin(), ys.end()) * 1.1);
  Frame f{x0, x1, 0, y1};
  axes(os, f, x_label, y_label, title);
  os << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) os << f.px(xs[i]) << "," << f.py(ys[i]) << " ";
  os << "\"/>\n";
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    os << "<circle cx=\"" << f.px(xs[i]) << "\" cy=\"" << f.py(ys[i]) << "\" r=\"3.5\" fill=\"#d62728\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string timeline_svg(const std::string& clip_id, double seconds, const EventRoster& references,
                         const EventRoster& detections) {
  std::set<std::string> names;
  for (const auto* r : {&references, &detections}) {
    for (const auto& e : *r) {
      if (e.clip_id == clip_id) names.insert(e.class_id);
    }
  }
  const std::vector<std::string> lanes(names.begin(), names.end());
  const double lane_h = 22, left = 130, width = 640;
  const double height = 60 + lane_h * std::max<std::size_t>(lanes.size(), 1);
  auto px = [&](double t) { return left + t / seconds * (width - left - 20); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" << escape(clip_id) << "</text>\n";
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const double y = 35 + i * lane_h;
    os << "<text x=\"" << left - 6 << "\" y=\"" << y + 14 << "\" text-anchor=\"end\">" << escape(lanes[i]) << "</text>\n";
    for (const auto& e : detections) {
      if (e.clip_id != clip_id || e.class_id != lanes[i]) continue;
      os << "<rect x=\"" << px(e.onset) << "\" y=\"" << y + 3 << "\" width=\"" << px(e.offset) - px(e.onset)
         << "\" height=\"" << lane_h - 6 << "\" fill=\"#ff7f0e\" fill-opacity=\"0.6\"/>\n";
    }
    for (const auto& e : references) {
      if (e.clip_id != clip_id || e.class_id != lanes[i]) continue;
      os << "<rect x=\"" << px(e.onset) << "\" y=\"" << y + 1 << "\" width=\"" << px(e.offset) - px(e.onset)
         << "\" height=\"" << lane_h - 2 << "\" fill=\"none\" stroke=\"black\"/>\n";
    }
  }
  const double axis_y = 40 + lane_h * lanes.size();
  os << "<line x1=\"" << left << "\" y1=\"" << axis_y << "\" x2=\"" << px(seconds) << "\" y2=\"" << axis_y
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = seconds * i / 4;
    os << "<text x=\"" << px(t) << "\" y=\"" << axis_y + 14 << "\" text-anchor=\"middle\">" << fmt_num(t) << " s</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dasm
