#pragma once

#include <string>
#include <vector>

#include "thermosleep/projection.hpp"
#include "thermosleep/response_models.hpp"

namespace thermosleep {

// Standalone deterministic SVG output: fixed canvas, shortest round-trip
// number formatting, no timestamps, no external resources. Byte-stable for
// golden-file comparison.

namespace svg_detail {

struct Canvas {
  std::string body;
  double width = 820.0;
  double height = 520.0;

  void line(double x1, double y1, double x2, double y2, const std::string& style) {
    body += "<line x1=\"" + fmt_double(x1) + "\" y1=\"" + fmt_double(y1) + "\" x2=\"" +
            fmt_double(x2) + "\" y2=\"" + fmt_double(y2) + "\" style=\"" + style + "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& style) {
    body += "<rect x=\"" + fmt_double(x) + "\" y=\"" + fmt_double(y) + "\" width=\"" +
            fmt_double(w) + "\" height=\"" + fmt_double(h) + "\" style=\"" + style + "\"/>\n";
  }
  void circle(double cx, double cy, double r, const std::string& style) {
    body += "<circle cx=\"" + fmt_double(cx) + "\" cy=\"" + fmt_double(cy) + "\" r=\"" +
            fmt_double(r) + "\" style=\"" + style + "\"/>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& style) {
    body += "<polygon points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) body += " ";
      body += fmt_double(pts[i].first) + "," + fmt_double(pts[i].second);
    }
    body += "\" style=\"" + style + "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& style) {
    body += "<text x=\"" + fmt_double(x) + "\" y=\"" + fmt_double(y) + "\" style=\"" + style +
            "\">" + s + "</text>\n";
  }
  std::string finish() const {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
           "width=\"" +
           fmt_double(width) + "\" height=\"" + fmt_double(height) + "\" viewBox=\"0 0 " +
           fmt_double(width) + " " + fmt_double(height) + "\">\n" + body + "</svg>\n";
  }
};

inline std::string tick_label(double v) {
  // Short stable tick text.
  if (v == static_cast<long long>(v) && std::abs(v) < 1e9)
    return fmt_int(static_cast<long long>(v));
  return fmt_double(v);
}

// Five-stop dark-purple-to-yellow ramp for loss maps.
inline std::string ramp_color(double t) {
  static constexpr double kStops[5][3] = {{68, 1, 84},   {59, 82, 139}, {33, 145, 140},
                                          {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * 4.0;
  const int lo = std::min(3, static_cast<int>(pos));
  const double f = pos - lo;
  const long r = std::lround(kStops[lo][0] + f * (kStops[lo + 1][0] - kStops[lo][0]));
  const long g = std::lround(kStops[lo][1] + f * (kStops[lo + 1][1] - kStops[lo][1]));
  const long b = std::lround(kStops[lo][2] + f * (kStops[lo + 1][2] - kStops[lo][2]));
  return "rgb(" + std::to_string(r) + "," + std::to_string(g) + "," + std::to_string(b) + ")";
}

}  // namespace svg_detail

// Dose-response curve: coefficient points with 95% CI band and whiskers, a
// dashed zero reference, and the observation histogram along the bottom.
inline std::string render_curve_svg(const ResponseCurve& curve, const std::string& title = "") {
  if (curve.points.empty()) throw ValidationError("render_curve_svg: empty curve");
  svg_detail::Canvas c;
  const double left = 70, right = c.width - 25, top = 40, bottom = c.height - 110;
  const double hist_top = c.height - 95, hist_bottom = c.height - 35;

  // Bin midpoints; open-ended bins sit one half-width beyond the edge.
  std::vector<double> mids(curve.points.size());
  double width_guess = 5.0;
  for (const CurvePoint& p : curve.points)
    if (std::isfinite(p.lo) && std::isfinite(p.hi)) {
      width_guess = p.hi - p.lo;
      break;
    }
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const CurvePoint& p = curve.points[i];
    if (std::isfinite(p.lo) && std::isfinite(p.hi))
      mids[i] = (p.lo + p.hi) / 2.0;
    else if (std::isfinite(p.hi))
      mids[i] = p.hi - width_guess / 2.0;
    else
      mids[i] = p.lo + width_guess / 2.0;
  }
  double x_lo = mids.front() - width_guess, x_hi = mids.back() + width_guess;
  double y_lo = 0.0, y_hi = 0.0;
  std::size_t max_n = 1;
  for (const CurvePoint& p : curve.points) {
    if (p.coef) {
      y_lo = std::min({y_lo, p.ci_lo, *p.coef});
      y_hi = std::max({y_hi, p.ci_hi, *p.coef});
    }
    max_n = std::max(max_n, p.n_obs);
  }
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.08 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  auto X = [&](double v) { return left + (v - x_lo) / (x_hi - x_lo) * (right - left); };
  auto Y = [&](double v) { return bottom - (v - y_lo) / (y_hi - y_lo) * (bottom - top); };

  c.rect(0, 0, c.width, c.height, "fill:white");
  if (!title.empty()) c.text(left, 24, title, "font-family:sans-serif;font-size:15px;fill:#222");

  // CI band across consecutive estimated points.
  std::vector<std::pair<double, double>> band_hi, band_lo;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (!curve.points[i].coef) continue;
    band_hi.emplace_back(X(mids[i]), Y(curve.points[i].reference ? 0.0 : curve.points[i].ci_hi));
    band_lo.emplace_back(X(mids[i]), Y(curve.points[i].reference ? 0.0 : curve.points[i].ci_lo));
  }
  if (band_hi.size() >= 2) {
    std::vector<std::pair<double, double>> poly = band_hi;
    poly.insert(poly.end(), band_lo.rbegin(), band_lo.rend());
    c.polygon(poly, "fill:#4878a8;fill-opacity:0.18;stroke:none");
  }

  // Axes and ticks.
  c.line(left, top, left, bottom, "stroke:#333;stroke-width:1");
  c.line(left, bottom, right, bottom, "stroke:#333;stroke-width:1");
  c.line(left, Y(0.0), right, Y(0.0), "stroke:#888;stroke-width:1;stroke-dasharray:4 3");
  const int n_ticks = 5;
  for (int t = 0; t <= n_ticks; ++t) {
    const double yv = y_lo + (y_hi - y_lo) * t / n_ticks;
    c.line(left - 4, Y(yv), left, Y(yv), "stroke:#333;stroke-width:1");
    c.text(left - 62, Y(yv) + 4, svg_detail::tick_label(yv),
           "font-family:sans-serif;font-size:11px;fill:#333");
  }
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const CurvePoint& p = curve.points[i];
    const std::string lab = std::isfinite(p.lo)
                                ? (std::isfinite(p.hi) ? svg_detail::tick_label(p.lo) : ">" +
                                                             svg_detail::tick_label(p.lo))
                                : "<" + svg_detail::tick_label(p.hi);
    c.text(X(mids[i]) - 8, bottom + 16, lab, "font-family:sans-serif;font-size:10px;fill:#333");
  }
  c.text((left + right) / 2 - 60, bottom + 32, "bin (lower edge)",
         "font-family:sans-serif;font-size:12px;fill:#333");
  c.text(12, (top + bottom) / 2,
         curve.outcome_units == "probability" ? "probability change" : "minutes change",
         "font-family:sans-serif;font-size:12px;fill:#333;writing-mode:tb");

  // Line, whiskers, points; the reference bin gets a hollow marker at zero.
  std::vector<std::pair<double, double>> path;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const CurvePoint& p = curve.points[i];
    if (!p.coef) continue;
    const double x = X(mids[i]);
    path.emplace_back(x, Y(*p.coef));
    if (!p.reference) {
      c.line(x, Y(p.ci_lo), x, Y(p.ci_hi), "stroke:#2b5f8a;stroke-width:1.4");
      c.circle(x, Y(*p.coef), 3.2, "fill:#2b5f8a;stroke:none");
    } else {
      c.circle(x, Y(0.0), 3.8, "fill:white;stroke:#2b5f8a;stroke-width:1.6");
    }
  }
  for (std::size_t i = 1; i < path.size(); ++i)
    c.line(path[i - 1].first, path[i - 1].second, path[i].first, path[i].second,
           "stroke:#2b5f8a;stroke-width:1.6");

  // Observation histogram.
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const CurvePoint& p = curve.points[i];
    if (p.n_obs == 0) continue;
    const double h = (hist_bottom - hist_top) * static_cast<double>(p.n_obs) /
                     static_cast<double>(max_n);
    const double bw = (right - left) / static_cast<double>(curve.points.size()) * 0.7;
    c.rect(X(mids[i]) - bw / 2, hist_bottom - h, bw, h, "fill:#b7c8d8;stroke:none");
  }
  c.text(left, hist_bottom + 14, "observations per bin",
         "font-family:sans-serif;font-size:11px;fill:#666");
  return c.finish();
}

// Equirectangular loss map: one colored rect per grid cell plus a ramp legend.
struct MapCell {
  double lat = 0.0, lon = 0.0, value = 0.0;
};

inline std::string render_loss_map_svg(const std::vector<MapCell>& cells,
                                       const std::string& title = "") {
  if (cells.empty()) throw ValidationError("render_loss_map_svg: empty grid");
  svg_detail::Canvas c;
  const double left = 50, right = c.width - 110, top = 40, bottom = c.height - 40;
  double vmin = cells.front().value, vmax = cells.front().value;
  std::set<double> lats, lons;
  for (const MapCell& cell : cells) {
    vmin = std::min(vmin, cell.value);
    vmax = std::max(vmax, cell.value);
    lats.insert(cell.lat);
    lons.insert(cell.lon);
  }
  if (vmax == vmin) vmax = vmin + 1.0;
  auto step = [](const std::set<double>& s) {
    if (s.size() < 2) return 5.0;
    double m = std::numeric_limits<double>::infinity();
    double prev = *s.begin();
    for (auto it = std::next(s.begin()); it != s.end(); ++it) {
      m = std::min(m, *it - prev);
      prev = *it;
    }
    return m;
  };
  const double dlat = step(lats), dlon = step(lons);
  const double lat_lo = *lats.begin() - dlat / 2, lat_hi = *lats.rbegin() + dlat / 2;
  const double lon_lo = *lons.begin() - dlon / 2, lon_hi = *lons.rbegin() + dlon / 2;
  auto X = [&](double lon) { return left + (lon - lon_lo) / (lon_hi - lon_lo) * (right - left); };
  auto Y = [&](double lat) { return bottom - (lat - lat_lo) / (lat_hi - lat_lo) * (bottom - top); };

  c.rect(0, 0, c.width, c.height, "fill:white");
  if (!title.empty()) c.text(left, 24, title, "font-family:sans-serif;font-size:15px;fill:#222");
  for (const MapCell& cell : cells) {
    const double t = (cell.value - vmin) / (vmax - vmin);
    c.rect(X(cell.lon - dlon / 2), Y(cell.lat + dlat / 2), X(cell.lon + dlon / 2) - X(cell.lon - dlon / 2),
           Y(cell.lat - dlat / 2) - Y(cell.lat + dlat / 2),
           "fill:" + svg_detail::ramp_color(t) + ";stroke:white;stroke-width:0.4");
  }
  // Legend.
  const double lx = c.width - 90, ly = top, lh = bottom - top;
  for (int i = 0; i < 64; ++i) {
    const double t = 1.0 - static_cast<double>(i) / 63.0;
    c.rect(lx, ly + lh * i / 64.0, 16, lh / 64.0 + 0.5,
           "fill:" + svg_detail::ramp_color(t) + ";stroke:none");
  }
  c.text(lx + 20, ly + 10, svg_detail::tick_label(vmax) + " h",
         "font-family:sans-serif;font-size:11px;fill:#333");
  c.text(lx + 20, ly + lh, svg_detail::tick_label(vmin) + " h",
         "font-family:sans-serif;font-size:11px;fill:#333");
  return c.finish();
}

}  // namespace thermosleep
