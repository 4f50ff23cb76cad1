#include "pairscale/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <set>

#include "pairscale/errors.hpp"
#include "pairscale/io.hpp"

namespace pairscale::svg {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 64;
constexpr double kRight = 24;
constexpr double kTop = 40;
constexpr double kBottom = 56;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;
constexpr int kGridPoints = 201;

const std::vector<std::string> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                        "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  double to_x(double v) const { return kLeft + (v - lo) / (hi - lo) * kPlotW; }
  double to_y(double v) const { return kTop + kPlotH - (v - lo) / (hi - lo) * kPlotH; }
};

Axis padded_axis(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string header(const std::string& title) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(kWidth, 0) + "\" height=\"" +
       fixed(kHeight, 0) + "\" viewBox=\"0 0 " + fixed(kWidth, 0) + " " + fixed(kHeight, 0) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<title>" + escape_xml(title) + "</title>\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + fixed(kWidth, 0) + "\" height=\"" + fixed(kHeight, 0) +
       "\" fill=\"white\"/>\n";
  s += "<text x=\"" + fixed(kWidth / 2, 1) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
       escape_xml(title) + "</text>\n";
  return s;
}

std::string frame(const Axis& x, const Axis& y, const std::string& x_label,
                  const std::string& y_label, int x_decimals, int y_decimals, bool x_ticks = true) {
  std::string s;
  s += "<rect x=\"" + fixed(kLeft, 1) + "\" y=\"" + fixed(kTop, 1) + "\" width=\"" +
       fixed(kPlotW, 1) + "\" height=\"" + fixed(kPlotH, 1) +
       "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x.lo + (x.hi - x.lo) * i / 4.0;
    const double px = x.to_x(xv);
    if (x_ticks) {
      s += "<line x1=\"" + fixed(px, 2) + "\" y1=\"" + fixed(kTop + kPlotH, 2) + "\" x2=\"" +
           fixed(px, 2) + "\" y2=\"" + fixed(kTop + kPlotH + 5, 2) + "\" stroke=\"#333\"/>\n";
      s += "<text x=\"" + fixed(px, 2) + "\" y=\"" + fixed(kTop + kPlotH + 18, 2) +
           "\" text-anchor=\"middle\">" + fixed(xv, x_decimals) + "</text>\n";
    }
    const double yv = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = y.to_y(yv);
    s += "<line x1=\"" + fixed(kLeft - 5, 2) + "\" y1=\"" + fixed(py, 2) + "\" x2=\"" +
         fixed(kLeft, 2) + "\" y2=\"" + fixed(py, 2) + "\" stroke=\"#333\"/>\n";
    s += "<text x=\"" + fixed(kLeft - 8, 2) + "\" y=\"" + fixed(py + 4, 2) +
         "\" text-anchor=\"end\">" + fixed(yv, y_decimals) + "</text>\n";
  }
  s += "<text x=\"" + fixed(kLeft + kPlotW / 2, 1) + "\" y=\"" + fixed(kHeight - 14, 1) +
       "\" text-anchor=\"middle\">" + escape_xml(x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + fixed(kTop + kPlotH / 2, 1) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fixed(kTop + kPlotH / 2, 1) + ")\">" + escape_xml(y_label) + "</text>\n";
  return s;
}

std::string legend(const std::map<std::string, std::string>& colors) {
  std::string s;
  double y = kTop + 12;
  for (const auto& [label, color] : colors) {
    s += "<rect x=\"" + fixed(kLeft + kPlotW - 90, 1) + "\" y=\"" + fixed(y - 9, 1) +
         "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    s += "<text x=\"" + fixed(kLeft + kPlotW - 75, 1) + "\" y=\"" + fixed(y, 1) + "\">" +
         escape_xml(label) + "</text>\n";
    y += 16;
  }
  return s;
}

double quantile(std::vector<double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string fixed(double value, int decimals) {
  if (!std::isfinite(value)) throw DomainError("svg: non-finite coordinate");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::map<std::string, std::string> group_colors(const std::vector<std::string>& labels) {
  std::set<std::string> sorted(labels.begin(), labels.end());
  std::map<std::string, std::string> out;
  std::size_t i = 0;
  for (const auto& label : sorted) out[label] = kPalette[i++ % kPalette.size()];
  return out;
}

double silverman_bandwidth(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 2) return kFallbackBandwidth;
  const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0)) return kFallbackBandwidth;
  return kSilvermanFactor * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> kde(std::span<const double> sample, double bandwidth,
                        std::span<const double> grid) {
  if (!(bandwidth > 0)) throw DomainError("kde bandwidth must be positive");
  std::vector<double> out(grid.size(), 0.0);
  if (sample.empty()) return out;
  const double norm = 1.0 / (static_cast<double>(sample.size()) * bandwidth *
                             std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double v : sample) {
      const double z = (grid[g] - v) / bandwidth;
      s += std::exp(-0.5 * z * z);
    }
    out[g] = s * norm;
  }
  return out;
}

std::string density_plot(const std::map<std::string, std::vector<std::pair<std::string, double>>>& groups,
                         const std::string& title, const std::string& x_label) {
  std::vector<double> grid(kGridPoints);
  for (int i = 0; i < kGridPoints; ++i) grid[i] = static_cast<double>(i) / (kGridPoints - 1);

  std::vector<std::string> labels;
  std::map<std::string, std::vector<double>> curves;
  double peak = 0.0;
  for (const auto& [label, members] : groups) {
    labels.push_back(label);
    std::vector<double> values;
    for (const auto& m : members) values.push_back(m.second);
    auto curve = kde(values, silverman_bandwidth(values), grid);
    for (double d : curve) peak = std::max(peak, d);
    curves[label] = std::move(curve);
  }
  const auto colors = group_colors(labels);
  const Axis x{0.0, 1.0};
  const Axis y{0.0, peak > 0 ? peak * 1.1 : 1.0};

  std::string s = header(title);
  s += frame(x, y, x_label, "density", 2, 2);
  for (const auto& [label, members] : groups) {
    const auto& color = colors.at(label);
    const auto& curve = curves.at(label);
    s += "<g class=\"group\" data-group=\"" + escape_xml(label) + "\">\n";
    s += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < grid.size(); ++i)
      s += (i ? " " : "") + fixed(x.to_x(grid[i]), 2) + "," + fixed(y.to_y(curve[i]), 2);
    s += "\"/>\n";
    for (const auto& [id, v] : members) {
      const double px = x.to_x(v);
      s += "<line x1=\"" + fixed(px, 2) + "\" y1=\"" + fixed(kTop + kPlotH, 2) + "\" x2=\"" +
           fixed(px, 2) + "\" y2=\"" + fixed(kTop + kPlotH - 8, 2) + "\" stroke=\"" + color +
           "\" stroke-opacity=\"0.6\"><title>" + escape_xml(id) + " (" + escape_xml(label) +
           "): " + io::format_double(v) + "</title></line>\n";
    }
    s += "</g>\n";
  }
  s += legend(colors);
  s += "</svg>\n";
  return s;
}

std::string scatter_plot(const std::vector<Point>& points, const std::string& title,
                         const std::string& x_label, const std::string& y_label) {
  if (points.empty()) throw DomainError("scatter plot has no points");
  double xlo = points[0].x, xhi = xlo, ylo = points[0].y, yhi = ylo;
  std::vector<std::string> labels;
  for (const auto& p : points) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    ylo = std::min(ylo, p.y);
    yhi = std::max(yhi, p.y);
    labels.push_back(p.group);
  }
  const auto colors = group_colors(labels);
  const Axis x = padded_axis(xlo, xhi);
  const Axis y = padded_axis(ylo, yhi);

  std::string s = header(title);
  s += frame(x, y, x_label, y_label, 2, 2);
  for (const auto& p : points) {
    s += "<circle cx=\"" + fixed(x.to_x(p.x), 3) + "\" cy=\"" + fixed(y.to_y(p.y), 3) +
         "\" r=\"4\" fill=\"" + colors.at(p.group) + "\" fill-opacity=\"0.75\" data-x=\"" +
         io::format_double(p.x) + "\" data-y=\"" + io::format_double(p.y) + "\"><title>" +
         escape_xml(p.id) + " (" + escape_xml(p.group) + "): " + io::format_double(p.x) + ", " +
         io::format_double(p.y) + "</title></circle>\n";
  }
  s += legend(colors);
  s += "</svg>\n";
  return s;
}

std::string bar_chart(const std::vector<BarGroup>& groups, const std::string& title,
                      const std::string& y_label) {
  if (groups.empty()) throw DomainError("bar chart has no groups");
  std::vector<std::string> series;
  for (const auto& g : groups)
    for (const auto& b : g.bars)
      if (std::find(series.begin(), series.end(), b.label) == series.end()) series.push_back(b.label);
  std::map<std::string, std::string> colors;
  for (std::size_t i = 0; i < series.size(); ++i) colors[series[i]] = kPalette[i % kPalette.size()];

  const Axis y{0.0, 1.0};
  std::string s = header(title);
  s += frame(Axis{0.0, 1.0}, y, "", y_label, 2, 2, false);
  const double slot = kPlotW / static_cast<double>(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const double x0 = kLeft + slot * static_cast<double>(gi);
    const double bw = slot * 0.8 / static_cast<double>(std::max<std::size_t>(g.bars.size(), 1));
    s += "<g class=\"bar-group\" data-group=\"" + escape_xml(g.label) + "\">\n";
    for (std::size_t bi = 0; bi < g.bars.size(); ++bi) {
      const auto& b = g.bars[bi];
      const double v = std::clamp(b.value, 0.0, 1.0);
      const double top = y.to_y(v);
      s += "<rect x=\"" + fixed(x0 + slot * 0.1 + bw * static_cast<double>(bi), 3) + "\" y=\"" +
           fixed(top, 3) + "\" width=\"" + fixed(bw, 3) + "\" height=\"" +
           fixed(kTop + kPlotH - top, 3) + "\" fill=\"" + colors.at(b.label) +
           "\" data-series=\"" + escape_xml(b.label) + "\" data-value=\"" +
           io::format_double(b.value) + "\"><title>" + escape_xml(g.label) + " / " +
           escape_xml(b.label) + ": " + io::format_double(b.value) + "</title></rect>\n";
    }
    s += "<text x=\"" + fixed(x0 + slot / 2, 2) + "\" y=\"" + fixed(kTop + kPlotH + 34, 2) +
         "\" text-anchor=\"middle\">" + escape_xml(g.label) + "</text>\n";
    s += "</g>\n";
  }
  s += legend(colors);
  s += "</svg>\n";
  return s;
}

}  // namespace pairscale::svg
