#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pairscale::svg {

// Silverman's rule: h = 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
inline constexpr double kSilvermanFactor = 0.9;
// Used when the sample has fewer than two points or no spread.
inline constexpr double kFallbackBandwidth = 0.05;

double silverman_bandwidth(std::span<const double> sample);

// Gaussian kernel density estimate evaluated at `grid`.
std::vector<double> kde(std::span<const double> sample, double bandwidth,
                        std::span<const double> grid);

// Fixed-point decimal text; -0 prints as 0.
std::string fixed(double value, int decimals);

std::string escape_xml(const std::string& text);

// Fixed palette, assigned in sorted label order.
std::map<std::string, std::string> group_colors(const std::vector<std::string>& labels);

struct Point {
  std::string id;
  std::string group;
  double x = 0.0;
  double y = 0.0;
};

struct Bar {
  std::string label;
  double value = 0.0;
};

struct BarGroup {
  std::string label;
  std::vector<Bar> bars;
};

// Per-group density curves over [0, 1]; each sample point is drawn as a rug
// tick carrying a <title> with its id and value.
std::string density_plot(const std::map<std::string, std::vector<std::pair<std::string, double>>>& groups,
                         const std::string& title, const std::string& x_label);

std::string scatter_plot(const std::vector<Point>& points, const std::string& title,
                         const std::string& x_label, const std::string& y_label);

// Bars on a fixed [0, 1] axis; each rect carries data-value with the exact
// value it was drawn from.
std::string bar_chart(const std::vector<BarGroup>& groups, const std::string& title,
                      const std::string& y_label);

}  // namespace pairscale::svg
