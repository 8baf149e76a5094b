#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hindsight/harness.hpp"

namespace hindsight {

struct Curve {
  std::vector<double> x, y;
};

// Mean and standard error of the mean across runs on one step grid.
struct Band {
  std::string label;
  std::vector<double> x, mean, stderr_mean;
  std::size_t runs = 0;
};

// Linear interpolation; x must be increasing and `at` inside its range.
double interpolate(const Curve& c, double at);

// Union of all x values inside the range every curve covers.
std::vector<double> common_grid(std::span<const Curve> curves);

// Curves on differing grids are resampled onto common_grid first. A single
// curve gets zero error.
Band aggregate(std::string label, std::span<const Curve> curves);

// Trapezoid area under y normalized by the x extent.
double normalized_auc(const Curve& c);

std::string render_svg(const std::string& title, const std::string& y_label, std::span<const Band> bands);

// Groups runs by (mode, method, strategy, representation) read from the
// config.txt next to each CSV; runs without one form their own group.
// Writes success_<mode>.svg and, where HIPSS accuracy exists,
// hipss_accuracy_<mode>.svg. Returns the written paths.
std::vector<std::filesystem::path> plot_metrics(std::span<const std::filesystem::path> csvs,
                                                const std::filesystem::path& out_dir);

}  // namespace hindsight
