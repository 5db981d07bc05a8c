#pragma once

#include <string>
#include <vector>

#include "fxlab/metrics.hpp"
#include "fxlab/types.hpp"

namespace fxlab {

// Fixed-precision decimal used in every CSV cell, so reruns are
// byte-identical.
std::string format_real(double v);

struct MetricRow {
  std::string run_id;
  std::string method;
  MetricReport metrics;
};

// Header: run_id,method,AS,A-ESR@<tau>...
std::string metrics_csv(const std::vector<MetricRow>& rows, const std::vector<double>& taus);

struct CliqueRow {
  std::string method;
  double phi_star = 0.0;
  int size = 0;
  int centroid_index = 0;
  bool truncated = false;
};

std::string cliques_csv(const std::vector<CliqueRow>& rows);

// Scatter of the first two coordinates: samples (grey), extracted points
// (blue), targets (red crosses).
std::string scatter_svg(const std::string& title, const Matrix& targets,
                        const Matrix& samples, const Matrix& extracted);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<Series>& series);

// Minimal CSV reader for files this library wrote (no quoting).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace fxlab
