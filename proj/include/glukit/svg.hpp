// SPDX-License-Identifier: Apache-2.0
//
// Static SVG plots, no external plotting dependency.
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "glukit/construct.hpp"
#include "glukit/models.hpp"

namespace glukit::svg {

struct Series {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
    std::string color = "#1f77b4";
    // Fitted power law drawn as a line: (slope, intercept) in log10 space.
    std::optional<std::pair<double, double>> fit;
};

/// Log-log scatter with decade gridlines, one fitted line and a slope
/// annotation per series.
std::string loglog_plot(const std::vector<Series>& series, const std::string& title,
                        const std::string& x_label, const std::string& y_label);

/// 1D model view: target curve, model curve, knot verticals, per-neuron
/// contribution traces.
std::string model_view_1d(const ModelParams& params, const TargetFunction* target, double lo,
                          double hi, int samples = 600);

/// 2D model view: heatmap of the scalar output plus hinge segments.
std::string model_view_2d(const ModelParams& params, const std::array<double, 4>& box,
                          int grid = 64);

void write_file(const std::string& path, const std::string& content);

}  // namespace glukit::svg
