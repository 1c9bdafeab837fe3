#pragma once

// Minimal SVG output: line traces and bar histograms.

#include <string>
#include <vector>

#include "idc/diagnostics.hpp"

namespace idc::svg {

struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::string colour = "#1f77b4";
    bool step = false;  // draw as a staircase
};

std::string line_plot(const std::string& title, const std::vector<Series>& series, double width = 900,
                      double height = 360);
std::string bar_plot(const std::string& title, const diagnostics::Histogram& h, double width = 600,
                     double height = 360);

}  // namespace idc::svg
