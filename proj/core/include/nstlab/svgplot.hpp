#pragma once

#include <filesystem>

namespace nst {

/// Renders an aggregate results CSV as a standalone SVG 1.1 document: one
/// polyline per method over the n_labeled axis with a translucent band of
/// +/- one standard deviation, labeled axes and a legend. Errors are drawn
/// as percent.
void plot_curves(const std::filesystem::path& aggregate_csv, const std::filesystem::path& out_svg);

}  // namespace nst
