#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gosr/gradient.hpp"

namespace gosr {

/// Dimensions ranked by known/unknown mean separation in log space,
/// strongest first. Requires role labels on the table.
std::vector<int> pick_separated_dims(const FeatureTable& table, int count);

/// One known-vs-unknown histogram overlay per requested dimension, feature
/// axis log-scaled, written as PPM rasters "<prefix>_f<dim>.ppm". With no
/// dims given, the two most separated dimensions are chosen. Returns the
/// written paths.
std::vector<std::filesystem::path> plot_gradient_distributions(const FeatureTable& table,
                                                               std::vector<int> dims,
                                                               const std::filesystem::path& prefix);

}  // namespace gosr
