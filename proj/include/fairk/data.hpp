#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairk/task.hpp"

namespace fairk {

// Gaussian class clusters for the classification tasks. Class means sit on
// a scaled random direction; per-class feature scale grows with the class
// index (scale_tilt) so class composition shows up in local curvature.
Dataset make_class_blobs(std::size_t classes, std::size_t features,
                         std::size_t per_class, double mean_radius,
                         double noise_sigma, double scale_tilt,
                         std::uint64_t seed);

// Linear-model regression data y = x . w_true + noise for the quadratic task.
Dataset make_regression_data(std::size_t samples, std::size_t features,
                             double noise_sigma, std::uint64_t seed);

// Class-wise Dirichlet split: per class, client shares are drawn from
// Dirichlet(alpha * 1_N) and that class's rows are dealt out by quota.
// Draws leaving any client empty are redone, up to 100 attempts.
std::vector<std::vector<std::size_t>> dirichlet_partition(
    const std::vector<double>& labels, std::size_t clients, double alpha,
    std::uint64_t seed);

// IDX image/label container (the classic big-endian header format).
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CSV with one sample per line: feature columns followed by a final label
// column. No header handling beyond skipping a first non-numeric line.
Dataset load_csv(const std::string& path);

}  // namespace fairk
