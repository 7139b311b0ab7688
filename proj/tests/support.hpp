#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "al/core.hpp"

namespace testing {

/// Gaussian blobs, one per class, centred on the corners of a simplex-like
/// layout and clamped to [0, 1].
inline al::Dataset blobs(int classes, int per_class, std::size_t dim, double spread,
                         std::uint64_t seed, std::string name = "blobs") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<float> features;
  std::vector<int> labels;
  for (int i = 0; i < per_class; ++i) {
    for (int c = 0; c < classes; ++c) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double centre = (static_cast<int>(d) % classes == c) ? 0.8 : 0.2;
        features.push_back(static_cast<float>(std::clamp(centre + noise(rng), 0.0, 1.0)));
      }
      labels.push_back(c);
    }
  }
  return al::Dataset(std::move(name), dim, std::move(features), std::move(labels), classes);
}

/// Dataset whose rows are the given points.
inline al::Dataset from_points(const std::vector<std::vector<float>>& points,
                               std::vector<int> labels, int classes) {
  std::vector<float> features;
  for (const auto& p : points) features.insert(features.end(), p.begin(), p.end());
  return al::Dataset("points", points.front().size(), std::move(features), std::move(labels),
                     classes);
}

inline std::vector<al::SampleId> ids(std::initializer_list<std::uint32_t> values) {
  std::vector<al::SampleId> out;
  for (auto v : values) out.push_back(al::SampleId{v});
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("al_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
