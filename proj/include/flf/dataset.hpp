#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "flf/model.hpp"

namespace flf {

/// Parameters of the synthetic image-like generator: C Gaussian class
/// clusters on an H x W grid, pixel values clipped to [0, 1]. Each pixel of a
/// class mean is lit with probability `density` (intensity uniform on
/// [mean_lo, mean_hi]) and dark (0) otherwise. The edge-case
/// distribution is one extra cluster whose mean is drawn independently of
/// the C class means.
struct SyntheticSpec {
  std::size_t grid_h = 8;
  std::size_t grid_w = 8;
  std::size_t num_classes = 10;
  std::size_t n_train = 10000;
  std::size_t n_test = 2000;
  std::size_t n_edge_train = 100;
  std::size_t n_edge_test = 200;
  double mean_lo = 0.0;
  double mean_hi = 0.6;
  double density = 1.0;
  double noise = 0.3;
  std::uint64_t seed = 1;

  std::size_t input_dim() const { return grid_h * grid_w; }
};

struct Dataset {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t num_classes = 0;
  std::vector<Example> train;
  std::vector<Example> test;
  std::vector<Example> edge_train;  // labels are the source-cluster id (num_classes)
  std::vector<Example> edge_test;

  std::size_t input_dim() const { return grid_h * grid_w; }
};

Dataset generate_synthetic(const SyntheticSpec& spec);

/// Text format: first line "d C count", then one row per example holding d
/// floats followed by the integer label.
void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples,
                    std::size_t input_dim, std::size_t num_classes);

struct ExampleFile {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::vector<Example> examples;
};

/// Throws std::runtime_error with the offending line number on malformed
/// input. Labels may equal num_classes (edge-case provenance marker).
ExampleFile read_examples(const std::filesystem::path& path);

/// Count of each label in [0, num_classes).
std::vector<std::size_t> label_histogram(const std::vector<Example>& data, std::size_t num_classes);

}  // namespace flf
