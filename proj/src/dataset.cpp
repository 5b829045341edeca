#include "flf/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "flf/rng.hpp"

namespace flf {

namespace {

std::vector<double> draw_mean(Rng& rng, const SyntheticSpec& spec) {
  std::vector<double> mu(spec.input_dim());
  for (auto& v : mu) {
    const bool lit = spec.density >= 1.0 || rng.uniform01() < spec.density;
    v = lit ? rng.uniform(spec.mean_lo, spec.mean_hi) : 0.0;
  }
  return mu;
}

Example draw(Rng& rng, const std::vector<double>& mu, double noise, std::uint32_t label) {
  Example ex;
  ex.label = label;
  ex.input.resize(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j)
    ex.input[j] = std::clamp(mu[j] + noise * rng.normal(), 0.0, 1.0);
  return ex;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.grid_h == 0 || spec.grid_w == 0) throw std::invalid_argument("dataset: empty grid");
  if (spec.num_classes < 2) throw std::invalid_argument("dataset: need at least 2 classes");
  if (!(spec.mean_lo <= spec.mean_hi)) throw std::invalid_argument("dataset: mean_lo > mean_hi");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) throw std::invalid_argument("dataset: density must lie in (0, 1]");

  Rng rng(derive_seed(spec.seed, Stream::kDataset));
  std::vector<std::vector<double>> means;
  for (std::size_t c = 0; c < spec.num_classes; ++c) means.push_back(draw_mean(rng, spec));

  Dataset ds;
  ds.grid_h = spec.grid_h;
  ds.grid_w = spec.grid_w;
  ds.num_classes = spec.num_classes;
  const auto fill = [&](std::vector<Example>& out, std::size_t n) {
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = static_cast<std::uint32_t>(i % spec.num_classes);
      out.push_back(draw(rng, means[label], spec.noise, label));
    }
  };
  fill(ds.train, spec.n_train);
  fill(ds.test, spec.n_test);

  Rng edge_rng(derive_seed(spec.seed, Stream::kEdgeSet));
  const auto edge_mean = draw_mean(edge_rng, spec);
  const auto edge_label = static_cast<std::uint32_t>(spec.num_classes);
  for (std::size_t i = 0; i < spec.n_edge_train; ++i)
    ds.edge_train.push_back(draw(edge_rng, edge_mean, spec.noise, edge_label));
  for (std::size_t i = 0; i < spec.n_edge_test; ++i)
    ds.edge_test.push_back(draw(edge_rng, edge_mean, spec.noise, edge_label));
  return ds;
}

void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples,
                    std::size_t input_dim, std::size_t num_classes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << input_dim << ' ' << num_classes << ' ' << examples.size() << '\n';
  char buf[32];
  for (const auto& ex : examples) {
    if (ex.input.size() != input_dim) throw DimensionError("write_examples: inconsistent input dimension");
    for (double v : ex.input) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ' ';
    }
    out << ex.label << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ExampleFile read_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ExampleFile file;
  std::size_t count = 0;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  {
    std::istringstream hs(line);
    if (!(hs >> file.input_dim >> file.num_classes >> count) || file.input_dim == 0)
      throw std::runtime_error(path.string() + ":1: malformed header, expected \"d C count\"");
  }
  file.examples.reserve(count);
  while (file.examples.size() < count) {
    ++line_no;
    if (!std::getline(in, line))
      throw std::runtime_error(path.string() + ": expected " + std::to_string(count) +
                               " rows, found " + std::to_string(file.examples.size()));
    std::istringstream ls(line);
    Example ex;
    ex.input.resize(file.input_dim);
    for (auto& v : ex.input)
      if (!(ls >> v)) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": too few values");
    long long label = -1;
    if (!(ls >> label) || label < 0 || static_cast<std::size_t>(label) > file.num_classes)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad label");
    std::string rest;
    if (ls >> rest) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": trailing data");
    ex.label = static_cast<std::uint32_t>(label);
    file.examples.push_back(std::move(ex));
  }
  return file;
}

std::vector<std::size_t> label_histogram(const std::vector<Example>& data, std::size_t num_classes) {
  std::vector<std::size_t> h(num_classes, 0);
  for (const auto& ex : data)
    if (ex.label < num_classes) ++h[ex.label];
  return h;
}

}  // namespace flf
