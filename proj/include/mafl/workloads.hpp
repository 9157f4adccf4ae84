#pragma once

// Desk-scale learning tasks with analytic gradients and the Gamma/Dirichlet
// non-i.i.d. partitioner.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mafl/rng.hpp"
#include "mafl/sparsify.hpp"

namespace mafl::workloads {

struct Dataset {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;  // row-major, size() x dim
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
  void push(std::span<const double> f, int label);
  Dataset subset(std::span<const std::size_t> rows) const;
  // Per-class sample frequency, sums to 1.
  std::vector<double> class_distribution() const;
  void validate() const;
};

enum class ModelKind { kQuadratic, kLogistic, kMlp };

ModelKind parse_model_kind(const std::string& s);
std::string to_string(ModelKind k);

// quadratic: f(w, d) = 0.5 ||w - a_d||^2, s = dim, L = 1.
// logistic:  multinomial regression, weights (classes x dim) then biases.
// mlp:       tanh hidden layer; W1 (hidden x dim), b1, W2 (classes x hidden), b2.
struct ModelSpec {
  ModelKind kind = ModelKind::kLogistic;
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::size_t hidden = 0;
};

std::size_t parameter_count(const ModelSpec& spec);

// Zeros, except the mlp which needs symmetry-breaking weights.
Vector init_parameters(const ModelSpec& spec, Engine& rng);

// Mean per-sample loss. Throws DimensionError on mismatch or empty data.
double loss(const ModelSpec& spec, std::span<const double> w, const Dataset& data);

// Analytic mean gradient.
Vector grad(const ModelSpec& spec, std::span<const double> w, const Dataset& batch);

// Fraction classified correctly (logistic and mlp only).
double accuracy(const ModelSpec& spec, std::span<const double> w, const Dataset& data);

// Minimiser of the quadratic task over `data` (the feature mean).
Vector quadratic_optimum(const Dataset& data);

struct ClusterSpec {
  std::size_t classes = 10;
  std::size_t dim = 20;
  std::size_t samples = 2000;
  double separation = 1.0;  // std-dev of each class-mean coordinate
  double noise = 1.0;       // per-coordinate sample noise
};

// Gaussian class clusters; class means are drawn from `means_rng` so train and
// held-out sets can share them while drawing independent samples.
Dataset make_gaussian_clusters(const ClusterSpec& spec, Engine& means_rng, Engine& sample_rng);

struct PartitionSpec {
  double rho = 1.0;
  std::size_t devices = 1;
  std::vector<double> class_prior;  // empty: use the data's class distribution
};

struct Partition {
  std::vector<Dataset> shards;
  std::vector<std::vector<std::size_t>> rows;         // source rows per device
  std::vector<std::vector<double>> proportions;       // drawn class mix Z per device
  std::vector<std::string> warnings;                  // quota rebalancing notes
};

// Every sample lands on exactly one device; quotas differ by at most one.
Partition dirichlet_partition(const Dataset& data, const PartitionSpec& spec, Engine& rng);

// Without replacement when batch_size <= |data|, with replacement otherwise.
Dataset sample_batch(const Dataset& data, std::size_t batch_size, Engine& rng);

// Feature columns followed by an integer label column. A non-numeric first
// line is treated as a header.
Dataset load_csv(const std::string& path);

}  // namespace mafl::workloads
