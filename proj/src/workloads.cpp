#include "mafl/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mafl/error.hpp"
#include "mafl/kernels.hpp"

namespace mafl::workloads {

void Dataset::push(std::span<const double> f, int label) {
  if (f.size() != dim) throw DimensionError("feature length differs from dataset dim");
  features.insert(features.end(), f.begin(), f.end());
  labels.push_back(label);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.dim = dim;
  out.num_classes = num_classes;
  out.features.reserve(rows.size() * dim);
  out.labels.reserve(rows.size());
  for (auto i : rows) out.push(row(i), labels[i]);
  return out;
}

std::vector<double> Dataset::class_distribution() const {
  std::vector<double> p(num_classes, 0.0);
  for (int y : labels) p[static_cast<std::size_t>(y)] += 1.0;
  for (auto& v : p) v /= static_cast<double>(std::max<std::size_t>(1, size()));
  return p;
}

void Dataset::validate() const {
  if (empty()) throw DimensionError("dataset is empty");
  if (features.size() != size() * dim) throw DimensionError("feature buffer size mismatch");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw DimensionError("label outside [0, num_classes)");
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "quadratic") return ModelKind::kQuadratic;
  if (s == "logistic") return ModelKind::kLogistic;
  if (s == "mlp") return ModelKind::kMlp;
  throw ConfigError("task.kind: unknown model kind '" + s + "'");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kQuadratic: return "quadratic";
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kMlp: return "mlp";
  }
  return "?";
}

std::size_t parameter_count(const ModelSpec& m) {
  switch (m.kind) {
    case ModelKind::kQuadratic: return m.dim;
    case ModelKind::kLogistic: return m.classes * (m.dim + 1);
    case ModelKind::kMlp: return m.hidden * (m.dim + 1) + m.classes * (m.hidden + 1);
  }
  return 0;
}

Vector init_parameters(const ModelSpec& m, Engine& rng) {
  Vector w(parameter_count(m), 0.0);
  if (m.kind == ModelKind::kMlp) {
    std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(static_cast<double>(m.dim)));
    std::normal_distribution<double> n2(0.0, 1.0 / std::sqrt(static_cast<double>(m.hidden)));
    const std::size_t w1 = m.hidden * m.dim;
    const std::size_t w2_off = w1 + m.hidden;
    for (std::size_t i = 0; i < w1; ++i) w[i] = n1(rng);
    for (std::size_t i = 0; i < m.classes * m.hidden; ++i) w[w2_off + i] = n2(rng);
  }
  return w;
}

namespace {

void check(const ModelSpec& m, std::span<const double> w, const Dataset& d) {
  if (d.empty()) throw DimensionError("empty batch");
  if (w.size() != parameter_count(m)) throw DimensionError("parameter vector has wrong length");
  if (d.dim != m.dim) throw DimensionError("feature dimension does not match model");
  if (m.kind != ModelKind::kQuadratic && d.num_classes > m.classes)
    throw DimensionError("dataset has more classes than the model");
}

// logits = W a + b for a (classes x dim) weight block followed by biases.
void affine(std::span<const double> weights, std::span<const double> bias,
            std::span<const double> a, std::span<double> out) {
  const std::size_t cols = a.size();
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = kernels::dot(weights.subspan(c * cols, cols), a) + bias[c];
}

// Softmax in place; returns log-sum-exp of the inputs.
double softmax(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return mx + std::log(sum);
}

struct MlpView {
  std::span<const double> w1, b1, w2, b2;
};

MlpView mlp_view(const ModelSpec& m, std::span<const double> w) {
  const std::size_t w1 = m.hidden * m.dim;
  const std::size_t w2 = m.classes * m.hidden;
  return {w.subspan(0, w1), w.subspan(w1, m.hidden), w.subspan(w1 + m.hidden, w2),
          w.subspan(w1 + m.hidden + w2, m.classes)};
}

// Fills hidden activations and raw logits.
void logits(const ModelSpec& m, std::span<const double> w, std::span<const double> a,
            std::vector<double>& hidden, std::vector<double>& probs) {
  probs.assign(m.classes, 0.0);
  if (m.kind == ModelKind::kLogistic) {
    affine(w.subspan(0, m.classes * m.dim), w.subspan(m.classes * m.dim, m.classes), a, probs);
  } else {
    const MlpView v = mlp_view(m, w);
    hidden.assign(m.hidden, 0.0);
    affine(v.w1, v.b1, a, hidden);
    for (auto& h : hidden) h = std::tanh(h);
    affine(v.w2, v.b2, hidden, probs);
  }
}

// As logits(), then softmax in place; returns log-sum-exp.
double forward(const ModelSpec& m, std::span<const double> w, std::span<const double> a,
               std::vector<double>& hidden, std::vector<double>& probs) {
  logits(m, w, a, hidden, probs);
  return softmax(probs);
}

}  // namespace

double loss(const ModelSpec& m, std::span<const double> w, const Dataset& d) {
  check(m, w, d);
  double total = 0.0;
  if (m.kind == ModelKind::kQuadratic) {
    for (std::size_t i = 0; i < d.size(); ++i) total += 0.5 * kernels::dist2(w, d.row(i));
    return total / static_cast<double>(d.size());
  }
  std::vector<double> hidden, probs;
  for (std::size_t i = 0; i < d.size(); ++i) {
    logits(m, w, d.row(i), hidden, probs);
    const double y = probs[static_cast<std::size_t>(d.labels[i])];
    total += softmax(probs) - y;
  }
  return total / static_cast<double>(d.size());
}

Vector grad(const ModelSpec& m, std::span<const double> w, const Dataset& d) {
  check(m, w, d);
  Vector g(w.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(d.size());
  std::span<double> gs(g);

  if (m.kind == ModelKind::kQuadratic) {
    Vector diff(w.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      kernels::sub(w, d.row(i), diff);
      kernels::axpy(inv, diff, gs);
    }
    return g;
  }

  std::vector<double> hidden, probs, dh;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto a = d.row(i);
    forward(m, w, a, hidden, probs);
    probs[static_cast<std::size_t>(d.labels[i])] -= 1.0;  // dL/dlogits
    if (m.kind == ModelKind::kLogistic) {
      const std::size_t boff = m.classes * m.dim;
      for (std::size_t c = 0; c < m.classes; ++c) {
        kernels::axpy(probs[c] * inv, a, gs.subspan(c * m.dim, m.dim));
        g[boff + c] += probs[c] * inv;
      }
      continue;
    }
    const MlpView v = mlp_view(m, w);
    const std::size_t w1 = m.hidden * m.dim;
    const std::size_t b1 = w1;
    const std::size_t w2 = b1 + m.hidden;
    const std::size_t b2 = w2 + m.classes * m.hidden;
    dh.assign(m.hidden, 0.0);
    for (std::size_t c = 0; c < m.classes; ++c) {
      kernels::axpy(probs[c] * inv, hidden, gs.subspan(w2 + c * m.hidden, m.hidden));
      g[b2 + c] += probs[c] * inv;
      kernels::axpy(probs[c], v.w2.subspan(c * m.hidden, m.hidden), dh);
    }
    for (std::size_t j = 0; j < m.hidden; ++j) {
      const double delta = dh[j] * (1.0 - hidden[j] * hidden[j]);
      kernels::axpy(delta * inv, a, gs.subspan(j * m.dim, m.dim));
      g[b1 + j] += delta * inv;
    }
  }
  return g;
}

double accuracy(const ModelSpec& m, std::span<const double> w, const Dataset& d) {
  if (m.kind == ModelKind::kQuadratic) throw ParameterError("accuracy is undefined for quadratic");
  check(m, w, d);
  std::vector<double> hidden, probs;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    forward(m, w, d.row(i), hidden, probs);
    const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    if (best == d.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

Vector quadratic_optimum(const Dataset& d) {
  d.validate();
  Vector mean(d.dim, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) kernels::axpy(1.0, d.row(i), mean);
  kernels::scale(1.0 / static_cast<double>(d.size()), mean);
  return mean;
}

Dataset make_gaussian_clusters(const ClusterSpec& cs, Engine& means_rng, Engine& sample_rng) {
  if (cs.classes == 0 || cs.dim == 0 || cs.samples == 0)
    throw ParameterError("cluster cs needs classes, dim and samples > 0");
  std::normal_distribution<double> mean_dist(0.0, cs.separation);
  std::vector<double> means(cs.classes * cs.dim);
  for (auto& v : means) v = mean_dist(means_rng);

  std::normal_distribution<double> noise(0.0, cs.noise);
  Dataset d;
  d.dim = cs.dim;
  d.num_classes = cs.classes;
  d.features.reserve(cs.samples * cs.dim);
  std::vector<double> f(cs.dim);
  for (std::size_t i = 0; i < cs.samples; ++i) {
    const std::size_t c = i % cs.classes;
    for (std::size_t j = 0; j < cs.dim; ++j) f[j] = means[c * cs.dim + j] + noise(sample_rng);
    d.push(f, static_cast<int>(c));
  }
  return d;
}

namespace {

// log of a Gamma(shape, 1) draw; stable for tiny shapes via
// Gamma(a) = Gamma(a + 1) * U^(1/a).
double log_gamma_draw(double shape, Engine& rng) {
  if (shape <= 0.0) return -std::numeric_limits<double>::infinity();
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    return std::log(g(rng));
  }
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double uu = u(rng);
  while (uu <= 0.0) uu = u(rng);
  return std::log(g(rng)) + std::log(uu) / shape;
}

std::vector<double> draw_proportions(const std::vector<double>& shapes, Engine& rng) {
  std::vector<double> logz(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) logz[i] = log_gamma_draw(shapes[i], rng);
  const double mx = *std::max_element(logz.begin(), logz.end());
  std::vector<double> z(shapes.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = std::isfinite(logz[i]) ? std::exp(logz[i] - mx) : 0.0;
    sum += z[i];
  }
  for (auto& v : z) v /= sum;
  return z;
}

// Integer counts summing to `quota`, proportional to p (largest remainder).
std::vector<std::size_t> apportion(const std::vector<double>& p, std::size_t quota) {
  std::vector<std::size_t> n(p.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double exact = p[i] * static_cast<double>(quota);
    n[i] = static_cast<std::size_t>(std::floor(exact));
    used += n[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t j = 0; used < quota; ++j, ++used) ++n[rem[j % rem.size()].second];
  return n;
}

}  // namespace

Partition dirichlet_partition(const Dataset& data, const PartitionSpec& ps, Engine& rng) {
  data.validate();
  if (!(ps.rho > 0.0)) throw ParameterError("task.rho must be > 0");
  if (ps.devices == 0) throw ParameterError("partition needs at least one device");
  std::vector<double> prior = ps.class_prior.empty() ? data.class_distribution() : ps.class_prior;
  if (prior.size() != data.num_classes) throw DimensionError("class prior length != num_classes");
  const double prior_sum = std::accumulate(prior.begin(), prior.end(), 0.0);
  if (std::abs(prior_sum - 1.0) > 1e-9) throw ParameterError("class prior must sum to 1");

  const std::size_t classes = data.num_classes;
  std::vector<std::vector<std::size_t>> pool(classes);
  for (std::size_t i = 0; i < data.size(); ++i)
    pool[static_cast<std::size_t>(data.labels[i])].push_back(i);
  for (auto& p : pool) std::shuffle(p.begin(), p.end(), rng);

  std::vector<double> shapes(classes);
  for (std::size_t i = 0; i < classes; ++i) shapes[i] = ps.rho * prior[i];

  Partition out;
  const std::size_t base = data.size() / ps.devices;
  const std::size_t extra = data.size() % ps.devices;
  for (std::size_t n = 0; n < ps.devices; ++n) {
    const std::size_t quota = base + (n < extra ? 1 : 0);
    auto z = draw_proportions(shapes, rng);
    auto want = apportion(z, quota);

    std::vector<std::size_t> rows;
    std::size_t shortfall = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t take = std::min(want[c], pool[c].size());
      shortfall += want[c] - take;
      rows.insert(rows.end(), pool[c].end() - static_cast<std::ptrdiff_t>(take), pool[c].end());
      pool[c].resize(pool[c].size() - take);
    }
    if (shortfall > 0) {
      out.warnings.push_back("device " + std::to_string(n) + ": " + std::to_string(shortfall) +
                             " samples rebalanced to classes with remaining supply");
      // classes the device already favours first, then by remaining supply
      std::vector<std::size_t> order(classes);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (z[a] != z[b]) return z[a] > z[b];
        return pool[a].size() > pool[b].size();
      });
      for (std::size_t c : order) {
        const std::size_t take = std::min(shortfall, pool[c].size());
        rows.insert(rows.end(), pool[c].end() - static_cast<std::ptrdiff_t>(take), pool[c].end());
        pool[c].resize(pool[c].size() - take);
        shortfall -= take;
        if (shortfall == 0) break;
      }
    }
    std::sort(rows.begin(), rows.end());
    out.shards.push_back(data.subset(rows));
    out.rows.push_back(std::move(rows));
    out.proportions.push_back(std::move(z));
  }
  return out;
}

Dataset sample_batch(const Dataset& data, std::size_t batch_size, Engine& rng) {
  if (batch_size == 0) throw ParameterError("batch size must be >= 1");
  if (data.empty()) throw DimensionError("cannot sample from an empty dataset");
  std::vector<std::size_t> rows;
  rows.reserve(batch_size);
  if (batch_size <= data.size()) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      rows.push_back(idx[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    for (std::size_t i = 0; i < batch_size; ++i) rows.push_back(pick(rng));
  }
  return data.subset(rows);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  Dataset d;
  std::string line;
  bool first = true;
  int max_label = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw std::runtime_error("non-numeric row in " + path);
    }
    first = false;
    if (cells.size() < 2) throw DimensionError("dataset rows need features and a label");
    if (d.dim == 0) d.dim = cells.size() - 1;
    if (cells.size() - 1 != d.dim) throw DimensionError("ragged dataset row in " + path);
    const double lab = cells.back();
    if (lab < 0 || lab != std::floor(lab)) throw DimensionError("labels must be integers >= 0");
    cells.pop_back();
    d.push(cells, static_cast<int>(lab));
    max_label = std::max(max_label, static_cast<int>(lab));
  }
  d.num_classes = static_cast<std::size_t>(max_label + 1);
  d.validate();
  return d;
}

}  // namespace mafl::workloads
