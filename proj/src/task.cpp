#include "fairk/task.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairk {

TaskKind parse_task_kind(const std::string& name) {
  if (name == "logistic") return TaskKind::LogisticRegression;
  if (name == "mlp") return TaskKind::SmallMLP;
  if (name == "quadratic") return TaskKind::SyntheticQuadratic;
  throw std::invalid_argument("unknown task: " + name);
}

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::LogisticRegression: return "logistic";
    case TaskKind::SmallMLP: return "mlp";
    case TaskKind::SyntheticQuadratic: return "quadratic";
  }
  throw std::logic_error("task_kind_name: bad enum value");
}

std::size_t TaskSpec::dimension() const {
  switch (kind) {
    case TaskKind::LogisticRegression: return classes * features + classes;
    case TaskKind::SmallMLP:
      return hidden * features + hidden + classes * hidden + classes;
    case TaskKind::SyntheticQuadratic: return features;
  }
  throw std::logic_error("dimension: bad enum value");
}

void TaskSpec::validate() const {
  require(features >= 1, "task: features must be >= 1");
  if (kind != TaskKind::SyntheticQuadratic) {
    require(classes >= 2, "task: classification needs >= 2 classes");
  }
  if (kind == TaskKind::SmallMLP) {
    require(hidden >= 1, "task: mlp needs hidden width >= 1");
  }
}

void Dataset::validate() const {
  require(n >= 1, "dataset: empty");
  require(p >= 1, "dataset: zero features");
  require(x.size() == n * p, "dataset: feature buffer size mismatch");
  require(y.size() == n, "dataset: label count mismatch");
}

Task::Task(TaskSpec spec) : spec_(spec), dim_(spec.dimension()) {
  spec_.validate();
}

namespace {

// Stable softmax into probs; returns log-sum-exp for the loss.
double softmax(const std::vector<double>& logits, std::vector<double>& probs) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - zmax);
    sum += probs[c];
  }
  for (auto& v : probs) v /= sum;
  return zmax + std::log(sum);
}

struct MlpLayout {
  std::size_t p, h, c;
  std::size_t w1(std::size_t j, std::size_t i) const { return j * p + i; }
  std::size_t b1(std::size_t j) const { return h * p + j; }
  std::size_t w2(std::size_t o, std::size_t j) const { return h * p + h + o * h + j; }
  std::size_t b2(std::size_t o) const { return h * p + h + c * h + o; }
};

}  // namespace

double Task::loss(const GradientVector& w, const Dataset& ds,
                  const std::vector<std::size_t>& rows) const {
  require(w.size() == dim_, "loss: parameter dimension mismatch");
  require(!rows.empty(), "loss: empty batch");
  require(ds.p == spec_.features, "loss: dataset feature width mismatch");
  double total = 0.0;

  switch (spec_.kind) {
    case TaskKind::LogisticRegression: {
      const std::size_t C = spec_.classes, p = spec_.features;
      std::vector<double> logits(C), probs(C);
      for (std::size_t r : rows) {
        const double* xi = ds.row(r);
        for (std::size_t c = 0; c < C; ++c) {
          double z = w[C * p + c];
          const double* wc = w.data() + c * p;
          for (std::size_t j = 0; j < p; ++j) z += wc[j] * xi[j];
          logits[c] = z;
        }
        const double lse = softmax(logits, probs);
        const auto label = static_cast<std::size_t>(ds.y[r]);
        total += lse - logits[label];
      }
      break;
    }
    case TaskKind::SmallMLP: {
      const MlpLayout L{spec_.features, spec_.hidden, spec_.classes};
      std::vector<double> a1(L.h), logits(L.c), probs(L.c);
      for (std::size_t r : rows) {
        const double* xi = ds.row(r);
        for (std::size_t j = 0; j < L.h; ++j) {
          double z = w[L.b1(j)];
          for (std::size_t i = 0; i < L.p; ++i) z += w[L.w1(j, i)] * xi[i];
          a1[j] = std::tanh(z);
        }
        for (std::size_t o = 0; o < L.c; ++o) {
          double z = w[L.b2(o)];
          for (std::size_t j = 0; j < L.h; ++j) z += w[L.w2(o, j)] * a1[j];
          logits[o] = z;
        }
        const double lse = softmax(logits, probs);
        const auto label = static_cast<std::size_t>(ds.y[r]);
        total += lse - logits[label];
      }
      break;
    }
    case TaskKind::SyntheticQuadratic: {
      for (std::size_t r : rows) {
        const double* xi = ds.row(r);
        double pred = 0.0;
        for (std::size_t j = 0; j < spec_.features; ++j) pred += w[j] * xi[j];
        const double e = pred - ds.y[r];
        total += 0.5 * e * e;
      }
      break;
    }
  }
  return total / static_cast<double>(rows.size());
}

GradientVector Task::gradient(const GradientVector& w, const Dataset& ds,
                              const std::vector<std::size_t>& rows) const {
  require(w.size() == dim_, "gradient: parameter dimension mismatch");
  require(!rows.empty(), "gradient: empty batch");
  require(ds.p == spec_.features, "gradient: dataset feature width mismatch");
  GradientVector g(dim_, 0.0);

  switch (spec_.kind) {
    case TaskKind::LogisticRegression: {
      const std::size_t C = spec_.classes, p = spec_.features;
      std::vector<double> logits(C), probs(C);
      for (std::size_t r : rows) {
        const double* xi = ds.row(r);
        for (std::size_t c = 0; c < C; ++c) {
          double z = w[C * p + c];
          const double* wc = w.data() + c * p;
          for (std::size_t j = 0; j < p; ++j) z += wc[j] * xi[j];
          logits[c] = z;
        }
        softmax(logits, probs);
        const auto label = static_cast<std::size_t>(ds.y[r]);
        for (std::size_t c = 0; c < C; ++c) {
          const double delta = probs[c] - (c == label ? 1.0 : 0.0);
          double* gc = g.data() + c * p;
          for (std::size_t j = 0; j < p; ++j) gc[j] += delta * xi[j];
          g[C * p + c] += delta;
        }
      }
      break;
    }
    case TaskKind::SmallMLP: {
      const MlpLayout L{spec_.features, spec_.hidden, spec_.classes};
      std::vector<double> a1(L.h), logits(L.c), probs(L.c), d1(L.h);
      for (std::size_t r : rows) {
        const double* xi = ds.row(r);
        for (std::size_t j = 0; j < L.h; ++j) {
          double z = w[L.b1(j)];
          for (std::size_t i = 0; i < L.p; ++i) z += w[L.w1(j, i)] * xi[i];
          a1[j] = std::tanh(z);
        }
        for (std::size_t o = 0; o < L.c; ++o) {
          double z = w[L.b2(o)];
          for (std::size_t j = 0; j < L.h; ++j) z += w[L.w2(o, j)] * a1[j];
          logits[o] = z;
        }
        softmax(logits, probs);
        const auto label = static_cast<std::size_t>(ds.y[r]);
        for (std::size_t j = 0; j < L.h; ++j) d1[j] = 0.0;
        for (std::size_t o = 0; o < L.c; ++o) {
          const double delta = probs[o] - (o == label ? 1.0 : 0.0);
          for (std::size_t j = 0; j < L.h; ++j) {
            g[L.w2(o, j)] += delta * a1[j];
            d1[j] += delta * w[L.w2(o, j)];
          }
          g[L.b2(o)] += delta;
        }
        for (std::size_t j = 0; j < L.h; ++j) {
          const double dz = d1[j] * (1.0 - a1[j] * a1[j]);
          for (std::size_t i = 0; i < L.p; ++i) g[L.w1(j, i)] += dz * xi[i];
          g[L.b1(j)] += dz;
        }
      }
      break;
    }
    case TaskKind::SyntheticQuadratic: {
      for (std::size_t r : rows) {
        const double* xi = ds.row(r);
        double pred = 0.0;
        for (std::size_t j = 0; j < spec_.features; ++j) pred += w[j] * xi[j];
        const double e = pred - ds.y[r];
        for (std::size_t j = 0; j < spec_.features; ++j) g[j] += e * xi[j];
      }
      break;
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& v : g) v *= inv;
  return g;
}

namespace {
std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}
}  // namespace

double Task::full_loss(const GradientVector& w, const Dataset& ds) const {
  return loss(w, ds, all_rows(ds));
}

GradientVector Task::full_gradient(const GradientVector& w, const Dataset& ds) const {
  return gradient(w, ds, all_rows(ds));
}

std::pair<double, double> Task::evaluate(const GradientVector& w,
                                         const Dataset& ds) const {
  ds.validate();
  const double mean_loss = full_loss(w, ds);
  if (spec_.kind == TaskKind::SyntheticQuadratic) return {mean_loss, 0.0};

  const std::size_t C = spec_.classes, p = spec_.features;
  std::size_t correct = 0;
  std::vector<double> logits(C);
  for (std::size_t r = 0; r < ds.n; ++r) {
    const double* xi = ds.row(r);
    if (spec_.kind == TaskKind::LogisticRegression) {
      for (std::size_t c = 0; c < C; ++c) {
        double z = w[C * p + c];
        const double* wc = w.data() + c * p;
        for (std::size_t j = 0; j < p; ++j) z += wc[j] * xi[j];
        logits[c] = z;
      }
    } else {
      const MlpLayout L{p, spec_.hidden, C};
      std::vector<double> a1(L.h);
      for (std::size_t j = 0; j < L.h; ++j) {
        double z = w[L.b1(j)];
        for (std::size_t i = 0; i < L.p; ++i) z += w[L.w1(j, i)] * xi[i];
        a1[j] = std::tanh(z);
      }
      for (std::size_t o = 0; o < C; ++o) {
        double z = w[L.b2(o)];
        for (std::size_t j = 0; j < L.h; ++j) z += w[L.w2(o, j)] * a1[j];
        logits[o] = z;
      }
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c) {
      if (logits[c] > logits[best]) best = c;
    }
    if (best == static_cast<std::size_t>(ds.y[r])) ++correct;
  }
  return {mean_loss, static_cast<double>(correct) / static_cast<double>(ds.n)};
}

}  // namespace fairk
