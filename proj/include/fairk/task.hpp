#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fairk/types.hpp"

namespace fairk {

enum class TaskKind { LogisticRegression, SmallMLP, SyntheticQuadratic };

TaskKind parse_task_kind(const std::string& name);
std::string task_kind_name(TaskKind kind);

struct TaskSpec {
  TaskKind kind = TaskKind::LogisticRegression;
  std::size_t features = 0;  // p
  std::size_t classes = 1;   // output classes for the classification tasks
  std::size_t hidden = 0;    // hidden width, SmallMLP only

  // Flattened parameter count.
  std::size_t dimension() const;
  void validate() const;
};

// Row-major feature matrix with one label per row. Classification labels
// are stored as the class index; the quadratic task uses real targets.
struct Dataset {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> x;  // n * p
  std::vector<double> y;  // n

  const double* row(std::size_t i) const { return x.data() + i * p; }
  void validate() const;
};

// Loss, gradient, and evaluation for one model family. All batch
// reductions are arithmetic means over the given rows.
class Task {
 public:
  explicit Task(TaskSpec spec);

  const TaskSpec& spec() const { return spec_; }
  std::size_t dim() const { return dim_; }

  double loss(const GradientVector& w, const Dataset& ds,
              const std::vector<std::size_t>& rows) const;
  GradientVector gradient(const GradientVector& w, const Dataset& ds,
                          const std::vector<std::size_t>& rows) const;

  double full_loss(const GradientVector& w, const Dataset& ds) const;
  GradientVector full_gradient(const GradientVector& w, const Dataset& ds) const;

  // Mean loss and top-1 accuracy (argmax, ties to the lowest class). The
  // quadratic task has no notion of accuracy and reports 0.
  std::pair<double, double> evaluate(const GradientVector& w, const Dataset& ds) const;

 private:
  TaskSpec spec_;
  std::size_t dim_;
};

}  // namespace fairk
