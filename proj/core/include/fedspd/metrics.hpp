#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fedspd/errors.hpp"

namespace fedspd {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// K x K counts, entry (true class, predicted class), classes 1-based.
struct ConfusionMatrix {
  int num_classes = 0;
  CountMatrix counts;

  std::int64_t total() const { return counts.sum(); }
};

// Accumulates counts; preds and labels are 1-based class indices.
// Throws ShapeError on length mismatch, DomainError on out-of-range values.
ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int num_classes);

// Unweighted mean over classes of per-class F1; 0/0 conventions give 0.
double macro_f1(const ConfusionMatrix& cm);

// Micro-averaged F1. For single-label multiclass this equals accuracy.
double micro_f1(const ConfusionMatrix& cm);

// trace / total.
double accuracy(const ConfusionMatrix& cm);

}  // namespace fedspd
