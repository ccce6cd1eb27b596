#include "fedspd/metrics.hpp"

#include <sstream>

namespace fedspd {

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int num_classes) {
  if (preds.size() != labels.size()) {
    std::ostringstream os;
    os << "confusion: " << preds.size() << " predictions vs " << labels.size() << " labels";
    throw ShapeError(os.str());
  }
  if (num_classes < 1) {
    throw DomainError("confusion: num_classes must be >= 1");
  }
  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts = CountMatrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int t = labels[i];
    const int p = preds[i];
    if (t < 1 || t > num_classes || p < 1 || p > num_classes) {
      std::ostringstream os;
      os << "confusion: label/prediction (" << t << ", " << p << ") outside [1, "
         << num_classes << "]";
      throw DomainError(os.str());
    }
    cm.counts(t - 1, p - 1) += 1;
  }
  return cm;
}

double macro_f1(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) {
    throw DomainError("macro_f1: empty confusion matrix");
  }
  const int k = cm.num_classes;
  double sum = 0.0;
  for (int c = 0; c < k; ++c) {
    const double tp = static_cast<double>(cm.counts(c, c));
    const double support = static_cast<double>(cm.counts.row(c).sum());
    const double predicted = static_cast<double>(cm.counts.col(c).sum());
    const double prec = predicted > 0 ? tp / predicted : 0.0;
    const double rec = support > 0 ? tp / support : 0.0;
    const double f1 = (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    sum += f1;
  }
  return sum / static_cast<double>(k);
}

double micro_f1(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) {
    throw DomainError("micro_f1: empty confusion matrix");
  }
  // Single-label multiclass: micro precision = micro recall = accuracy.
  return accuracy(cm);
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) {
    throw DomainError("accuracy: empty confusion matrix");
  }
  return static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
}

}  // namespace fedspd
