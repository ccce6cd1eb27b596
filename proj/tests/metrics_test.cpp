#include <doctest.h>

#include <random>
#include <vector>

#include "fedspd/metrics.hpp"
#include "fedspd/rng.hpp"

using namespace fedspd;

TEST_SUITE("metrics") {

TEST_CASE("confusion counts land at (true, predicted)") {
  const ConfusionMatrix cm = confusion({1, 1, 2}, {1, 2, 2}, 2);
  CHECK(cm.counts(0, 0) == 1);
  CHECK(cm.counts(0, 1) == 0);
  CHECK(cm.counts(1, 0) == 1);
  CHECK(cm.counts(1, 1) == 1);
  CHECK(cm.total() == 3);

  const ConfusionMatrix perfect = confusion({1, 2, 3, 2}, {1, 2, 3, 2}, 3);
  CHECK(perfect.counts.diagonal().sum() == perfect.total());

  const ConfusionMatrix empty = confusion({}, {}, 2);
  CHECK(empty.total() == 0);
  CHECK(empty.counts.cwiseAbs().sum() == 0);
}

TEST_CASE("confusion validates its inputs") {
  CHECK_THROWS_AS(confusion({1}, {1, 2}, 2), ShapeError);
  CHECK_THROWS_AS(confusion({3}, {1}, 2), DomainError);
  CHECK_THROWS_AS(confusion({1}, {0}, 2), DomainError);
  CHECK_THROWS_AS(confusion({}, {}, 0), DomainError);
}

TEST_CASE("accuracy is the diagonal share") {
  const ConfusionMatrix cm = confusion({1, 1, 2}, {1, 2, 2}, 2);
  CHECK(accuracy(cm) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const ConfusionMatrix perfect = confusion({1, 2}, {1, 2}, 2);
  CHECK(accuracy(perfect) == 1.0);
  CHECK_THROWS_AS(accuracy(confusion({}, {}, 2)), DomainError);
}

TEST_CASE("macro F1 of a perfect prediction is one") {
  const ConfusionMatrix cm = confusion({1, 2, 3, 1}, {1, 2, 3, 1}, 3);
  CHECK(macro_f1(cm) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(micro_f1(cm) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("macro F1 punishes a constant predictor on balanced data") {
  // Predicting class 1 always: F1_1 = 2/3, F1_2 = 0, macro = 1/3.
  const ConfusionMatrix cm = confusion({1, 1, 1, 1}, {1, 1, 2, 2}, 2);
  CHECK(macro_f1(cm) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(accuracy(cm) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("micro F1 equals accuracy for single-label classification") {
  auto rng = make_engine(80);
  std::uniform_int_distribution<int> cls(1, 4);
  std::vector<int> preds, labels;
  for (int i = 0; i < 500; ++i) {
    preds.push_back(cls(rng));
    labels.push_back(cls(rng));
  }
  const ConfusionMatrix cm = confusion(preds, labels, 4);
  CHECK(micro_f1(cm) == doctest::Approx(accuracy(cm)).epsilon(1e-15));
}

TEST_CASE("uniform random predictions score near 1/K") {
  auto rng = make_engine(81);
  std::uniform_int_distribution<int> cls(1, 4);
  std::vector<int> preds, labels;
  for (int i = 0; i < 10000; ++i) {
    preds.push_back(cls(rng));
    labels.push_back(cls(rng));
  }
  const ConfusionMatrix cm = confusion(preds, labels, 4);
  CHECK(macro_f1(cm) == doctest::Approx(0.25).epsilon(0.08));
}

TEST_CASE("metrics are invariant to a class relabeling") {
  auto rng = make_engine(82);
  std::uniform_int_distribution<int> cls(1, 4);
  std::vector<int> preds, labels;
  for (int i = 0; i < 300; ++i) {
    preds.push_back(cls(rng));
    labels.push_back(cls(rng));
  }
  const int perm[5] = {0, 3, 1, 4, 2};
  std::vector<int> preds_p, labels_p;
  for (int i = 0; i < 300; ++i) {
    preds_p.push_back(perm[preds[static_cast<std::size_t>(i)]]);
    labels_p.push_back(perm[labels[static_cast<std::size_t>(i)]]);
  }
  const ConfusionMatrix a = confusion(preds, labels, 4);
  const ConfusionMatrix b = confusion(preds_p, labels_p, 4);
  CHECK(macro_f1(a) == doctest::Approx(macro_f1(b)).epsilon(1e-12));
  CHECK(accuracy(a) == doctest::Approx(accuracy(b)).epsilon(1e-12));
}

TEST_CASE("majority predictor accuracy equals the majority share") {
  const std::vector<int> labels = {1, 1, 1, 2, 2, 1, 1};
  const std::vector<int> preds(labels.size(), 1);
  const ConfusionMatrix cm = confusion(preds, labels, 2);
  CHECK(accuracy(cm) == doctest::Approx(5.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("absent classes contribute zero to the macro average") {
  // Class 3 never appears and is never predicted: per-class F1 of 0/0 is 0.
  const ConfusionMatrix cm = confusion({1, 2}, {1, 2}, 3);
  CHECK(macro_f1(cm) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

}  // TEST_SUITE
