#include <vector>

#include "bhsrs/metrics.hpp"
#include "bhsrs/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bhsrs;

TEST_CASE("confusion matrix counts reference by prediction") {
  const std::vector<int32_t> ref = {0, 0, 1, 1, 2, 2, 2};
  const std::vector<int32_t> pred = {0, 1, 1, 1, 2, 0, 2};
  const Confusion c = confusion_matrix(ref, pred, 3);
  CHECK(c.at(0, 0) == 1);
  CHECK(c.at(0, 1) == 1);
  CHECK(c.at(1, 1) == 2);
  CHECK(c.at(2, 0) == 1);
  CHECK(c.at(2, 2) == 2);
  CHECK(c.at(1, 0) == 0);
  CHECK(c.total() == 7);
  CHECK(overall_accuracy(c) == doctest::Approx(5.0 / 7.0));
  // Recalls: 1/2, 2/2, 2/3.
  CHECK(average_accuracy(c) == doctest::Approx((0.5 + 1.0 + 2.0 / 3.0) / 3.0));
}

TEST_CASE("confusion matrix validates inputs") {
  CHECK_THROWS_AS(confusion_matrix({0}, {0, 1}, 2), InputError);
  CHECK_THROWS_AS(confusion_matrix({0}, {2}, 2), InputError);
  CHECK_THROWS_AS(confusion_matrix({-1}, {0}, 2), InputError);
  CHECK_THROWS_AS(confusion_matrix({}, {}, 2), InputError);
  CHECK_THROWS_AS(confusion_matrix({0}, {0}, 0), InputError);
}

TEST_CASE("classes absent from the reference do not dilute average accuracy") {
  // Class 1 never occurs; AA averages over classes 0 and 2 only.
  const Confusion c = confusion_matrix({0, 0, 2, 2}, {0, 1, 2, 0}, 3);
  CHECK(average_accuracy(c) == doctest::Approx((0.5 + 0.5) / 2.0));
}

TEST_CASE("agreement score on hand-worked example") {
  // Classic two-rater table: po = 0.6, pe = 0.5, kappa = 0.2.
  Confusion c;
  c.n_classes = 2;
  c.counts = {20, 5, 15, 10};
  CHECK(overall_accuracy(c) == doctest::Approx(0.6));
  CHECK(kappa(c) == doctest::Approx(0.2));
}

TEST_CASE("agreement score limits") {
  // Perfect prediction over several classes.
  const Confusion perfect = confusion_matrix({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
  CHECK(kappa(perfect) == doctest::Approx(1.0));

  // Constant predictor on a constant reference: chance term saturates.
  const Confusion constant = confusion_matrix({1, 1, 1}, {1, 1, 1}, 2);
  CHECK(kappa(constant) == 1.0);
  const Confusion wrong = confusion_matrix({1, 1, 1}, {0, 0, 0}, 2);
  CHECK(kappa(wrong) == 0.0);

  // A constant predictor on a mixed reference scores zero (po == pe).
  const Confusion guess = confusion_matrix({0, 1, 0, 1}, {1, 1, 1, 1}, 2);
  CHECK(kappa(guess) == doctest::Approx(0.0));
}

TEST_CASE("agreement score matches the direct formula on random tables") {
  Rng rng(88);
  for (int trial = 0; trial < 100; ++trial) {
    CAPTURE(trial);
    const int64_t k = 2 + rng.integer(5);
    const int64_t n = 5 + rng.integer(200);
    std::vector<int32_t> ref(static_cast<size_t>(n)), pred(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      ref[static_cast<size_t>(i)] = static_cast<int32_t>(rng.integer(k));
      // Bias toward agreement so po varies across trials.
      pred[static_cast<size_t>(i)] =
          rng.uniform() < 0.5 ? ref[static_cast<size_t>(i)] : static_cast<int32_t>(rng.integer(k));
    }
    const Confusion c = confusion_matrix(ref, pred, k);

    // Direct evaluation from the label vectors, no confusion matrix.
    double po = 0.0;
    for (int64_t i = 0; i < n; ++i) po += ref[static_cast<size_t>(i)] == pred[static_cast<size_t>(i)];
    po /= static_cast<double>(n);
    double pe = 0.0;
    for (int64_t cls = 0; cls < k; ++cls) {
      double nr = 0.0, np = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        nr += ref[static_cast<size_t>(i)] == cls;
        np += pred[static_cast<size_t>(i)] == cls;
      }
      pe += (nr / static_cast<double>(n)) * (np / static_cast<double>(n));
    }
    if (1.0 - pe < 1e-15) continue;  // degenerate table, covered by the limits test
    const double want = (po - pe) / (1.0 - pe);
    CHECK(kappa(c) == doctest::Approx(want).epsilon(1e-12));
    CHECK(overall_accuracy(c) == doctest::Approx(po).epsilon(1e-12));
  }
}
