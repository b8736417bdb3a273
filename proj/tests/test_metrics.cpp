#include <doctest.h>

#include <cmath>
#include <vector>

#include "exact_binomial_oracle.hpp"
#include "patchaudit/errors.hpp"
#include "patchaudit/metrics.hpp"

using namespace patchaudit;

namespace {

std::vector<double> exact_tail_oracle(int n, double p0) {
  return oracle::exact_binomial_tail(n, p0);
}

LabeledDataset label_counts(size_t n_absent, size_t n_present) {
  LabeledDataset dataset;
  for (size_t i = 0; i < n_absent; ++i)
    dataset.items.push_back({"a" + std::to_string(i), "", BinaryLabel::absent});
  for (size_t i = 0; i < n_present; ++i)
    dataset.items.push_back({"p" + std::to_string(i), "", BinaryLabel::present});
  return dataset;
}

}  // namespace

TEST_CASE("metric_set worked example") {
  const MetricSet m = metric_set({.tp = 50, .fp = 10, .fn = 10, .tn = 130});
  CHECK(m.accuracy == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(m.precision == doctest::Approx(50.0 / 60.0).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(50.0 / 60.0).epsilon(1e-12));
  CHECK(m.f1 == doctest::Approx(50.0 / 60.0).epsilon(1e-12));
}

TEST_CASE("constant-negative predictor zeroes the positive-class metrics") {
  const MetricSet m = metric_set({.tp = 0, .fp = 0, .fn = 40, .tn = 60});
  CHECK(m.accuracy == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
}

TEST_CASE("metric_set rejects empty matrices") {
  CHECK_THROWS_WITH_AS((void)metric_set(ConfusionMatrix{}),
                       doctest::Contains("EmptyMatrix"), Error);
}

TEST_CASE("exhaustive enumeration: all confusion matrices with total <= 50") {
  int64_t checked = 0;
  for (int64_t tp = 0; tp <= 50; ++tp)
    for (int64_t fp = 0; tp + fp <= 50; ++fp)
      for (int64_t fn = 0; tp + fp + fn <= 50; ++fn)
        for (int64_t tn = tp + fp + fn == 0 ? 1 : 0; tp + fp + fn + tn <= 50; ++tn) {
          const MetricSet m = metric_set({tp, fp, fn, tn});
          const int64_t total = tp + fp + fn + tn;

          // independent evaluations of the same quotients: zero tolerance
          REQUIRE(m.accuracy == static_cast<double>(tp + tn) / static_cast<double>(total));
          const double p = tp + fp > 0
                               ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                               : 0.0;
          const double r = tp + fn > 0
                               ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                               : 0.0;
          REQUIRE(m.precision == p);
          REQUIRE(m.recall == r);
          REQUIRE(m.f1 == (p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0));

          // algebraic alternative for F1 agrees to rounding error
          if (2 * tp + fp + fn > 0) {
            const double alt = 2.0 * static_cast<double>(tp) /
                               static_cast<double>(2 * tp + fp + fn);
            REQUIRE(std::abs(m.f1 - alt) <= 1e-14);
          }

          // range and symmetry invariants
          REQUIRE(m.accuracy >= 0.0);
          REQUIRE(m.accuracy <= 1.0);
          REQUIRE(m.f1 >= 0.0);
          REQUIRE(m.f1 <= 1.0);
          const MetricSet swapped = metric_set({tn, fn, fp, tp});
          REQUIRE(swapped.accuracy == m.accuracy);
          ++checked;
        }
  CHECK(checked > 300000);
}

TEST_CASE("binomial exceedance closed-form anchors") {
  CHECK(binomial_exceedance(10, 10, 0.5) ==
        doctest::Approx(std::pow(2.0, -10)).epsilon(1e-12));
  CHECK(binomial_exceedance(0, 17, 0.3) == 1.0);
  CHECK(binomial_exceedance(200, 200, 0.5) ==
        doctest::Approx(std::pow(2.0, -200)).epsilon(1e-10));
}

TEST_CASE("the paper-scale case k=59 n=78 matches the exact oracle") {
  const auto tail = exact_tail_oracle(78, 0.5);
  const double p = binomial_exceedance(59, 78, 0.5);
  CHECK(std::abs(p - tail[59]) / tail[59] < 1e-10);
  // ~75.64% of a 78-item split is far beyond chance
  CHECK(p < 1e-5);
  CHECK(p > 1e-7);
}

TEST_CASE("exhaustive sweep against the exact oracle, n <= 200") {
  for (double p0 : {0.5, 0.6286}) {
    for (int n = 1; n <= 200; ++n) {
      const auto tail = exact_tail_oracle(n, p0);
      double previous = 2.0;
      for (int k = 0; k <= n; ++k) {
        const double p = binomial_exceedance(k, n, p0);
        REQUIRE(std::abs(p - tail[k]) / tail[k] < 1e-10);
        REQUIRE(p <= previous);  // monotone non-increasing in k
        previous = p;
      }
    }
  }
}

TEST_CASE("binomial exceedance rejects invalid arguments") {
  CHECK_THROWS_WITH_AS((void)binomial_exceedance(1, 0, 0.5),
                       doctest::Contains("InvalidBaseline"), Error);
  CHECK_THROWS_AS((void)binomial_exceedance(-1, 10, 0.5), Error);
  CHECK_THROWS_AS((void)binomial_exceedance(11, 10, 0.5), Error);
  CHECK_THROWS_AS((void)binomial_exceedance(5, 10, 0.0), Error);
  CHECK_THROWS_AS((void)binomial_exceedance(5, 10, 1.0), Error);
}

TEST_CASE("chance baselines") {
  const auto even = chance_baselines(label_counts(50, 50));
  CHECK(even.fixed == 0.5);
  CHECK(even.majority_rate == 0.5);

  const auto skewed = chance_baselines(label_counts(132, 78));
  CHECK(skewed.majority_rate == doctest::Approx(132.0 / 210.0).epsilon(1e-12));

  const auto single = chance_baselines(label_counts(25, 0));
  CHECK(single.majority_rate == 1.0);

  CHECK_THROWS_AS((void)chance_baselines(label_counts(0, 0)), Error);
}
