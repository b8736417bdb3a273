#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "patchaudit/rng.hpp"

using namespace patchaudit;

TEST_CASE("identical seeds give identical streams") {
  SeededRng a(1234), b(1234);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("the first words of the pinned generator stay stable") {
  // Frozen from the first verified run; a change here silently breaks every
  // seeded artifact downstream.
  SeededRng rng(42);
  CHECK(rng.next_u64() == 1546998764402558742ULL);
  CHECK(rng.next_u64() == 6990951692964543102ULL);
  CHECK(rng.next_u64() == 12544586762248559009ULL);
}

TEST_CASE("derive produces independent labeled substreams") {
  const SeededRng root(7);
  SeededRng a = root.derive("split");
  SeededRng b = root.derive("batches");
  CHECK(a.next_u64() != b.next_u64());
  CHECK(root.derive("split").next_u64() == root.derive("split").next_u64());
  CHECK(root.derive_seed("x") != root.derive_seed("y"));
  // deriving is a pure function of (seed, label), not of stream position
  SeededRng advanced(7);
  advanced.next_u64();
  CHECK(advanced.derive_seed("split") == root.derive_seed("split"));
}

TEST_CASE("next_below stays in range and covers the range") {
  SeededRng rng(99);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 10000; ++i) {
    const uint64_t v = rng.next_below(10);
    REQUIRE(v < 10);
    ++counts[v];
  }
  for (int c : counts) CHECK(c > 800);  // ~1000 expected per bucket
}

TEST_CASE("next_real lies in [0,1) with sane spread") {
  SeededRng rng(5);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.next_real();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    sum += v;
  }
  CHECK(sum / 10000.0 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("gaussian draws have roughly unit scale") {
  SeededRng rng(6);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.next_gaussian();
    sum += v;
    sum2 += v * v;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.05));
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);

  auto a = v;
  SeededRng(31).shuffle(a);
  auto b = v;
  SeededRng(31).shuffle(b);
  CHECK(a == b);
  CHECK(a != v);

  auto c = v;
  SeededRng(32).shuffle(c);
  CHECK(a != c);

  std::sort(a.begin(), a.end());
  CHECK(a == v);  // still a permutation
}
