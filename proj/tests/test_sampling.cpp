#include <doctest.h>

#include <algorithm>
#include <set>

#include "patchaudit/errors.hpp"
#include "patchaudit/sampling.hpp"

using namespace patchaudit;

namespace {

LabeledDataset make_dataset(size_t n_absent, size_t n_present) {
  LabeledDataset dataset;
  dataset.name = "synthetic";
  size_t id = 0;
  for (size_t i = 0; i < n_absent; ++i, ++id)
    dataset.items.push_back({"item" + std::to_string(id), "unused", BinaryLabel::absent});
  for (size_t i = 0; i < n_present; ++i, ++id)
    dataset.items.push_back({"item" + std::to_string(id), "unused", BinaryLabel::present});
  return dataset;
}

std::set<std::string> ids(const LabeledDataset& dataset) {
  std::set<std::string> out;
  for (const auto& item : dataset.items) out.insert(item.image_id);
  return out;
}

}  // namespace

TEST_CASE("780 items split 80/10/10 into 624/78/78") {
  const auto dataset = make_dataset(390, 390);
  const auto split = stratified_split(dataset, SplitSpec{}, SeededRng(1));
  CHECK(split.train.size() == 624);
  CHECK(split.val.size() == 78);
  CHECK(split.test.size() == 78);
}

TEST_CASE("per-class floors: 10+10 items give 1+1 val, 1+1 test, 8+8 train") {
  const auto dataset = make_dataset(10, 10);
  const auto split = stratified_split(dataset, SplitSpec{}, SeededRng(2));
  CHECK(split.val.size() == 2);
  CHECK(split.val.count(BinaryLabel::present) == 1);
  CHECK(split.test.size() == 2);
  CHECK(split.test.count(BinaryLabel::present) == 1);
  CHECK(split.train.size() == 16);
  CHECK(split.train.count(BinaryLabel::absent) == 8);
}

TEST_CASE("different seeds move membership but not part sizes") {
  const auto dataset = make_dataset(100, 60);
  const auto a = stratified_split(dataset, SplitSpec{}, SeededRng(1));
  const auto b = stratified_split(dataset, SplitSpec{}, SeededRng(2));
  CHECK(a.train.size() == b.train.size());
  CHECK(a.val.size() == b.val.size());
  CHECK(a.test.size() == b.test.size());
  CHECK(ids(a.val) != ids(b.val));

  const auto a_again = stratified_split(dataset, SplitSpec{}, SeededRng(1));
  CHECK(ids(a.train) == ids(a_again.train));
  CHECK(ids(a.val) == ids(a_again.val));
  CHECK(ids(a.test) == ids(a_again.test));
}

TEST_CASE("split parts partition the dataset by id") {
  SeededRng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto dataset =
        make_dataset(3 + rng.next_below(300), 3 + rng.next_below(300));
    const auto split = stratified_split(dataset, SplitSpec{}, SeededRng(trial));

    auto train_ids = ids(split.train), val_ids = ids(split.val), test_ids = ids(split.test);
    CHECK(train_ids.size() + val_ids.size() + test_ids.size() == dataset.size());

    std::set<std::string> all;
    all.insert(train_ids.begin(), train_ids.end());
    all.insert(val_ids.begin(), val_ids.end());
    all.insert(test_ids.begin(), test_ids.end());
    CHECK(all == ids(dataset));  // disjoint and exhaustive

    // stratification: per-class val/test shares within 1/n_c of the requested fractions
    for (BinaryLabel label : {BinaryLabel::absent, BinaryLabel::present}) {
      const double n_c = static_cast<double>(dataset.count(label));
      CHECK(std::abs(split.val.count(label) / n_c - 0.1) < 1.0 / n_c);
      CHECK(std::abs(split.test.count(label) / n_c - 0.1) < 1.0 / n_c);
    }
  }
}

TEST_CASE("split rejects classes smaller than three") {
  const auto dataset = make_dataset(2, 50);
  CHECK_THROWS_WITH_AS((void)stratified_split(dataset, SplitSpec{}, SeededRng(1)),
                       doctest::Contains("ClassTooSmall"), Error);
}

TEST_CASE("split spec validation") {
  SplitSpec bad;
  bad.train_fraction = 0.9;  // sums to 1.1
  CHECK_THROWS_AS(bad.validate(), Error);
  SplitSpec zero{1.0, 0.0, 0.0};
  CHECK_THROWS_AS(zero.validate(), Error);
}

TEST_CASE("balance subsamples to the minority count") {
  const auto dataset = make_dataset(652, 1370);
  const auto balanced = balance_classes(dataset, SeededRng(4));
  CHECK(balanced.count(BinaryLabel::absent) == 652);
  CHECK(balanced.count(BinaryLabel::present) == 652);

  // output ids are a subset of input ids
  const auto in_ids = ids(dataset);
  for (const auto& item : balanced.items) CHECK(in_ids.count(item.image_id) == 1);
}

TEST_CASE("balancing an already balanced dataset is the identity") {
  const auto dataset = make_dataset(405, 405);
  const auto balanced = balance_classes(dataset, SeededRng(5));
  REQUIRE(balanced.size() == dataset.size());
  for (size_t i = 0; i < dataset.items.size(); ++i)
    CHECK(balanced.items[i].image_id == dataset.items[i].image_id);
}

TEST_CASE("balance handles the extreme minority and rejects empty classes") {
  const auto dataset = make_dataset(5, 1);
  const auto balanced = balance_classes(dataset, SeededRng(6));
  CHECK(balanced.size() == 2);
  CHECK(balanced.count(BinaryLabel::present) == 1);

  const auto degenerate = make_dataset(5, 0);
  CHECK_THROWS_WITH_AS((void)balance_classes(degenerate, SeededRng(7)),
                       doctest::Contains("DegenerateDataset"), Error);
}

TEST_CASE("epoch batches keep sizes and cover every item exactly once") {
  const SeededRng rng(8);
  const auto batches = epoch_batches(100, 32, rng, 0);
  REQUIRE(batches.size() == 4);
  CHECK(batches[0].size() == 32);
  CHECK(batches[3].size() == 4);  // final partial batch retained

  std::vector<int> seen;
  for (const auto& batch : batches) seen.insert(seen.end(), batch.begin(), batch.end());
  std::sort(seen.begin(), seen.end());
  for (int i = 0; i < 100; ++i) CHECK(seen[i] == i);

  const auto single = epoch_batches(32, 32, rng, 0);
  REQUIRE(single.size() == 1);
  CHECK(single[0].size() == 32);
}

TEST_CASE("epoch shuffles are fresh per epoch and reproducible") {
  const SeededRng rng(9);
  const auto epoch0 = epoch_batches(256, 32, rng, 0);
  const auto epoch1 = epoch_batches(256, 32, rng, 1);
  const auto epoch0_again = epoch_batches(256, 32, rng, 0);
  CHECK(epoch0 != epoch1);
  CHECK(epoch0 == epoch0_again);
  CHECK_THROWS_AS((void)epoch_batches(10, 0, rng, 0), Error);
}
