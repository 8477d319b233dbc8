#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "asgbdt/dataset.hpp"
#include "asgbdt/rng.hpp"

using namespace asgbdt;

namespace {

SparseDataset parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_libsvm(in);
}

// Random corpus with plenty of duplicate rows.
SparseDataset random_corpus(std::uint64_t seed, std::size_t rows) {
  SplitMix64 rng(seed);
  SparseDataset ds;
  for (std::size_t r = 0; r < rows; ++r) {
    SparseRow row;
    for (std::uint32_t f = 0; f < 4; ++f)
      if (rng.next_unit() < 0.6) row.push_back({f, static_cast<double>(rng.next_below(3))});
    ds.add_row(std::move(row), static_cast<int>(rng.next_below(2)));
  }
  ds.set_n_features(4);
  return ds;
}

}  // namespace

TEST_CASE("parse_libsvm reads labels and 1-based indices") {
  SparseDataset ds = parse_text("1 1:0.5 3:-2.0\n");
  REQUIRE(ds.n_samples() == 1);
  CHECK(ds.label(0) == 1);
  CHECK(ds.frequency(0) == 1);
  REQUIRE(ds.sample(0).size() == 2);
  CHECK(ds.sample(0)[0].index == 0);
  CHECK(ds.sample(0)[0].value == 0.5);
  CHECK(ds.sample(0)[1].index == 2);
  CHECK(ds.sample(0)[1].value == -2.0);
  CHECK(ds.n_features() == 3);
}

TEST_CASE("parse_libsvm maps -1 to 0") {
  SparseDataset ds = parse_text("-1 2:1\n");
  REQUIRE(ds.n_samples() == 1);
  CHECK(ds.label(0) == 0);
  REQUIRE(ds.sample(0).size() == 1);
  CHECK(ds.sample(0)[0].index == 1);
  CHECK(ds.sample(0)[0].value == 1.0);
}

TEST_CASE("parse_libsvm rejects descending indices with the line number") {
  try {
    parse_text("1 3:1 2:1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 1);
  }
}

TEST_CASE("parse_libsvm rejects junk tokens with the line number") {
  try {
    parse_text("1 1:0.5\nbogus 1:2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 2);
  }
  CHECK_THROWS_AS(parse_text("1 1:one\n"), ParseError);
  CHECK_THROWS_AS(parse_text("2 1:1\n"), ParseError);   // label outside {0,1,+1,-1}
  CHECK_THROWS_AS(parse_text("1 0:1\n"), ParseError);   // indices are 1-based on disk
  CHECK_THROWS_AS(parse_text("1 2:1 2:2\n"), ParseError);
}

TEST_CASE("parse_libsvm skips blank lines") {
  SparseDataset ds = parse_text("\n1 1:1\n\n0 2:1\n");
  CHECK(ds.n_samples() == 2);
}

TEST_CASE("deduplicate folds repeats into frequencies") {
  SparseDataset ds = deduplicate(parse_text("1 1:1\n1 1:1\n0 2:1\n"));
  REQUIRE(ds.n_samples() == 2);
  CHECK(ds.frequency(0) == 2);
  CHECK(ds.frequency(1) == 1);
  CHECK(ds.n_raw() == 3);
  CHECK(ds.label(0) == 1);
}

TEST_CASE("deduplicate keeps distinct rows as-is") {
  SparseDataset raw = parse_text("1 1:1\n1 2:1\n0 3:1\n");
  SparseDataset ds = deduplicate(raw);
  CHECK(ds.n_samples() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ds.frequency(i) == 1);
}

TEST_CASE("deduplicate treats the label as part of the identity") {
  SparseDataset ds = deduplicate(parse_text("1 1:1\n0 1:1\n"));
  CHECK(ds.n_samples() == 2);
}

TEST_CASE("deduplicate distinguishes values bitwise") {
  SparseDataset ds = deduplicate(parse_text("1 1:0.1\n1 1:0.10000000000000002\n"));
  CHECK(ds.n_samples() == 2);
}

TEST_CASE("bins: few distinct values get one bin per value") {
  SparseDataset ds;
  ds.add_row({{0, 1.0}}, 1);
  ds.add_row({{0, 2.0}}, 0);
  ds.add_row({{0, 3.0}}, 1);
  FeatureBins bins(ds, 8);
  // values {1,2,3}: three exact bins
  CHECK(bins.n_bins(0) == 3);
  CHECK(bins.bin_of(0, 1.0) == 0);
  CHECK(bins.bin_of(0, 2.0) == 1);
  CHECK(bins.bin_of(0, 3.0) == 2);
  CHECK(bins.bin_of(0, 1.5) == 1);
}

TEST_CASE("bins: constant feature collapses to a single bin") {
  SparseDataset ds;
  ds.add_row({{0, 5.0}}, 1);
  ds.add_row({{0, 5.0}, {1, 1.0}}, 0);
  FeatureBins bins(ds, 255);
  CHECK(bins.n_bins(0) == 1);
  CHECK(bins.bin_of(0, 5.0) == 0);
  CHECK(bins.bin_of(0, -100.0) == 0);
}

TEST_CASE("bins: quantile cuts spread 1000 uniform values evenly") {
  // Independent oracle: with 1000 distinct equal-weight values and 10 bins,
  // every bin must hold exactly 100 values, and a value's bin is rank / 100.
  SplitMix64 rng(99);
  std::vector<double> values;
  SparseDataset ds;
  for (int i = 0; i < 1000; ++i) {
    double v = rng.next_unit() + 1e-9;  // keep 0 out so nothing lands in a zero bin
    values.push_back(v);
    ds.add_row({{0, v}}, i % 2);
  }
  FeatureBins bins(ds, 10);
  REQUIRE(bins.n_bins(0) == 10);

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> counts(10, 0);
  for (double v : values) {
    std::uint32_t got = bins.bin_of(0, v);
    auto rank = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
    CHECK(got == rank / 100);
    counts[got]++;
  }
  for (int c : counts) CHECK(c == 100);
}

TEST_CASE("bins: absent entries land in the bin containing zero") {
  SparseDataset ds;
  ds.add_row({{0, -1.0}}, 1);
  ds.add_row({{0, 2.0}}, 0);
  ds.add_row({{1, 1.0}}, 1);  // feature 0 absent -> value 0
  FeatureBins bins(ds, 8);
  CHECK(bins.n_bins(0) == 3);  // values {-1, 0, 2}
  CHECK(bins.zero_bin(0) == bins.bin_of(0, 0.0));
  CHECK(bins.zero_bin(0) == 1);
}

TEST_CASE("bin assignment is monotone in the feature value") {
  SparseDataset ds = deduplicate(random_corpus(7, 200));
  FeatureBins bins(ds, 4);
  SplitMix64 rng(11);
  for (std::uint32_t f = 0; f < ds.n_features(); ++f) {
    double prev_v = -10.0;
    std::uint32_t prev_b = 0;
    for (int probe = 0; probe < 50; ++probe) {
      double v = prev_v + rng.next_unit();
      std::uint32_t b = bins.bin_of(f, v);
      if (probe > 0) CHECK(b >= prev_b);
      prev_v = v;
      prev_b = b;
    }
  }
}

TEST_CASE("split_train_test partitions raw rows disjointly") {
  std::string text;
  for (int i = 1; i <= 10; ++i) text += "1 " + std::to_string(i) + ":1\n";
  SparseDataset ds = deduplicate(parse_text(text));
  auto [train, test] = split_train_test(ds, 0.2, 7);
  CHECK(train.n_raw() == 8);
  CHECK(test.n_raw() == 2);
  // Distinct rows: no sample may appear in both parts.
  for (std::size_t i = 0; i < train.n_samples(); ++i)
    for (std::size_t j = 0; j < test.n_samples(); ++j)
      CHECK(!(train.sample(i) == test.sample(j) && train.label(i) == test.label(j)));
}

TEST_CASE("split_train_test is deterministic in the seed") {
  SparseDataset ds = deduplicate(random_corpus(3, 60));
  auto [a_train, a_test] = split_train_test(ds, 0.3, 42);
  auto [b_train, b_test] = split_train_test(ds, 0.3, 42);
  CHECK(a_train == b_train);
  CHECK(a_test == b_test);
  auto [c_train, c_test] = split_train_test(ds, 0.3, 43);
  CHECK((!(c_train == a_train) || !(c_test == a_test)));
}

TEST_CASE("split_train_test clamps so neither part is empty") {
  SparseDataset ds = deduplicate(parse_text("1 1:1\n0 2:1\n"));
  auto [train, test] = split_train_test(ds, 0.999, 1);
  CHECK(train.n_raw() == 1);
  CHECK(test.n_raw() == 1);
  SparseDataset one = deduplicate(parse_text("1 1:1\n"));
  CHECK_THROWS_AS(split_train_test(one, 0.5, 1), std::invalid_argument);
}

TEST_CASE("round-trip: serialize then reparse restores the deduplicated dataset") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    SparseDataset ds = deduplicate(random_corpus(seed, 80));
    std::ostringstream out;
    write_libsvm(ds, out);
    SparseDataset back = deduplicate(parse_text(out.str()));
    back.set_n_features(ds.n_features());  // trailing all-zero features are not written
    CHECK(ds == back);
  }
}

TEST_CASE("frequencies after dedup sum to the raw row count") {
  for (std::uint64_t seed : {10ull, 20ull, 30ull}) {
    SparseDataset raw = random_corpus(seed, 123);
    SparseDataset ds = deduplicate(raw);
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < ds.n_samples(); ++i) sum += ds.frequency(i);
    CHECK(sum == 123);
    CHECK(ds.n_raw() == 123);
    for (std::size_t i = 0; i < ds.n_samples(); ++i) CHECK(ds.frequency(i) >= 1);
  }
}

TEST_CASE("stats report carries the documented keys") {
  SparseDataset ds = deduplicate(parse_text("1 1:1\n1 1:1\n0 2:1\n"));
  std::string report = ds.stats_report();
  CHECK(report.find("n_samples=2") != std::string::npos);
  CHECK(report.find("n_raw=3") != std::string::npos);
  CHECK(report.find("n_features=2") != std::string::npos);
  CHECK(report.find("duplication_ratio=1.5") != std::string::npos);
}
