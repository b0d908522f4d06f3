#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "foldcast/data.hpp"
#include "oracles.hpp"

using namespace foldcast;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& name, const std::string& content) : path(name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

std::string numbers_csv(std::int64_t rows, std::int64_t cols, Rng& rng) {
  std::string s = "date";
  for (std::int64_t c = 0; c < cols; ++c) s += ",v" + std::to_string(c);
  s += "\n";
  for (std::int64_t r = 0; r < rows; ++r) {
    s += "2020-01-01 " + std::to_string(r % 24) + ":00:00";
    for (std::int64_t c = 0; c < cols; ++c) s += "," + std::to_string(rng.uniform(-3, 9));
    s += "\n";
  }
  return s;
}

}  // namespace

TEST_CASE("constant data with the epsilon guard normalizes to zero") {
  std::string csv = "date,a,b\n";
  for (int r = 0; r < 10; ++r) csv += "2020-01-0" + std::to_string(r % 9 + 1) + ",3.0,3.0\n";
  TempCsv f("const.csv", csv);
  LoadOptions opts;
  opts.epsilon_guard = true;
  auto ds = Dataset::load_csv(f.path, opts);
  for (double v : ds.values().data()) CHECK(v == 0.0);

  LoadOptions strict;
  CHECK_THROWS_WITH_AS(Dataset::load_csv(f.path, strict), doctest::Contains("'a'"), DataError);
}

TEST_CASE("7:1:2 split boundaries for 100 rows") {
  Rng rng(3);
  TempCsv f("plain.csv", numbers_csv(100, 2, rng));
  auto ds = Dataset::load_csv(f.path);
  CHECK(ds.train_end() == 70);
  CHECK(ds.val_end() == 80);
  CHECK(ds.length() == 100);
  CHECK(ds.channels() == 2);
}

TEST_CASE("files named like the ETT suite split 6:2:2") {
  Rng rng(4);
  TempCsv f("ETTx1.csv", numbers_csv(100, 2, rng));
  auto ds = Dataset::load_csv(f.path);
  CHECK(ds.train_end() == 60);
  CHECK(ds.val_end() == 80);
}

TEST_CASE("parse errors carry row and column positions") {
  TempCsv f("bad.csv", "date,a,b\n2020-01-01,1.0,2.0\n2020-01-02,oops,2.0\n");
  CHECK_THROWS_WITH_AS(Dataset::load_csv(f.path), doctest::Contains("row 2"), DataError);
  CHECK_THROWS_WITH_AS(Dataset::load_csv(f.path), doctest::Contains("'a'"), DataError);

  TempCsv narrow("narrow.csv", "a\n1\n2\n");
  CHECK_THROWS_WITH_AS(Dataset::load_csv(narrow.path), doctest::Contains("fewer than 2"),
                       DataError);
}

TEST_CASE("training split is zero mean unit variance after loading") {
  Rng rng(5);
  TempCsv f("norm.csv", numbers_csv(400, 3, rng));
  auto ds = Dataset::load_csv(f.path);
  for (std::int64_t m = 0; m < ds.channels(); ++m) {
    double mean = 0;
    for (std::int64_t t = 0; t < ds.train_end(); ++t) mean += ds.values().at(t, m);
    mean /= static_cast<double>(ds.train_end());
    double var = 0;
    for (std::int64_t t = 0; t < ds.train_end(); ++t) {
      const double c = ds.values().at(t, m) - mean;
      var += c * c;
    }
    var /= static_cast<double>(ds.train_end());
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
  }
}

TEST_CASE("window counts and boundaries") {
  Rng rng(6);
  Matrix values(1000, 2);
  for (auto& v : values.data()) v = rng.uniform(-1, 1);
  auto ds = Dataset::from_values("w", std::move(values), {}, {});
  // train split is [0, 700)
  auto ws = windows(ds, Split::kTrain, 50, 10);
  CHECK(ws.count() == 700 - 50 - 10 + 1);

  // stride L+H gives non-overlapping windows
  auto nol = windows(ds, Split::kTrain, 50, 10, 60);
  for (std::int64_t i = 1; i < nol.count(); ++i)
    CHECK(nol.get(i).origin - nol.get(i - 1).origin == 60);

  // last window's target ends exactly at the split's final row
  auto last = ws.get(ws.count() - 1);
  CHECK(last.origin + 50 + 10 == ds.train_end());

  // validation windows may reach back into train rows for context
  auto vs = windows(ds, Split::kVal, 50, 10, 1, true);
  CHECK(vs.get(0).origin == ds.train_end() - 50);
  CHECK(vs.count() == (ds.val_end() - ds.train_end()) - 10 + 1);
  // but targets stay inside the split
  CHECK(vs.get(0).origin + 50 >= ds.train_end());

  // oversized request yields no windows plus a warning
  auto none = windows(ds, Split::kVal, 400, 10);
  CHECK(none.count() == 0);
  CHECK(!none.warning().empty());
}

TEST_CASE("window samples are contiguous x then y") {
  Rng rng(7);
  Matrix values(60, 1);
  for (std::int64_t t = 0; t < 60; ++t) values.at(t, 0) = static_cast<double>(t);
  LoadOptions opts;
  opts.split = "8:1:1";
  opts.epsilon_guard = false;
  auto ds = Dataset::from_values("ramp", std::move(values), {}, opts);
  auto ws = windows(ds, Split::kTrain, 5, 3);
  auto s = ws.get(7);
  CHECK(s.origin == 7);
  for (int i = 0; i < 5; ++i)
    CHECK(ds.values().at(7 + i, 0) == s.x.at(0, i));
  for (int i = 0; i < 3; ++i)
    CHECK(ds.values().at(12 + i, 0) == s.y.at(0, i));
}

TEST_CASE("denormalize inverts normalization") {
  Rng rng(8);
  TempCsv f("denorm.csv", numbers_csv(200, 2, rng));
  auto ds = Dataset::load_csv(f.path);
  const auto& stats = ds.norm_stats();

  // zeros map back to the per-channel means
  Matrix zeros(2, 4, 0.0);
  auto means = denormalize(zeros, stats);
  for (std::int64_t m = 0; m < 2; ++m)
    for (std::int64_t t = 0; t < 4; ++t)
      CHECK(means.at(m, t) == doctest::Approx(stats.mean[static_cast<std::size_t>(m)]));

  // round trip against the direct affine formula
  Matrix y(2, 5);
  for (auto& v : y.data()) v = rng.uniform(-2, 2);
  auto raw = denormalize(y, stats);
  for (std::int64_t m = 0; m < 2; ++m)
    for (std::int64_t t = 0; t < 5; ++t) {
      const double expect = y.at(m, t) * stats.stdev[static_cast<std::size_t>(m)] +
                            stats.mean[static_cast<std::size_t>(m)];
      CHECK(raw.at(m, t) == doctest::Approx(expect).epsilon(1e-12));
      const double renorm =
          (raw.at(m, t) - stats.mean[static_cast<std::size_t>(m)]) /
          stats.stdev[static_cast<std::size_t>(m)];
      CHECK(std::abs(renorm - y.at(m, t)) < 1e-9);
    }
}

TEST_CASE("synthetic benchmark stand-in has the expected layout") {
  write_synth_csv("synth_check.csv", "etth", 800, 7);
  auto ds = Dataset::load_csv("synth_check.csv");
  CHECK(ds.channels() == 7);
  CHECK(ds.length() == 800);
  CHECK(ds.channel_names()[6] == "OT");
  CHECK(ds.timestamps().size() == 800);
  CHECK(ds.timestamps()[0] == "2016-07-01 00:00:00");
  CHECK(ds.timestamps()[1] == "2016-07-01 01:00:00");
  std::remove("synth_check.csv");
}

TEST_CASE("real benchmark shape when the file is available") {
  std::ifstream probe("data/ETTh1.csv");
  if (!probe) {
    MESSAGE("data/ETTh1.csv not present; skipping the shape assertion");
    return;
  }
  auto ds = Dataset::load_csv("data/ETTh1.csv");
  CHECK(ds.length() == 17420);
  CHECK(ds.channels() == 7);
}
