#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "dualfact/error.hpp"
#include "dualfact/stats.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dualfact;

namespace {

const CorrelationMethod kMethods[] = {CorrelationMethod::Pearson, CorrelationMethod::Spearman,
                                      CorrelationMethod::Kendall};

std::vector<double> tied_vector(std::mt19937& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& e : v) e = static_cast<double>(testutil::below(rng, 6)) * 0.5;
  return v;
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
}

}  // namespace

TEST_CASE("perfect agreement and inversion") {
  PairedScores p{{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}};
  for (auto m : kMethods) CHECK(correlate(p, m) == doctest::Approx(1.0).epsilon(1e-15));
  PairedScores r{{1, 2, 3, 4, 5}, {50, 40, 30, 20, 10}};
  CHECK(correlate(r, CorrelationMethod::Spearman) == doctest::Approx(-1.0));
  CHECK(correlate(r, CorrelationMethod::Kendall) == doctest::Approx(-1.0));
}

TEST_CASE("errors name the degenerate vector") {
  PairedScores flat{{1, 1, 1}, {1, 2, 3}};
  for (auto m : kMethods) {
    try {
      correlate(flat, m);
      FAIL("expected UndefinedMetricError");
    } catch (const UndefinedMetricError& e) {
      CHECK(std::string(e.what()).find("x has zero variance") != std::string::npos);
    }
  }
  PairedScores tenth{{1, 2, 3}, {0.1, 0.1, 0.1}};
  CHECK_THROWS_WITH_AS(correlate(tenth, CorrelationMethod::Pearson), doctest::Contains("y has"), UndefinedMetricError);
  CHECK_THROWS_AS(correlate({{1}, {1}}, CorrelationMethod::Pearson), PreconditionError);
  CHECK_THROWS_AS(correlate({{1, 2}, {1}}, CorrelationMethod::Pearson), PreconditionError);
}

TEST_CASE("mid ranks") {
  CHECK(mid_ranks({10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("correlations match brute-force oracles on tied vectors") {
  std::mt19937 rng(1234);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + testutil::below(rng, 40);
    PairedScores p{tied_vector(rng, n), tied_vector(rng, n)};
    if (constant(p.x) || constant(p.y)) continue;
    ++checked;
    CHECK(std::abs(correlate(p, CorrelationMethod::Pearson) - oracle::pearson(p.x, p.y)) <= 1e-9);
    CHECK(std::abs(correlate(p, CorrelationMethod::Spearman) - oracle::spearman(p.x, p.y)) <= 1e-9);
    CHECK(std::abs(correlate(p, CorrelationMethod::Kendall) - oracle::kendall(p.x, p.y)) <= 1e-9);
    PairedScores swapped{p.y, p.x};
    for (auto m : kMethods) {
      double c = correlate(p, m);
      CHECK(c >= -1.0);
      CHECK(c <= 1.0);
      CHECK(std::abs(correlate(swapped, m) - c) <= 1e-12);
    }
    // Monotone transform leaves rank statistics unchanged; affine leaves Pearson.
    PairedScores mono{p.x, p.y}, affine{p.x, p.y};
    for (auto& v : mono.x) v = std::exp(v);
    for (auto& v : affine.x) v = 3 * v + 7;
    CHECK(std::abs(correlate(mono, CorrelationMethod::Spearman) - correlate(p, CorrelationMethod::Spearman)) <= 1e-12);
    CHECK(std::abs(correlate(mono, CorrelationMethod::Kendall) - correlate(p, CorrelationMethod::Kendall)) <= 1e-12);
    CHECK(std::abs(correlate(affine, CorrelationMethod::Pearson) - correlate(p, CorrelationMethod::Pearson)) <= 1e-9);
  }
  CHECK(checked > 180);
}

TEST_CASE("kappa: hand example, identity, degenerate marginals") {
  // a: 20 agree + 5 disagree, b: 10 disagree + 15 agree.
  LabelPairs p;
  auto add = [&](const char* x, const char* y, int n) {
    for (int i = 0; i < n; ++i) p.a.push_back(x), p.b.push_back(y);
  };
  add("yes", "yes", 20);
  add("yes", "no", 5);
  add("no", "yes", 10);
  add("no", "no", 15);
  CHECK(cohen_kappa(p) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(std::abs(cohen_kappa(p) - oracle::kappa(p.a, p.b)) <= 1e-12);

  LabelPairs same{{"C", "H", "S", "C"}, {"C", "H", "S", "C"}, {}};
  CHECK(cohen_kappa(same) == 1.0);
  LabelPairs all_one{{"C", "C"}, {"C", "C"}, {}};
  CHECK(cohen_kappa(all_one) == 1.0);
  LabelPairs bad_alphabet{{"C"}, {"X"}, {"C", "H"}};
  CHECK_THROWS_AS(cohen_kappa(bad_alphabet), PreconditionError);
  CHECK_THROWS_AS(cohen_kappa({}), PreconditionError);
}

TEST_CASE("kappa matches a contingency-table oracle") {
  std::mt19937 rng(77);
  const std::vector<std::string> labels = {"Correct", "Hallucination", "Saliency"};
  for (int trial = 0; trial < 300; ++trial) {
    LabelPairs p;
    for (std::size_t k = 1 + testutil::below(rng, 50); k > 0; --k) {
      auto a = labels[testutil::below(rng, 3)];
      p.a.push_back(a);
      p.b.push_back(testutil::below(rng, 3) ? a : labels[testutil::below(rng, 3)]);
    }
    double k = 0;
    try {
      k = cohen_kappa(p);
    } catch (const UndefinedMetricError&) {
      continue;
    }
    CHECK(k <= 1.0);
    double o = oracle::kappa(p.a, p.b);
    if (std::isfinite(o)) CHECK(std::abs(k - o) <= 1e-12);
  }
}

TEST_CASE("paired score files and alignment") {
  auto dir = testutil::scratch_dir("stats");
  std::ofstream(dir / "p.csv") << "metric,human\n0.5,0.4\n0.7,NA\n0.9,0.8\n\n0.1,0.3\n";
  auto p = load_paired_scores(dir / "p.csv");
  CHECK(p.x == std::vector<double>{0.5, 0.9, 0.1});
  CHECK(p.dropped == 1);
  std::ofstream(dir / "bad.csv") << "1,2\n1,x\n";
  CHECK_THROWS_AS(load_paired_scores(dir / "bad.csv"), FormatError);

  auto a = PairedScores::align({{"v1", 0.2}, {"v2", 0.4}, {"v3", 0.9}}, {{"v1", 0.1}, {"v2", std::nullopt}, {"v4", 0.5}});
  CHECK(a.x == std::vector<double>{0.2});
  CHECK(a.dropped == 3);
  std::filesystem::remove_all(dir);
}
