#include <cmath>
#include <set>

#include "doctest.h"
#include "support/resample_oracle.hpp"
#include "support/samples.hpp"
#include "uiharvest/analysis.hpp"
#include "uiharvest/errors.hpp"
#include "uiharvest/resampler.hpp"

using namespace uiharvest;
using fixtures::node;

namespace {

Eigen::MatrixXd to_matrix(const oracle::Counts& counts) {
  Eigen::MatrixXd m(Eigen::Index(counts.size()), Eigen::Index(counts[0].size()));
  for (std::size_t r = 0; r < counts.size(); ++r) {
    for (std::size_t c = 0; c < counts[r].size(); ++c) m(Eigen::Index(r), Eigen::Index(c)) = counts[r][c];
  }
  return m;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

ClassFrequencyTable table_of(const oracle::Counts& counts,
                             std::vector<std::string> classes = {"text", "image", "button"}) {
  return build_frequency_table(ids(counts.size()), to_matrix(counts), std::move(classes));
}

PageSample with_nodes(std::vector<AxNode> nodes, std::string id) {
  auto s = fixtures::sample("http://example.com/" + id, "phone", 0, std::move(nodes));
  s.sample_id = id;
  return s;
}

}  // namespace

TEST_CASE("build_frequency_table counting example") {
  const std::vector<PageSample> samples{
      with_nodes({node(1, std::nullopt, "rootwebarea"), node(2, 1, "text"), node(3, 1, "text"),
                  node(4, 1, "text")},
                 "a"),
      with_nodes({node(1, std::nullopt, "rootwebarea"), node(2, 1, "text"), node(3, 1, "image")},
                 "b")};
  const auto t = build_frequency_table(samples, {"text", "image", "button"});
  CHECK(t.totals(0) == 4);
  CHECK(t.totals(1) == 1);
  CHECK(t.totals(2) == 0);
  CHECK(t.frequencies(0, 0) == 1.0);
  CHECK(t.frequencies(0, 1) == 0.0);
  CHECK(t.frequencies(1, 0) == 0.5);
  CHECK(t.frequencies(1, 1) == 0.5);
  CHECK(t.weights(0) == 0.25);
  CHECK(t.weights(1) == 1.0);
  CHECK(t.weights(2) == 0.0);  // excluded from the class draw

  const auto one = build_frequency_table(
      std::vector<PageSample>{with_nodes({node(1, std::nullopt, "rootwebarea"), node(2, 1, "image")}, "x")},
      {"text", "image"});
  CHECK(one.frequencies.row(0) == Eigen::RowVector2d(0, 1));
}

TEST_CASE("multi-label elements count toward every class") {
  const std::vector<PageSample> samples{
      with_nodes({node(1, std::nullopt, "rootwebarea"), node(2, 1, "link"), node(3, 2, "image")},
                 "a")};
  const auto t = build_frequency_table(samples, {"link", "image"});
  CHECK(t.totals(0) == 2);
  CHECK(t.totals(1) == 1);
}

TEST_CASE("empty tables are rejected") {
  CHECK_THROWS_AS(table_of({{0, 0, 0}, {0, 0, 0}}), Error);
  CHECK_THROWS_AS(build_frequency_table(std::span<const PageSample>{}, default_vocabulary()), Error);
}

TEST_CASE("resample_split: exhaustive, empty, errors") {
  const auto t = table_of(oracle::ten_screen_corpus());
  Rng rng(1);
  const auto all = resample_split(10, t, rng);
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == 10);
  CHECK(resample_split(0, t, rng).empty());
  try {
    resample_split(11, t, rng);
    FAIL("expected size error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::size);
  }
  // two unlabeled screens can never be drawn
  const auto sparse = table_of({{1, 0, 0}, {0, 0, 0}, {0, 0, 0}});
  try {
    resample_split(2, sparse, rng);
    FAIL("expected exhaustion");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::exhaustion);
  }
}

TEST_CASE("resample_split honors the exclusion filter") {
  const auto t = table_of(oracle::ten_screen_corpus());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto out = resample_split(5, t, rng, [](std::size_t r) { return r % 2 == 0; });
    for (const auto& id : out) CHECK(std::stoi(id) % 2 == 1);
  }
  Rng rng(0);
  CHECK_THROWS_AS(resample_split(6, t, rng, [](std::size_t r) { return r % 2 == 0; }), Error);
}

TEST_CASE("property: distinct ids, exact N, seed determinism on random corpora") {
  Rng gen(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t screens = 1 + uniform_index(gen, 40);
    oracle::Counts counts(screens, std::vector<double>(4, 0.0));
    std::size_t labeled = 0;
    for (auto& row : counts) {
      for (auto& v : row) v = uniform_index(gen, 3) == 0 ? double(uniform_index(gen, 6)) : 0.0;
      if (row[0] + row[1] + row[2] + row[3] > 0) ++labeled;
    }
    if (labeled == 0) continue;
    const auto t = table_of(counts, {"a", "b", "c", "d"});
    const std::size_t n = uniform_index(gen, labeled + 1);
    Rng r1(trial), r2(trial);
    const auto out = resample_split(n, t, r1);
    CHECK(out.size() == n);
    CHECK(std::set<std::string>(out.begin(), out.end()).size() == n);
    CHECK(resample_split(n, t, r2) == out);
  }
}

TEST_CASE("rare class: mean x-screens matches the literal Monte-Carlo model") {
  // class x appears in exactly 2 of 100 screens
  oracle::Counts counts;
  for (int i = 0; i < 100; ++i) {
    counts.push_back({double(1 + i % 7), double(i % 3 == 0 ? 1 : 0),
                      (i == 17 || i == 63) ? 1.0 : 0.0});
  }
  const auto t = table_of(counts, {"text", "image", "x"});
  const int runs = 10000;
  double impl = 0, model = 0;
  Rng rng(5);
  std::mt19937_64 gen(6);
  for (int r = 0; r < runs; ++r) {
    for (const auto& id : resample_split(10, t, rng)) {
      impl += counts[std::size_t(std::stoi(id))][2] > 0 ? 1 : 0;
    }
    for (auto s : oracle::literal_resample(10, counts, gen)) model += counts[s][2] > 0 ? 1 : 0;
  }
  impl /= runs;
  model /= runs;
  CHECK(std::abs(impl - model) <= 0.05);
  CHECK(impl > 10 * 0.02);  // far above the uniform expectation
}

TEST_CASE("subset distribution matches the exact dynamic program") {
  const auto counts = oracle::ten_screen_corpus();
  const auto exact = oracle::exact_subset_distribution(2, counts);
  double mass = 0;
  for (const auto& [mask, p] : exact) mass += p;
  CHECK(mass == doctest::Approx(1.0));

  const auto t = table_of(counts);
  std::map<unsigned, double> empirical;
  const int runs = 20000;
  Rng rng(123);
  for (int r = 0; r < runs; ++r) {
    unsigned mask = 0;
    for (const auto& id : resample_split(2, t, rng)) mask |= 1u << std::stoi(id);
    empirical[mask] += 1.0 / runs;
  }
  double tv = 0;
  for (const auto& [mask, p] : exact) tv += std::abs(p - (empirical.contains(mask) ? empirical[mask] : 0.0));
  for (const auto& [mask, p] : empirical) {
    if (!exact.contains(mask)) tv += p;
  }
  CHECK(tv / 2 < 0.05);
}

TEST_CASE("change_ratio_report") {
  Eigen::MatrixXd original(4, 2);
  original << 1, 0,
              0, 0,
              2, 0,
              0, 0;
  Eigen::MatrixXd resampled(4, 2);
  resampled << 1, 1,
               1, 0,
               1, 0,
               3, 0;
  const auto r = change_ratio_report(original, resampled, {"image", "button"});
  CHECK(r[0].screen_ratio == 2.0);                      // 4 vs 2 screens
  CHECK(r[0].element_ratio == doctest::Approx(6.0 / 3.0));
  CHECK(std::isinf(r[1].screen_ratio));
  CHECK(std::isinf(r[1].element_ratio));
  const auto same = change_ratio_report(original, original, {"image", "button"});
  for (const auto& c : same) {
    CHECK(c.screen_ratio == 1.0);
    CHECK(c.element_ratio == 1.0);
  }
  // 27 image screens against 10 in an equal-size random subset
  Eigen::MatrixXd ten = Eigen::MatrixXd::Zero(100, 1), twenty_seven = Eigen::MatrixXd::Zero(100, 1);
  ten.topRows(10).setOnes();
  twenty_seven.topRows(27).setOnes();
  CHECK(change_ratio_report(ten, twenty_seven, {"image"})[0].screen_ratio == doctest::Approx(2.7));

  const auto j = change_ratio_json(r);
  CHECK(j["classes"][1]["screen_ratio"] == "inf");
  CHECK(change_ratio_csv(r).find("button,inf,inf") != std::string::npos);
}

TEST_CASE("default visual-defect filter") {
  const auto& vocab = default_vocabulary();
  auto clean = with_nodes({node(1, std::nullopt, "rootwebarea", Rect{0, 0, 400, 800}),
                           node(2, 1, "text", Rect{0, 0, 100, 20}),
                           node(3, 1, "image", Rect{0, 40, 100, 100})},
                          "clean");
  CHECK_FALSE(has_visual_defect(clean, vocab));

  auto zero = clean;
  zero.axtree[1].boxes = BoxModel{{0, 0, 0, 20}, {0, 0, 0, 20}, {0, 0, 0, 20}, {0, 0, 0, 20}};
  CHECK(has_visual_defect(zero, vocab));

  auto occluded = clean;
  occluded.axtree[2].boxes->border = Rect{0, 0, 100, 100};
  CHECK(has_visual_defect(occluded, vocab));

  auto invisible = clean;
  invisible.axtree[2].style["opacity"] = "0";
  CHECK(has_visual_defect(invisible, vocab));
  invisible.axtree[2].style["opacity"] = "0.5";
  CHECK_FALSE(has_visual_defect(invisible, vocab));
}
