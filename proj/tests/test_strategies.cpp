#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "al/error.hpp"
#include "al/strategies.hpp"
#include "support.hpp"

using namespace al;
using testing::ids;

namespace {

SelectionContext probs_context(const std::vector<ProbabilityVector>& probs) {
  SelectionContext ctx;
  for (std::size_t i = 0; i < probs.size(); ++i) ctx.unlabelled.push_back(make_id(i));
  ctx.probs = probs;
  for (const auto& p : probs)
    ctx.predicted_class.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  return ctx;
}

std::vector<ProbabilityVector> random_probs(std::size_t count, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<ProbabilityVector> out;
  for (std::size_t i = 0; i < count; ++i) {
    ProbabilityVector p(static_cast<std::size_t>(classes));
    double s = 0;
    for (auto& v : p) s += (v = g(rng));
    for (auto& v : p) v /= s;
    out.push_back(p);
  }
  return out;
}

EmbeddingTable table(const std::vector<std::vector<double>>& rows) {
  EmbeddingTable t{rows.empty() ? 0 : rows.front().size(), {}};
  for (const auto& r : rows) t.values.insert(t.values.end(), r.begin(), r.end());
  return t;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Largest distance from any point to its nearest centre.
double covering_radius(const std::vector<std::vector<double>>& points,
                       const std::vector<std::size_t>& centres) {
  double r = 0;
  for (const auto& p : points) {
    double best = INFINITY;
    for (auto c : centres) best = std::min(best, distance(p, points[c]));
    r = std::max(r, best);
  }
  return r;
}

// Exhaustive minimum covering radius over all k-subsets.
double optimal_radius(const std::vector<std::vector<double>>& points, std::size_t k) {
  const std::size_t n = points.size();
  double best = INFINITY;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
    std::vector<std::size_t> centres;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) centres.push_back(i);
    best = std::min(best, covering_radius(points, centres));
  }
  return best;
}

}  // namespace

TEST_CASE("least confident") {
  CHECK(score_least_confident(std::vector<double>{1, 0, 0}) == 0.0);
  CHECK(score_least_confident(std::vector<double>(10, 0.1)) == doctest::Approx(0.9).epsilon(1e-15));
  const std::vector<double> p{0.5, 0.3, 0.2};
  CHECK(score_least_confident(p) == 1.0 - *std::max_element(p.begin(), p.end()));
  CHECK_THROWS_AS(score_least_confident(std::vector<double>{}), InputError);
}

TEST_CASE("margin") {
  CHECK(score_margin(std::vector<double>{0.5, 0.5}) == 0.0);
  CHECK(score_margin(std::vector<double>{0, 1, 0}) == 1.0);
  std::vector<double> p{0.3, 0.5, 0.2};
  auto sorted = p;
  std::sort(sorted.rbegin(), sorted.rend());
  CHECK(score_margin(p) == sorted[0] - sorted[1]);
  CHECK(score_margin(p) == doctest::Approx(0.2));
  CHECK_THROWS_AS(score_margin(std::vector<double>{1.0}), InputError);
}

TEST_CASE("entropy") {
  CHECK(score_entropy(std::vector<double>{0, 0, 1}) == 0.0);
  CHECK(std::abs(score_entropy(std::vector<double>(10, 0.1)) - std::log(10.0)) < 1e-12);
  std::vector<double> two(10, 0.0);
  two[3] = two[7] = 0.5;
  CHECK(std::abs(score_entropy(two) - std::log(2.0)) < 1e-12);
}

TEST_CASE("sosl") {
  CHECK(score_sosl(std::vector<double>{0, 1, 0, 0}) == 0.0);
  CHECK(score_sosl(std::vector<double>(10, 0.1)) == 0.9);
  std::vector<double> two(10, 0.0);
  two[0] = two[1] = 0.5;
  CHECK(score_sosl(two) == 0.5);
}

TEST_CASE("uncertainty scores are invariant under class permutation") {
  auto probs = random_probs(50, 6, 3);
  std::mt19937_64 rng(9);
  for (auto p : probs) {
    auto q = p;
    std::shuffle(q.begin(), q.end(), rng);
    CHECK(score_least_confident(q) == score_least_confident(p));
    CHECK(score_margin(q) == score_margin(p));
    CHECK(score_entropy(q) == doctest::Approx(score_entropy(p)).epsilon(1e-14));
    CHECK(score_sosl(q) == doctest::Approx(score_sosl(p)).epsilon(1e-14));
  }
}

TEST_CASE("top-n ordering, saturation and ties") {
  const auto pool = ids({1, 2, 3});
  const std::vector<double> scores{0.9, 0.1, 0.5};
  CHECK(select_top_n(pool, scores, 2, Direction::Maximize).ids == ids({1, 3}));
  CHECK(select_top_n(pool, scores, 2, Direction::Minimize).ids == ids({2, 3}));
  CHECK(select_top_n(pool, scores, 10, Direction::Maximize).ids.size() == 3);
  const std::vector<double> tied{0.5, 0.5};
  CHECK(select_top_n(ids({1, 2}), tied, 1, Direction::Maximize).ids == ids({1}));
  CHECK(select_top_n({}, {}, 3, Direction::Maximize).empty());
}

TEST_CASE("score-based strategies are pure and ignore context order") {
  const auto probs = random_probs(200, 5, 21);
  auto ctx = probs_context(probs);
  SelectionContext shuffled;
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), std::mt19937_64(4));
  for (auto i : order) {
    shuffled.unlabelled.push_back(ctx.unlabelled[i]);
    shuffled.probs.push_back(ctx.probs[i]);
    shuffled.predicted_class.push_back(ctx.predicted_class[i]);
  }
  for (auto kind : {StrategyKind::NCLow, StrategyKind::Margin, StrategyKind::EntropyHigh,
                    StrategyKind::SOSL, StrategyKind::NCRange}) {
    const auto a = select(kind, ctx, 17, StrategyParams{}).batch.ids;
    const auto b = select(kind, ctx, 17, StrategyParams{}).batch.ids;
    const auto c = select(kind, shuffled, 17, StrategyParams{}).batch.ids;
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a.size() == 17);
  }
}

TEST_CASE("binary probabilities give one ranking for all uncertainty strategies") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ProbabilityVector> probs;
  for (int i = 0; i < 1000; ++i) {
    const double p = u(rng);
    probs.push_back({p, 1.0 - p});
  }
  const auto ctx = probs_context(probs);
  for (std::size_t n : {1, 10, 100}) {
    const auto reference = select_margin(ctx, n).ids;
    CHECK(select_entropy_high(ctx, n).ids == reference);
    CHECK(select_sosl(ctx, n).ids == reference);
    CHECK(select_nc_low(ctx, n).ids == reference);
  }
}

TEST_CASE("nc range") {
  auto ctx = probs_context({{0.95, 0.05}, {0.5, 0.5}, {0.05, 0.95}});
  // max-probs 0.95, 0.5, 0.95; only id 1 is inside [0.1, 0.9].
  CHECK(select_nc_range(ctx, 1, 0.1, 0.9).ids == ids({1}));

  auto outside = probs_context({{0.97, 0.03}, {0.92, 0.08}, {0.99, 0.01}});
  // Distance to the interval: 0.07, 0.02, 0.09.
  CHECK(select_nc_range(outside, 2, 0.1, 0.9).ids == ids({1, 0}));

  auto both = probs_context({{0.5, 0.5}, {0.51, 0.49}});
  auto picked = select_nc_range(both, 2, 0.1, 0.9).ids;
  std::sort(picked.begin(), picked.end());
  CHECK(picked == ids({0, 1}));

  CHECK_THROWS_AS(select_nc_range(ctx, 1, 0.9, 0.1), ConfigError);
}

TEST_CASE("nc diversity") {
  auto probs = random_probs(6, 3, 5);
  auto ctx = probs_context(probs);
  ctx.embeddings_unlabelled = table({{1, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 1}, {0.5, 3}});
  ctx.labelled = ids({100});
  ctx.embeddings_labelled = table({{-1, 0}});

  SUBCASE("a vacuous threshold reproduces nc low") {
    CHECK(select_nc_diversity(ctx, 4, 1.0 + 1e-9).ids == select_nc_low(ctx, 4).ids);
  }
  SUBCASE("duplicates are never both accepted") {
    auto dup = probs_context({{0.6, 0.4}, {0.55, 0.45}});
    dup.embeddings_unlabelled = table({{0.3, 0.7}, {0.3, 0.7}});
    dup.embeddings_labelled = table({});
    dup.embeddings_labelled->dim = 2;
    CHECK(select_nc_diversity(dup, 2, 0.95).ids.size() == 1);
  }
  SUBCASE("points on a line match a greedy replay") {
    // Five points on the line y = 1 forming two close pairs and a loner.
    const std::vector<std::vector<double>> emb{{0, 1}, {0.05, 1}, {3, 1}, {3.1, 1}, {-4, 1}};
    auto line = probs_context({{0.6, 0.4}, {0.55, 0.45}, {0.7, 0.3}, {0.52, 0.48}, {0.9, 0.1}});
    line.embeddings_unlabelled = table(emb);
    line.labelled = ids({50});
    line.embeddings_labelled = table({{1, 0}});
    const double threshold = 0.99;

    std::vector<std::size_t> order{0, 1, 2, 3, 4};
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
      return std::max(line.probs[a][0], line.probs[a][1]) < std::max(line.probs[b][0], line.probs[b][1]);
    });
    auto cos = [](const std::vector<double>& a, const std::vector<double>& b) {
      return (a[0] * b[0] + a[1] * b[1]) / (std::hypot(a[0], a[1]) * std::hypot(b[0], b[1]));
    };
    std::vector<SampleId> expected;
    std::vector<std::vector<double>> kept{{1, 0}};
    for (auto i : order) {
      bool ok = true;
      for (const auto& k : kept) ok = ok && cos(emb[i], k) < threshold;
      if (ok && expected.size() < 5) {
        expected.push_back(make_id(i));
        kept.push_back(emb[i]);
      }
    }
    CHECK(select_nc_diversity(line, 5, threshold).ids == expected);
    CHECK(expected.size() == 3);
  }
  SUBCASE("embeddings are required") {
    auto bare = probs_context(probs);
    CHECK_THROWS_AS(select_nc_diversity(bare, 1, 0.95), ConfigError);
  }
}

TEST_CASE("balanced quotas") {
  ConfusionMatrix perfect(4);
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < 5; ++k) perfect.add(c, c);
  CHECK(balanced_quotas(perfect, 8) == std::vector<std::size_t>{2, 2, 2, 2});

  ConfusionMatrix skewed(2);
  for (int k = 0; k < 4; ++k) skewed.add(0, 0);
  skewed.add(1, 1);
  for (int k = 0; k < 3; ++k) skewed.add(1, 0);
  // Recalls 1 and 1/4: weights 1 and 4, exact shares 1 and 4.
  CHECK(balanced_quotas(skewed, 5) == std::vector<std::size_t>{1, 4});

  // Shares 10/3 each with a remainder of 1/3: the lowest classes win ties.
  CHECK(balanced_quotas(perfect, 10) == std::vector<std::size_t>{3, 3, 2, 2});

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> cls(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    ConfusionMatrix cm(6);
    for (int k = 0; k < 40; ++k) cm.add(cls(rng), cls(rng));
    const std::size_t n = 1 + static_cast<std::size_t>(trial);
    const auto q = balanced_quotas(cm, n);
    CHECK(std::accumulate(q.begin(), q.end(), std::size_t{0}) == n);
  }
}

TEST_CASE("nc balanced fills quotas with the least confident members of each class") {
  auto ctx = probs_context({{0.9, 0.1}, {0.6, 0.4}, {0.7, 0.3}, {0.2, 0.8}, {0.45, 0.55}, {0.1, 0.9}});
  ConfusionMatrix cm(2);
  for (int k = 0; k < 4; ++k) cm.add(0, 0);
  cm.add(1, 1);
  for (int k = 0; k < 3; ++k) cm.add(1, 0);
  ctx.confusion = cm;
  const auto out = select_nc_balanced(ctx, 4);
  REQUIRE_FALSE(out.terminate);
  // Quotas 1 and 3 (shares 0.8 and 3.2). Class 0 candidates 0,1,2; class 1 candidates 3,4,5.
  CHECK(out.batch.ids == ids({1, 4, 3, 5}));

  SUBCASE("an exhausted class terminates") {
    auto only0 = probs_context({{0.9, 0.1}, {0.6, 0.4}});
    only0.confusion = cm;
    const auto t = select_nc_balanced(only0, 2);
    CHECK(t.terminate);
    CHECK(t.starved_class == 1);
    CHECK(t.batch.empty());
  }
  SUBCASE("the confusion matrix is required") {
    auto bare = probs_context({{0.9, 0.1}});
    CHECK_THROWS_AS(select_nc_balanced(bare, 1), ConfigError);
  }
}

TEST_CASE("core-set greedy") {
  SelectionContext ctx;
  ctx.unlabelled = ids({1, 2, 3});
  ctx.embeddings_unlabelled = table({{0.1}, {0.9}, {1.0}});
  ctx.labelled = ids({0});
  ctx.embeddings_labelled = table({{0.0}});
  CHECK(select_coreset_greedy(ctx, 1).ids == ids({3}));
  // After 1.0 joins, 0.1 and 0.9 are both 0.1 away; the lower id wins.
  CHECK(select_coreset_greedy(ctx, 2).ids == ids({3, 1}));

  SelectionContext empty = ctx;
  empty.labelled.clear();
  empty.embeddings_labelled = table({});
  empty.embeddings_labelled->dim = 1;
  CHECK_THROWS_AS(select_coreset_greedy(empty, 1), ConfigError);
}

TEST_CASE("core-set greedy is within twice the optimal k-center radius") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> size(2, 10);
  std::uniform_int_distribution<int> dims(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size(rng);
    const int d = dims(rng);
    const auto k = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, std::min(3, n))(rng));
    std::vector<std::vector<double>> points(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
    for (auto& p : points)
      for (auto& v : p) v = u(rng);

    SelectionContext ctx;
    ctx.labelled = {make_id(0)};
    ctx.embeddings_labelled = table({points[0]});
    std::vector<std::vector<double>> rest(points.begin() + 1, points.end());
    for (std::size_t i = 1; i < points.size(); ++i) ctx.unlabelled.push_back(make_id(i));
    ctx.embeddings_unlabelled = table(rest);
    ctx.embeddings_unlabelled->dim = static_cast<std::size_t>(d);

    std::vector<std::size_t> centres{0};
    if (k > 1)
      for (auto id : select_coreset_greedy(ctx, k - 1).ids) centres.push_back(id.value);
    CHECK(centres.size() == k);
    CHECK(covering_radius(points, centres) <= 2.0 * optimal_radius(points, k) + 1e-12);
  }
}

TEST_CASE("random selection") {
  const auto pool = ids({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(select_random(pool, 4, 99).ids == select_random(pool, 4, 99).ids);
  auto all = select_random(pool, 10, 1).ids;
  std::sort(all.begin(), all.end());
  CHECK(all == pool);

  std::map<std::uint32_t, int> hits;
  const int trials = 20000;
  for (int s = 0; s < trials; ++s) ++hits[select_random(pool, 1, static_cast<std::uint64_t>(s)).ids[0].value];
  for (std::uint32_t id = 0; id < 10; ++id) {
    const double freq = static_cast<double>(hits[id]) / trials;
    CHECK(freq == doctest::Approx(0.1).epsilon(0.1));  // 0.1 +- 0.01
  }
}

TEST_CASE("strategy names round-trip") {
  for (auto kind : all_strategies()) CHECK(strategy_from_string(to_string(kind)) == kind);
  CHECK(all_strategies().size() == 9);
  CHECK_THROWS_AS(strategy_from_string("bald"), ConfigError);
}
