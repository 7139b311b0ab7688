#include "al/strategies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "al/error.hpp"

namespace al {
namespace {

constexpr std::array<std::pair<StrategyKind, std::string_view>, 9> kNames{{
    {StrategyKind::NCLow, "nc_low"},
    {StrategyKind::NCRange, "nc_range"},
    {StrategyKind::NCDiversity, "nc_diversity"},
    {StrategyKind::NCBalanced, "nc_balanced"},
    {StrategyKind::Margin, "margin"},
    {StrategyKind::EntropyHigh, "entropy_high"},
    {StrategyKind::SOSL, "sosl"},
    {StrategyKind::CoreSetGreedy, "coreset_greedy"},
    {StrategyKind::Random, "random"},
}};

void require_nonempty(std::span<const double> p) {
  if (p.empty()) throw InputError("empty probability vector");
}

void require_probs(const SelectionContext& ctx) {
  if (ctx.probs.size() != ctx.unlabelled.size())
    throw ConfigError("selection context needs one probability vector per unlabelled sample");
}

// Sorts indices by key in the given direction, ties by ascending id.
std::vector<std::size_t> order_by(std::span<const SampleId> ids, std::span<const double> keys,
                                  Direction direction) {
  std::vector<std::size_t> idx(ids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b])
      return direction == Direction::Maximize ? keys[a] > keys[b] : keys[a] < keys[b];
    return ids[a] < ids[b];
  });
  return idx;
}

std::vector<double> per_sample(const SelectionContext& ctx, double (*score)(std::span<const double>)) {
  require_probs(ctx);
  std::vector<double> out(ctx.probs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = score(ctx.probs[i]);
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

const EmbeddingTable& require_embeddings(const std::optional<EmbeddingTable>& table,
                                         std::size_t rows, const char* which) {
  if (!table) throw ConfigError(std::string("strategy needs ") + which + " embeddings");
  if (table->rows() != rows)
    throw ConfigError(std::string(which) + " embeddings do not cover the id list");
  return *table;
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  for (auto [k, name] : kNames)
    if (k == kind) return name;
  return "unknown";
}

StrategyKind strategy_from_string(std::string_view name) {
  for (auto [k, n] : kNames)
    if (n == name) return k;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

const std::vector<StrategyKind>& all_strategies() {
  static const std::vector<StrategyKind> kinds = [] {
    std::vector<StrategyKind> v;
    for (auto [k, name] : kNames) v.push_back(k);
    return v;
  }();
  return kinds;
}

bool needs_embeddings(StrategyKind kind) {
  return kind == StrategyKind::NCDiversity || kind == StrategyKind::CoreSetGreedy;
}

double max_probability(std::span<const double> p) {
  require_nonempty(p);
  return *std::max_element(p.begin(), p.end());
}

double score_least_confident(std::span<const double> p) { return 1.0 - max_probability(p); }

double score_margin(std::span<const double> p) {
  if (p.size() < 2) throw InputError("margin needs at least two classes");
  double first = -std::numeric_limits<double>::infinity();
  double second = first;
  for (double v : p) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

// Sums are accumulated in extended precision so the uniform distribution
// lands exactly on its closed-form value.
double score_entropy(std::span<const double> p) {
  require_nonempty(p);
  long double h = 0;
  for (double v : p)
    if (v > 0) h -= static_cast<long double>(v) * std::log(static_cast<long double>(v));
  return static_cast<double>(h);
}

double score_sosl(std::span<const double> p) {
  require_nonempty(p);
  long double s = 0;
  for (double v : p) s += static_cast<long double>(v) * static_cast<long double>(v);
  return static_cast<double>(1.0L - s);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0;
  double na = 0;
  double nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  // Two all-zero vectors are treated as identical, one zero vector as unrelated.
  if (na == 0 && nb == 0) return 1.0;
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

QueryBatch select_top_n(std::span<const SampleId> ids, std::span<const double> scores,
                        std::size_t n, Direction direction) {
  if (n == 0) throw InputError("batch size must be at least 1");
  if (ids.size() != scores.size()) throw InputError("ids and scores differ in length");
  const auto order = order_by(ids, scores, direction);
  QueryBatch batch;
  const std::size_t take = std::min(n, ids.size());
  for (std::size_t k = 0; k < take; ++k) {
    batch.ids.push_back(ids[order[k]]);
    batch.scores.push_back(scores[order[k]]);
  }
  return batch;
}

QueryBatch select_nc_low(const SelectionContext& ctx, std::size_t n) {
  return select_top_n(ctx.unlabelled, per_sample(ctx, score_least_confident), n,
                      Direction::Maximize);
}

QueryBatch select_margin(const SelectionContext& ctx, std::size_t n) {
  return select_top_n(ctx.unlabelled, per_sample(ctx, score_margin), n, Direction::Minimize);
}

QueryBatch select_entropy_high(const SelectionContext& ctx, std::size_t n) {
  return select_top_n(ctx.unlabelled, per_sample(ctx, score_entropy), n, Direction::Maximize);
}

QueryBatch select_sosl(const SelectionContext& ctx, std::size_t n) {
  return select_top_n(ctx.unlabelled, per_sample(ctx, score_sosl), n, Direction::Maximize);
}

QueryBatch select_nc_range(const SelectionContext& ctx, std::size_t n, double lo, double hi) {
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
    throw ConfigError("NC Range needs 0 <= lo < hi <= 1");
  if (n == 0) throw InputError("batch size must be at least 1");
  const auto top = per_sample(ctx, max_probability);
  const double mid = 0.5 * (lo + hi);

  std::vector<SampleId> inside_ids;
  std::vector<double> inside_keys;
  std::vector<SampleId> outside_ids;
  std::vector<double> outside_keys;
  for (std::size_t i = 0; i < top.size(); ++i) {
    const double m = top[i];
    if (m >= lo && m <= hi) {
      inside_ids.push_back(ctx.unlabelled[i]);
      inside_keys.push_back(std::abs(m - mid));
    } else {
      outside_ids.push_back(ctx.unlabelled[i]);
      outside_keys.push_back(m < lo ? lo - m : m - hi);
    }
  }
  QueryBatch batch;
  for (std::size_t k : order_by(inside_ids, inside_keys, Direction::Minimize)) {
    if (batch.size() == n) break;
    batch.ids.push_back(inside_ids[k]);
    batch.scores.push_back(inside_keys[k]);
  }
  for (std::size_t k : order_by(outside_ids, outside_keys, Direction::Minimize)) {
    if (batch.size() == n) break;
    batch.ids.push_back(outside_ids[k]);
    batch.scores.push_back(outside_keys[k]);
  }
  return batch;
}

QueryBatch select_nc_diversity(const SelectionContext& ctx, std::size_t n,
                               double similarity_threshold) {
  if (n == 0) throw InputError("batch size must be at least 1");
  const auto top = per_sample(ctx, max_probability);
  const auto& unl = require_embeddings(ctx.embeddings_unlabelled, ctx.unlabelled.size(), "unlabelled");
  const auto& lab = require_embeddings(ctx.embeddings_labelled, ctx.labelled.size(), "labelled");

  QueryBatch batch;
  std::vector<std::size_t> accepted;
  for (std::size_t i : order_by(ctx.unlabelled, top, Direction::Minimize)) {
    if (batch.size() == n) break;
    const auto e = unl.row(i);
    bool distinct = true;
    for (std::size_t j = 0; j < lab.rows() && distinct; ++j)
      distinct = cosine_similarity(e, lab.row(j)) < similarity_threshold;
    for (std::size_t j = 0; j < accepted.size() && distinct; ++j)
      distinct = cosine_similarity(e, unl.row(accepted[j])) < similarity_threshold;
    if (!distinct) continue;
    accepted.push_back(i);
    batch.ids.push_back(ctx.unlabelled[i]);
    batch.scores.push_back(top[i]);
  }
  return batch;
}

std::vector<std::size_t> balanced_quotas(const ConfusionMatrix& confusion, std::size_t n,
                                         double epsilon) {
  const int classes = confusion.class_count();
  std::vector<double> weight(static_cast<std::size_t>(classes));
  double total = 0;
  for (int c = 0; c < classes; ++c) {
    // A class absent from the evaluation set has no measured recall; treat it
    // like a zero-recall class.
    const double recall = confusion.recall(c).value_or(0.0);
    weight[static_cast<std::size_t>(c)] = 1.0 / std::max(recall, epsilon);
    total += weight[static_cast<std::size_t>(c)];
  }
  std::vector<std::size_t> quota(static_cast<std::size_t>(classes));
  std::vector<double> remainder(static_cast<std::size_t>(classes));
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < quota.size(); ++c) {
    const double exact = static_cast<double>(n) * weight[c] / total;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += quota[c];
  }
  std::vector<std::size_t> order(quota.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++quota[order[k % order.size()]];
  return quota;
}

SelectionOutcome select_nc_balanced(const SelectionContext& ctx, std::size_t n, double epsilon) {
  if (!ctx.confusion) throw ConfigError("NC Balanced needs a confusion matrix");
  if (ctx.predicted_class.size() != ctx.unlabelled.size())
    throw ConfigError("NC Balanced needs a predicted class per unlabelled sample");
  const auto top = per_sample(ctx, max_probability);
  const auto quotas = balanced_quotas(*ctx.confusion, n, epsilon);

  std::vector<std::vector<std::size_t>> by_class(quotas.size());
  for (std::size_t i = 0; i < ctx.unlabelled.size(); ++i) {
    const int c = ctx.predicted_class[i];
    if (c < 0 || static_cast<std::size_t>(c) >= quotas.size())
      throw InputError("predicted class outside the confusion matrix");
    by_class[static_cast<std::size_t>(c)].push_back(i);
  }

  SelectionOutcome out;
  for (std::size_t c = 0; c < quotas.size(); ++c) {
    if (by_class[c].size() < quotas[c]) {
      out.terminate = true;
      out.starved_class = static_cast<int>(c);
      out.batch = {};
      return out;
    }
    auto& members = by_class[c];
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      if (top[a] != top[b]) return top[a] < top[b];
      return ctx.unlabelled[a] < ctx.unlabelled[b];
    });
    for (std::size_t k = 0; k < quotas[c]; ++k) {
      out.batch.ids.push_back(ctx.unlabelled[members[k]]);
      out.batch.scores.push_back(top[members[k]]);
    }
  }
  return out;
}

QueryBatch select_coreset_greedy(const SelectionContext& ctx, std::size_t n) {
  if (n == 0) throw InputError("batch size must be at least 1");
  const auto& unl = require_embeddings(ctx.embeddings_unlabelled, ctx.unlabelled.size(), "unlabelled");
  const auto& lab = require_embeddings(ctx.embeddings_labelled, ctx.labelled.size(), "labelled");
  if (lab.rows() == 0) throw ConfigError("core-set selection needs a non-empty labelled set");

  std::vector<double> nearest(unl.rows(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < unl.rows(); ++i)
    for (std::size_t j = 0; j < lab.rows(); ++j)
      nearest[i] = std::min(nearest[i], squared_distance(unl.row(i), lab.row(j)));

  QueryBatch batch;
  std::vector<std::uint8_t> taken(unl.rows(), 0);
  const std::size_t take = std::min(n, unl.rows());
  for (std::size_t k = 0; k < take; ++k) {
    // Ids are ascending, so the first maximum is the smallest id.
    std::size_t best = unl.rows();
    for (std::size_t i = 0; i < unl.rows(); ++i) {
      if (taken[i]) continue;
      if (best == unl.rows() || nearest[i] > nearest[best]) best = i;
    }
    taken[best] = 1;
    batch.ids.push_back(ctx.unlabelled[best]);
    batch.scores.push_back(std::sqrt(nearest[best]));
    const auto centre = unl.row(best);
    for (std::size_t i = 0; i < unl.rows(); ++i)
      if (!taken[i]) nearest[i] = std::min(nearest[i], squared_distance(unl.row(i), centre));
  }
  return batch;
}

QueryBatch select_random(std::span<const SampleId> unlabelled, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("batch size must be at least 1");
  std::vector<SampleId> ids(unlabelled.begin(), unlabelled.end());
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  const std::size_t take = std::min(n, ids.size());
  QueryBatch batch;
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, ids.size() - 1);
    std::swap(ids[k], ids[pick(rng)]);
    batch.ids.push_back(ids[k]);
    batch.scores.push_back(0.0);
  }
  return batch;
}

SelectionOutcome select(StrategyKind kind, const SelectionContext& ctx, std::size_t n,
                        const StrategyParams& params) {
  switch (kind) {
    case StrategyKind::NCLow: return {select_nc_low(ctx, n)};
    case StrategyKind::NCRange: return {select_nc_range(ctx, n, params.range_lo, params.range_hi)};
    case StrategyKind::NCDiversity:
      return {select_nc_diversity(ctx, n, params.similarity_threshold)};
    case StrategyKind::NCBalanced: return select_nc_balanced(ctx, n, params.balance_epsilon);
    case StrategyKind::Margin: return {select_margin(ctx, n)};
    case StrategyKind::EntropyHigh: return {select_entropy_high(ctx, n)};
    case StrategyKind::SOSL: return {select_sosl(ctx, n)};
    case StrategyKind::CoreSetGreedy: return {select_coreset_greedy(ctx, n)};
    case StrategyKind::Random: return {select_random(ctx.unlabelled, n, ctx.rng_seed)};
  }
  throw ConfigError("unhandled strategy");
}

}  // namespace al
