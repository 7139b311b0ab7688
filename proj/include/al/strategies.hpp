#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "al/core.hpp"

namespace al {

enum class StrategyKind {
  NCLow,
  NCRange,
  NCDiversity,
  NCBalanced,
  Margin,
  EntropyHigh,
  SOSL,
  CoreSetGreedy,
  Random,
};

/// Stable serialized names: "nc_low", "nc_range", ..., "random".
std::string_view to_string(StrategyKind kind);
/// Throws ConfigError for an unknown name.
StrategyKind strategy_from_string(std::string_view name);
const std::vector<StrategyKind>& all_strategies();

/// True when the strategy reads embeddings rather than only probabilities.
bool needs_embeddings(StrategyKind kind);

struct StrategyParams {
  double range_lo = 0.1;
  double range_hi = 0.9;
  double similarity_threshold = 0.95;
  double balance_epsilon = 1e-3;
};

enum class Direction { Maximize, Minimize };

// ---------------------------------------------------------------------------
// Per-sample uncertainty scores. All throw InputError on an empty vector.

/// 1 - max_i p_i.
double score_least_confident(std::span<const double> p);
/// Difference of the two largest entries. Needs at least two classes.
double score_margin(std::span<const double> p);
/// Shannon entropy in nats, 0 log 0 = 0.
double score_entropy(std::span<const double> p);
/// Simpson diversity 1 - sum_i p_i^2.
double score_sosl(std::span<const double> p);

double max_probability(std::span<const double> p);

// ---------------------------------------------------------------------------
// Selection

/// Dense row-major table of embeddings, one row per id of the owning list.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

/// Everything a strategy may look at. Per-sample vectors are parallel to
/// `unlabelled` (ascending ids) or to `labelled`.
struct SelectionContext {
  std::vector<SampleId> unlabelled;
  std::vector<ProbabilityVector> probs;
  std::vector<int> predicted_class;
  std::optional<EmbeddingTable> embeddings_unlabelled;

  std::vector<SampleId> labelled;
  std::optional<EmbeddingTable> embeddings_labelled;

  std::optional<ConfusionMatrix> confusion;
  std::uint64_t rng_seed = 0;
};

struct SelectionOutcome {
  QueryBatch batch;
  /// NC Balanced could not fill a class quota; the batch is empty.
  bool terminate = false;
  int starved_class = -1;
};

/// Top-n ids by score in the given direction; ties go to the smaller id.
/// Throws InputError for n == 0 or mismatched lengths.
QueryBatch select_top_n(std::span<const SampleId> ids, std::span<const double> scores,
                        std::size_t n, Direction direction);

QueryBatch select_nc_low(const SelectionContext& ctx, std::size_t n);
QueryBatch select_margin(const SelectionContext& ctx, std::size_t n);
QueryBatch select_entropy_high(const SelectionContext& ctx, std::size_t n);
QueryBatch select_sosl(const SelectionContext& ctx, std::size_t n);

/// In-range samples (max probability within [lo, hi]) nearest the midpoint
/// first; any shortfall is filled with the samples nearest the interval.
QueryBatch select_nc_range(const SelectionContext& ctx, std::size_t n, double lo, double hi);

/// Walks samples by ascending max probability and accepts one only if its
/// cosine similarity to every labelled and already-accepted embedding is
/// below `similarity_threshold`. May return fewer than n.
QueryBatch select_nc_diversity(const SelectionContext& ctx, std::size_t n,
                               double similarity_threshold);

/// Integer quotas proportional to 1 / max(recall_i, epsilon), rounded by
/// largest remainder (ties to the lower class) so they sum to n.
std::vector<std::size_t> balanced_quotas(const ConfusionMatrix& confusion, std::size_t n,
                                         double epsilon = 1e-3);

SelectionOutcome select_nc_balanced(const SelectionContext& ctx, std::size_t n,
                                    double epsilon = 1e-3);

/// Sequential farthest-point selection against labelled plus picked centres.
QueryBatch select_coreset_greedy(const SelectionContext& ctx, std::size_t n);

QueryBatch select_random(std::span<const SampleId> unlabelled, std::size_t n, std::uint64_t seed);

/// Dispatches on `kind`.
SelectionOutcome select(StrategyKind kind, const SelectionContext& ctx, std::size_t n,
                        const StrategyParams& params);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace al
