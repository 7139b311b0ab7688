#include "al/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include "al/data.hpp"
#include "al/error.hpp"
#include "al/random.hpp"

namespace al {
namespace {

// Sub-stream tags under a repetition seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kSelectStream = 3;

std::vector<int> training_labels(const ExperimentData& data, const ExperimentConfig& config,
                                 std::uint64_t rep_seed) {
  const auto& labels = data.pool.labels();
  if (config.label_noise_rate == 0.0) return labels;
  return inject_label_noise(labels, data.pool.class_count(), config.label_noise_rate,
                            derive_seed(rep_seed, {kNoiseStream}));
}

ClassifierSpec iteration_spec(const ClassifierSpec& base, std::uint64_t rep_seed, int iteration) {
  ClassifierSpec spec = base;
  spec.seed = derive_seed(base.seed, {rep_seed, static_cast<std::uint64_t>(iteration)});
  return spec;
}

EmbeddingTable to_table(std::size_t dim, std::vector<double> values) {
  return EmbeddingTable{dim, std::move(values)};
}

SelectionContext build_context(const TrainedModel& model, const Dataset& pool_data,
                               const Pool& pool, std::span<const int> labels,
                               StrategyKind kind, std::uint64_t seed) {
  SelectionContext ctx;
  ctx.rng_seed = seed;
  ctx.unlabelled = pool.unlabelled();
  ctx.labelled = pool.labelled();
  if (kind == StrategyKind::Random) return ctx;

  const bool embeddings = needs_embeddings(kind);
  auto unl = infer(model, pool_data, ctx.unlabelled, embeddings);
  ctx.probs = std::move(unl.outputs);
  ctx.predicted_class = std::move(unl.predicted_class);
  if (embeddings) {
    ctx.embeddings_unlabelled = to_table(model.embedding_dim(), std::move(*unl.embeddings));
    auto lab = infer(model, pool_data, ctx.labelled, true);
    ctx.embeddings_labelled = to_table(model.embedding_dim(), std::move(*lab.embeddings));
  }
  if (kind == StrategyKind::NCBalanced) {
    // Confusion of the current model on its own training set, as annotated.
    const auto lab = infer(model, pool_data, ctx.labelled, false);
    ConfusionMatrix cm(pool_data.class_count());
    for (std::size_t i = 0; i < ctx.labelled.size(); ++i)
      cm.add(labels[ctx.labelled[i].value], lab.predicted_class[i]);
    ctx.confusion = std::move(cm);
  }
  return ctx;
}

}  // namespace

void ExperimentConfig::validate(const ExperimentData& data) const {
  if (!(growth_fraction > 0.0) || !std::isfinite(growth_fraction))
    throw ConfigError("growth_fraction must be positive");
  if (!(stop_fraction_of_pool > 0.0 && stop_fraction_of_pool <= 1.0))
    throw ConfigError("stop_fraction_of_pool must lie in (0, 1]");
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (!(label_noise_rate >= 0.0 && label_noise_rate < 1.0))
    throw ConfigError("label_noise_rate must lie in [0, 1)");
  if (initial_per_class < 1) throw ConfigError("initial_per_class must be positive");
  if (strategy == StrategyKind::NCRange &&
      !(strategy_params.range_lo >= 0.0 && strategy_params.range_lo < strategy_params.range_hi &&
        strategy_params.range_hi <= 1.0))
    throw ConfigError("NC Range needs 0 <= lo < hi <= 1");
  if (!(strategy_params.balance_epsilon > 0.0)) throw ConfigError("balance epsilon must be positive");
  classifier.validate();

  const auto& pool = data.pool;
  if (pool.size() == 0) throw ConfigError("pool dataset is empty");
  if (data.test.size() == 0) throw ConfigError("test dataset is empty");
  if (data.test.feature_dim() != pool.feature_dim())
    throw ConfigError("test set has " + std::to_string(data.test.feature_dim()) +
                      " features, pool has " + std::to_string(pool.feature_dim()));
  if (data.test.class_count() != pool.class_count())
    throw ConfigError("test and pool class counts differ");
  if (const auto* flat = std::get_if<FlatHead>(&classifier.head)) {
    if (flat->class_count != pool.class_count())
      throw ConfigError("classifier has " + std::to_string(flat->class_count) +
                        " classes, dataset has " + std::to_string(pool.class_count()));
  } else {
    const auto& tree = std::get<HierarchicalHead>(classifier.head).tree;
    if (!pool.tree() || !(*pool.tree() == tree))
      throw ConfigError("hierarchical classifier tree does not match the dataset's label tree");
  }
  const auto hist = pool.class_histogram();
  for (std::size_t c = 0; c < hist.size(); ++c)
    if (hist[c] < static_cast<std::size_t>(initial_per_class))
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(hist[c]) +
                        " pool samples, fewer than initial_per_class = " +
                        std::to_string(initial_per_class));
  if (static_cast<std::size_t>(initial_per_class) * hist.size() < 10)
    throw ConfigError("the initial labelled set must hold at least 10 samples");
}

std::uint64_t repetition_seed(std::uint64_t master_seed, int rep) {
  return derive_seed(master_seed, {static_cast<std::uint64_t>(rep)});
}

std::size_t batch_size_for(std::size_t labelled, double growth_fraction) {
  // Absorbs representation error such as 0.2 * 1200 = 240.00000000000003.
  const double exact = growth_fraction * static_cast<double>(labelled);
  const auto n = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  return std::max<std::size_t>(n, 1);
}

std::vector<RunRecord> run_active_learning(const ExperimentData& data,
                                           const ExperimentConfig& config, int repetition) {
  config.validate(data);
  const auto rep_seed = repetition_seed(config.master_seed, repetition);
  const auto labels = training_labels(data, config, rep_seed);
  const auto initial =
      data::initial_seed_set(data.pool, config.initial_per_class, derive_seed(rep_seed, {kInitStream}));
  Pool pool(data.pool.size(), initial);
  const double target = config.stop_fraction_of_pool * static_cast<double>(pool.total());

  std::vector<RunRecord> records;
  for (int t = 0;; ++t) {
    const auto started = std::chrono::steady_clock::now();
    const auto spec = iteration_spec(config.classifier, rep_seed, t);
    const auto model = train(data.pool, pool.labelled(), labels, spec);
    auto ev = evaluate(model, data.test);

    RunRecord rec;
    rec.repetition = repetition;
    rec.iteration = t;
    rec.labelled_size = pool.labelled().size();
    rec.test_accuracy = ev.accuracy;
    rec.dev_accuracy = model.dev_accuracy_best;
    rec.confusion = std::move(ev.confusion);
    rec.seed = spec.seed;
    if (t == 0) rec.seed_ids = initial;

    bool done = (t > 0 && static_cast<double>(pool.labelled().size()) >= target) ||
                pool.unlabelled().empty();
    if (!done) {
      const auto n = std::min(batch_size_for(pool.labelled().size(), config.growth_fraction),
                              pool.unlabelled().size());
      const auto ctx = build_context(model, data.pool, pool, labels, config.strategy,
                                     derive_seed(rep_seed, {kSelectStream, static_cast<std::uint64_t>(t)}));
      auto outcome = select(config.strategy, ctx, n, config.strategy_params);
      if (outcome.terminate) {
        rec.terminated = true;
        rec.starved_class = outcome.starved_class;
        done = true;
      } else if (outcome.batch.empty()) {
        done = true;
      } else {
        pool.annotate(outcome.batch.ids);
        rec.selected_ids = std::move(outcome.batch.ids);
      }
    }
    rec.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    records.push_back(std::move(rec));
    if (done) break;
  }
  return records;
}

std::vector<int> inject_label_noise(std::span<const int> labels, int class_count, double rate,
                                    std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("noise rate must lie in [0, 1)");
  std::vector<int> noisy(labels.begin(), labels.end());
  const auto flips = static_cast<std::size_t>(std::llround(rate * static_cast<double>(labels.size())));
  if (flips == 0) return noisy;
  if (class_count < 2) throw ConfigError("label noise needs at least two classes");
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> other(1, class_count - 1);
  for (std::size_t k = 0; k < flips; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
    std::swap(order[k], order[pick(rng)]);
    auto& y = noisy[order[k]];
    y = (y + other(rng)) % class_count;
  }
  return noisy;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double population_std(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

std::vector<CurvePoint> aggregate_runs(const std::vector<std::vector<RunRecord>>& runs) {
  std::size_t longest = 0;
  for (const auto& run : runs) longest = std::max(longest, run.size());
  std::vector<CurvePoint> points;
  for (std::size_t t = 0; t < longest; ++t) {
    std::vector<double> accuracies;
    std::vector<std::size_t> sizes;
    for (const auto& run : runs) {
      if (t >= run.size()) continue;
      accuracies.push_back(run[t].test_accuracy);
      sizes.push_back(run[t].labelled_size);
    }
    std::sort(sizes.begin(), sizes.end());
    CurvePoint p;
    p.iteration = static_cast<int>(t);
    p.labelled_size = sizes[(sizes.size() - 1) / 2];
    p.accuracy_median = median(accuracies);
    p.accuracy_std = population_std(accuracies);
    p.repetitions = static_cast<int>(accuracies.size());
    points.push_back(p);
  }
  return points;
}

Curves repeat_runs(const ExperimentData& data, const ExperimentConfig& config, int jobs) {
  config.validate(data);
  const auto reps = static_cast<std::size_t>(config.repetitions);
  std::vector<std::vector<RunRecord>> runs(reps);
  std::vector<std::exception_ptr> errors(reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      try {
        runs[r] = run_active_learning(data, config, static_cast<int>(r));
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const auto threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, reps);
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  Curves curves;
  curves.strategy = std::string(to_string(config.strategy));
  curves.points = aggregate_runs(runs);
  curves.runs = std::move(runs);
  return curves;
}

std::vector<SampleId> labelled_set_at(const std::vector<RunRecord>& run, int iteration) {
  if (run.empty()) throw ConfigError("selector run has no records");
  if (iteration < 0 || static_cast<std::size_t>(iteration) >= run.size())
    throw ConfigError("checkpoint " + std::to_string(iteration) + " lies beyond the selector run (" +
                      std::to_string(run.size() - 1) + " selection iterations recorded)");
  std::vector<SampleId> ids = run.front().seed_ids;
  for (int t = 0; t < iteration; ++t)
    ids.insert(ids.end(), run[static_cast<std::size_t>(t)].selected_ids.begin(),
               run[static_cast<std::size_t>(t)].selected_ids.end());
  return ids;
}

std::vector<RunRecord> run_cross_training(const ExperimentData& data,
                                          const ExperimentConfig& config,
                                          const CrossTrainPlan& plan,
                                          const std::vector<RunRecord>& selector_run) {
  config.validate(data);
  if (!std::is_sorted(plan.checkpoints.begin(), plan.checkpoints.end()))
    throw ConfigError("cross-training checkpoints must be ascending");
  if (selector_run.empty() || selector_run.front().seed_ids.empty())
    throw ConfigError("selector run lacks its initial labelled set");
  const int rep = selector_run.front().repetition;
  const auto labels = training_labels(data, config, repetition_seed(config.master_seed, rep));
  const auto trainee = with_capacity(config.classifier, plan.trainee);

  std::vector<RunRecord> out;
  for (int k : plan.checkpoints) {
    const auto ids = labelled_set_at(selector_run, k);
    const auto started = std::chrono::steady_clock::now();
    auto spec = trainee;
    spec.seed = selector_run[static_cast<std::size_t>(k)].seed;
    const auto model = train(data.pool, ids, labels, spec);
    auto ev = evaluate(model, data.test);
    RunRecord rec;
    rec.repetition = rep;
    rec.iteration = k;
    rec.labelled_size = ids.size();
    rec.test_accuracy = ev.accuracy;
    rec.dev_accuracy = model.dev_accuracy_best;
    rec.confusion = std::move(ev.confusion);
    rec.seed = spec.seed;
    rec.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    out.push_back(std::move(rec));
  }
  return out;
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::LearningRate: return "learning_rate";
    case SweepAxis::BatchSize: return "batch_size";
    case SweepAxis::Dropout: return "dropout";
    case SweepAxis::NoiseRate: return "noise_rate";
  }
  return "unknown";
}

SweepAxis sweep_axis_from_string(std::string_view name) {
  for (auto axis : {SweepAxis::LearningRate, SweepAxis::BatchSize, SweepAxis::Dropout,
                    SweepAxis::NoiseRate})
    if (to_string(axis) == name) return axis;
  throw ConfigError("unsupported sweep axis '" + std::string(name) +
                    "' (expected learning_rate, batch_size, dropout or noise_rate)");
}

ExperimentConfig apply_sweep_value(ExperimentConfig base, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::LearningRate: base.classifier.learning_rate = value; break;
    case SweepAxis::BatchSize:
      if (value < 1 || value != std::floor(value))
        throw ConfigError("batch_size sweep values must be positive integers");
      base.classifier.batch_size = static_cast<int>(value);
      break;
    case SweepAxis::Dropout: base.classifier.dropout_rate = value; break;
    case SweepAxis::NoiseRate: base.label_noise_rate = value; break;
  }
  return base;
}

std::vector<SweepResult> run_sweep(const ExperimentData& data, const ExperimentConfig& base,
                                   SweepAxis axis, std::span<const double> values, int jobs) {
  if (values.empty()) throw ConfigError("a sweep needs at least one value");
  std::vector<ExperimentConfig> configs;
  for (double v : values) {
    configs.push_back(apply_sweep_value(base, axis, v));
    configs.back().validate(data);
  }
  std::vector<SweepResult> results;
  for (std::size_t i = 0; i < values.size(); ++i)
    results.push_back({values[i], repeat_runs(data, configs[i], jobs)});
  return results;
}

}  // namespace al
