#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "al/classifier.hpp"
#include "al/core.hpp"
#include "al/strategies.hpp"

namespace al {

/// Unlabelled pool (labels act as the annotation oracle) plus held-out test set.
struct ExperimentData {
  Dataset pool;
  Dataset test;
};

struct ExperimentConfig {
  StrategyKind strategy = StrategyKind::Random;
  StrategyParams strategy_params;
  ClassifierSpec classifier;
  int initial_per_class = 100;
  double growth_fraction = 0.20;
  double stop_fraction_of_pool = 1.0 / 3.0;
  int repetitions = 5;
  double label_noise_rate = 0.0;
  std::uint64_t master_seed = 0;

  /// Throws ConfigError when the config cannot run on `data`.
  void validate(const ExperimentData& data) const;
};

/// One iteration of one run: the model trained on the current labelled set,
/// its scores, and the batch it selected (empty on the final record).
struct RunRecord {
  int repetition = 0;
  int iteration = 0;
  std::size_t labelled_size = 0;
  double test_accuracy = 0.0;
  double dev_accuracy = 0.0;
  ConfusionMatrix confusion;  // on the test set
  std::vector<SampleId> seed_ids;  // initial labelled set, iteration 0 only
  std::vector<SampleId> selected_ids;
  double wall_time_seconds = 0.0;
  std::uint64_t seed = 0;  // training seed of this iteration
  bool terminated = false;  // strategy signalled TERMINATE after this record
  int starved_class = -1;
};

/// Seed of repetition `rep`; everything inside a run derives from it.
std::uint64_t repetition_seed(std::uint64_t master_seed, int rep);

/// ceil(growth * labelled), at least 1.
std::size_t batch_size_for(std::size_t labelled, double growth_fraction);

/// Runs batched pool-based active learning for one repetition. The initial
/// set holds initial_per_class samples per class and depends only on
/// master_seed and the repetition, so all strategies share it. Each iteration
/// trains from scratch, evaluates on the test set, then queries a batch of
/// batch_size_for(|L|). Stops once a selection has brought |L| to
/// stop_fraction_of_pool of the pool, when the pool is exhausted, or when the
/// strategy signals TERMINATE.
std::vector<RunRecord> run_active_learning(const ExperimentData& data,
                                           const ExperimentConfig& config, int repetition = 0);

/// Copy of `labels` with exactly round(rate * labels.size()) entries moved to
/// a uniformly chosen different class.
std::vector<int> inject_label_noise(std::span<const int> labels, int class_count, double rate,
                                    std::uint64_t seed);

struct CurvePoint {
  int iteration = 0;
  std::size_t labelled_size = 0;
  double accuracy_median = 0.0;
  double accuracy_std = 0.0;
  int repetitions = 0;
};

struct Curves {
  std::string strategy;
  std::vector<CurvePoint> points;
  std::vector<std::vector<RunRecord>> runs;
};

/// Median and population standard deviation of test accuracy per iteration
/// across runs; `repetitions` counts the runs reaching that iteration.
std::vector<CurvePoint> aggregate_runs(const std::vector<std::vector<RunRecord>>& runs);

double median(std::vector<double> values);
double population_std(const std::vector<double>& values);

/// config.repetitions runs on up to `jobs` threads; results do not depend on `jobs`.
Curves repeat_runs(const ExperimentData& data, const ExperimentConfig& config, int jobs = 1);

struct CrossTrainPlan {
  Capacity selector = Capacity::Max;
  Capacity trainee = Capacity::Max;
  std::vector<int> checkpoints{3, 5, 10, 15};
};

/// Labelled ids of a run after `iteration` selections.
std::vector<SampleId> labelled_set_at(const std::vector<RunRecord>& run, int iteration);

/// Trains the trainee capacity from scratch on the selector run's labelled
/// set at each checkpoint (same training seed as the selector used there).
/// Throws ConfigError if a checkpoint lies beyond the run.
std::vector<RunRecord> run_cross_training(const ExperimentData& data,
                                          const ExperimentConfig& config,
                                          const CrossTrainPlan& plan,
                                          const std::vector<RunRecord>& selector_run);

enum class SweepAxis { LearningRate, BatchSize, Dropout, NoiseRate };

std::string_view to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(std::string_view name);

/// `base` with the axis set to `value`.
ExperimentConfig apply_sweep_value(ExperimentConfig base, SweepAxis axis, double value);

struct SweepResult {
  double value = 0.0;
  Curves curves;
};

std::vector<SweepResult> run_sweep(const ExperimentData& data, const ExperimentConfig& base,
                                   SweepAxis axis, std::span<const double> values, int jobs = 1);

}  // namespace al
