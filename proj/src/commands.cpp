#include "al/commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "al/config.hpp"
#include "al/error.hpp"
#include "al/records.hpp"

namespace al::cli {
namespace {

namespace fs = std::filesystem;

int report_failure(std::ostream& err, const std::exception& e) {
  err << "error: " << e.what() << '\n';
  const bool input_problem = dynamic_cast<const ConfigError*>(&e) != nullptr ||
                             dynamic_cast<const ParseError*>(&e) != nullptr ||
                             dynamic_cast<const InputError*>(&e) != nullptr;
  return input_problem ? 2 : 1;
}

RunConfigFile load_with_overrides(const CommandOptions& options) {
  auto file = load_run_config(options.config);
  if (options.seed) file.experiment.master_seed = *options.seed;
  if (options.reps) file.experiment.repetitions = *options.reps;
  return file;
}

nlohmann::json resolved_config(const RunConfigFile& file, const ExperimentConfig& ex,
                               const LoadedData& loaded) {
  auto j = to_json(file);
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < ex.repetitions; ++r) seeds.push_back(repetition_seed(ex.master_seed, r));
  j["derived"] = {{"repetition_seeds", seeds},
                  {"pool_size", loaded.data.pool.size()},
                  {"test_size", loaded.data.test.size()},
                  {"class_count", loaded.data.pool.class_count()},
                  {"feature_dim", loaded.data.pool.feature_dim()}};
  if (!loaded.label_mapping.empty()) j["derived"]["label_mapping"] = loaded.label_mapping;
  return j;
}

void write_run_dir(const fs::path& dir, const nlohmann::json& resolved, const Curves& curves,
                   bool timings) {
  fs::create_directories(dir);
  write_file_atomic(dir / "records.jsonl", records_jsonl(curves.strategy, curves.runs, timings));
  write_file_atomic(dir / "curves.csv", curves_csv({curves}));
  write_file_atomic(dir / "resolved_config.json", resolved.dump(2) + "\n");
}

// Runs tasks on up to `jobs` threads; rethrows the first failure by index.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)),
                                             std::max<std::size_t>(count, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string sweep_dir_name(std::string_view axis, double value) {
  return std::string(axis) + "=" + format_double(value);
}

void summarize_run_dir(const fs::path& dir, std::ostream& out) {
  const auto rows = read_curves_csv(dir / "curves.csv");
  std::map<std::string, std::vector<CurvePoint>> by_strategy;
  for (const auto& row : rows) by_strategy[row.strategy].push_back(row.point);
  out << "== " << dir.filename().string() << '\n';
  for (const auto& [strategy, points] : by_strategy) {
    const auto& last = points.back();
    out << "strategy " << strategy << ": " << points.size() << " iterations, final labelled size "
        << last.labelled_size << ", final median accuracy " << std::fixed << std::setprecision(4)
        << last.accuracy_median << " (std " << last.accuracy_std << ", " << last.repetitions
        << " repetitions)\n"
        << std::defaultfloat;
  }
  if (fs::exists(dir / "records.jsonl")) {
    for (const auto& run : read_records(dir / "records.jsonl")) {
      for (const auto& r : run.records) {
        if (!r.terminated) continue;
        out << "  " << run.strategy << " repetition " << r.repetition << ": TERMINATE at iteration "
            << r.iteration << " (class " << r.starved_class << " has no samples left to draw)\n";
      }
    }
  }
}

void summarize_crosstrain(const fs::path& path, std::ostream& out) {
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != kCrossTrainHeader)
    throw ParseError(path.string() + ": unexpected header");
  // checkpoint -> trainee -> selector -> mean accuracy
  std::map<int, std::map<std::string, std::map<std::string, std::string>>> grid;
  std::vector<std::string> selectors;
  std::vector<std::string> trainees;  // file order, smallest capacity first
  std::string strategy;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 8) throw ParseError(path.string() + ": malformed row '" + line + "'");
    strategy = cells[0];
    grid[std::stoi(cells[1])][cells[3]][cells[2]] = cells[5];
    if (std::find(selectors.begin(), selectors.end(), cells[2]) == selectors.end())
      selectors.push_back(cells[2]);
    if (std::find(trainees.begin(), trainees.end(), cells[3]) == trainees.end())
      trainees.push_back(cells[3]);
  }
  out << "== cross-training (" << strategy << "), rows trainee, columns selector\n";
  for (const auto& [checkpoint, rows] : grid) {
    out << "checkpoint " << checkpoint << '\n' << std::setw(10) << "";
    for (const auto& s : selectors) out << std::setw(10) << s;
    out << '\n';
    for (const auto& trainee : trainees) {
      const auto found = rows.find(trainee);
      if (found == rows.end()) continue;
      const auto& row = found->second;
      out << std::setw(10) << trainee;
      for (const auto& s : selectors) {
        const auto it = row.find(s);
        std::string cell = "-";
        if (it != row.end()) {
          std::ostringstream v;
          v << std::fixed << std::setprecision(4) << std::stod(it->second);
          cell = v.str();
        }
        out << std::setw(10) << cell;
      }
      out << '\n';
    }
  }
}

}  // namespace

int cmd_run(const CommandOptions& options, std::ostream& err) {
  try {
    const auto file = load_with_overrides(options);
    const auto loaded = load_experiment_data(file.dataset);
    const auto ex = resolve_experiment(file, loaded.data);
    ex.validate(loaded.data);
    const auto curves = repeat_runs(loaded.data, ex, options.jobs);
    write_run_dir(options.out, resolved_config(file, ex, loaded), curves, options.timings);
    return 0;
  } catch (const std::exception& e) {
    return report_failure(err, e);
  }
}

int cmd_sweep(const CommandOptions& options, const std::string& axis_name,
              const std::vector<double>& values, std::ostream& err) {
  try {
    const auto axis = sweep_axis_from_string(axis_name);
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    const auto file = load_with_overrides(options);
    const auto loaded = load_experiment_data(file.dataset);
    const auto base = resolve_experiment(file, loaded.data);

    std::vector<ExperimentConfig> configs;
    std::vector<RunConfigFile> files;
    for (double v : values) {
      configs.push_back(apply_sweep_value(base, axis, v));
      configs.back().validate(loaded.data);
      auto f = file;
      f.experiment = apply_sweep_value(file.experiment, axis, v);
      files.push_back(std::move(f));
    }
    std::vector<Curves> results(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      results[i] = repeat_runs(loaded.data, configs[i], options.jobs);

    std::vector<std::string> dirs;
    for (std::size_t i = 0; i < values.size(); ++i) {
      dirs.push_back(sweep_dir_name(to_string(axis), values[i]));
      write_run_dir(options.out / dirs.back(), resolved_config(files[i], configs[i], loaded),
                    results[i], options.timings);
    }
    const nlohmann::json summary{{"axis", to_string(axis)}, {"values", values}, {"directories", dirs}};
    write_file_atomic(options.out / "sweep.json", summary.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    return report_failure(err, e);
  }
}

int cmd_crosstrain(const CommandOptions& options, std::ostream& err) {
  try {
    const auto file = load_with_overrides(options);
    if (!file.crosstrain) throw ConfigError("config has no crosstrain section");
    const auto& section = *file.crosstrain;
    const auto loaded = load_experiment_data(file.dataset);
    const auto& data = loaded.data;
    const auto ex = resolve_experiment(file, data);
    ex.validate(data);

    // Selector name -> runs (one per repetition).
    std::vector<std::string> selector_names;
    for (auto c : section.capacities) selector_names.emplace_back(to_string(c));
    selector_names.emplace_back("random");
    std::vector<std::vector<std::vector<RunRecord>>> selector_runs(selector_names.size());

    if (section.selector_runs) {
      for (std::size_t s = 0; s < selector_names.size(); ++s) {
        const auto log = *section.selector_runs / selector_names[s] / "records.jsonl";
        if (!fs::exists(log))
          throw ConfigError("selector run log " + log.string() +
                            " not found; run crosstrain once without crosstrain.selector_runs "
                            "to generate selector runs, then point selector_runs at its "
                            "selectors/ directory");
        for (auto& run : read_records(log)) selector_runs[s].push_back(std::move(run.records));
        if (selector_runs[s].empty()) throw ConfigError("selector run log " + log.string() + " is empty");
      }
    } else {
      std::vector<ExperimentConfig> selector_configs;
      for (auto c : section.capacities) {
        auto cfg = ex;
        cfg.classifier = with_capacity(ex.classifier, c);
        selector_configs.push_back(cfg);
      }
      auto random_cfg = selector_configs.front();
      random_cfg.strategy = StrategyKind::Random;
      selector_configs.push_back(random_cfg);
      for (std::size_t s = 0; s < selector_configs.size(); ++s)
        selector_runs[s] = repeat_runs(data, selector_configs[s], options.jobs).runs;
    }

    struct Task {
      std::size_t selector;
      Capacity trainee;
      std::size_t run;
    };
    std::vector<Task> tasks;
    for (auto trainee : section.capacities)
      for (std::size_t s = 0; s < selector_names.size(); ++s)
        for (std::size_t r = 0; r < selector_runs[s].size(); ++r) tasks.push_back({s, trainee, r});
    std::vector<std::vector<RunRecord>> results(tasks.size());
    parallel_for(tasks.size(), options.jobs, [&](std::size_t i) {
      const auto& task = tasks[i];
      const auto& run = selector_runs[task.selector][task.run];
      CrossTrainPlan plan;
      plan.trainee = task.trainee;
      plan.checkpoints.clear();
      for (int k : section.checkpoints)
        if (static_cast<std::size_t>(k) < run.size()) plan.checkpoints.push_back(k);
      if (!plan.checkpoints.empty()) results[i] = run_cross_training(data, ex, plan, run);
    });

    // (checkpoint, trainee, selector) -> accuracies and labelled size
    struct Cell {
      std::vector<double> accuracies;
      std::size_t labelled_size = 0;
    };
    std::map<std::tuple<int, int, std::size_t>, Cell> cells;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      for (const auto& rec : results[i]) {
        auto& cell = cells[{rec.iteration, static_cast<int>(tasks[i].trainee), tasks[i].selector}];
        if (cell.accuracies.empty()) cell.labelled_size = rec.labelled_size;
        cell.accuracies.push_back(rec.test_accuracy);
      }
    }
    std::string table = std::string(kCrossTrainHeader) + "\n";
    for (const auto& [key, cell] : cells) {
      const auto [checkpoint, trainee, selector] = key;
      double mean = 0;
      for (double a : cell.accuracies) mean += a;
      mean /= static_cast<double>(cell.accuracies.size());
      table += std::string(to_string(ex.strategy)) + ',' + std::to_string(checkpoint) + ',' +
               selector_names[selector] + ',' + std::string(to_string(static_cast<Capacity>(trainee))) +
               ',' + std::to_string(cell.labelled_size) + ',' + format_double(mean) + ',' +
               format_double(population_std(cell.accuracies)) + ',' +
               std::to_string(cell.accuracies.size()) + '\n';
    }

    fs::create_directories(options.out);
    if (!section.selector_runs) {
      for (std::size_t s = 0; s < selector_names.size(); ++s) {
        const auto dir = options.out / "selectors" / selector_names[s];
        fs::create_directories(dir);
        const auto strategy = selector_names[s] == "random" ? to_string(StrategyKind::Random)
                                                            : to_string(ex.strategy);
        write_file_atomic(dir / "records.jsonl",
                          records_jsonl(strategy, selector_runs[s], options.timings));
      }
    }
    write_file_atomic(options.out / "crosstrain.csv", table);
    write_file_atomic(options.out / "resolved_config.json",
                      resolved_config(file, ex, loaded).dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    return report_failure(err, e);
  }
}

int cmd_report(const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  try {
    if (!fs::is_directory(out_dir)) throw ParseError("no such results directory: " + out_dir.string());
    std::vector<fs::path> run_dirs;
    if (fs::exists(out_dir / "curves.csv")) run_dirs.push_back(out_dir);
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(out_dir))
      if (entry.is_directory() && fs::exists(entry.path() / "curves.csv")) subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());
    run_dirs.insert(run_dirs.end(), subdirs.begin(), subdirs.end());
    const bool has_crosstrain = fs::exists(out_dir / "crosstrain.csv");
    if (run_dirs.empty() && !has_crosstrain)
      throw ParseError("no curves.csv or crosstrain.csv found under " + out_dir.string());

    for (const auto& dir : run_dirs) summarize_run_dir(dir, out);
    if (has_crosstrain) {
      summarize_crosstrain(out_dir / "crosstrain.csv", out);
      const auto selectors = out_dir / "selectors";
      if (fs::is_directory(selectors)) {
        for (const auto& entry : fs::directory_iterator(selectors)) {
          if (!fs::exists(entry.path() / "records.jsonl")) continue;
          for (const auto& run : read_records(entry.path() / "records.jsonl"))
            for (const auto& r : run.records)
              if (r.terminated)
                out << "  selector " << entry.path().filename().string() << " repetition "
                    << r.repetition << ": TERMINATE at iteration " << r.iteration << '\n';
        }
      }
    }
    return 0;
  } catch (const std::exception& e) {
    return report_failure(err, e);
  }
}

}  // namespace al::cli
