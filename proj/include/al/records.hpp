#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "al/engine.hpp"

namespace al {

inline constexpr int kRecordSchemaVersion = 1;

/// Header of the curves table.
inline constexpr const char* kCurvesHeader =
    "strategy,iteration,labelled_size,accuracy_median,accuracy_std,repetitions";

/// One JSON object per line. Wall time is written only when `timings` is set
/// so that logs stay byte-identical across reruns by default.
std::string records_jsonl(std::string_view strategy, const std::vector<std::vector<RunRecord>>& runs,
                          bool timings = false);

struct LoggedRun {
  std::string strategy;
  std::vector<RunRecord> records;
};

/// Groups the records of a log by repetition. Throws ParseError on malformed
/// lines or an unknown schema version.
std::vector<LoggedRun> read_records(const std::filesystem::path& path);

std::string curves_csv(const std::vector<Curves>& curves);

struct CurveRow {
  std::string strategy;
  CurvePoint point;
};

std::vector<CurveRow> read_curves_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double value);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace al
