#include "al/records.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "al/error.hpp"
#include "al/serialization.hpp"

namespace al {
namespace {

nlohmann::json ids_to_json(const std::vector<SampleId>& ids) {
  auto arr = nlohmann::json::array();
  for (SampleId id : ids) arr.push_back(id.value);
  return arr;
}

std::vector<SampleId> ids_from_json(const nlohmann::json& j) {
  std::vector<SampleId> ids;
  for (const auto& v : j) ids.push_back(SampleId{v.get<std::uint32_t>()});
  return ids;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return {buf.data(), res.ptr};
}

std::string records_jsonl(std::string_view strategy, const std::vector<std::vector<RunRecord>>& runs,
                          bool timings) {
  std::string out;
  for (const auto& run : runs) {
    for (const auto& r : run) {
      nlohmann::json j{{"schema_version", kRecordSchemaVersion},
                       {"strategy", strategy},
                       {"repetition", r.repetition},
                       {"iteration", r.iteration},
                       {"labelled_size", r.labelled_size},
                       {"test_accuracy", r.test_accuracy},
                       {"dev_accuracy", r.dev_accuracy},
                       {"confusion", confusion_to_json(r.confusion)},
                       {"selected_ids", ids_to_json(r.selected_ids)},
                       {"seed", r.seed},
                       {"terminated", r.terminated}};
      if (!r.seed_ids.empty()) j["seed_ids"] = ids_to_json(r.seed_ids);
      if (r.terminated) j["starved_class"] = r.starved_class;
      if (timings) j["wall_time_seconds"] = r.wall_time_seconds;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<LoggedRun> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read record log " + path.string());
  std::map<std::pair<std::string, int>, LoggedRun> runs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("schema_version").get<int>() != kRecordSchemaVersion)
        throw ParseError(path.string() + ": line " + std::to_string(number) +
                         ": unsupported record schema version");
      RunRecord r;
      r.repetition = j.at("repetition").get<int>();
      r.iteration = j.at("iteration").get<int>();
      r.labelled_size = j.at("labelled_size").get<std::size_t>();
      r.test_accuracy = j.at("test_accuracy").get<double>();
      r.dev_accuracy = j.at("dev_accuracy").get<double>();
      r.confusion = confusion_from_json(j.at("confusion"));
      r.selected_ids = ids_from_json(j.at("selected_ids"));
      if (j.contains("seed_ids")) r.seed_ids = ids_from_json(j.at("seed_ids"));
      r.seed = j.at("seed").get<std::uint64_t>();
      r.terminated = j.at("terminated").get<bool>();
      r.starved_class = j.value("starved_class", -1);
      r.wall_time_seconds = j.value("wall_time_seconds", 0.0);
      const auto strategy = j.at("strategy").get<std::string>();
      auto& run = runs[{strategy, r.repetition}];
      run.strategy = strategy;
      run.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": line " + std::to_string(number) + ": " + e.what());
    }
  }
  std::vector<LoggedRun> out;
  for (auto& [key, run] : runs) {
    std::sort(run.records.begin(), run.records.end(),
              [](const RunRecord& a, const RunRecord& b) { return a.iteration < b.iteration; });
    out.push_back(std::move(run));
  }
  return out;
}

std::string curves_csv(const std::vector<Curves>& curves) {
  std::string out = kCurvesHeader;
  out += '\n';
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      out += c.strategy + ',' + std::to_string(p.iteration) + ',' + std::to_string(p.labelled_size) +
             ',' + format_double(p.accuracy_median) + ',' + format_double(p.accuracy_std) + ',' +
             std::to_string(p.repetitions) + '\n';
    }
  }
  return out;
}

std::vector<CurveRow> read_curves_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read curves table " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCurvesHeader)
    throw ParseError(path.string() + ": unexpected header");
  std::vector<CurveRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 6)
      throw ParseError(path.string() + ": row " + std::to_string(number) + " has " +
                       std::to_string(cells.size()) + " fields");
    try {
      CurveRow row;
      row.strategy = cells[0];
      row.point.iteration = std::stoi(cells[1]);
      row.point.labelled_size = std::stoul(cells[2]);
      row.point.accuracy_median = std::stod(cells[3]);
      row.point.accuracy_std = std::stod(cells[4]);
      row.point.repetitions = std::stoi(cells[5]);
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": row " + std::to_string(number) + " is not numeric");
    }
  }
  return rows;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw ParseError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace al
