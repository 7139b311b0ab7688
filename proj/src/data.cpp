#include "al/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "al/error.hpp"

namespace al::data {
namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::vector<unsigned char> bytes;
  if (path.extension() == ".gz") {
    gzFile file = gzopen(path.c_str(), "rb");
    if (file == nullptr) throw ParseError("cannot open " + path.string());
    std::array<unsigned char, 1 << 16> buf{};
    int got = 0;
    while ((got = gzread(file, buf.data(), static_cast<unsigned>(buf.size()))) > 0)
      bytes.insert(bytes.end(), buf.begin(), buf.begin() + got);
    const bool failed = got < 0;
    gzclose(file);
    if (failed) throw ParseError("corrupt gzip stream in " + path.string());
    return bytes;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size())
    throw ParseError(path.string() + ": truncated header at byte offset " + std::to_string(offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void expect_size(const std::vector<unsigned char>& bytes, std::size_t expected,
                 const std::filesystem::path& path) {
  if (bytes.size() < expected)
    throw ParseError(path.string() + ": truncated at byte offset " + std::to_string(bytes.size()) +
                     ", expected " + std::to_string(expected) + " bytes");
  if (bytes.size() > expected)
    throw ParseError(path.string() + ": unexpected trailing data at byte offset " +
                     std::to_string(expected));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                    : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
      cell.remove_suffix(1);
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::string name) {
  const auto images = read_bytes(images_path);
  const auto labels = read_bytes(labels_path);

  const auto image_magic = read_be32(images, 0, images_path);
  if (image_magic != 0x00000803U) {
    std::ostringstream msg;
    msg << images_path.string() << ": bad magic 0x" << std::hex << image_magic
        << " at byte offset 0, expected 0x00000803";
    throw ParseError(msg.str());
  }
  const auto label_magic = read_be32(labels, 0, labels_path);
  if (label_magic != 0x00000801U) {
    std::ostringstream msg;
    msg << labels_path.string() << ": bad magic 0x" << std::hex << label_magic
        << " at byte offset 0, expected 0x00000801";
    throw ParseError(msg.str());
  }

  const std::size_t image_count = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t label_count = read_be32(labels, 4, labels_path);
  if (image_count != label_count)
    throw ParseError("IDX count mismatch: " + images_path.string() + " holds " +
                     std::to_string(image_count) + " images but " + labels_path.string() +
                     " holds " + std::to_string(label_count) + " labels");
  if (rows == 0 || cols == 0) throw ParseError(images_path.string() + ": zero image dimension at byte offset 8");

  const std::size_t dim = rows * cols;
  expect_size(images, 16 + image_count * dim, images_path);
  expect_size(labels, 8 + label_count, labels_path);

  std::vector<float> features(image_count * dim);
  for (std::size_t i = 0; i < features.size(); ++i)
    features[i] = static_cast<float>(images[16 + i]) / 255.0F;
  std::vector<int> ys(label_count);
  int max_label = -1;
  for (std::size_t i = 0; i < label_count; ++i) {
    ys[i] = labels[8 + i];
    max_label = std::max(max_label, ys[i]);
  }
  if (label_count == 0) throw ParseError(labels_path.string() + ": no samples");
  return Dataset(std::move(name), dim, std::move(features), std::move(ys), max_label + 1);
}

CsvDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                    const std::optional<Normalization>& normalization,
                    const std::vector<std::string>& known_labels) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) == std::vector<std::string>{""})
    throw ParseError(path.string() + ": empty file, expected a header row");
  const auto header = split_csv_line(line);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end())
    throw ParseError(path.string() + ": header has no column '" + label_column + "'");
  const auto label_index = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t dim = header.size() - 1;
  if (dim == 0) throw ParseError(path.string() + ": no feature columns");

  std::vector<std::string> mapping = known_labels;
  std::unordered_map<std::string, int> class_of;
  for (std::size_t i = 0; i < mapping.size(); ++i) class_of[mapping[i]] = static_cast<int>(i);
  const bool frozen_labels = !known_labels.empty();

  std::vector<float> raw;
  std::vector<int> labels;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(path.string() + ": row " + std::to_string(row_number) + " has " +
                       std::to_string(cells.size()) + " fields, header has " +
                       std::to_string(header.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_index) continue;
      float value = 0;
      const auto& cell = cells[c];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value))
        throw ParseError(path.string() + ": row " + std::to_string(row_number) + ", column '" +
                         header[c] + "': non-numeric value '" + cell + "'");
      raw.push_back(value);
    }
    const auto& text = cells[label_index];
    auto found = class_of.find(text);
    if (found == class_of.end()) {
      if (frozen_labels)
        throw ParseError(path.string() + ": row " + std::to_string(row_number) +
                         ": unknown label '" + text + "'");
      found = class_of.emplace(text, static_cast<int>(mapping.size())).first;
      mapping.push_back(text);
    }
    labels.push_back(found->second);
  }
  if (labels.empty()) throw ParseError(path.string() + ": no data rows");

  Normalization norm;
  if (normalization) {
    if (normalization->min.size() != dim || normalization->max.size() != dim)
      throw ParseError(path.string() + ": feature count differs from the reference file");
    norm = *normalization;
  } else {
    norm.min.assign(dim, std::numeric_limits<double>::infinity());
    norm.max.assign(dim, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      norm.min[i % dim] = std::min(norm.min[i % dim], static_cast<double>(raw[i]));
      norm.max[i % dim] = std::max(norm.max[i % dim], static_cast<double>(raw[i]));
    }
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double lo = norm.min[i % dim];
    const double span = norm.max[i % dim] - lo;
    const double v = span > 0 ? (static_cast<double>(raw[i]) - lo) / span : 0.0;
    raw[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  const int classes = static_cast<int>(mapping.size());
  Dataset ds(path.stem().string(), dim, std::move(raw), std::move(labels), classes, std::nullopt,
             mapping);
  return CsvDataset{std::move(ds), std::move(norm), std::move(mapping)};
}

void export_csv(const Dataset& dataset, const std::filesystem::path& path,
                const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  for (std::size_t c = 0; c < dataset.feature_dim(); ++c) out << 'f' << c << ',';
  out << label_column << '\n';
  std::array<char, 64> buf{};
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (float v : dataset.row(make_id(i))) {
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
      out.write(buf.data(), res.ptr - buf.data());
      out << ',';
    }
    const int y = dataset.labels()[i];
    if (static_cast<std::size_t>(y) < dataset.class_names().size())
      out << dataset.class_names()[static_cast<std::size_t>(y)];
    else
      out << y;
    out << '\n';
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::string name) {
  if (spec.class_count < 1 || spec.clusters_per_class < 1 || spec.samples_per_cluster < 1 ||
      spec.feature_dim < 1 || !(spec.cluster_std > 0) || !(spec.class_separation > 0))
    throw InputError("synthetic spec fields must all be positive");

  std::optional<LabelTree> tree;
  int groups = 1;
  if (!spec.hierarchy.empty()) {
    int leaves = 1;
    for (int b : spec.hierarchy) leaves *= b;
    if (leaves != spec.class_count)
      throw InputError("hierarchy factors multiply to " + std::to_string(leaves) +
                       " but class_count is " + std::to_string(spec.class_count));
    tree = LabelTree::uniform(spec.hierarchy);
    groups = spec.hierarchy.front();
  }
  const int per_group = spec.class_count / groups;

  std::mt19937_64 rng(spec.seed);
  const auto dim = static_cast<std::size_t>(spec.feature_dim);
  const int clusters_in_box = per_group * spec.clusters_per_class;
  double side = spec.class_separation *
                std::max(2.0, 1.5 * std::pow(static_cast<double>(clusters_in_box),
                                             1.0 / static_cast<double>(dim)));

  // Cluster centres: uniform in a box per top-level group, rejecting any centre
  // closer than class_separation to a centre of another class.
  std::vector<std::vector<double>> centres;
  std::vector<int> centre_class;
  for (bool placed = false; !placed;) {
    centres.clear();
    centre_class.clear();
    placed = true;
    for (int c = 0; c < spec.class_count && placed; ++c) {
      const int group = c / per_group;
      const double offset = static_cast<double>(group) * (side + 4.0 * spec.class_separation);
      for (int k = 0; k < spec.clusters_per_class && placed; ++k) {
        bool ok = false;
        std::vector<double> mu(dim);
        for (int attempt = 0; attempt < 2000 && !ok; ++attempt) {
          std::uniform_real_distribution<double> u(0.0, side);
          for (auto& m : mu) m = u(rng);
          mu[0] += offset;
          ok = true;
          for (std::size_t j = 0; j < centres.size() && ok; ++j) {
            if (centre_class[j] == c) continue;
            double d2 = 0;
            for (std::size_t a = 0; a < dim; ++a) d2 += (mu[a] - centres[j][a]) * (mu[a] - centres[j][a]);
            ok = d2 >= spec.class_separation * spec.class_separation;
          }
        }
        if (!ok) {
          placed = false;
          side *= 1.25;
          break;
        }
        centres.push_back(mu);
        centre_class.push_back(c);
      }
    }
  }

  const std::size_t n = centres.size() * static_cast<std::size_t>(spec.samples_per_cluster);
  std::vector<double> values(n * dim);
  std::vector<int> labels(n);
  std::normal_distribution<double> noise(0.0, spec.cluster_std);
  std::size_t row = 0;
  for (std::size_t k = 0; k < centres.size(); ++k) {
    for (int s = 0; s < spec.samples_per_cluster; ++s, ++row) {
      for (std::size_t a = 0; a < dim; ++a) values[row * dim + a] = centres[k][a] + noise(rng);
      labels[row] = centre_class[k];
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n * dim; ++i) {
    lo[i % dim] = std::min(lo[i % dim], values[i]);
    hi[i % dim] = std::max(hi[i % dim], values[i]);
  }
  std::vector<float> features(n * dim);
  std::vector<int> shuffled(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[i];
    shuffled[i] = labels[src];
    for (std::size_t a = 0; a < dim; ++a) {
      const double span = hi[a] - lo[a];
      const double v = span > 0 ? (values[src * dim + a] - lo[a]) / span : 0.0;
      features[i * dim + a] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return Dataset(std::move(name), dim, std::move(features), std::move(shuffled), spec.class_count,
                 std::move(tree));
}

std::pair<std::vector<SampleId>, std::vector<SampleId>> stratified_split(
    std::span<const int> labels, std::span<const SampleId> ids, int class_count, double fraction,
    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InputError("split fraction must lie strictly between 0 and 1");
  std::vector<std::vector<SampleId>> by_class(static_cast<std::size_t>(class_count));
  for (SampleId id : ids) {
    const int y = labels[id.value];
    if (y < 0 || y >= class_count) throw InputError("label out of range in split");
    by_class[static_cast<std::size_t>(y)].push_back(id);
  }
  std::mt19937_64 rng(seed);
  std::vector<SampleId> part_a;
  std::vector<SampleId> part_b;
  for (int c = 0; c < class_count; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) continue;
    if (members.size() == 1)
      throw InputError("cannot split class " + std::to_string(c) + ": it has a single sample");
    std::sort(members.begin(), members.end());
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = static_cast<long>(members.size());
    const long take = std::clamp(std::lround(fraction * static_cast<double>(n)), 1L, n - 1);
    part_a.insert(part_a.end(), members.begin(), members.begin() + take);
    part_b.insert(part_b.end(), members.begin() + take, members.end());
  }
  std::sort(part_a.begin(), part_a.end());
  std::sort(part_b.begin(), part_b.end());
  return {std::move(part_a), std::move(part_b)};
}

std::pair<std::vector<SampleId>, std::vector<SampleId>> stratified_split(const Dataset& dataset,
                                                                         double fraction,
                                                                         std::uint64_t seed) {
  const auto ids = all_ids(dataset.size());
  return stratified_split(dataset.labels(), ids, dataset.class_count(), fraction, seed);
}

std::vector<SampleId> initial_seed_set(const Dataset& dataset, int per_class, std::uint64_t seed) {
  if (per_class < 1) throw InputError("initial samples per class must be positive");
  std::vector<std::vector<SampleId>> by_class(static_cast<std::size_t>(dataset.class_count()));
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[static_cast<std::size_t>(dataset.labels()[i])].push_back(make_id(i));
  std::mt19937_64 rng(seed);
  std::vector<SampleId> chosen;
  for (int c = 0; c < dataset.class_count(); ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (static_cast<int>(members.size()) < per_class)
      throw InputError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                       " samples, " + std::to_string(per_class - static_cast<int>(members.size())) +
                       " short of the " + std::to_string(per_class) + " requested");
    std::shuffle(members.begin(), members.end(), rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + per_class);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace al::data
