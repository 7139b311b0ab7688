#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <zlib.h>

#include "al/classifier.hpp"
#include "al/data.hpp"
#include "al/error.hpp"
#include "support.hpp"

using namespace al;
namespace fs = std::filesystem;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::string idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                       const std::vector<std::uint8_t>& pixels) {
  std::string s;
  put_u32(s, 0x00000803);
  put_u32(s, count);
  put_u32(s, rows);
  put_u32(s, cols);
  s.append(pixels.begin(), pixels.end());
  return s;
}

std::string idx_labels(const std::vector<std::uint8_t>& labels) {
  std::string s;
  put_u32(s, 0x00000801);
  put_u32(s, static_cast<std::uint32_t>(labels.size()));
  s.append(labels.begin(), labels.end());
  return s;
}

void write(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

void write_gz(const fs::path& p, const std::string& bytes) {
  gzFile f = gzopen(p.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("idx files load with pixels scaled to [0, 1]") {
  const auto dir = testing::scratch_dir("idx");
  std::vector<std::uint8_t> pixels(3 * 2 * 2);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i * 20);
  pixels[5] = 255;
  write(dir / "img", idx_images(3, 2, 2, pixels));
  write(dir / "lab", idx_labels({0, 9, 4}));
  const auto d = data::load_idx(dir / "img", dir / "lab");
  CHECK(d.size() == 3);
  CHECK(d.feature_dim() == 4);
  CHECK(d.class_count() == 10);
  CHECK(d.labels() == std::vector<int>{0, 9, 4});
  CHECK(d.row(SampleId{1})[1] == 1.0f);
  CHECK(d.row(SampleId{0})[1] == static_cast<float>(20.0 / 255.0));

  write_gz(dir / "img.gz", idx_images(3, 2, 2, pixels));
  write_gz(dir / "lab.gz", idx_labels({0, 9, 4}));
  const auto gz = data::load_idx(dir / "img.gz", dir / "lab.gz");
  CHECK(gz.features() == d.features());
}

TEST_CASE("malformed idx input is a parse error with a byte offset") {
  const auto dir = testing::scratch_dir("idx_bad");
  std::vector<std::uint8_t> pixels(2 * 3 * 3, 7);
  auto images = idx_images(2, 3, 3, pixels);
  write(dir / "lab", idx_labels({1, 2}));

  write(dir / "trunc", images.substr(0, images.size() - 4));
  const auto trunc = error_of([&] { data::load_idx(dir / "trunc", dir / "lab"); });
  CHECK(trunc.find("offset") != std::string::npos);
  CHECK_THROWS_AS(data::load_idx(dir / "trunc", dir / "lab"), ParseError);

  auto bad_magic = images;
  bad_magic[3] = 0x01;
  write(dir / "magic", bad_magic);
  CHECK_THROWS_AS(data::load_idx(dir / "magic", dir / "lab"), ParseError);

  write(dir / "img", images);
  write(dir / "lab3", idx_labels({1, 2, 3}));
  const auto mismatch = error_of([&] { data::load_idx(dir / "img", dir / "lab3"); });
  CHECK(mismatch.find('2') != std::string::npos);
  CHECK(mismatch.find('3') != std::string::npos);

  write(dir / "trailing", images + "x");
  CHECK_THROWS_AS(data::load_idx(dir / "trailing", dir / "lab"), ParseError);
  CHECK_THROWS_AS(data::load_idx(dir / "missing", dir / "lab"), ParseError);
}

TEST_CASE("official MNIST training files, when present") {
  const char* root = std::getenv("MNIST_DIR");
  if (root == nullptr) return;
  const fs::path dir(root);
  const auto d = data::load_idx(dir / "train-images-idx3-ubyte.gz", dir / "train-labels-idx1-ubyte.gz");
  CHECK(d.size() == 60000);
  CHECK(d.feature_dim() == 784);
  CHECK(d.class_count() == 10);
}

TEST_CASE("csv loading maps labels by first appearance") {
  const auto dir = testing::scratch_dir("csv");
  write(dir / "t.csv", "x,label,y\n1,a,4\n3,b,2\n2,a,3\n");
  const auto csv = data::load_csv(dir / "t.csv", "label");
  CHECK(csv.dataset.class_count() == 2);
  CHECK(csv.dataset.labels() == std::vector<int>{0, 1, 0});
  CHECK(csv.label_mapping == std::vector<std::string>{"a", "b"});
  CHECK(csv.dataset.feature_dim() == 2);
  CHECK(csv.dataset.row(SampleId{0})[0] == 0.0f);
  CHECK(csv.dataset.row(SampleId{1})[0] == 1.0f);
  CHECK(csv.dataset.row(SampleId{2})[1] == 0.5f);

  // A paired test file reuses the training scale and label ids.
  write(dir / "test.csv", "x,label,y\n5,b,4\n");
  const auto test = data::load_csv(dir / "test.csv", "label", csv.normalization, csv.label_mapping);
  CHECK(test.dataset.labels() == std::vector<int>{1});
  CHECK(test.dataset.row(SampleId{0})[0] == 1.0f);  // clamped
  write(dir / "unseen.csv", "x,label,y\n1,c,1\n");
  CHECK_THROWS_AS(data::load_csv(dir / "unseen.csv", "label", csv.normalization, csv.label_mapping),
                  ParseError);
}

TEST_CASE("csv errors name the row") {
  const auto dir = testing::scratch_dir("csv_bad");
  write(dir / "empty.csv", "");
  CHECK_THROWS_AS(data::load_csv(dir / "empty.csv", "label"), ParseError);
  write(dir / "ragged.csv", "x,label\n1,a\n2\n");
  const auto ragged = error_of([&] { data::load_csv(dir / "ragged.csv", "label"); });
  CHECK(ragged.find("row 3") != std::string::npos);
  write(dir / "text.csv", "x,label\n1,a\nfoo,b\n");
  const auto text = error_of([&] { data::load_csv(dir / "text.csv", "label"); });
  CHECK(text.find("row 3") != std::string::npos);
  write(dir / "nolabel.csv", "x,y\n1,2\n");
  CHECK_THROWS_AS(data::load_csv(dir / "nolabel.csv", "label"), ParseError);
}

TEST_CASE("export then load preserves features bit for bit") {
  const auto data = testing::blobs(3, 10, 5, 0.2, 13);
  const auto dir = testing::scratch_dir("export");
  data::export_csv(data, dir / "d.csv");
  // Features already span [0, 1] per column only by chance, so reload without rescaling.
  data::Normalization identity{std::vector<double>(5, 0.0), std::vector<double>(5, 1.0)};
  const auto back = data::load_csv(dir / "d.csv", "label", identity);
  CHECK(back.dataset.features() == data.features());
  CHECK(back.dataset.size() == data.size());
}

TEST_CASE("synthetic data") {
  data::SyntheticSpec s;
  s.class_count = 4;
  s.clusters_per_class = 5;
  s.samples_per_cluster = 200;
  s.feature_dim = 6;
  s.seed = 5;
  const auto d = data::generate_synthetic(s);
  CHECK(d.size() == 4000);
  for (auto n : d.class_histogram()) CHECK(n == 1000);
  CHECK(data::generate_synthetic(s).features() == d.features());
  for (float v : d.features()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  s.seed = 6;
  CHECK(data::generate_synthetic(s).features() != d.features());

  s.hierarchy = {3, 2};
  CHECK_THROWS_AS(data::generate_synthetic(s), InputError);
  s.hierarchy = {2, 2};
  const auto h = data::generate_synthetic(s);
  REQUIRE(h.tree().has_value());
  CHECK(h.tree()->leaves().size() == 4);
}

TEST_CASE("well separated synthetic classes are linearly separable") {
  data::SyntheticSpec s;
  s.class_count = 2;
  s.clusters_per_class = 1;
  s.samples_per_cluster = 200;
  s.feature_dim = 4;
  s.cluster_std = 1.0;
  s.class_separation = 10.0;
  s.seed = 1;
  const auto d = data::generate_synthetic(s);
  // Nearest class mean is a linear rule for two classes.
  std::vector<double> mean[2] = {std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)};
  for (std::uint32_t i = 0; i < d.size(); ++i)
    for (std::size_t k = 0; k < 4; ++k) mean[d.label(SampleId{i})][k] += d.row(SampleId{i})[k] / 200.0;
  int correct = 0;
  for (std::uint32_t i = 0; i < d.size(); ++i) {
    double dist[2] = {0, 0};
    for (int c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 4; ++k) dist[c] += std::pow(d.row(SampleId{i})[k] - mean[c][k], 2);
    correct += (dist[0] < dist[1] ? 0 : 1) == d.label(SampleId{i});
  }
  CHECK(correct >= 396);

  ClassifierSpec spec;
  spec.hidden_layers = {};  // logistic regression
  spec.head = FlatHead{2};
  spec.learning_rate = 0.5;
  spec.max_epochs = 300;
  spec.early_stop_patience = 300;
  const auto model = train(d, all_ids(d.size()), d.labels(), spec);
  CHECK(evaluate(model, d).accuracy >= 0.99);
}

TEST_CASE("stratified split") {
  const auto d = testing::blobs(10, 100, 2, 0.1, 1);
  const auto [a, b] = data::stratified_split(d, 0.1, 4);
  CHECK(a.size() == 100);
  CHECK(b.size() == 900);
  std::map<int, int> per_class;
  for (auto id : a) ++per_class[d.label(id)];
  for (auto [c, n] : per_class) CHECK(n == 10);
  std::set<SampleId> all(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  CHECK(all.size() == 1000);
  CHECK(data::stratified_split(d, 0.1, 4) == std::make_pair(a, b));

  const Dataset lonely("l", 1, {0.f, 0.f, 0.f}, {0, 0, 1}, 2);
  const auto msg = error_of([&] { data::stratified_split(lonely, 0.5, 1); });
  CHECK(msg.find("class 1") != std::string::npos);
}

TEST_CASE("initial seed set") {
  const auto d = testing::blobs(10, 120, 2, 0.1, 1);
  const auto seed = data::initial_seed_set(d, 100, 3);
  CHECK(seed.size() == 1000);
  CHECK(std::is_sorted(seed.begin(), seed.end()));
  CHECK(data::initial_seed_set(d, 100, 3) == seed);
  std::map<int, int> per_class;
  for (auto id : seed) ++per_class[d.label(id)];
  for (auto [c, n] : per_class) CHECK(n == 100);
  CHECK(data::initial_seed_set(d, 120, 9).size() == 1200);
  const auto msg = error_of([&] { data::initial_seed_set(d, 125, 1); });
  CHECK(msg.find("class 0") != std::string::npos);
  CHECK(msg.find('5') != std::string::npos);
}
