#include <filesystem>
#include <fstream>
#include <functional>

#include "doctest.h"
#include "dnnshield/binary.hpp"
#include "dnnshield/engine.hpp"
#include "dnnshield/error.hpp"
#include "dnnshield/fixture.hpp"
#include "dnnshield/io.hpp"
#include "dnnshield/rng.hpp"
#include "dnnshield/train.hpp"
#include "support/oracles.hpp"

using namespace dnnshield;
namespace fs = std::filesystem;

namespace {

LabeledDataset separable(std::size_t n, std::uint64_t seed) {
  LabeledDataset ds;
  CounterRng rng(seed, StreamDomain::Dataset);
  while (ds.size() < n) {
    Tensor x({2});
    x[0] = static_cast<float>(rng.uniform());
    x[1] = static_cast<float>(rng.uniform());
    const double side = x[0] + x[1] - 1.0;
    if (std::abs(side) < 0.1) continue;  // keep a margin
    ds.inputs.push_back(x);
    ds.labels.push_back(side > 0);
  }
  return ds;
}

Model two_class_linear() {
  Model m;
  m.input_shape = {2};
  m.num_classes = 2;
  m.layers = {Layer::fully_connected(2, 2), Layer::softmax()};
  return m;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("dnnshield_unit_" + std::to_string(std::rand()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("training") {
  const auto ds = separable(300, 2);

  SUBCASE("linearly separable set is learned") {
    TrainOptions opt;
    opt.epochs = 60;
    opt.learning_rate = 0.5;
    const Model m = train_fixture(ds, two_class_linear(), opt);
    CHECK(*m.train_accuracy >= 0.99);
  }

  SUBCASE("zero epochs returns the initialisation") {
    TrainOptions opt;
    opt.epochs = 0;
    opt.seed = 9;
    Model m = train_fixture(ds, two_class_linear(), opt);
    CHECK(m.train_accuracy.has_value());
    m.train_accuracy.reset();
    CHECK(m == initialize(two_class_linear(), 9));
  }

  SUBCASE("same seed gives identical weights") {
    TrainOptions opt;
    opt.epochs = 3;
    CHECK(train_fixture(ds, two_class_linear(), opt) == train_fixture(ds, two_class_linear(), opt));
    TrainOptions other = opt;
    other.seed = 2;
    CHECK_FALSE(train_fixture(ds, two_class_linear(), opt) == train_fixture(ds, two_class_linear(), other));
  }

  SUBCASE("diverging learning rate is reported") {
    // two stacked layers: after one huge step their product overflows float
    Model deep;
    deep.input_shape = {2};
    deep.num_classes = 2;
    deep.layers = {Layer::fully_connected(8, 2), Layer::relu(), Layer::fully_connected(2, 8), Layer::softmax()};
    TrainOptions opt;
    opt.epochs = 5;
    opt.learning_rate = 1e30;
    CHECK(kind_of([&] { train_fixture(ds, deep, opt); }) == ErrorKind::DivergenceError);
  }
}

TEST_CASE("synthetic fixture data") {
  const auto a = fixture::synthetic_dataset(40, 5), b = fixture::synthetic_dataset(40, 5);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  for (const auto& x : a.inputs)
    for (float v : x.data) CHECK((v >= 0.0f && v <= 1.0f));
  CHECK_FALSE(fixture::synthetic_dataset(40, 6).inputs == a.inputs);
}

TEST_CASE("model files") {
  TempDir dir;
  CounterRng rng(10, StreamDomain::Workload);
  Model m = oracle::random_model(rng);
  m.train_accuracy = 0.75;
  const fs::path p = dir.path / "net.json";

  SUBCASE("round trip is exact") {
    save_model(m, p);
    CHECK(load_model(p) == m);
    for (int i = 0; i < 20; ++i) {
      const Model r = oracle::random_model(rng);
      save_model(r, p);
      CHECK(load_model(p) == r);
    }
  }

  SUBCASE("truncated blob") {
    save_model(m, p);
    const fs::path blob = dir.path / "net.L0.weights.bin";
    fs::resize_file(blob, fs::file_size(blob) - 3);
    CHECK(kind_of([&] { load_model(p); }) == ErrorKind::FormatError);
  }

  SUBCASE("manifest length disagrees with the blob") {
    save_model(m, p);
    auto text = binary::read_file(p.string());
    std::string s(text.begin(), text.end());
    const auto at = s.find("\"bytes\": ");
    REQUIRE(at != std::string::npos);
    s.insert(at + 9, "1");
    binary::write_file(p.string(), std::vector<char>(s.begin(), s.end()));
    CHECK(kind_of([&] { load_model(p); }) == ErrorKind::FormatError);
  }

  SUBCASE("bad magic and truncated manifest") {
    save_model(m, p);
    auto bytes = binary::read_file(p.string());
    bytes.resize(bytes.size() / 2);
    binary::write_file(p.string(), bytes);
    CHECK(kind_of([&] { load_model(p); }) == ErrorKind::FormatError);
    const fs::path blob = dir.path / "net.L0.bias.bin";
    save_model(m, p);
    auto b = binary::read_file(blob.string());
    b[0] = 'X';
    binary::write_file(blob.string(), b);
    CHECK(kind_of([&] { load_model(p); }) == ErrorKind::FormatError);
  }
}

TEST_CASE("dataset files") {
  TempDir dir;
  const fs::path p = dir.path / "d.dset";
  const auto ds = fixture::synthetic_dataset(17, 3);
  save_dataset(ds, p);
  const auto back = load_dataset(p);
  CHECK(back.inputs == ds.inputs);
  CHECK(back.labels == ds.labels);

  const auto bytes = binary::read_file(p.string());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DSET");
  binary::write_file(p.string(), std::vector<char>(bytes.begin(), bytes.end() - 1));
  CHECK(kind_of([&] { load_dataset(p); }) == ErrorKind::FormatError);
}
