#include "dnnshield/io.hpp"

#include <fstream>
#include <iterator>
#include <string>

#include "dnnshield/binary.hpp"
#include "dnnshield/error.hpp"
#include "json.hpp"

namespace dnnshield {

namespace binary {

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::FormatError, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "write failed for '" + path + "'");
}

}  // namespace binary

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kModelMagic = "DNS1";
constexpr int kModelVersion = 1;

json write_blob(const fs::path& dir, const std::string& name, const std::vector<float>& values) {
  binary::Writer w;
  w.magic(kModelMagic);
  for (float v : values) w.f32(v);
  binary::write_file((dir / name).string(), w.bytes());
  return json{{"file", name}, {"bytes", values.size() * 4}};
}

std::vector<float> read_blob(const fs::path& dir, const json& ref, std::size_t expected_count) {
  const std::string name = ref.at("file").get<std::string>();
  const auto declared = ref.at("bytes").get<std::size_t>();
  require(declared == expected_count * 4, ErrorKind::FormatError,
          "blob '" + name + "' declares " + std::to_string(declared) + " bytes, shapes need " +
              std::to_string(expected_count * 4));
  const auto bytes = binary::read_file((dir / name).string());
  binary::Reader r(bytes, name);
  r.expect_magic(kModelMagic);
  require(r.remaining() == declared, ErrorKind::FormatError,
          "blob '" + name + "' holds " + std::to_string(r.remaining()) + " bytes, manifest says " +
              std::to_string(declared));
  std::vector<float> values(expected_count);
  for (float& v : values) v = r.f32();
  return values;
}

}  // namespace

void save_model(const Model& model, const fs::path& manifest_path) {
  model.validate();
  const fs::path dir = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  const std::string stem = manifest_path.stem().string();
  json manifest;
  manifest["magic"] = kModelMagic;
  manifest["version"] = kModelVersion;
  manifest["input_shape"] = model.input_shape;
  manifest["num_classes"] = model.num_classes;
  if (model.train_accuracy) manifest["train_accuracy"] = *model.train_accuracy;
  json layers = json::array();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    json entry{{"kind", std::string(to_string(layer.kind))}};
    switch (layer.kind) {
      case LayerKind::Conv2D:
      case LayerKind::FullyConnected: {
        entry["stride"] = layer.stride;
        entry["padding"] = layer.padding;
        Shape wshape{layer.filters.size()};
        const Shape& fshape = layer.filters.front().weights.shape;
        wshape.insert(wshape.end(), fshape.begin(), fshape.end());
        entry["weight_shape"] = wshape;
        std::vector<int> ids;
        std::vector<float> weights, biases;
        for (const Filter& f : layer.filters) {
          ids.push_back(f.id);
          weights.insert(weights.end(), f.weights.data.begin(), f.weights.data.end());
          biases.push_back(f.bias);
        }
        entry["filter_ids"] = ids;
        const std::string prefix = stem + ".L" + std::to_string(i);
        entry["weights"] = write_blob(dir, prefix + ".weights.bin", weights);
        entry["bias"] = write_blob(dir, prefix + ".bias.bin", biases);
        break;
      }
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        entry["pool"] = layer.pool;
        entry["stride"] = layer.stride;
        break;
      default:
        break;
    }
    layers.push_back(std::move(entry));
  }
  manifest["layers"] = std::move(layers);
  const std::string text = manifest.dump(2) + "\n";
  binary::write_file(manifest_path.string(), std::vector<char>(text.begin(), text.end()));
}

Model load_model(const fs::path& manifest_path) {
  const auto bytes = binary::read_file(manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, manifest_path.string() + ": " + e.what());
  }
  const fs::path dir = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  Model model;
  try {
    require(manifest.value("magic", "") == kModelMagic, ErrorKind::FormatError,
            manifest_path.string() + ": bad magic");
    require(manifest.value("version", 0) == kModelVersion, ErrorKind::FormatError,
            manifest_path.string() + ": unsupported version");
    model.input_shape = manifest.at("input_shape").get<Shape>();
    model.num_classes = manifest.at("num_classes").get<std::size_t>();
    if (manifest.contains("train_accuracy")) {
      model.train_accuracy = manifest["train_accuracy"].get<double>();
    }
    for (const json& entry : manifest.at("layers")) {
      Layer layer = Layer::of(layer_kind_from_string(entry.at("kind").get<std::string>()));
      if (layer.has_filters()) {
        layer.stride = entry.at("stride").get<std::size_t>();
        layer.padding = entry.at("padding").get<std::size_t>();
        const auto wshape = entry.at("weight_shape").get<Shape>();
        const auto ids = entry.at("filter_ids").get<std::vector<int>>();
        require(wshape.size() == 4 && wshape[0] == ids.size() && wshape[0] > 0,
                ErrorKind::FormatError, "weight_shape inconsistent with filter_ids");
        const Shape fshape(wshape.begin() + 1, wshape.end());
        const std::size_t per_filter = element_count(fshape);
        const auto weights = read_blob(dir, entry.at("weights"), element_count(wshape));
        const auto biases = read_blob(dir, entry.at("bias"), wshape[0]);
        for (std::size_t f = 0; f < ids.size(); ++f) {
          std::vector<float> w(weights.begin() + static_cast<std::ptrdiff_t>(f * per_filter),
                               weights.begin() + static_cast<std::ptrdiff_t>((f + 1) * per_filter));
          layer.filters.push_back(Filter{ids[f], Tensor(fshape, std::move(w)), biases[f]});
        }
      } else if (layer.kind == LayerKind::MaxPool || layer.kind == LayerKind::AvgPool) {
        layer.pool = entry.at("pool").get<std::size_t>();
        layer.stride = entry.at("stride").get<std::size_t>();
      }
      model.layers.push_back(std::move(layer));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, manifest_path.string() + ": " + e.what());
  }
  try {
    model.validate();
  } catch (const Error& e) {
    fail(ErrorKind::FormatError, manifest_path.string() + ": " + e.what());
  }
  return model;
}

void save_dataset(const LabeledDataset& dataset, const fs::path& path) {
  require(dataset.inputs.size() == dataset.labels.size(), ErrorKind::ShapeMismatch,
          "inputs and labels differ in length");
  binary::Writer w;
  w.magic("DSET");
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  const Shape shape = dataset.size() ? dataset.inputs.front().shape : Shape{};
  w.u32(static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) w.u32(static_cast<std::uint32_t>(d));
  for (const Tensor& t : dataset.inputs) {
    require(t.shape == shape, ErrorKind::ShapeMismatch, "dataset tensors differ in shape");
    for (float v : t.data) w.f32(v);
  }
  for (std::size_t label : dataset.labels) {
    require(label <= 0xFFFF, ErrorKind::InvalidArgument, "label does not fit u16");
    w.u16(static_cast<std::uint16_t>(label));
  }
  binary::write_file(path.string(), w.bytes());
}

LabeledDataset load_dataset(const fs::path& path) {
  const auto bytes = binary::read_file(path.string());
  binary::Reader r(bytes, path.string());
  r.expect_magic("DSET");
  const std::uint32_t count = r.u32();
  const std::uint32_t rank = r.u32();
  require(rank <= 8, ErrorKind::FormatError, path.string() + ": implausible rank");
  Shape shape(rank);
  for (auto& d : shape) d = r.u32();
  const std::size_t per = rank ? element_count(shape) : 0;
  r.need(static_cast<std::size_t>(count) * (per * 4 + 2));
  LabeledDataset ds;
  ds.inputs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<float> values(per);
    for (float& v : values) v = r.f32();
    ds.inputs.emplace_back(shape, std::move(values));
  }
  for (std::uint32_t i = 0; i < count; ++i) ds.labels.push_back(r.u16());
  require(r.remaining() == 0, ErrorKind::FormatError, path.string() + ": trailing bytes");
  return ds;
}

}  // namespace dnnshield
