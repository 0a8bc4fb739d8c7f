#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dnnshield/accel_sim.hpp"
#include "dnnshield/attack.hpp"
#include "dnnshield/detector.hpp"
#include "dnnshield/engine.hpp"
#include "dnnshield/error.hpp"
#include "dnnshield/fixture.hpp"
#include "dnnshield/io.hpp"
#include "dnnshield/serialize.hpp"
#include "dnnshield/sparsifier.hpp"
#include "dnnshield/train.hpp"

namespace py = pybind11;
using namespace dnnshield;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  FloatArray out(shape);
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

// configs cross the boundary as JSON text so python sees the same keys as the tool
json parse(const std::string& text) { return text.empty() ? json::object() : json::parse(text); }

py::dict verdict_dict(const DetectionVerdict& v) {
  py::dict d;
  d["label"] = std::string(to_string(v.label));
  d["runs_used"] = v.runs_used;
  d["l1_trace"] = v.l1_trace;
  d["mean_l1"] = v.mean_l1;
  d["terminated_by"] = std::string(to_string(v.terminated_by));
  d["predicted_class"] = v.reading.predicted_class;
  d["z_gap"] = v.reading.z_gap;
  d["sr_cap"] = v.sr_cap;
  return d;
}

py::dict attack_dict(const AttackResult& r) {
  py::dict d;
  d["adversarial"] = to_array(r.adversarial);
  d["success"] = r.success;
  d["target"] = r.target;
  d["predicted_class"] = r.predicted_class;
  d["margin"] = r.margin;
  d["l2"] = r.distortion.l2;
  d["linf"] = r.distortion.linf;
  d["l0"] = r.distortion.l0;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  static py::exception<Error> error_type(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<Model>(m, "Model")
      .def_readonly("num_classes", &Model::num_classes)
      .def_property_readonly("input_shape", [](const Model& x) { return x.input_shape; })
      .def_property_readonly("train_accuracy", [](const Model& x) { return x.train_accuracy; })
      .def("parameter_count", &Model::parameter_count)
      .def("filter_count", [](const Model& x) { return x.filter_keys().size(); })
      .def("save", [](const Model& x, const std::filesystem::path& p) { save_model(x, p); });

  py::class_<ThresholdTable>(m, "ThresholdTable")
      .def_readonly("levels", &ThresholdTable::levels)
      .def("save", [](const ThresholdTable& t, const std::filesystem::path& p) { save_threshold_table(t, p); });

  m.def("load_model", &load_model, py::arg("path"));
  m.def("load_threshold_table", &load_threshold_table, py::arg("path"), py::arg("model"));

  m.def("load_dataset", [](const std::filesystem::path& p) {
    const auto ds = load_dataset(p);
    py::list xs;
    for (const auto& x : ds.inputs) xs.append(to_array(x));
    return py::make_tuple(xs, ds.labels);
  });
  m.def("synthetic_dataset", [](std::size_t count, std::uint64_t seed) {
    const auto ds = fixture::synthetic_dataset(count, seed);
    py::list xs;
    for (const auto& x : ds.inputs) xs.append(to_array(x));
    return py::make_tuple(xs, ds.labels);
  }, py::arg("count"), py::arg("seed"));
  m.def("train_fixture", [](std::size_t count, std::uint64_t data_seed, std::size_t epochs, std::uint64_t seed) {
    TrainOptions opt = fixture::training(seed);
    opt.epochs = epochs;
    return train_fixture(fixture::synthetic_dataset(count, data_seed), fixture::architecture(), opt);
  }, py::arg("count"), py::arg("data_seed"), py::arg("epochs"), py::arg("seed") = 1);

  m.def("forward", [](const Model& model, const FloatArray& x) {
    const auto r = forward(model, to_tensor(x));
    return py::make_tuple(r.logits, r.probs);
  }, py::arg("model"), py::arg("x"));

  m.def("cpdn", [](std::vector<float> p, std::vector<float> q) { return cpdn(p, q); });
  m.def("certified_radius", &certified_radius, py::arg("p1"), py::arg("p2"), py::arg("sigma"));
  m.def("z_gap", [](std::vector<float> logits) { return z_score_confidence(logits).z_gap; });
  m.def("sr_cap", [](double z_gap, const std::string& params) {
    return sr_cap_for(z_gap, sparsifier_params_from_json(parse(params)));
  }, py::arg("z_gap"), py::arg("params_json") = "");

  m.def("profile_thresholds", &profile_thresholds, py::arg("model"), py::arg("levels") = 101);

  m.def("detect", [](const Model& model, const FloatArray& x, const ThresholdTable& table,
                     const std::string& config, std::uint32_t input_id) {
    const DetectionConfig cfg = detection_config_from_json(parse(config));
    return verdict_dict(detect(model, to_tensor(x), table, cfg, input_id));
  }, py::arg("model"), py::arg("x"), py::arg("table"), py::arg("config_json"), py::arg("input_id") = 0);

  m.def("cw_l2", [](const Model& model, const FloatArray& x, std::size_t target, std::size_t iters,
                    double lr, double c, double k) {
    AttackConfig cfg;
    cfg.iters = iters;
    cfg.lr = lr;
    cfg.c = c;
    cfg.k = k;
    return attack_dict(cw_l2(model, to_tensor(x), target, cfg));
  }, py::arg("model"), py::arg("x"), py::arg("target"), py::arg("iters") = 500, py::arg("lr") = 0.05,
     py::arg("c") = 1.0, py::arg("k") = 0.0);

  m.def("simulate_group", [](const std::vector<std::vector<std::uint8_t>>& masks, const std::string& config) {
    accel::ScheduleGroup g;
    for (std::size_t i = 0; i < masks.size(); ++i) g.jobs.push_back(accel::FilterJob::from_mask(int(i), masks[i]));
    const auto cfg = accel_config_from_json(parse(config));
    const auto t = cfg.mode == accel::SimMode::Dense ? accel::time_group_dense(g, cfg)
                                                     : accel::time_group_sparse(g, cfg);
    py::dict d;
    d["cycles"] = t.cycles;
    d["mac_ops"] = t.mac_ops;
    d["cycle_macs"] = t.cycle_macs;
    return d;
  }, py::arg("masks"), py::arg("config_json") = "");

  m.attr("__version__") = DNNSHIELD_VERSION;
}
