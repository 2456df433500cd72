#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "adn/baselines.hpp"
#include "adn/ctsim.hpp"
#include "adn/eval.hpp"
#include "adn/metrics.hpp"
#include "adn/selfcheck.hpp"

namespace py = pybind11;
using namespace adn;

namespace {

using FArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using BArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  std::vector<float> v(a.data(), a.data() + a.size());
  return Tensor(Shape{a.shape(0), a.shape(1)}, std::move(v));
}

FArray to_array(const Tensor& t) {
  FArray out({t.dim(0), t.dim(1)});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Mask to_mask(const BArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D mask");
  Mask m(a.shape(0), a.shape(1));
  for (py::ssize_t i = 0; i < a.size(); ++i) m.set_flat(static_cast<std::size_t>(i), a.data()[i]);
  return m;
}

BArray mask_array(const Mask& m) {
  BArray out({m.rows(), m.cols()});
  for (std::size_t i = 0; i < m.size(); ++i) out.mutable_data()[i] = m.flat(i);
  return out;
}

std::optional<Mask> opt_mask(const std::optional<BArray>& a) {
  if (!a) return std::nullopt;
  return to_mask(*a);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Artifact disentanglement network for CT metal artifact reduction";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  m.def(
      "radon",
      [](const FArray& image, int num_angles) {
        const Tensor t = to_tensor(image);
        if (t.dim(0) != t.dim(1)) throw py::value_error("radon: image must be square");
        return to_array(ct::radon(t, ct::Geometry::for_image(static_cast<int>(t.dim(0)), num_angles)).data);
      },
      py::arg("image"), py::arg("num_angles") = 180, "Parallel-beam line integrals, shape [angles, detectors].");

  m.def(
      "fbp",
      [](const FArray& sinogram, int image_size) {
        const Tensor s = to_tensor(sinogram);
        const auto g = ct::Geometry::for_image(image_size, static_cast<int>(s.dim(0)));
        if (s.dim(1) != g.num_detectors) {
          throw py::value_error("fbp: sinogram has " + std::to_string(s.dim(1)) + " detectors, expected " +
                                std::to_string(g.num_detectors));
        }
        return to_array(ct::fbp({s, g, std::nullopt, 0}));
      },
      py::arg("sinogram"), py::arg("image_size"), "Ram-Lak filtered back projection.");

  m.def(
      "synthesize_pair",
      [](std::uint64_t seed, int size, int num_angles, double photons) {
        ct::SynthesisConfig cfg;
        cfg.size = size;
        cfg.num_angles = num_angles;
        cfg.photons = photons;
        const auto p = ct::synthesize_pair(seed, cfg);
        py::dict d;
        d["artifact"] = to_array(p.artifact);
        d["clean"] = to_array(p.clean);
        d["metal_mask"] = mask_array(p.metal_mask);
        return d;
      },
      py::arg("seed"), py::arg("size") = 128, py::arg("num_angles") = 180, py::arg("photons") = 1e6,
      "Artifact-affected and clean HU images of one phantom, plus its metal mask.");

  m.def(
      "segment_metal", [](const FArray& hu) { return mask_array(ct::segment_metal(to_tensor(hu)).mask); },
      py::arg("image_hu"));

  m.def(
      "baseline",
      [](const FArray& hu, const std::string& method) {
        return to_array(mar::reconstruct_baseline(to_tensor(hu), mar::parse_method(method)));
      },
      py::arg("image_hu"), py::arg("method") = "li", "Sinogram-completion baseline: 'li' or 'nmar'.");

  m.def("hu_to_metric", [](const FArray& hu) { return to_array(hu_to_metric(to_tensor(hu))); }, py::arg("image_hu"));

  m.def(
      "psnr",
      [](const FArray& a, const FArray& b, const std::optional<BArray>& mask, double data_range) {
        return psnr(to_tensor(a), to_tensor(b), opt_mask(mask), data_range);
      },
      py::arg("a"), py::arg("b"), py::arg("mask") = py::none(), py::arg("data_range") = 1.0);

  m.def(
      "ssim",
      [](const FArray& a, const FArray& b, const std::optional<BArray>& mask, double data_range) {
        SsimOptions o;
        o.data_range = data_range;
        return ssim(to_tensor(a), to_tensor(b), opt_mask(mask), o);
      },
      py::arg("a"), py::arg("b"), py::arg("mask") = py::none(), py::arg("data_range") = 1.0);

  m.def("selfcheck", [] {
    std::vector<std::tuple<std::string, bool, double>> out;
    for (const auto& c : run_selfcheck()) out.emplace_back(c.name, c.passed, c.error);
    return out;
  });

  py::class_<eval::Inference>(m, "Model")
      .def(py::init([](const std::string& path) { return eval::Inference::from_checkpoint(path); }),
           py::arg("checkpoint"))
      .def("remove_artifacts", [](const eval::Inference& s, const FArray& hu) { return to_array(s.remove_artifacts(to_tensor(hu))); },
           py::arg("artifact_hu"))
      .def(
          "transfer_artifacts",
          [](const eval::Inference& s, const FArray& xa, const FArray& y) {
            return to_array(s.transfer_artifacts(to_tensor(xa), to_tensor(y)));
          },
          py::arg("artifact_hu"), py::arg("clean_hu"))
      .def_property_readonly("base_width", [](const eval::Inference& s) { return s.model.arch().base_width; });
}
