// Python bindings for the main operations: series synthesis, the
// preprocessing chain, parameter arithmetic and confusion-matrix metrics.
// Image payloads cross the boundary as numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "phantomqa/metrics.hpp"
#include "phantomqa/model.hpp"
#include "phantomqa/preprocess.hpp"
#include "phantomqa/simulate.hpp"

namespace py = pybind11;
using namespace phantomqa;

namespace {

template <typename T>
py::array_t<T> image_to_numpy(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<T> out(shape);
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

template <typename T>
Tensor<T> image_from_numpy(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  std::vector<int> shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape.push_back(static_cast<int>(a.shape(i)));
  Tensor<T> t(shape);
  std::copy(a.data(), a.data() + a.size(), t.data.begin());
  return t;
}

py::dict series_to_dict(const LabeledSeries& series) {
  const auto n = static_cast<py::ssize_t>(series.slices.size());
  const py::ssize_t px = series.acq.resolution_px;
  py::array_t<std::int16_t> hu({n, px, px});
  std::vector<std::string> labels;
  std::vector<double> z, dist;
  auto* dst = hu.mutable_data();
  for (const LabeledSlice& s : series.slices) {
    dst = std::copy(s.hu.data.begin(), s.hu.data.end(), dst);
    labels.emplace_back(to_string(s.label));
    z.push_back(s.z_center_mm);
    dist.push_back(s.transition_dist_mm);
  }
  py::dict d;
  d["hu"] = hu;
  d["labels"] = labels;
  d["z_mm"] = z;
  d["transition_dist_mm"] = dist;
  return d;
}

py::dict report_to_dict(const EvalReport& r) {
  auto rat = [](const Rational& x) {
    return x.undefined ? py::object(py::none()) : py::object(py::float_(x.value()));
  };
  std::vector<py::object> precision, recall, f1;
  for (int k = 0; k < kNumClasses; ++k) {
    precision.push_back(rat(r.per_class[static_cast<std::size_t>(k)].precision));
    recall.push_back(rat(r.per_class[static_cast<std::size_t>(k)].recall));
    f1.push_back(rat(r.per_class[static_cast<std::size_t>(k)].f1));
  }
  py::dict d;
  d["precision"] = precision;
  d["recall"] = recall;
  d["f1"] = f1;
  d["accuracy"] = rat(r.accuracy);
  d["weighted_accuracy"] = rat(r.weighted_accuracy);
  return d;
}

py::dict count_params(const ModelConfig& cfg) {
  py::dict d;
  d["conv_stack"] = conv_stack_params(cfg);
  d["dense"] = head_dense_params(cfg);
  d["bn"] = head_bn_params(cfg);
  d["output"] = output_layer_params(cfg);
  d["total"] = total_params(cfg);
  d["dense_fraction"] =
      static_cast<double>(head_dense_params(cfg)) / static_cast<double>(total_params(cfg));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Phantom slice synthesis, preprocessing and QA metrics";

  m.def("class_names", []() {
    return std::vector<std::string>(kClassNames.begin(), kClassNames.end());
  });

  m.def(
      "generate_slices",
      [](std::uint64_t seed, int resolution_px, double slice_thickness_mm, bool with_gaps) {
        AcquisitionSpec acq;
        acq.resolution_px = resolution_px;
        acq.slice_thickness_mm = slice_thickness_mm;
        acq.seed = seed;
        const ArtifactSpec artifacts = with_gaps ? default_artifacts() : ArtifactSpec{};
        return series_to_dict(generate_series(multi_diameter_default(), acq, artifacts));
      },
      py::arg("seed") = 1, py::arg("resolution_px") = 128,
      py::arg("slice_thickness_mm") = 5.0, py::arg("with_gaps") = true,
      "Synthesize one labeled slice series of the default phantom.");

  m.def(
      "window_hu",
      [](const py::array_t<std::int16_t, py::array::c_style | py::array::forcecast>& img) {
        return image_to_numpy(window_hu(image_from_numpy(img)));
      },
      py::arg("img"), "Map HU to 8 bit over the fixed display window.");

  m.def(
      "downsample",
      [](const py::array_t<std::int16_t, py::array::c_style | py::array::forcecast>& img) {
        return image_to_numpy(downsample(image_from_numpy(img)));
      },
      py::arg("img"), "Halve a HU image by 2x2 block means.");

  m.def(
      "stack_axial",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& volume,
         int index) {
        if (volume.ndim() != 3) throw py::value_error("volume must be [N,H,W]");
        std::vector<TensorU8> slices;
        for (py::ssize_t i = 0; i < volume.shape(0); ++i) {
          TensorU8 s({static_cast<int>(volume.shape(1)), static_cast<int>(volume.shape(2))});
          const auto* src = volume.data() + i * volume.shape(1) * volume.shape(2);
          std::copy(src, src + s.data.size(), s.data.begin());
          slices.push_back(std::move(s));
        }
        return image_to_numpy(stack_axial_slices(slices, index));
      },
      py::arg("volume"), py::arg("index"),
      "Stack a slice with its axial neighbors into 3 channels.");

  m.def(
      "metrics_from_confusion",
      [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& cm_in) {
        if (cm_in.ndim() != 2 || cm_in.shape(0) != kNumClasses || cm_in.shape(1) != kNumClasses)
          throw py::value_error("confusion matrix must be 5x5, rows are truth");
        ConfusionMatrix cm;
        for (int i = 0; i < kNumClasses; ++i)
          for (int j = 0; j < kNumClasses; ++j)
            cm.m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = cm_in.at(i, j);
        return report_to_dict(metrics_from_confusion(cm));
      },
      py::arg("cm"),
      "Precision, recall, F1 and accuracy from a 5x5 confusion matrix; "
      "undefined ratios come back as None.");

  m.def(
      "published_param_counts", [](int head_width) { return count_params(vgg19_preset(head_width)); },
      py::arg("head_width"),
      "Parameter counts for the 256 px architecture at a given head width.");

  m.def("desk_param_counts", []() { return count_params(desk_preset()); },
        "Parameter counts for the desk-scale architecture.");
}
