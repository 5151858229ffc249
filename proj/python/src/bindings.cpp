#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "ihfood/detectors.hpp"
#include "ihfood/embedding.hpp"
#include "ihfood/errors.hpp"
#include "ihfood/harness.hpp"
#include "ihfood/metrics.hpp"
#include "ihfood/pca.hpp"
#include "ihfood/phantom.hpp"
#include "ihfood/preprocess.hpp"
#include "ihfood/synth.hpp"
#include "ihfood/volume.hpp"

namespace py = pybind11;
using namespace ihfood;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Volume to_volume(const FloatArray& a, const Spacing& spacing) {
  if (a.ndim() != 3) throw PreconditionError("expected a 3D array");
  const Shape shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                    static_cast<std::size_t>(a.shape(2))};
  std::vector<float> data(a.data(), a.data() + a.size());
  return Volume(shape, spacing, std::move(data));
}

FloatArray to_array(const Volume& v) {
  const auto& s = v.shape();
  FloatArray out({s[0], s[1], s[2]});
  std::memcpy(out.mutable_data(), v.data().data(), v.size() * sizeof(float));
  return out;
}

PreprocessConfig modality(const std::string& name) {
  if (name == "ct") return PreprocessConfig::ct();
  if (name == "mri") return PreprocessConfig::mri();
  throw PreconditionError("modality must be 'ct' or 'mri'");
}

py::dict result_dict(const ChallengeResult& r) {
  py::dict d;
  d["challenge"] = r.challenge;
  d["ood_set"] = r.ood_set;
  d["severity"] = r.severity;
  d["method"] = r.method;
  d["fpr_at_tpr95"] = r.metric.fpr_at_tpr95;
  d["auroc"] = r.metric.auroc;
  d["threshold"] = r.metric.threshold;
  d["id_scores"] = r.id_scores.scores();
  d["ood_scores"] = r.ood_scores.scores();
  return d;
}

}  // namespace

PYBIND11_MODULE(_ihfood, m) {
  m.doc() = "Intensity histogram features for out-of-distribution detection on 3D scans";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<FitError>(m, "FitError", base.ptr());

  py::class_<Volume>(m, "Volume")
      .def(py::init([](const FloatArray& a, const Spacing& spacing) { return to_volume(a, spacing); }),
           py::arg("array"), py::arg("spacing") = Spacing{1.0, 1.0, 1.0})
      .def_property_readonly("shape",
                             [](const Volume& v) {
                               const auto& s = v.shape();
                               return py::make_tuple(s[0], s[1], s[2]);
                             })
      .def_property_readonly("spacing",
                             [](const Volume& v) {
                               const auto& s = v.spacing();
                               return py::make_tuple(s[0], s[1], s[2]);
                             })
      .def("numpy", &to_array)
      .def("__eq__", [](const Volume& a, const Volume& b) { return a == b; })
      .def("__repr__", [](const Volume& v) {
        const auto& s = v.shape();
        return "Volume(" + std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" +
               std::to_string(s[2]) + ")";
      });

  m.def("load_volume", py::overload_cast<const std::filesystem::path&>(&load_volume), py::arg("path"));
  m.def("save_volume", [](const Volume& v, const std::filesystem::path& p) { save_volume(v, p); },
        py::arg("volume"), py::arg("path"));
  m.def("preprocess", [](const Volume& v, const std::string& mod) { return preprocess(v, modality(mod)); },
        py::arg("volume"), py::arg("modality"));
  m.def("histogram", [](const Volume& v, std::size_t bins) { return histogram(v, bins).values; },
        py::arg("volume"), py::arg("m"));

  py::class_<PcaModel>(m, "PcaModel")
      .def_readonly("mean", &PcaModel::mean)
      .def_readonly("components", &PcaModel::components)
      .def_readonly("explained_variance_ratio", &PcaModel::explained_variance_ratio)
      .def("transform", [](const PcaModel& p, const Eigen::VectorXd& x) { return pca_transform(p, x); });
  m.def("fit_pca", &fit_pca, py::arg("x"), py::arg("v"));

  py::class_<IhfDetector>(m, "IhfDetector")
      .def_readonly("m", &IhfDetector::m)
      .def_property_readonly("dim", &IhfDetector::dim)
      .def_readonly("mu_hat", &IhfDetector::mu_hat)
      .def_readonly("train_vectors", &IhfDetector::train_vectors)
      .def("score_mahalanobis", &score_mahalanobis)
      .def("score_nn", &score_nn)
      .def("to_json", [](const IhfDetector& d) { return to_json(d).dump(); });
  m.def(
      "fit_ihf",
      [](const std::vector<Volume>& train, const std::string& mod, std::size_t bins,
         std::optional<double> v, double ridge) { return fit_ihf(train, modality(mod), bins, v, ridge); },
      py::arg("train"), py::arg("modality"), py::arg("m") = kDefaultBins,
      py::arg("v") = kDefaultVariance, py::arg("ridge") = kDefaultRidge);

  py::class_<VolumePredictor>(m, "VolumePredictor")
      .def(py::init<std::vector<double>>(), py::arg("train_volumes"))
      .def("percentile_rank", &VolumePredictor::percentile_rank)
      .def("score", &VolumePredictor::score);
  m.def("entropy_score", &entropy_score, py::arg("prob_map"));
  m.def("uncertainty_score", [](const std::vector<Volume>& maps) { return uncertainty_score(maps); },
        py::arg("prob_maps"));

  m.def(
      "fpr_at_tpr",
      [](const std::vector<double>& id, const std::vector<double>& ood, double target) {
        const auto r = fpr_at_tpr(id, ood, target);
        return py::make_tuple(r.fpr, r.threshold);
      },
      py::arg("id_scores"), py::arg("ood_scores"), py::arg("tpr_target") = 0.95);
  m.def("auroc", [](const std::vector<double>& id, const std::vector<double>& ood) { return auroc(id, ood); },
        py::arg("id_scores"), py::arg("ood_scores"));
  m.def(
      "fechner_correlation",
      [](const std::vector<double>& a, const std::vector<double>& b) { return fechner_correlation(a, b); },
      py::arg("a"), py::arg("b"));

  m.def(
      "corrupt",
      [](const Volume& v, const std::string& spec) { return corrupt(v, parse_corruption_spec(spec)); },
      py::arg("volume"), py::arg("spec"));
  m.def(
      "make_phantom",
      [](std::uint64_t seed, std::size_t size) {
        PhantomConfig cfg;
        cfg.shape = {size, size, size};
        return make_phantom(seed, cfg);
      },
      py::arg("seed"), py::arg("size") = 64);

  m.def(
      "run_challenge",
      [](const std::filesystem::path& manifest, const std::string& detector, std::size_t bins,
         std::optional<double> v, std::vector<std::filesystem::path> scores, unsigned jobs) {
        DetectorSpec spec;
        spec.kind = detector_kind_from_string(detector);
        spec.m = bins;
        spec.v = v;
        spec.score_files = std::move(scores);
        RunOptions opts;
        opts.jobs = jobs;
        std::vector<ChallengeResult> results;
        {
          py::gil_scoped_release release;
          results = run_challenge(load_manifest(manifest), spec, opts);
        }
        py::list out;
        for (const auto& r : results) out.append(result_dict(r));
        return out;
      },
      py::arg("manifest"), py::arg("detector") = "ihf-nn", py::arg("m") = kDefaultBins,
      py::arg("v") = kDefaultVariance, py::arg("scores") = std::vector<std::filesystem::path>{},
      py::arg("jobs") = 0);
}
