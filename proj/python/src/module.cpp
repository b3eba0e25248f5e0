#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "facepipe/classify.hpp"
#include "facepipe/cli.hpp"
#include "facepipe/embeddings_io.hpp"
#include "facepipe/eval.hpp"
#include "facepipe/heads.hpp"
#include "facepipe/pooling.hpp"
#include "facepipe/synthetic.hpp"

namespace py = pybind11;
using namespace facepipe;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

EmbeddingMatrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto dim = static_cast<std::size_t>(a.shape(1));
  return EmbeddingMatrix(dim, std::vector<float>(a.data(), a.data() + rows * dim));
}

std::span<const float> to_span(const FloatArray& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-D array");
  return {a.data(), static_cast<std::size_t>(a.shape(0))};
}

std::span<const double> to_dspan(const DoubleArray& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-D array");
  return {a.data(), static_cast<std::size_t>(a.shape(0))};
}

py::array_t<float> from_matrix(const EmbeddingMatrix& m) {
  py::array_t<float> out({m.rows(), m.dim()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> from_vector(const std::vector<T>& v) {
  py::array_t<T> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["accuracy"] = r.accuracy;
  d["recalls"] = r.recalls;
  d["confusion"] = r.confusion;
  d["mae"] = r.mae ? py::object(py::float_(*r.mae)) : py::none();
  d["mean"] = r.mean_std ? py::object(py::float_(r.mean_std->mean)) : py::none();
  d["std"] = r.mean_std ? py::object(py::float_(r.mean_std->std)) : py::none();
  d["n"] = r.n;
  return d;
}

PoolingMode parse_mode(const std::string& mode) {
  if (mode == "single") return PoolingMode::SingleFace;
  if (mode == "group") return PoolingMode::Group;
  throw ParamError("mode must be 'single' or 'group'");
}

}  // namespace

PYBIND11_MODULE(_facepipe, m) {
  m.doc() = "Descriptor pooling, prediction heads, linear SVMs and evaluation protocols.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<TruncationError>(m, "TruncationError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<RefError>(m, "RefError", base.ptr());
  py::register_exception<EmptyInputError>(m, "EmptyInputError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<IndexError>(m, "OutOfRangeError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ParamError>(m, "ParamError", base.ptr());
  py::register_exception<DegenerateLabelsError>(m, "DegenerateLabelsError", base.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());

  // embeddings_io
  m.def("read_embedding_file", [](const std::filesystem::path& p) { return from_matrix(read_embedding_file(p)); },
        py::arg("path"), "Read an EMB1 file into a (T, D) float32 array.");
  m.def("write_embedding_file",
        [](const FloatArray& a, const std::filesystem::path& p) { write_embedding_file(to_matrix(a), p); },
        py::arg("matrix"), py::arg("path"));
  m.def(
      "pool_manifest",
      [](const std::filesystem::path& manifest, const std::string& mode, bool l2) {
        EmbeddingStore store(manifest.parent_path());
        const auto samples = load_manifest(manifest, store);
        DescriptorOptions opts{.mode = parse_mode(mode), .l2 = l2};
        const auto descriptors = descriptors_for_videos(samples, store, opts);
        std::vector<std::string> ids;
        std::vector<std::int64_t> labels;
        std::vector<bool> valid;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          ids.push_back(samples[i].id);
          labels.push_back(samples[i].label);
          valid.push_back(descriptors[i].valid);
        }
        py::dict d;
        d["ids"] = ids;
        d["labels"] = from_vector(labels);
        d["valid"] = valid;
        d["descriptors"] = samples.empty() ? py::array_t<float>() : from_matrix(facepipe::to_matrix(descriptors));
        return d;
      },
      py::arg("manifest"), py::arg("mode") = "single", py::arg("l2") = true,
      "Load a manifest and pool every video into one descriptor row.");

  // pooling
  m.def("stat_pool_video", [](const FloatArray& a) { return from_vector(stat_pool_video(to_matrix(a)).values); },
        py::arg("frames"));
  m.def("group_pool_frame", [](const FloatArray& a) { return from_vector(group_pool_frame(to_matrix(a))); },
        py::arg("faces"));
  m.def("group_pool_video", [](const FloatArray& a) { return from_vector(group_pool_video(to_matrix(a)).values); },
        py::arg("frame_descriptors"));
  m.def("l2_normalize", [](const FloatArray& a) { return from_vector(l2_normalize(to_span(a))); }, py::arg("v"));

  // heads
  m.def("softmax", [](const DoubleArray& z) { return from_vector(softmax(to_dspan(z))); }, py::arg("logits"));
  m.def("expected_age",
        [](const DoubleArray& p, const DoubleArray& a, std::size_t l) { return expected_age(to_dspan(p), to_dspan(a), l); },
        py::arg("probs"), py::arg("ages"), py::arg("top_l") = 0);
  m.def("class_weights", [](const std::vector<std::int64_t>& c) { return from_vector(class_weights(c)); },
        py::arg("counts"));
  m.def("weighted_ce_loss",
        [](const DoubleArray& z, std::size_t y, const DoubleArray& w) { return weighted_ce_loss(to_dspan(z), y, to_dspan(w)); },
        py::arg("logits"), py::arg("label"), py::arg("weights"));
  m.def("weighted_ce_grad",
        [](const DoubleArray& z, std::size_t y, const DoubleArray& w) {
          return from_vector(weighted_ce_grad(to_dspan(z), y, to_dspan(w)));
        },
        py::arg("logits"), py::arg("label"), py::arg("weights"));
  m.def("reduce_scores_8_to_7",
        [](const DoubleArray& s, std::size_t ci) { return from_vector(reduce_scores_8_to_7(to_dspan(s), ci)); },
        py::arg("scores8"), py::arg("contempt_index"));
  m.def("binary_ce", &binary_ce, py::arg("p"), py::arg("label"));

  // classify
  py::class_<LinearModel>(m, "LinearModel")
      .def_readonly("classes", &LinearModel::classes)
      .def_readonly("dim", &LinearModel::dim)
      .def_property_readonly("weights",
                             [](const LinearModel& lm) {
                               py::array_t<float> out({lm.classes, lm.dim});
                               std::copy(lm.weights.begin(), lm.weights.end(), out.mutable_data());
                               return out;
                             })
      .def_property_readonly("biases", [](const LinearModel& lm) { return from_vector(lm.biases); })
      .def_readonly("objective_history", &LinearModel::objective_history)
      .def("predict",
           [](const LinearModel& lm, const FloatArray& x) {
             const auto p = svm_predict(lm, to_span(x));
             return py::make_tuple(p.label, from_vector(p.scores));
           },
           py::arg("x"), "Return (label, scores) for one descriptor.")
      .def("save", [](const LinearModel& lm, const std::filesystem::path& p) { write_linear_model(lm, p); })
      .def_static("load", [](const std::filesystem::path& p) { return read_linear_model(p); });

  m.def("train_linear_svm",
        [](const FloatArray& x, const std::vector<std::int64_t>& y, double lambda, std::size_t epochs,
           std::uint64_t seed) {
          const auto mat = to_matrix(x);
          py::gil_scoped_release release;
          return train_linear_svm(mat, y, TrainConfig{.lambda = lambda, .epochs = epochs, .seed = seed});
        },
        py::arg("x"), py::arg("y"), py::arg("lam") = TrainConfig{}.lambda, py::arg("epochs") = TrainConfig{}.epochs,
        py::arg("seed") = TrainConfig{}.seed);
  m.def("knn_predict",
        [](const FloatArray& train, const std::vector<std::int64_t>& y, const FloatArray& q, std::size_t k) {
          return knn_predict(to_matrix(train), y, to_span(q), k);
        },
        py::arg("train_x"), py::arg("train_y"), py::arg("query"), py::arg("k"));
  m.def("rank1_identification",
        [](const std::vector<FloatArray>& subjects, std::size_t reps, std::uint64_t seed) {
          std::vector<EmbeddingMatrix> mats;
          for (const auto& s : subjects) mats.push_back(to_matrix(s));
          return report_dict(rank1_identification(mats, {.repetitions = reps, .seed = seed}));
        },
        py::arg("subjects"), py::arg("repetitions") = 10, py::arg("seed") = 42);

  // eval
  m.def("accuracy_and_confusion",
        [](const std::vector<std::int64_t>& pred, const std::vector<std::int64_t>& truth, std::size_t c) {
          return report_dict(accuracy_and_confusion(pred, truth, c));
        },
        py::arg("pred"), py::arg("truth"), py::arg("classes"));
  m.def("subset_report",
        [](const std::vector<std::int64_t>& pred, const std::vector<std::int64_t>& truth, std::size_t c,
           const std::vector<bool>& mask) { return report_dict(subset_report(pred, truth, c, mask)); },
        py::arg("pred"), py::arg("truth"), py::arg("classes"), py::arg("mask"));
  m.def("mean_absolute_error",
        [](const DoubleArray& p, const DoubleArray& t) { return mean_absolute_error(to_dspan(p), to_dspan(t)); },
        py::arg("pred"), py::arg("truth"));

  // fixtures and CLI
  m.def(
      "generate_dataset",
      [](const std::filesystem::path& out_dir, std::size_t classes, std::size_t videos_per_class,
         std::size_t frames_per_video, std::size_t min_faces, std::size_t max_faces, std::size_t dim,
         double separation, std::uint64_t seed, double faceless_fraction, double empty_frame_prob) {
        synthetic::SyntheticSpec spec{classes, videos_per_class, frames_per_video, min_faces, max_faces, dim,
                                      separation, 1.0, seed, faceless_fraction, empty_frame_prob};
        const auto ds = synthetic::generate_dataset(spec, out_dir);
        py::dict d;
        d["manifest"] = ds.manifest;
        d["embeddings"] = ds.embeddings;
        d["labels"] = ds.labels;
        d["videos"] = ds.videos;
        d["faceless_videos"] = ds.faceless_videos;
        return d;
      },
      py::arg("out_dir"), py::arg("classes") = 3, py::arg("videos_per_class") = 20, py::arg("frames_per_video") = 8,
      py::arg("min_faces") = 1, py::arg("max_faces") = 1, py::arg("dim") = 16, py::arg("separation") = 6.0,
      py::arg("seed") = 42, py::arg("faceless_fraction") = 0.0, py::arg("empty_frame_prob") = 0.0);
  m.def(
      "cli_run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the facepipe CLI in-process; returns (exit_code, stdout, stderr).");
}
