#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "spatialgen/checkpoint.hpp"
#include "spatialgen/cli.hpp"
#include "spatialgen/dataio.hpp"
#include "spatialgen/spatial_graph.hpp"
#include "spatialgen/trainer.hpp"

namespace py = pybind11;
using namespace spatialgen;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() == 1) {
    return Tensor(1, static_cast<std::size_t>(a.shape(0)),
                  std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2) throw Error(ErrorCode::ShapeMismatch, "expected a 1-d or 2-d array");
  return Tensor(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Array to_array(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<Location> to_locations(const Array& coords) {
  if (coords.ndim() != 2 || coords.shape(1) != 2) {
    throw Error(ErrorCode::ShapeMismatch, "coords must have shape (n, 2)");
  }
  std::vector<Location> locs;
  for (py::ssize_t i = 0; i < coords.shape(0); ++i) {
    locs.push_back({static_cast<std::size_t>(i), {coords.at(i, 0), coords.at(i, 1)}});
  }
  return locs;
}

std::string json_dumps(const py::object& obj) {
  return py::module_::import("json").attr("dumps")(obj).cast<std::string>();
}

py::object json_loads(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

// The predictor borrows the model, so both live in one non-movable object.
class Model {
 public:
  explicit Model(TrainedModel model) : model_(std::move(model)), predictor_(model_) {}
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const TrainedModel& model() const { return model_; }
  const Predictor& predictor() const { return predictor_; }

 private:
  TrainedModel model_;
  Predictor predictor_;
};

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["mode"] = to_string(r.mode);
  d["metric_name"] = r.metric_name;
  d["overall"] = r.overall;
  py::list rows;
  for (const auto& m : r.per_domain) {
    py::dict row;
    row["lat"] = m.lat;
    row["lon"] = m.lon;
    row["n"] = m.n;
    row["value"] = m.value ? py::object(py::float_(*m.value)) : py::object(py::none());
    rows.append(row);
  }
  d["per_domain"] = rows;
  py::list preds;
  for (const auto& p : r.predictions) preds.append(to_array(p));
  d["predictions"] = preds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Location-conditioned models with graph interpolation of location embeddings";
  m.attr("__version__") = std::string(kVersion);

  static py::exception<Error> error(m, "Error", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(error_code_name(e.code())) + ": " + e.what();
      PyErr_SetString(error.ptr(), msg.c_str());
    }
  });

  py::class_<Dataset>(m, "Dataset")
      .def_static(
          "load_csv",
          [](const std::string& path, const std::string& kind, const std::string& lat_col,
             const std::string& lon_col, const std::string& target_col,
             const std::vector<std::string>& features) {
            CsvSchema s{lat_col, lon_col, target_col, features};
            return load_csv(path, s, parse_task_kind(kind));
          },
          py::arg("path"), py::arg("kind") = "regression", py::arg("lat_col") = "lat",
          py::arg("lon_col") = "lon", py::arg("target_col") = "y",
          py::arg("features") = std::vector<std::string>{})
      .def("to_csv", [](const Dataset& d, const std::string& path) { save_csv(d, path); })
      .def("to_csv_string",
           [](const Dataset& d) {
             std::ostringstream out;
             write_csv(d, out);
             return out.str();
           })
      .def_property_readonly("num_locations", [](const Dataset& d) { return d.domains.size(); })
      .def_property_readonly("num_samples", &Dataset::num_samples)
      .def_property_readonly("feature_names", [](const Dataset& d) { return d.feature_names; })
      .def_property_readonly("kind", [](const Dataset& d) { return to_string(d.kind); })
      .def(
          "coords",
          [](const Dataset& d) {
            Array out({static_cast<py::ssize_t>(d.domains.size()), py::ssize_t{2}});
            auto v = out.mutable_unchecked<2>();
            for (std::size_t i = 0; i < d.domains.size(); ++i) {
              v(i, 0) = d.domains[i].lat();
              v(i, 1) = d.domains[i].lon();
            }
            return out;
          },
          "(lat, lon) per location")
      .def("domain",
           [](const Dataset& d, std::size_t i) {
             if (i >= d.domains.size()) throw py::index_error("location index out of range");
             return py::make_tuple(to_array(d.domains[i].xs), to_array(d.domains[i].ys));
           })
      .def("subset",
           [](const Dataset& d, const std::vector<std::size_t>& ids) {
             for (std::size_t id : ids) {
               if (id >= d.domains.size()) throw py::index_error("location index out of range");
             }
             Dataset out = d;
             out.domains = d.subset(ids);
             return out;
           })
      .def("__len__", [](const Dataset& d) { return d.domains.size(); });

  m.def(
      "synth",
      [](std::size_t locations, std::size_t samples, std::size_t features, double noise,
         std::uint64_t seed, const std::string& kind, const std::string& field) {
        SynthOptions o;
        o.num_locations = locations;
        o.samples_per_location = samples;
        o.num_features = features;
        o.noise_std = noise;
        o.seed = seed;
        o.kind = parse_task_kind(kind);
        o.field = parse_field_kind(field);
        return synth_generate(o);
      },
      py::arg("locations") = 200, py::arg("samples") = 20, py::arg("features") = 4,
      py::arg("noise") = 0.1, py::arg("seed") = 0, py::arg("kind") = "regression",
      py::arg("field") = "heterogeneous");

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def_static("load",
                  [](const std::string& path) {
                    return std::make_shared<Model>(load_checkpoint(path));
                  })
      .def_static("from_json",
                  [](const std::string& text) {
                    return std::make_shared<Model>(checkpoint_from_json(text));
                  })
      .def("save", [](const Model& self, const std::string& path) {
        save_checkpoint(self.model(), path);
      })
      .def("to_json", [](const Model& self) { return checkpoint_to_json(self.model()); })
      .def_property_readonly("mode", [](const Model& self) { return to_string(self.model().config.mode); })
      .def_property_readonly("config",
                             [](const Model& self) { return json_loads(config_to_json(self.model().config)); })
      .def_property_readonly("history", [](const Model& self) { return to_array(self.model().history); })
      .def(
          "predict",
          [](const Model& self, double lat, double lon, const Array& xs) {
            return to_array(self.predictor().predict({lon, lat}, to_tensor(xs)));
          },
          py::arg("lat"), py::arg("lon"), py::arg("xs"),
          "Predictions for raw feature rows at (lat, lon)")
      .def(
          "embedding",
          [](const Model& self, double lat, double lon) {
            return to_array(self.predictor().embedding_at({lon, lat}));
          },
          py::arg("lat"), py::arg("lon"))
      .def(
          "task_weights",
          [](const Model& self, double lat, double lon) {
            return to_array(self.predictor().task_weights_at({lon, lat}));
          },
          py::arg("lat"), py::arg("lon"));

  m.def(
      "train",
      [](const Dataset& data, const py::dict& config) {
        TrainConfig c = config_from_json(json_dumps(config));
        TrainedModel model;
        {
          py::gil_scoped_release release;
          model = train(data, c);
        }
        return std::make_shared<Model>(std::move(model));
      },
      py::arg("data"), py::arg("config") = py::dict(),
      "Trains on every location of `data`. `config` keys match the checkpoint config block.");

  m.def(
      "evaluate",
      [](const Model& model, const Dataset& data) {
        return report_dict(evaluate(model.model(), data.domains));
      },
      py::arg("model"), py::arg("data"));

  m.def(
      "split",
      [](std::size_t n, double test_fraction, std::uint64_t seed) {
        const Split s = split_domains(n, test_fraction, seed);
        return py::make_tuple(s.train, s.test);
      },
      py::arg("num_locations"), py::arg("test_fraction") = 0.2, py::arg("seed") = 0,
      "Seeded (train_ids, test_ids) split of location ids");

  m.def(
      "knn_graph",
      [](const Array& coords, std::size_t k) {
        const auto locs = to_locations(coords);
        const KnnGraph g = build_knn_graph(locs, k);
        py::array_t<std::size_t> out({static_cast<py::ssize_t>(g.size()), static_cast<py::ssize_t>(k)});
        std::copy(g.sources().begin(), g.sources().end(), out.mutable_data());
        return out;
      },
      py::arg("coords"), py::arg("k"),
      "In-neighbour ids per node, nearest first; coords are planar (x, y) rows");

  m.def(
      "edge_features",
      [](const Array& coords, std::size_t k) {
        const auto locs = to_locations(coords);
        const KnnGraph g = build_knn_graph(locs, k);
        const auto reps = edge_representations(g);
        Array out({static_cast<py::ssize_t>(g.size()), static_cast<py::ssize_t>(k), py::ssize_t{2}});
        double* p = out.mutable_data();
        for (const auto& r : reps) {
          *p++ = r.length;
          *p++ = r.angle;
        }
        return out;
      },
      py::arg("coords"), py::arg("k"), "(length, signed angle) per in-edge, shape (n, k, 2)");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"spatialgen"};
        full.insert(full.end(), args.begin(), args.end());
        std::ostringstream out, err;
        const int code = run_cli(full, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI command; returns (exit_code, stdout, stderr)");
}
