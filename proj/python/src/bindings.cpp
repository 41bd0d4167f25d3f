#include <cstring>
#include <filesystem>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gyolo/analysis.hpp"
#include "gyolo/arch.hpp"
#include "gyolo/data.hpp"
#include "gyolo/gradcheck.hpp"
#include "gyolo/infer.hpp"
#include "gyolo/metrics.hpp"
#include "gyolo/weights.hpp"

namespace py = pybind11;
using namespace gyolo;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

/// Accepts (C, H, W) or (N, C, H, W).
Tensor to_tensor(const FloatArray& a) {
  Shape s;
  if (a.ndim() == 3) {
    s = {1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))};
  } else if (a.ndim() == 4) {
    s = {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
         static_cast<int>(a.shape(3))};
  } else {
    throw py::value_error("expected a (C, H, W) or (N, C, H, W) array");
  }
  return Tensor(s, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Tensor& t) {
  const Shape& s = t.shape();
  FloatArray out({s.n, s.c, s.h, s.w});
  std::memcpy(out.mutable_data(), t.values().data(), s.numel() * sizeof(float));
  return out;
}

Box to_box(const py::sequence& b) {
  if (py::len(b) != 4) throw py::value_error("a box is [x1, y1, x2, y2]");
  return {b[0].cast<double>(), b[1].cast<double>(), b[2].cast<double>(), b[3].cast<double>()};
}

py::list box_list(const Box& b) { return py::cast(std::vector<double>{b.x1, b.y1, b.x2, b.y2}); }

py::dict detection_dict(const Detection& d) {
  py::dict out;
  out["class_id"] = d.class_id;
  out["confidence"] = d.confidence;
  out["box"] = box_list(d.box);
  return out;
}

Detection to_detection(const py::handle& h) {
  const py::dict d = py::reinterpret_borrow<py::dict>(h);
  return {d["class_id"].cast<int>(), d["confidence"].cast<double>(), to_box(d["box"])};
}

py::list detection_list(const std::vector<Detection>& dets) {
  py::list out;
  for (const Detection& d : dets) out.append(detection_dict(d));
  return out;
}

ArchGraph graph_of(const std::string& family, const std::string& scale, int nc) {
  return make_graph(parse_family(family), parse_scale(scale), nc);
}

py::dict metrics_dict(const MetricsReport& r) {
  py::dict out;
  out["valid"] = r.valid;
  out["num_classes"] = r.num_classes;
  out["classes_evaluated"] = r.classes_evaluated;
  out["map50"] = r.map50;
  out["map50_95"] = r.map5095;
  out["operating_confidence"] = r.operating_confidence;
  out["precision"] = r.precision;
  out["recall"] = r.recall;
  out["fscore"] = r.fscore;
  py::list per_class;
  for (const ClassMetrics& c : r.per_class) {
    py::dict d;
    d["class_id"] = c.class_id;
    d["num_truths"] = c.num_truths;
    d["num_detections"] = c.num_detections;
    d["ap"] = c.ap;
    d["ap50"] = c.ap50;
    d["ap50_95"] = c.ap5095;
    per_class.append(d);
  }
  out["per_class"] = per_class;
  return out;
}

}  // namespace

PYBIND11_MODULE(_gyolo, m) {
  m.doc() = "G-YOLOv11 / YOLOv11 graphs, inference, profiling and evaluation";

  py::register_exception<ArchError>(m, "ArchError", PyExc_ValueError);
  py::register_exception<BindError>(m, "BindError", PyExc_ValueError);
  py::register_exception<WeightFormatError>(m, "WeightFormatError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<LabelParseError>(m, "LabelParseError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.def("variant_name", [](const std::string& family, const std::string& scale) {
    return variant_name(parse_family(family), parse_scale(scale));
  });

  m.def("export_arch", [](const std::string& family, const std::string& scale, int nc) {
    return export_arch(graph_of(family, scale, nc));
  }, py::arg("family"), py::arg("scale"), py::arg("nc") = 9);

  m.def("count_params", [](const std::string& family, const std::string& scale, int nc) {
    return count_params(graph_of(family, scale, nc)).total;
  }, py::arg("family"), py::arg("scale"), py::arg("nc") = 9);

  m.def("count_flops", [](const std::string& family, const std::string& scale, int imgsz, int nc) {
    return count_flops(graph_of(family, scale, nc), imgsz).total;
  }, py::arg("family"), py::arg("scale"), py::arg("imgsz") = 640, py::arg("nc") = 9);

  m.def("count_layers", [](const std::string& family, const std::string& scale, int nc) {
    return count_layers(graph_of(family, scale, nc));
  }, py::arg("family"), py::arg("scale"), py::arg("nc") = 9);

  m.def("summary_json", [](const std::string& family, const std::string& scale, int imgsz, int nc) {
    return profile_json(profile(graph_of(family, scale, nc), imgsz));
  }, py::arg("family"), py::arg("scale"), py::arg("imgsz") = 640, py::arg("nc") = 9);

  m.def("comparison_json", [](const std::string& scale, int imgsz, int nc) {
    return gyolo::comparison_json(compare(parse_scale(scale), nc, imgsz));
  }, py::arg("scale"), py::arg("imgsz") = 640, py::arg("nc") = 9);

  m.def("init_weights", [](const std::string& family, const std::string& scale,
                           const std::filesystem::path& path, std::uint64_t seed, int nc,
                           bool half) {
    WeightContainer c = init_random(graph_of(family, scale, nc), seed);
    if (half) c = halfprec_roundtrip(c);
    save(c, path);
    return c.learnable_elements();
  }, py::arg("family"), py::arg("scale"), py::arg("path"), py::arg("seed") = 0,
     py::arg("nc") = 9, py::arg("half") = false);

  m.def("weight_names", [](const std::filesystem::path& path) {
    std::vector<std::pair<std::string, std::vector<std::uint32_t>>> out;
    const WeightContainer c = load(path);
    for (const WeightEntry& e : c.entries()) out.emplace_back(e.name, e.dims);
    return out;
  });

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& family, const std::string& scale, int nc,
                       std::uint64_t seed, std::optional<std::filesystem::path> weights) {
             const ArchGraph g = graph_of(family, scale, nc);
             return weights ? build(g, load(*weights)) : build(g, seed);
           }),
           py::arg("family"), py::arg("scale"), py::arg("nc") = 9, py::arg("seed") = 0,
           py::arg("weights") = std::nullopt)
      .def_property_readonly("variant", [](const Model& mo) {
        return variant_name(mo.graph().family, mo.graph().scale);
      })
      .def("forward", [](const Model& mo, const FloatArray& image) {
        const Tensor x = to_tensor(image);
        std::vector<Tensor> maps;
        {
          py::gil_scoped_release release;
          maps = mo.forward(x);
        }
        py::list out;
        for (const Tensor& t : maps) out.append(to_array(t));
        return out;
      }, py::arg("image"))
      .def("detect", [](const Model& mo, const FloatArray& image, int imgsz, float conf,
                        double iou, std::size_t max_det) {
        const Tensor x = to_tensor(image);
        std::vector<Detection> dets;
        {
          py::gil_scoped_release release;
          dets = run(mo, x, {imgsz, conf, iou, max_det});
        }
        return detection_list(dets);
      }, py::arg("image"), py::arg("imgsz") = 640, py::arg("conf") = 0.25f,
         py::arg("iou") = 0.45, py::arg("max_det") = 300);

  m.def("iou", [](const py::sequence& a, const py::sequence& b) { return iou(to_box(a), to_box(b)); });

  m.def("nms", [](const py::list& candidates, double iou_threshold) {
    std::vector<Detection> c;
    for (const py::handle& h : candidates) c.push_back(to_detection(h));
    return detection_list(nms(c, iou_threshold));
  }, py::arg("candidates"), py::arg("iou_threshold") = 0.45);

  m.def("evaluate", [](const py::list& images, int num_classes) {
    std::vector<ImageRecord> ds;
    for (const py::handle& h : images) {
      const py::dict d = py::reinterpret_borrow<py::dict>(h);
      ImageRecord rec;
      rec.name = d.contains("image") ? d["image"].cast<std::string>() : std::string();
      for (const py::handle& det : d["detections"].cast<py::list>()) {
        rec.detections.push_back(to_detection(det));
      }
      for (const py::handle& t : d["truths"].cast<py::list>()) {
        const py::dict td = py::reinterpret_borrow<py::dict>(t);
        rec.truths.push_back({td["class_id"].cast<int>(), to_box(td["box"])});
      }
      ds.push_back(std::move(rec));
    }
    return metrics_dict(evaluate(ds, num_classes));
  }, py::arg("images"), py::arg("num_classes"),
     "Each image is {'detections': [...], 'truths': [{'class_id', 'box'}]} in pixel corners.");

  m.def("load_image", [](const std::filesystem::path& path) { return to_array(load_image(path).pixels); });

  m.def("parse_labels", [](const std::string& text, int num_classes) {
    py::list out;
    for (const GroundTruthBox& b : parse_label_file(text, num_classes)) {
      out.append(py::make_tuple(b.class_id, b.cx, b.cy, b.w, b.h));
    }
    return out;
  }, py::arg("text"), py::arg("num_classes") = 9);

  m.def("default_class_names", &default_class_names);

  m.def("gradcheck", [](const std::string& op, std::uint64_t seed, bool flip_sign) {
    const grad::GradReport r = grad::check(grad::parse_target(op), seed, grad::kGradTolerance, flip_sign);
    py::dict out;
    out["op"] = r.op;
    out["seed"] = r.seed;
    out["max_rel_error"] = r.max_rel_error;
    out["probes"] = r.probes;
    out["pass"] = r.pass;
    return out;
  }, py::arg("op"), py::arg("seed") = 1, py::arg("flip_sign") = false);

  m.def("gradcheck_targets", [] {
    std::vector<std::string> out;
    for (grad::Target t : grad::all_targets()) out.push_back(grad::to_string(t));
    return out;
  });
}
