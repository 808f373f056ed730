// Python bindings. Documents cross the boundary as SVG text, images as
// float arrays of shape (height, width, 3).

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "svgsmith/error.hpp"
#include "svgsmith/gateway.hpp"

namespace py = pybind11;
using namespace svgsmith;

namespace {

py::array_t<double> to_array(const raster::RasterImage& img) {
  py::array_t<double> out({img.height, img.width, 3});
  std::copy(img.rgb.begin(), img.rgb.end(), out.mutable_data());
  return out;
}

raster::RasterImage from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ArgumentError("image must have shape (height, width, 3)");
  raster::RasterImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.rgb.begin());
  return img;
}

std::vector<Vec2> to_points(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw ArgumentError("points must have shape (n, 2)");
  std::vector<Vec2> pts(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) pts[i] = {a.at(i, 0), a.at(i, 1)};
  return pts;
}

svg::Document doc_of(const std::string& text) { return svg::parse_svg(text, {.strict = false}).doc; }

py::list trace_list(const std::vector<optim::LossTerms>& trace) {
  py::list out;
  for (const auto& t : trace) {
    py::dict d;
    d["total"] = t.total;
    d["mse"] = t.mse;
    d["curvature"] = t.curvature;
    d["iou"] = t.iou;
    out.append(d);
  }
  return out;
}

py::dict issue_dict(const svg::Issue& i) {
  py::dict d;
  d["path_id"] = i.path_id;
  d["code"] = i.code;
  d["message"] = i.message;
  return d;
}

optim::OptimizationConfig opt_config(int iters, int resolution, int supersampling, bool freeze_colors) {
  optim::OptimizationConfig cfg;
  cfg.iters_per_stage = iters;
  cfg.render.resolution = resolution;
  cfg.render.supersampling = supersampling;
  cfg.freeze_colors = freeze_colors;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_svgsmith, m) {
  m.doc() = "Text-to-SVG pipeline core";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error;
      py::object inst = exc(e.what());
      inst.attr("code") = e.code();
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  m.def(
      "normalize",
      [](const std::string& text) { return svg::serialize(doc_of(text)); },
      py::arg("svg"), "Parse and re-serialize with every shape as a cubic path.");

  m.def(
      "validate",
      [](const std::string& text) {
        const svg::ValidationReport r = svg::validate_template(svg::parse_svg(text, {.strict = false}));
        py::dict d;
        d["valid"] = r.ok();
        py::list errors, warnings;
        for (const auto& i : r.errors) errors.append(issue_dict(i));
        for (const auto& i : r.warnings) warnings.append(issue_dict(i));
        d["errors"] = errors;
        d["warnings"] = warnings;
        return d;
      },
      py::arg("svg"));

  m.def(
      "paths",
      [](const std::string& text) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& p : doc_of(text).paths) out.emplace_back(p.id, p.semantic_label);
        return out;
      },
      py::arg("svg"), "(id, semantic label) for every path in painter's order.");

  m.def(
      "render",
      [](const std::string& text, int resolution, int supersampling) {
        raster::RenderConfig cfg;
        cfg.resolution = resolution;
        cfg.supersampling = supersampling;
        cfg.validate();
        return to_array(raster::render(doc_of(text), cfg));
      },
      py::arg("svg"), py::arg("resolution") = 0, py::arg("supersampling") = 2);

  m.def(
      "curvature_loss", [](const std::string& text) { return optim::curvature_loss(doc_of(text)); }, py::arg("svg"));
  m.def(
      "emd", [](py::array_t<double> x, py::array_t<double> y) { return shape::emd(to_points(x), to_points(y)); },
      py::arg("x"), py::arg("y"), "Optimal one-to-one matching cost between equal-size point sets.");
  m.def("lambda3_at", &optim::lambda3_at, py::arg("t"), py::arg("T"), py::arg("start") = 1e-3, py::arg("end") = 5e-5);

  m.def(
      "optimize",
      [](const std::string& text, py::array_t<double> target, int iters, int supersampling, bool freeze_colors) {
        const raster::RasterImage tgt = from_array(target);
        const optim::OptimizationConfig cfg =
            opt_config(iters, std::max(tgt.width, tgt.height), supersampling, freeze_colors);
        const shape::FourierDecoder decoder;
        optim::PipelineResult r;
        {
          py::gil_scoped_release nogil;
          r = optim::optimize_document(doc_of(text), tgt, cfg, decoder);
        }
        py::dict d;
        d["svg"] = svg::serialize(r.doc);
        d["latent_trace"] = trace_list(r.latent.loss_trace);
        d["point_trace"] = trace_list(r.point.loss_trace);
        return d;
      },
      py::arg("svg"), py::arg("target"), py::arg("iters") = 500, py::arg("supersampling") = 2,
      py::arg("freeze_colors") = false);

  m.def(
      "generate",
      [](const std::string& prompt, py::object replies, int rounds, int repeats, int iters, int resolution,
         py::object target) {
        gateway::Services services;
        if (py::isinstance<py::list>(replies) || py::isinstance<py::tuple>(replies)) {
          services.transport = std::make_shared<llm::ScriptedTransport>(replies.cast<std::vector<std::string>>());
        } else if (PyCallable_Check(replies.ptr())) {
          auto fn = replies.cast<std::function<std::string(std::string)>>();
          services.transport = std::make_shared<llm::ScriptedTransport>([fn](const llm::Conversation& c) {
            py::gil_scoped_acquire gil;
            for (auto it = c.rbegin(); it != c.rend(); ++it)
              if (it->role == "user") return fn(it->text);
            return fn({});
          });
        } else if (!replies.is_none()) {
          throw ArgumentError("replies must be a list of strings, a callable, or None for the HTTP endpoint");
        } else {
          services.transport = std::make_shared<llm::HttpChatTransport>(llm::HttpTransportConfig::from_env());
        }
        if (target.is_none())
          services.enhancer = std::make_shared<enhance::EchoEnhancer>();
        else
          services.enhancer = std::make_shared<enhance::FileEnhancer>(target.cast<std::string>());
        gateway::GenerationSettings settings;
        settings.rounds = rounds;
        settings.repeats = repeats;
        settings.optimization = opt_config(iters, resolution, 2, false);
        gateway::GenerationOutput g;
        {
          py::gil_scoped_release nogil;
          g = gateway::run_generation(prompt, services, settings);
        }
        py::dict d;
        d["candidates"] = g.candidates.candidates.size();
        d["selected"] = g.selection.index;
        d["template"] = svg::serialize_template(g.templ);
        d["optimized"] = svg::serialize(g.optimized.doc);
        d["target"] = to_array(g.target);
        return d;
      },
      py::arg("prompt"), py::arg("replies") = py::none(), py::arg("rounds") = 2, py::arg("repeats") = 5,
      py::arg("iters") = 500, py::arg("resolution") = 0, py::arg("target") = py::none(),
      "Full run. `replies` is a canned reply list or a callable taking the latest request text; "
      "`target` is an enhanced-target PNG path, or None to use the rendered template.");
}
