// gyolo: command-line front end for the detector library.
//
// Exit codes: 0 success, 1 domain error (bad data, missing file, failed
// check), 2 usage error. Every failure prints one "gyolo: error: ..." line
// to stderr.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gyolo/analysis.hpp"
#include "gyolo/arch.hpp"
#include "gyolo/binder.hpp"
#include "gyolo/data.hpp"
#include "gyolo/gradcheck.hpp"
#include "gyolo/infer.hpp"
#include "gyolo/metrics.hpp"
#include "gyolo/weights.hpp"

namespace fs = std::filesystem;
using namespace gyolo;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kFamilies = {"yolov11", "g-yolov11"};
const std::vector<std::string> kScales = {"n", "s", "m", "l", "x"};

struct ModelOptions {
  std::string family;
  std::string scale;
  int nc = 9;
  std::string arch;
  std::string weights;
  std::uint64_t seed = 0;
  bool zero = false;
};

void add_graph_options(CLI::App* app, ModelOptions& o) {
  app->add_option("--family", o.family, "yolov11 | g-yolov11")
      ->check(CLI::IsMember(kFamilies));
  app->add_option("--scale", o.scale, "n | s | m | l | x")
      ->check(CLI::IsMember(kScales));
  app->add_option("--nc", o.nc, "number of classes")->check(CLI::PositiveNumber);
  app->add_option("--arch", o.arch, "architecture JSON (instead of --family/--scale)")
      ->check(CLI::ExistingFile);
}

void add_weight_options(CLI::App* app, ModelOptions& o) {
  app->add_option("--weights", o.weights, "GWTC weight file");
  app->add_option("--seed", o.seed, "seed for random weights when --weights is absent");
  app->add_flag("--zero", o.zero, "zero conv weights when --weights is absent");
}

ArchGraph resolve_graph(const ModelOptions& o) {
  if (!o.arch.empty()) return import_arch(read_file(o.arch));
  if (o.family.empty() || o.scale.empty()) {
    throw UsageError("either --arch or both --family and --scale are required");
  }
  return make_graph(parse_family(o.family), parse_scale(o.scale), o.nc);
}

Model resolve_model(const ArchGraph& graph, const ModelOptions& o) {
  if (!o.weights.empty()) return build(graph, load(o.weights));
  RandomBinder binder(o.seed, nullptr, o.zero);
  return Model(graph, binder);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<std::string> load_names(const std::string& path) {
  return path.empty() ? default_class_names() : parse_names_file(read_file(path));
}

std::vector<TruthBox> load_truths(const fs::path& label, int nc, int width,
                                  int height) {
  std::vector<GroundTruthBox> boxes;
  try {
    boxes = parse_label_file(read_file(label), nc);
  } catch (const LabelParseError& e) {
    throw DataError(label.string() + ": " + e.what());
  }
  std::vector<TruthBox> truths;
  for (const auto& b : boxes) truths.push_back({b.class_id, to_pixels(b, width, height)});
  return truths;
}

// ------------------------------------------------------------ subcommands --

struct SummaryArgs {
  ModelOptions model;
  int imgsz = 640;
  bool json = false;
};

int run_summary(const SummaryArgs& a) {
  const ProfileReport r = profile(resolve_graph(a.model), a.imgsz);
  std::cout << (a.json ? profile_json(r) : profile_text(r));
  return 0;
}

struct AnalyzeArgs {
  std::string scale;
  int nc = 9;
  int imgsz = 640;
  bool json = false;
  bool csv = false;
};

int run_analyze(const AnalyzeArgs& a) {
  const ComparisonReport r = compare(parse_scale(a.scale), a.nc, a.imgsz);
  if (a.csv) {
    std::cout << comparison_csv(r);
  } else {
    std::cout << (a.json ? comparison_json(r) : comparison_text(r));
  }
  return 0;
}

struct InferArgs {
  ModelOptions model;
  std::vector<std::string> images;
  int imgsz = 640;
  float conf = 0.25f;
  double iou = 0.45;
  std::size_t max_det = 300;
  std::string names;
  std::string out;
};

int run_infer(const InferArgs& a) {
  const ArchGraph graph = resolve_graph(a.model);
  const Model model = resolve_model(graph, a.model);
  const InferOptions opts{a.imgsz, a.conf, a.iou, a.max_det};
  std::vector<ImageDetections> results;
  for (const auto& path : a.images) {
    const Image img = load_image(path);
    results.push_back({fs::path(path).stem().string(), run(model, img.pixels, opts)});
  }
  write_text(a.out, detections_json(results, load_names(a.names)));
  return 0;
}

struct EvalArgs {
  ModelOptions model;
  std::string manifest;
  std::string predictions;
  std::string out_dir;
  int imgsz = 640;
  float conf = eval_options().conf;
  double iou = eval_options().iou;
  std::size_t max_det = eval_options().max_det;
};

int run_eval(const EvalArgs& a) {
  const DatasetManifest manifest = load_manifest(a.manifest);
  const DatasetScan scan = scan_dataset(manifest);
  for (const auto& p : scan.images_without_labels) {
    std::cerr << "gyolo: warning: image without label file: " << p.string() << "\n";
  }
  for (const auto& p : scan.labels_without_images) {
    std::cerr << "gyolo: warning: label file without image: " << p.string() << "\n";
  }
  const int nc = static_cast<int>(manifest.names.size());

  std::map<std::string, std::vector<Detection>> given;
  std::optional<Model> model;
  if (!a.predictions.empty()) {
    for (auto& r : parse_detections_json(read_file(a.predictions))) {
      given[r.image] = std::move(r.detections);
    }
    for (const auto& [stem, dets] : given) {
      const bool known = std::any_of(scan.items.begin(), scan.items.end(),
                                     [&](const DatasetItem& it) { return it.stem == stem; });
      if (!known) throw DataError("predictions name unknown image '" + stem + "'");
    }
  } else {
    ModelOptions mo = a.model;
    if (mo.arch.empty()) mo.nc = nc;
    const ArchGraph graph = resolve_graph(mo);
    if (graph.nc != nc) {
      throw DataError("model has " + std::to_string(graph.nc) + " classes, manifest names " +
                      std::to_string(nc));
    }
    model.emplace(resolve_model(graph, mo));
  }

  const InferOptions opts{a.imgsz, a.conf, a.iou, a.max_det};
  std::vector<ImageRecord> dataset;
  std::vector<ImageDetections> produced;
  for (const DatasetItem& item : scan.items) {
    const Image img = load_image(item.image);
    ImageRecord rec;
    rec.name = item.stem;
    rec.truths = load_truths(item.label, nc, img.width, img.height);
    if (model) {
      rec.detections = run(*model, img.pixels, opts);
      produced.push_back({item.stem, rec.detections});
    } else if (auto it = given.find(item.stem); it != given.end()) {
      rec.detections = it->second;
    }
    dataset.push_back(std::move(rec));
  }

  const MetricsReport report = evaluate(dataset, nc);
  const Curves cv = curves(dataset, nc, kIouThresholds.front());
  const fs::path out(a.out_dir);
  fs::create_directories(out);
  write_text((out / "metrics.json").string(), metrics_json(report, manifest.names));
  write_text((out / "fscore_conf.csv").string(), fscore_csv(cv.fscore, manifest.names));
  for (const PRCurve& c : cv.pr) {
    write_text((out / ("pr_class" + std::to_string(c.class_id) + ".csv")).string(),
               pr_csv(c));
  }
  if (model) {
    write_text((out / "detections.json").string(), detections_json(produced, manifest.names));
  }
  std::printf("images %zu  map50 %.6f  map50_95 %.6f  operating_confidence %.3f\n",
              dataset.size(), report.map50, report.map5095, report.operating_confidence);
  return 0;
}

struct BenchArgs {
  ModelOptions model;
  std::string image;
  int runs = 100;
  int imgsz = 640;
  float conf = 0.25f;
  double iou = 0.45;
  std::string out;
};

int run_bench(const BenchArgs& a) {
  const ArchGraph graph = resolve_graph(a.model);
  const Model model = resolve_model(graph, a.model);
  const Tensor image = a.image.empty() ? Tensor({1, 3, 480, 640}, 0.5f)
                                       : load_image(a.image).pixels;
  const InferOptions opts{a.imgsz, a.conf, a.iou, 300};
  write_text(a.out, bench_json(bench(model, image, a.runs, opts)));
  return 0;
}

struct GradArgs {
  std::vector<std::string> ops;
  int seeds = 5;
  double tol = grad::kGradTolerance;
  bool flip_sign = false;
  std::string out;
};

int run_gradcheck(const GradArgs& a) {
  std::vector<grad::Target> targets;
  if (a.ops.empty()) {
    targets = grad::all_targets();
  } else {
    for (const auto& name : a.ops) targets.push_back(grad::parse_target(name));
  }
  std::vector<grad::GradReport> reports;
  std::vector<std::string> failed;
  for (grad::Target t : targets) {
    for (int s = 1; s <= a.seeds; ++s) {
      reports.push_back(grad::check(t, static_cast<std::uint64_t>(s), a.tol, a.flip_sign));
      if (!reports.back().pass) failed.push_back(reports.back().op + "/" + std::to_string(s));
    }
  }
  write_text(a.out, grad::reports_json(reports));
  if (!failed.empty()) {
    std::string list;
    for (const auto& f : failed) list += (list.empty() ? "" : ",") + f;
    std::cerr << "gyolo: error: gradient check failed: " << list << "\n";
    return 1;
  }
  return 0;
}

struct InitArgs {
  ModelOptions model;
  bool f16 = false;
  std::string out;
};

int run_init(const InitArgs& a) {
  WeightContainer c = init_random(resolve_graph(a.model), a.model.seed, a.model.zero);
  if (a.f16) c = halfprec_roundtrip(c);
  save(c, a.out);
  std::printf("%s: %zu tensors, %zu learnable elements, %zu bytes\n", a.out.c_str(),
              c.size(), c.learnable_elements(), serialized_size(c));
  return 0;
}

struct ExportArgs {
  ModelOptions model;
  std::string out;
};

int run_export(const ExportArgs& a) {
  write_text(a.out, export_arch(resolve_graph(a.model)));
  return 0;
}

int fail(int code, const std::string& message) {
  std::string line = message;
  for (char& ch : line) {
    if (ch == '\n') ch = ' ';
  }
  std::cerr << "gyolo: error: " << line << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"G-YOLOv11 / YOLOv11 inference, profiling and evaluation"};
  app.require_subcommand(1);

  SummaryArgs summary;
  auto* s = app.add_subcommand("summary", "per-node table and totals for one variant");
  add_graph_options(s, summary.model);
  s->add_option("--imgsz", summary.imgsz)->check(CLI::PositiveNumber);
  s->add_flag("--json", summary.json);

  AnalyzeArgs analyze;
  auto* an = app.add_subcommand("analyze", "compare both families at one scale");
  an->add_option("--scale", analyze.scale)->required()->check(CLI::IsMember(kScales));
  an->add_option("--nc", analyze.nc)->check(CLI::PositiveNumber);
  an->add_option("--imgsz", analyze.imgsz)->check(CLI::PositiveNumber);
  an->add_flag("--json", analyze.json);
  an->add_flag("--csv", analyze.csv, "per-node CSV");

  InferArgs infer;
  auto* in = app.add_subcommand("infer", "detect objects in PPM/PGM images");
  add_graph_options(in, infer.model);
  add_weight_options(in, infer.model);
  in->add_option("images", infer.images)->required();
  in->add_option("--imgsz", infer.imgsz)->check(CLI::PositiveNumber);
  in->add_option("--conf", infer.conf);
  in->add_option("--iou", infer.iou);
  in->add_option("--max-det", infer.max_det);
  in->add_option("--names", infer.names, "class names file");
  in->add_option("--out", infer.out, "output file (default stdout)");

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "evaluate a model or prediction file on a dataset");
  add_graph_options(ev, eval.model);
  add_weight_options(ev, eval.model);
  ev->add_option("--manifest", eval.manifest)->required();
  ev->add_option("--predictions", eval.predictions, "detections JSON instead of a model");
  ev->add_option("--out", eval.out_dir, "output directory")->required();
  ev->add_option("--imgsz", eval.imgsz)->check(CLI::PositiveNumber);
  ev->add_option("--conf", eval.conf);
  ev->add_option("--iou", eval.iou);
  ev->add_option("--max-det", eval.max_det);

  BenchArgs bench_args;
  auto* be = app.add_subcommand("bench", "time preprocessing, forward and postprocessing");
  add_graph_options(be, bench_args.model);
  add_weight_options(be, bench_args.model);
  be->add_option("--image", bench_args.image);
  be->add_option("--runs", bench_args.runs)->check(CLI::PositiveNumber);
  be->add_option("--imgsz", bench_args.imgsz)->check(CLI::PositiveNumber);
  be->add_option("--conf", bench_args.conf);
  be->add_option("--iou", bench_args.iou);
  be->add_option("--out", bench_args.out);

  GradArgs gradargs;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::vector<std::string> target_names;
  for (auto t : grad::all_targets()) target_names.push_back(grad::to_string(t));
  gc->add_option("--op", gradargs.ops)->check(CLI::IsMember(target_names));
  gc->add_option("--seeds", gradargs.seeds)->check(CLI::PositiveNumber);
  gc->add_option("--tol", gradargs.tol)->check(CLI::PositiveNumber);
  gc->add_flag("--flip-sign", gradargs.flip_sign, "negative control");
  gc->add_option("--out", gradargs.out);

  InitArgs init;
  auto* iw = app.add_subcommand("init-weights", "write a seeded GWTC weight file");
  add_graph_options(iw, init.model);
  iw->add_option("--seed", init.model.seed);
  iw->add_flag("--zero", init.model.zero);
  iw->add_flag("--f16", init.f16, "store half precision");
  iw->add_option("--out", init.out)->required();

  ExportArgs exp;
  auto* ea = app.add_subcommand("export-arch", "write the architecture graph as JSON");
  add_graph_options(ea, exp.model);
  ea->add_option("--out", exp.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, std::string(e.what()) + " (run with --help for usage)");
  }

  try {
    if (*s) return run_summary(summary);
    if (*an) return run_analyze(analyze);
    if (*in) return run_infer(infer);
    if (*ev) return run_eval(eval);
    if (*be) return run_bench(bench_args);
    if (*gc) return run_gradcheck(gradargs);
    if (*iw) return run_init(init);
    if (*ea) return run_export(exp);
  } catch (const UsageError& e) {
    return fail(2, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
  return 2;
}
