#include "gyolo/infer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "gyolo/blocks.hpp"
#include "gyolo/metrics.hpp"
#include "gyolo/ops.hpp"

namespace gyolo {

LetterboxResult letterbox(const Tensor& image, int size) {
  if (image.n() != 1 || image.c() != 3) {
    throw ShapeError("letterbox expects a (1,3,h,w) image, got " +
                     image.shape().str());
  }
  if (size < 1) throw ShapeError("letterbox target must be positive");
  LetterboxResult r;
  r.source_w = image.w();
  r.source_h = image.h();
  r.scale = std::min(static_cast<double>(size) / image.w(),
                     static_cast<double>(size) / image.h());
  r.content_w = std::clamp(static_cast<int>(std::lround(image.w() * r.scale)), 1, size);
  r.content_h = std::clamp(static_cast<int>(std::lround(image.h() * r.scale)), 1, size);
  r.dx = (size - r.content_w) / 2;
  r.dy = (size - r.content_h) / 2;
  r.tensor = Tensor({1, 3, size, size}, kLetterboxPad);

  std::vector<int> src_x(r.content_w), src_y(r.content_h);
  for (int x = 0; x < r.content_w; ++x) {
    src_x[x] = std::min(image.w() - 1,
                        static_cast<int>(std::floor((x + 0.5) / r.scale)));
  }
  for (int y = 0; y < r.content_h; ++y) {
    src_y[y] = std::min(image.h() - 1,
                        static_cast<int>(std::floor((y + 0.5) / r.scale)));
  }
  for (int c = 0; c < 3; ++c) {
    const float* in = image.plane(0, c);
    float* out = r.tensor.plane(0, c);
    for (int y = 0; y < r.content_h; ++y) {
      const float* row = in + static_cast<std::size_t>(src_y[y]) * image.w();
      float* dst = out + static_cast<std::size_t>(y + r.dy) * size + r.dx;
      for (int x = 0; x < r.content_w; ++x) dst[x] = row[src_x[x]];
    }
  }
  return r;
}

float dfl_expectation(const float* logits, int count, std::size_t stride) {
  float m = logits[0];
  for (int i = 1; i < count; ++i) m = std::max(m, logits[i * stride]);
  float sum = 0.0f;
  float weighted = 0.0f;
  for (int i = 0; i < count; ++i) {
    const float e = std::exp(logits[i * stride] - m);
    sum += e;
    weighted += e * static_cast<float>(i);
  }
  return weighted / sum;
}

std::vector<Detection> decode_dfl(const std::vector<Tensor>& maps,
                                  std::array<int, 3> strides,
                                  float conf_threshold,
                                  const LetterboxResult* lb) {
  if (maps.size() != 3) {
    throw ShapeError("decode_dfl expects 3 maps, got " + std::to_string(maps.size()));
  }
  std::vector<Detection> out;
  for (int s = 0; s < 3; ++s) {
    const Tensor& m = maps[s];
    const int nc = m.c() - 4 * kRegMax;
    if (nc < 1 || m.n() != 1) {
      throw ShapeError("head map " + m.shape().str() +
                       " does not carry 4*16 box channels plus classes");
    }
    const std::size_t plane = m.shape().plane();
    const float* base = m.plane(0, 0);
    for (int y = 0; y < m.h(); ++y) {
      for (int x = 0; x < m.w(); ++x) {
        const std::size_t cell = static_cast<std::size_t>(y) * m.w() + x;
        int best = 0;
        float best_logit = base[(4 * kRegMax) * plane + cell];
        for (int c = 1; c < nc; ++c) {
          const float v = base[(4 * kRegMax + c) * plane + cell];
          if (v > best_logit) {
            best_logit = v;
            best = c;
          }
        }
        const float score = sigmoid(best_logit);
        if (!(score > conf_threshold)) continue;
        float d[4];
        for (int side = 0; side < 4; ++side) {
          d[side] = dfl_expectation(base + (side * kRegMax) * plane + cell,
                                    kRegMax, plane);
        }
        const double cx = x + 0.5;
        const double cy = y + 0.5;
        const double st = strides[s];
        Box b{(cx - d[0]) * st, (cy - d[1]) * st, (cx + d[2]) * st,
              (cy + d[3]) * st};
        if (lb) {
          b = {std::clamp(lb->to_source_x(b.x1), 0.0, double(lb->source_w)),
               std::clamp(lb->to_source_y(b.y1), 0.0, double(lb->source_h)),
               std::clamp(lb->to_source_x(b.x2), 0.0, double(lb->source_w)),
               std::clamp(lb->to_source_y(b.y2), 0.0, double(lb->source_h))};
        }
        out.push_back({best, static_cast<double>(score), b});
      }
    }
  }
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& candidates,
                           double iou_threshold) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Detection& da = candidates[a];
    const Detection& db = candidates[b];
    if (da.confidence != db.confidence) return da.confidence > db.confidence;
    return da.class_id < db.class_id;
  });
  std::map<int, std::vector<const Detection*>> kept_by_class;
  std::vector<Detection> out;
  for (std::size_t i : order) {
    const Detection& d = candidates[i];
    auto& kept = kept_by_class[d.class_id];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection* k) {
      return iou(k->box, d.box) > iou_threshold;
    });
    if (!suppressed) {
      kept.push_back(&d);
      out.push_back(d);
    }
  }
  return out;
}

namespace {

std::vector<Detection> postprocess(const std::vector<Tensor>& maps,
                                   const Model& model, const LetterboxResult& lb,
                                   const InferOptions& o) {
  std::vector<Detection> dets =
      nms(decode_dfl(maps, model.strides(), o.conf, &lb), o.iou);
  // Clipping can collapse a box onto the image border.
  std::erase_if(dets, [](const Detection& d) {
    return !(d.box.x1 < d.box.x2 && d.box.y1 < d.box.y2);
  });
  if (dets.size() > o.max_det) dets.resize(o.max_det);
  return dets;
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

StageStats stats(const std::vector<double>& xs) {
  StageStats s;
  if (xs.empty()) return s;
  s.mean_ms = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean_ms) * (x - s.mean_ms);
    s.stdev_ms = std::sqrt(ss / (xs.size() - 1));
  }
  return s;
}

}  // namespace

std::vector<Detection> run(const Model& model, const Tensor& image,
                           const InferOptions& options) {
  const LetterboxResult lb = letterbox(image, options.imgsz);
  return postprocess(model.forward(lb.tensor), model, lb, options);
}

BenchReport bench(const Model& model, const Tensor& image, int runs,
                  const InferOptions& options) {
  if (runs < 1) throw std::invalid_argument("bench needs at least one run");
  BenchReport r;
  r.variant = variant_name(model.graph().family, model.graph().scale);
  r.imgsz = options.imgsz;
  r.runs = runs;
  std::vector<double> pre, fwd, post;
  for (int i = 0; i < r.warmup + runs; ++i) {
    auto t0 = Clock::now();
    const LetterboxResult lb = letterbox(image, options.imgsz);
    const double t_pre = ms_since(t0);
    t0 = Clock::now();
    const std::vector<Tensor> maps = model.forward(lb.tensor);
    const double t_fwd = ms_since(t0);
    t0 = Clock::now();
    const auto dets = postprocess(maps, model, lb, options);
    const double t_post = ms_since(t0);
    if (i >= r.warmup) {
      pre.push_back(t_pre);
      fwd.push_back(t_fwd);
      post.push_back(t_post);
    }
  }
  r.preprocess = stats(pre);
  r.forward = stats(fwd);
  r.postprocess = stats(post);
  r.total_mean_ms = r.preprocess.mean_ms + r.forward.mean_ms + r.postprocess.mean_ms;
  return r;
}

StageStats time_forward(const Model& model, int imgsz, int runs, int warmup) {
  const Tensor input({1, 3, imgsz, imgsz}, kLetterboxPad);
  std::vector<double> times;
  for (int i = 0; i < warmup + runs; ++i) {
    const auto t0 = Clock::now();
    const auto maps = model.forward(input);
    const double t = ms_since(t0);
    if (i >= warmup) times.push_back(t);
  }
  return stats(times);
}

std::string bench_json(const BenchReport& r) {
  auto stage = [](const StageStats& s) {
    return nlohmann::json{{"mean_ms", s.mean_ms}, {"stdev_ms", s.stdev_ms}};
  };
  nlohmann::json doc = {{"variant", r.variant},
                        {"imgsz", r.imgsz},
                        {"runs", r.runs},
                        {"warmup", r.warmup},
                        {"preprocess", stage(r.preprocess)},
                        {"forward", stage(r.forward)},
                        {"postprocess", stage(r.postprocess)},
                        {"total_mean_ms", r.total_mean_ms}};
  return doc.dump(2) + "\n";
}

std::string detections_json(const std::vector<ImageDetections>& results,
                            const std::vector<std::string>& class_names) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    for (const auto& d : r.detections) {
      arr.push_back({{"image", r.image},
                     {"class_id", d.class_id},
                     {"class_name", d.class_id < static_cast<int>(class_names.size())
                                        ? class_names[d.class_id]
                                        : "class" + std::to_string(d.class_id)},
                     {"bbox", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
                     {"confidence", d.confidence}});
    }
  }
  return arr.dump(2) + "\n";
}

std::vector<ImageDetections> parse_detections_json(const std::string& text) {
  std::vector<ImageDetections> out;
  std::map<std::string, std::size_t> index;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.is_array()) throw DataError("detections document must be an array");
    for (const auto& e : doc) {
      const std::string image = e.at("image").get<std::string>();
      auto it = index.find(image);
      if (it == index.end()) {
        it = index.emplace(image, out.size()).first;
        out.push_back({image, {}});
      }
      const auto bbox = e.at("bbox").get<std::vector<double>>();
      if (bbox.size() != 4) throw DataError("bbox must have 4 values");
      out[it->second].detections.push_back(
          {e.at("class_id").get<int>(), e.at("confidence").get<double>(),
           {bbox[0], bbox[1], bbox[2], bbox[3]}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed detections document: ") + e.what());
  }
  return out;
}

}  // namespace gyolo
