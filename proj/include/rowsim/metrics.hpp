#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rowsim/math.hpp"

namespace rowsim {

struct TrajectorySample {
  double t = 0.0;
  double x = 0.0;  // map meters, or degrees lat in GPS frame
  double y = 0.0;  // map meters, or degrees lon in GPS frame
  double yaw = 0.0;
};

/// Per-waypoint deviation: min over trajectory samples of the Euclidean
/// distance to the waypoint. Inputs must share one frame.
inline std::vector<double> waypoint_errors(const std::vector<Vec2>& planned,
                                           const std::vector<Vec2>& actual) {
  if (planned.empty()) throw std::invalid_argument("no planned waypoints");
  if (actual.empty()) throw std::invalid_argument("empty trajectory");
  std::vector<double> errors;
  errors.reserve(planned.size());
  for (const Vec2& w : planned) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& a : actual) best = std::min(best, (w - a).norm());
    errors.push_back(best);
  }
  return errors;
}

struct NavSummary {
  double ae = 0.0;
  double rmse = 0.0;
  double cr_percent = 0.0;
  double threshold = 0.0;
  int waypoint_count = 0;
};

/// AE, RMSE and CR over the per-waypoint errors; CR boundary inclusive.
inline NavSummary aggregate(const std::vector<double>& errors, double threshold) {
  if (errors.empty()) throw std::invalid_argument("no errors to aggregate");
  if (threshold <= 0.0) throw std::invalid_argument("threshold must be > 0");
  NavSummary s;
  s.threshold = threshold;
  s.waypoint_count = static_cast<int>(errors.size());
  double sum = 0.0, sq = 0.0;
  int within = 0;
  for (const double e : errors) {
    sum += e;
    sq += e * e;
    if (e <= threshold) ++within;
  }
  s.ae = sum / errors.size();
  s.rmse = std::sqrt(sq / errors.size());
  s.cr_percent = 100.0 * within / errors.size();
  return s;
}

struct NavReport {
  std::string mode;  // "map" or "gps"
  std::vector<double> errors;
  NavSummary summary;
  double duration_s = 0.0;
};

struct DetBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int cls = 0;
  double confidence = 1.0;
};

inline double box_iou(const DetBox& a, const DetBox& b) {
  const double ix0 = std::max(a.x0, b.x0), iy0 = std::max(a.y0, b.y0);
  const double ix1 = std::min(a.x1, b.x1), iy1 = std::min(a.y1, b.y1);
  const double iw = std::max(0.0, ix1 - ix0), ih = std::max(0.0, iy1 - iy0);
  const double inter = iw * ih;
  const double areau = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
  if (areau <= 0.0) return 0.0;
  return inter / areau;
}

/// |a n b| / |a u b| over boolean masks; both-empty defined as 1.
inline double mask_iou(const std::vector<std::uint8_t>& a,
                       const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("mask dimension mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0, pb = b[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / uni;
}

struct ClassMetrics {
  int tp = 0, fp = 0, fn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> ap;  // undefined when no correct detection exists
};

struct DetectionMetrics {
  std::map<int, ClassMetrics> per_class;
  int tp = 0, fp = 0, fn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  double map_value = 0.0;      // undefined APs aggregated as 0
  bool map_has_undefined = false;
};

/// Greedy IoU matching at iou_threshold in descending confidence order, one
/// match per ground truth; AP in the running-precision form over the ranked
/// detections, normalized by the number of correct ones.
inline DetectionMetrics detection_metrics(std::vector<DetBox> predictions,
                                          const std::vector<DetBox>& ground_truth,
                                          double iou_threshold = 0.5) {
  std::stable_sort(predictions.begin(), predictions.end(),
                   [](const DetBox& a, const DetBox& b) {
                     return a.confidence > b.confidence;
                   });
  std::vector<bool> gt_used(ground_truth.size(), false);
  std::map<int, std::vector<int>> ranked_r;  // r_i per class, ranked order
  DetectionMetrics out;

  for (const DetBox& p : predictions) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t gi = 0; gi < ground_truth.size(); ++gi) {
      if (gt_used[gi] || ground_truth[gi].cls != p.cls) continue;
      const double iou = box_iou(p, ground_truth[gi]);
      if (iou >= best_iou) {
        best_iou = iou;
        best = static_cast<int>(gi);
      }
    }
    auto& cm = out.per_class[p.cls];
    if (best >= 0) {
      gt_used[best] = true;
      ++cm.tp;
      ranked_r[p.cls].push_back(1);
    } else {
      ++cm.fp;
      ranked_r[p.cls].push_back(0);
    }
  }
  for (std::size_t gi = 0; gi < ground_truth.size(); ++gi)
    if (!gt_used[gi]) ++out.per_class[ground_truth[gi].cls].fn;

  int classes_in_gt = 0;
  double ap_sum = 0.0;
  std::map<int, bool> class_in_gt;
  for (const DetBox& g : ground_truth) class_in_gt[g.cls] = true;

  for (auto& [cls, cm] : out.per_class) {
    out.tp += cm.tp;
    out.fp += cm.fp;
    out.fn += cm.fn;
    if (cm.tp + cm.fp > 0) cm.precision = static_cast<double>(cm.tp) / (cm.tp + cm.fp);
    if (cm.tp + cm.fn > 0) cm.recall = static_cast<double>(cm.tp) / (cm.tp + cm.fn);
    const auto it = ranked_r.find(cls);
    if (it != ranked_r.end()) {
      const auto& r = it->second;
      int correct = 0;
      double acc = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        correct += r[i];
        if (r[i]) acc += static_cast<double>(correct) / (i + 1);
      }
      if (correct > 0) cm.ap = acc / correct;
    }
  }
  for (const auto& [cls, present] : class_in_gt) {
    if (!present) continue;
    ++classes_in_gt;
    const auto it = out.per_class.find(cls);
    if (it != out.per_class.end() && it->second.ap.has_value())
      ap_sum += *it->second.ap;
    else
      out.map_has_undefined = true;  // undefined AP aggregated as 0, flagged
  }
  if (out.tp + out.fp > 0) out.precision = static_cast<double>(out.tp) / (out.tp + out.fp);
  if (out.tp + out.fn > 0) out.recall = static_cast<double>(out.tp) / (out.tp + out.fn);
  out.map_value = classes_in_gt > 0 ? ap_sum / classes_in_gt : 0.0;
  return out;
}

}  // namespace rowsim
