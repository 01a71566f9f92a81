#include "mapfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mapfuse {

namespace {

std::size_t class_index(ElementClass cls) {
  switch (cls) {
    case ElementClass::PedestrianCrossing: return 0;
    case ElementClass::Divider: return 1;
    case ElementClass::Boundary: return 2;
  }
  throw std::invalid_argument("unknown class");
}

}  // namespace

double MapScore::ap_for(ElementClass cls) const { return per_class[class_index(cls)]; }

double ap_at(const VectorMap& pred, const VectorMap& gt, ElementClass cls, double threshold,
             kernels::ExecPolicy policy) {
  std::vector<MapElement> preds, gts;
  for (const auto& e : pred.elements) {
    if (e.cls == cls) preds.push_back(e);
  }
  for (const auto& e : gt.elements) {
    if (e.cls == cls) gts.push_back(e);
  }
  if (gts.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (preds.empty()) return 0.0;

  // Confidence-descending, id ascending for determinism.
  std::sort(preds.begin(), preds.end(), [](const MapElement& a, const MapElement& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.id < b.id;
  });

  const auto cost = kernels::chamfer_cost_matrix(preds, gts, policy);
  std::vector<char> claimed(gts.size(), 0);
  std::vector<char> is_tp(preds.size(), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (claimed[j]) continue;
      const double d = cost[i * gts.size() + j];
      if (d <= threshold && d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      claimed[static_cast<std::size_t>(best)] = 1;
      is_tp[i] = 1;
    }
  }

  // All-point interpolated area under the PR curve.
  const double n_gt = static_cast<double>(gts.size());
  std::vector<double> precision(preds.size()), recall(preds.size());
  int tp = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (is_tp[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / n_gt;
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

MapScore mean_ap(const VectorMap& pred, const VectorMap& gt, kernels::ExecPolicy policy) {
  MapScore score;
  double sum = 0.0;
  int supported = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const ElementClass cls = kAllClasses[c];
    double class_sum = 0.0;
    bool has_support = true;
    for (std::size_t t = 0; t < kApThresholds.size(); ++t) {
      const double ap = ap_at(pred, gt, cls, kApThresholds[t], policy);
      score.ap[c][t] = ap;
      if (std::isnan(ap)) has_support = false;
      class_sum += ap;
    }
    score.per_class[c] = has_support ? class_sum / static_cast<double>(kApThresholds.size())
                                     : std::numeric_limits<double>::quiet_NaN();
    if (has_support) {
      sum += score.per_class[c];
      ++supported;
    }
  }
  score.map_mean = supported > 0 ? sum / static_cast<double>(supported)
                                 : std::numeric_limits<double>::quiet_NaN();
  return score;
}

ChangeAccuracy change_accuracy(std::span<const ChangeDecision> decisions,
                               std::span<const ChangeDecision> labels) {
  if (decisions.size() != labels.size()) {
    throw std::invalid_argument("change_accuracy: length mismatch");
  }
  int n_changed = 0, n_unchanged = 0, tp_changed = 0, tp_unchanged = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == ChangeDecision::changed) {
      ++n_changed;
      if (decisions[i] == ChangeDecision::changed) ++tp_changed;
    } else {
      ++n_unchanged;
      if (decisions[i] == ChangeDecision::unchanged) ++tp_unchanged;
    }
  }
  if (n_changed == 0 || n_unchanged == 0) {
    throw std::invalid_argument("change_accuracy: a label class is absent");
  }
  ChangeAccuracy acc;
  acc.acc_changed = static_cast<double>(tp_changed) / static_cast<double>(n_changed);
  acc.acc_unchanged = static_cast<double>(tp_unchanged) / static_cast<double>(n_unchanged);
  acc.mean_acc = 0.5 * (acc.acc_changed + acc.acc_unchanged);
  return acc;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi) return values[lo];
  const double t = pos - static_cast<double>(lo);
  return (1.0 - t) * values[lo] + t * values[hi];
}

LocStats loc_stats(std::span<const Pose2> estimates, std::span<const Pose2> ground_truth) {
  if (estimates.empty() || estimates.size() != ground_truth.size()) {
    throw std::invalid_argument("loc_stats: empty or mismatched trajectories");
  }
  std::vector<double> lat, lon, yaw;
  lat.reserve(estimates.size());
  lon.reserve(estimates.size());
  yaw.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const Pose2 err = between(ground_truth[i], estimates[i]);
    lon.push_back(std::abs(err.x));
    lat.push_back(std::abs(err.y));
    yaw.push_back(std::abs(err.yaw) * 180.0 / M_PI);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  LocStats out;
  out.lat_mean = mean(lat);
  out.lat_p90 = percentile(lat, 0.9);
  out.lon_mean = mean(lon);
  out.lon_p90 = percentile(lon, 0.9);
  out.yaw_mean_deg = mean(yaw);
  out.yaw_p90_deg = percentile(yaw, 0.9);
  return out;
}

}  // namespace mapfuse
