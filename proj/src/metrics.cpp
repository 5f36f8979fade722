#include "hft/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace hft {

namespace {

void check_lengths(const std::vector<Box>& pred, const std::vector<Box>& gt) {
  if (pred.size() != gt.size())
    throw DataError("trace length mismatch: " + std::to_string(pred.size()) + " predicted vs " +
                    std::to_string(gt.size()) + " ground truth");
}

MetricTrace finish(std::vector<double> values) {
  MetricTrace t;
  double sum = 0.0;
  for (double v : values) sum += v;
  t.average = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
  t.per_frame = std::move(values);
  return t;
}

}  // namespace

double box_iou(const Box& a, const Box& b) {
  if (!(a.w > 0.0 && a.h > 0.0 && b.w > 0.0 && b.h > 0.0))
    throw DataError("overlap needs positive box dimensions");
  const double iw = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double ih = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return inter / uni;
}

MetricTrace center_error(const std::vector<Box>& pred, const std::vector<Box>& gt) {
  check_lengths(pred, gt);
  std::vector<double> v(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    v[i] = std::hypot(pred[i].cx() - gt[i].cx(), pred[i].cy() - gt[i].cy());
  return finish(std::move(v));
}

MetricTrace overlap_rate(const std::vector<Box>& pred, const std::vector<Box>& gt) {
  check_lengths(pred, gt);
  std::vector<double> v(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) v[i] = box_iou(pred[i], gt[i]);
  return finish(std::move(v));
}

}  // namespace hft
