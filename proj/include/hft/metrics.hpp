#pragma once

#include "hft/types.hpp"

#include <vector>

namespace hft {

struct MetricTrace {
  std::vector<double> per_frame;
  double average = 0.0;
};

// Euclidean distance between box centres, pixels.
MetricTrace center_error(const std::vector<Box>& pred, const std::vector<Box>& gt);

// Intersection over union per frame, 0 for disjoint boxes.
MetricTrace overlap_rate(const std::vector<Box>& pred, const std::vector<Box>& gt);

double box_iou(const Box& a, const Box& b);

}  // namespace hft
