#pragma once

#include <span>
#include <vector>

#include "oodbench/volume.hpp"

namespace oodbench::metrics {

/// ID scores are negatives, OOD scores positives.
struct ScoreSample {
  std::vector<double> negatives;
  std::vector<double> positives;
};

/// Mann-Whitney AUROC: P(positive > negative) + 0.5 P(tie). Exact for any
/// sample size (integer pair counting), O((n + m) log(n + m)).
double auroc(std::span<const double> negatives, std::span<const double> positives);
inline double auroc(const ScoreSample& s) { return auroc(s.negatives, s.positives); }

/// 2|X n Y| / (|X| + |Y|) for the voxels of class_id; 1.0 when both sets are empty.
double dice(const LabelVolume& pred, const LabelVolume& truth, int class_id);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population (divide by n)
};

MeanStd mean_std(std::span<const double> values);

}  // namespace oodbench::metrics
