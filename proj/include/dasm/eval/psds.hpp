// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dasm/core/events.hpp"
#include "dasm/numerics/tensor.hpp"

DASM_BEGIN_NAMESPACE

/// Per-column sliding median over `window` (odd) frames with edge replication.
num::Tensor median_filter(const num::Tensor& scores, std::size_t window = 5);

/// Maximal runs of frames with score >= threshold become events. An event's
/// score is the highest frame score inside its run.
EventRoster extract_events(const num::Tensor& scores, const std::vector<std::string>& classes, double threshold,
                           double hop_seconds, const std::string& clip_id);

DASM_END_NAMESPACE

namespace dasm {

struct PsdsConfig {
  double dtc = 0.7;
  double gtc = 0.7;
  /// Kept for completeness; cross-triggers are not counted (alpha_ct must be 0).
  double cttc = 0.3;
  double alpha_ct = 0.0;
  double alpha_st = 0.0;
  /// False positives per hour at the right end of the ROC axis.
  double e_max = 100.0;
  std::vector<double> thresholds = default_thresholds();

  static std::vector<double> default_thresholds(std::size_t count = 50, double lo = 0.01, double hi = 0.99);
  /// Class-variance penalty on (DESED-style) or off (AudioSet-style).
  static PsdsConfig desed();
  static PsdsConfig audioset();
  void validate() const;
};

struct ClassCounts {
  std::size_t references = 0;
  std::size_t detected_references = 0;
  std::size_t false_positives = 0;
};

/// Intersection-based matching per class. A detection is valid when its
/// overlap with same-class references of its clip is at least dtc of its
/// length; a reference is detected when valid detections cover at least gtc of
/// it. Invalid detections are false positives.
std::map<std::string, ClassCounts> match_events(const EventRoster& detections, const EventRoster& references,
                                                double dtc, double gtc);

struct OperatingPoint {
  double threshold = 0;
  /// Per-class true-positive ratio and false positives per hour.
  std::map<std::string, double> tpr;
  std::map<std::string, double> efpr;
  double mean_tpr = 0;
};

struct PsdsResult {
  double score = 0;
  std::vector<std::string> classes;
  std::vector<OperatingPoint> points;
  /// Monotone effective-TPR step curve: effective TPR on [efpr[i], efpr[i+1]).
  std::vector<double> curve_efpr;
  std::vector<double> curve_tpr;
};

/// Normalized area under the effective-TPR vs eFPR curve up to e_max.
///
/// `detections` maps each operating threshold to its roster. Per class, the
/// ROC is made monotone by taking at every eFPR the best TPR among operating
/// points at or below it; the effective TPR is the class mean minus alpha_st
/// times the (population) standard deviation, floored at 0. Only classes in
/// `subset` (all reference classes when empty) that have at least one
/// reference event are scored.
PsdsResult psds(const std::map<double, EventRoster>& detections, const EventRoster& references,
                double dataset_seconds, const PsdsConfig& cfg, const std::set<std::string>& subset = {});

}  // namespace dasm
