// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/eval/psds.hpp"

#include <algorithm>
#include <cmath>

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE

num::Tensor median_filter(const num::Tensor& scores, std::size_t window) {
  if (window % 2 == 0) throw ConfigError("median_filter: window must be odd, got " + std::to_string(window));
  if (scores.rank() != 2) throw DimensionError("median_filter: expected [frames×classes]");
  const std::size_t t_len = scores.dim(0), n = scores.dim(1);
  if (window > t_len) throw ConfigError("median_filter: window longer than the sequence");
  const long half = static_cast<long>(window / 2);
  std::vector<Real> out(t_len * n);
  std::vector<Real> buf(window);
  for (std::size_t c = 0; c < n; ++c) {
    for (long t = 0; t < static_cast<long>(t_len); ++t) {
      for (long k = -half; k <= half; ++k) {
        const long src = std::clamp(t + k, 0L, static_cast<long>(t_len) - 1);
        buf[k + half] = scores.at(static_cast<std::size_t>(src), c);
      }
      std::nth_element(buf.begin(), buf.begin() + half, buf.end());
      out[t * n + c] = buf[half];
    }
  }
  return num::Tensor::from({t_len, n}, std::move(out));
}

EventRoster extract_events(const num::Tensor& scores, const std::vector<std::string>& classes, double threshold,
                           double hop_seconds, const std::string& clip_id) {
  if (scores.rank() != 2 || scores.dim(1) != classes.size()) {
    throw DimensionError("extract_events: score columns do not match the class list");
  }
  EventRoster out;
  const std::size_t t_len = scores.dim(0);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::size_t t = 0;
    while (t < t_len) {
      if (scores.at(t, c) < threshold) {
        ++t;
        continue;
      }
      const std::size_t start = t;
      double peak = 0;
      while (t < t_len && scores.at(t, c) >= threshold) peak = std::max(peak, static_cast<double>(scores.at(t++, c)));
      out.push_back(Event{clip_id, classes[c], start * hop_seconds, t * hop_seconds, peak});
    }
  }
  return out;
}

DASM_END_NAMESPACE

namespace dasm {

namespace {

// Slack for comparisons of summed interval lengths against ratio thresholds.
constexpr double kTimeSlack = 1e-9;

double overlap(const Event& a, const Event& b) {
  return std::max(0.0, std::min(a.offset, b.offset) - std::max(a.onset, b.onset));
}

using ClipClassKey = std::pair<std::string, std::string>;

std::map<ClipClassKey, std::vector<const Event*>> index_events(const EventRoster& roster) {
  std::map<ClipClassKey, std::vector<const Event*>> out;
  for (const auto& e : roster) out[{e.clip_id, e.class_id}].push_back(&e);
  return out;
}

}  // namespace

std::vector<double> PsdsConfig::default_thresholds(std::size_t count, double lo, double hi) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return out;
}

PsdsConfig PsdsConfig::desed() {
  PsdsConfig c;
  c.alpha_st = 1.0;
  return c;
}

PsdsConfig PsdsConfig::audioset() { return PsdsConfig{}; }

void PsdsConfig::validate() const {
  for (double r : {dtc, gtc, cttc}) {
    if (!(r > 0 && r <= 1)) throw ConfigError("psds: tolerance ratios must lie in (0, 1]");
  }
  if (alpha_ct != 0) throw ConfigError("psds: cross-trigger weighting is not supported (alpha_ct must be 0)");
  if (alpha_st < 0) throw ConfigError("psds: alpha_st must be non-negative");
  if (!(e_max > 0)) throw ConfigError("psds: e_max must be positive");
  if (thresholds.size() < 2) throw ConfigError("psds: need at least two operating thresholds");
}

std::map<std::string, ClassCounts> match_events(const EventRoster& detections, const EventRoster& references,
                                                double dtc, double gtc) {
  std::map<std::string, ClassCounts> counts;
  const auto refs = index_events(references);
  const auto dets = index_events(detections);
  for (const auto& r : references) ++counts[r.class_id].references;

  for (const auto& [key, ds] : dets) {
    auto& cc = counts[key.second];
    auto rit = refs.find(key);
    static const std::vector<const Event*> none;
    const auto& rs = rit == refs.end() ? none : rit->second;
    std::vector<const Event*> valid;
    for (const auto* d : ds) {
      double inter = 0;
      for (const auto* r : rs) inter += overlap(*d, *r);
      if (inter >= dtc * d->duration() - kTimeSlack) {
        valid.push_back(d);
      } else {
        ++cc.false_positives;
      }
    }
    for (const auto* r : rs) {
      double covered = 0;
      for (const auto* d : valid) covered += overlap(*d, *r);
      if (covered >= gtc * r->duration() - kTimeSlack) ++cc.detected_references;
    }
  }
  return counts;
}

PsdsResult psds(const std::map<double, EventRoster>& detections, const EventRoster& references,
                double dataset_seconds, const PsdsConfig& cfg, const std::set<std::string>& subset) {
  cfg.validate();
  if (!(dataset_seconds > 0)) throw InputError("psds: dataset duration must be positive");
  if (detections.size() < 2) throw InputError("psds: need at least two operating points");
  const double hours = dataset_seconds / 3600.0;

  PsdsResult result;
  std::set<std::string> with_refs;
  for (const auto& r : references) {
    if (subset.empty() || subset.count(r.class_id)) with_refs.insert(r.class_id);
  }
  result.classes.assign(with_refs.begin(), with_refs.end());
  if (result.classes.empty()) return result;

  // Per class: (efpr, tpr) per operating point.
  std::map<std::string, std::vector<std::pair<double, double>>> roc;
  for (const auto& [threshold, roster] : detections) {
    auto counts = match_events(roster, references, cfg.dtc, cfg.gtc);
    OperatingPoint op;
    op.threshold = threshold;
    for (const auto& c : result.classes) {
      const auto& cc = counts[c];
      const double tpr = static_cast<double>(cc.detected_references) / static_cast<double>(cc.references);
      const double efpr = static_cast<double>(cc.false_positives) / hours;
      op.tpr[c] = tpr;
      op.efpr[c] = efpr;
      op.mean_tpr += tpr / static_cast<double>(result.classes.size());
      roc[c].emplace_back(efpr, tpr);
    }
    result.points.push_back(std::move(op));
  }

  std::vector<double> xs{0.0};
  for (const auto& [c, pts] : roc) {
    for (const auto& [x, y] : pts) {
      if (x < cfg.e_max) xs.push_back(x);
    }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  const double n = static_cast<double>(result.classes.size());
  std::vector<double> best(roc.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::size_t k = 0;
    double mean = 0;
    for (const auto& [c, pts] : roc) {
      double b = 0;
      for (const auto& [x, y] : pts) {
        if (x <= xs[i]) b = std::max(b, y);
      }
      best[k++] = b;
      mean += b;
    }
    mean /= n;
    double var = 0;
    for (double b : best) var += (b - mean) * (b - mean);
    var /= n;
    const double y = std::max(0.0, mean - cfg.alpha_st * std::sqrt(var));
    const double next = i + 1 < xs.size() ? xs[i + 1] : cfg.e_max;
    result.score += y * (next - xs[i]);
    result.curve_efpr.push_back(xs[i]);
    result.curve_tpr.push_back(y);
  }
  result.score /= cfg.e_max;
  return result;
}

}  // namespace dasm
