// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dasm/core/events.hpp"
#include "dasm/eval/psds.hpp"

namespace dasm {

/// Step plot of the effective TPR against false positives per hour.
std::string roc_svg(const PsdsResult& result, double e_max, const std::string& title);

/// Polyline with markers; x values need not be uniform.
std::string line_chart_svg(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& x_label,
                           const std::string& y_label, const std::string& title);

/// One lane per class: references as outlined bars, detections filled.
std::string timeline_svg(const std::string& clip_id, double seconds, const EventRoster& references,
                         const EventRoster& detections);

}  // namespace dasm
