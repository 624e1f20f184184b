// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dasm {

/// One strong label or detection. `score` is set for detections only.
struct Event {
  std::string clip_id;
  std::string class_id;
  double onset = 0;
  double offset = 0;
  std::optional<double> score;

  double duration() const { return offset - onset; }
  bool operator==(const Event&) const = default;
};

using EventRoster = std::vector<Event>;

inline constexpr const char* kRosterVersion = "dasm-roster/1.0";

/// Tab-separated lines clip_id, class_id, onset, offset[, score], preceded by a
/// "# dasm-roster/<major>.<minor>" header. Onsets and offsets are written with
/// round-trip precision.
void write_roster(const std::filesystem::path& path, const EventRoster& roster);
EventRoster read_roster(const std::filesystem::path& path);
std::string format_roster(const EventRoster& roster);
EventRoster parse_roster(const std::string& text, const std::string& origin = "roster");

/// Events grouped by clip, clips in first-appearance order.
std::vector<std::pair<std::string, EventRoster>> group_by_clip(const EventRoster& roster);

/// Sorted, de-duplicated class ids.
std::vector<std::string> classes_in(const EventRoster& roster);

}  // namespace dasm
