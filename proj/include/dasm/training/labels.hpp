// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dasm/core/events.hpp"

namespace dasm {

/// Class hierarchy as a DAG of parent links.
class Ontology {
 public:
  /// Declares `name` with the given parents. Parents may be declared later;
  /// validate() checks the finished graph.
  void add(const std::string& name, const std::vector<std::string>& parents = {});

  /// Every parent is a declared class and the graph has no cycle.
  void validate() const;

  bool contains(const std::string& name) const { return parents_.count(name) > 0; }
  const std::vector<std::string>& classes() const { return order_; }
  const std::vector<std::string>& parents(const std::string& name) const;
  /// Strict ancestors, sorted.
  std::vector<std::string> ancestors(const std::string& name) const;
  std::vector<std::string> roots() const;
  std::vector<std::string> leaves() const;

  /// "# dasm-ontology/1.0" then one `child<TAB>parent` line per link; roots
  /// appear as `child<TAB>` with an empty parent.
  std::string format() const;
  static Ontology parse(const std::string& text, const std::string& origin = "ontology");
  void save(const std::filesystem::path& path) const;
  static Ontology load(const std::filesystem::path& path);

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::vector<std::string>> parents_;
};

struct AugmentedLabels {
  EventRoster roster;
  /// Clips removed because they contain a class outside the ontology.
  std::vector<std::string> dropped_clips;
};

/// Adds an identical-span event for every ancestor of every event, then merges
/// overlapping or touching spans of the same class within a clip. Output is
/// grouped by clip in input order, sorted by (class, onset) inside a clip.
AugmentedLabels label_augment(const EventRoster& labels, const Ontology& ontology);

/// Union of same-class, same-clip intervals; order as in label_augment.
EventRoster merge_spans(const EventRoster& labels);

struct ClassSplit {
  std::set<std::string> common;
  std::set<std::string> rare;
  std::map<std::string, double> seconds;
};

/// Classes with total annotated duration below `threshold_seconds` are rare;
/// a class exactly at the threshold is common.
ClassSplit split_common_rare(const EventRoster& roster, double threshold_seconds = 360.0);

EventRoster remove_classes(const EventRoster& roster, const std::set<std::string>& classes);

/// Per-clip sampling weight max_{c in clip} 1/count(c), where count(c) is the
/// number of clips containing c; normalized to mean 1 over `clip_ids`. Clips
/// without labels receive the smallest labelled weight.
std::vector<double> resample_weights(const EventRoster& roster, const std::vector<std::string>& clip_ids);

}  // namespace dasm
