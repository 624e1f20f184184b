// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/training/labels.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>
#include <tuple>

#include "dasm/core/errors.hpp"

namespace dasm {

void Ontology::add(const std::string& name, const std::vector<std::string>& parents) {
  if (name.empty()) throw ConfigError("ontology: empty class name");
  if (name.find_first_of("\t\n\r") != std::string::npos) throw ConfigError("ontology: class name contains whitespace control");
  auto [it, fresh] = parents_.try_emplace(name);
  if (fresh) order_.push_back(name);
  for (const auto& p : parents) {
    if (p == name) throw ConfigError("ontology: class '" + name + "' is its own parent");
    if (std::find(it->second.begin(), it->second.end(), p) == it->second.end()) it->second.push_back(p);
  }
}

void Ontology::validate() const {
  for (const auto& [c, ps] : parents_) {
    for (const auto& p : ps) {
      if (!contains(p)) throw ConfigError("ontology: parent '" + p + "' of '" + c + "' is not declared");
    }
  }
  // Iterative DFS with colours.
  std::map<std::string, int> colour;
  for (const auto& start : order_) {
    if (colour[start] == 2) continue;
    std::vector<std::pair<std::string, std::size_t>> stack{{start, 0}};
    colour[start] = 1;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto& ps = parents_.at(node);
      if (next == ps.size()) {
        colour[node] = 2;
        stack.pop_back();
        continue;
      }
      const std::string p = ps[next++];
      if (colour[p] == 1) throw ConfigError("ontology: cycle through '" + p + "'");
      if (colour[p] == 0) {
        colour[p] = 1;
        stack.emplace_back(p, 0);
      }
    }
  }
}

const std::vector<std::string>& Ontology::parents(const std::string& name) const {
  auto it = parents_.find(name);
  if (it == parents_.end()) throw InputError("ontology: unknown class '" + name + "'");
  return it->second;
}

std::vector<std::string> Ontology::ancestors(const std::string& name) const {
  std::set<std::string> seen;
  std::vector<std::string> todo = parents(name);
  while (!todo.empty()) {
    auto c = todo.back();
    todo.pop_back();
    if (!seen.insert(c).second) continue;
    for (const auto& p : parents(c)) todo.push_back(p);
  }
  return {seen.begin(), seen.end()};
}

std::vector<std::string> Ontology::roots() const {
  std::vector<std::string> out;
  for (const auto& c : order_) {
    if (parents_.at(c).empty()) out.push_back(c);
  }
  return out;
}

std::vector<std::string> Ontology::leaves() const {
  std::set<std::string> inner;
  for (const auto& [c, ps] : parents_) inner.insert(ps.begin(), ps.end());
  std::vector<std::string> out;
  for (const auto& c : order_) {
    if (!inner.count(c)) out.push_back(c);
  }
  return out;
}

std::string Ontology::format() const {
  std::ostringstream os;
  os << "# dasm-ontology/1.0\n";
  for (const auto& c : order_) {
    const auto& ps = parents_.at(c);
    if (ps.empty()) os << c << "\t\n";
    for (const auto& p : ps) os << c << '\t' << p << '\n';
  }
  return os.str();
}

Ontology Ontology::parse(const std::string& text, const std::string& origin) {
  Ontology ont;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected child<TAB>parent");
    }
    const auto child = line.substr(0, tab);
    const auto parent = line.substr(tab + 1);
    ont.add(child, parent.empty() ? std::vector<std::string>{} : std::vector<std::string>{parent});
  }
  for (const auto& c : std::vector<std::string>(ont.order_)) {
    for (const auto& p : std::vector<std::string>(ont.parents_.at(c))) {
      if (!ont.contains(p)) ont.add(p);
    }
  }
  ont.validate();
  return ont;
}

void Ontology::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os << format();
}

Ontology Ontology::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse(buf.str(), path.string());
}

EventRoster merge_spans(const EventRoster& labels) {
  EventRoster out;
  for (auto& [clip, events] : group_by_clip(labels)) {
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      return std::tie(a.class_id, a.onset, a.offset) < std::tie(b.class_id, b.onset, b.offset);
    });
    std::size_t first = out.size();
    for (const auto& e : events) {
      if (out.size() > first && out.back().class_id == e.class_id && e.onset <= out.back().offset) {
        out.back().offset = std::max(out.back().offset, e.offset);
        if (e.score) out.back().score = std::max(out.back().score.value_or(*e.score), *e.score);
      } else {
        out.push_back(e);
      }
    }
  }
  return out;
}

AugmentedLabels label_augment(const EventRoster& labels, const Ontology& ontology) {
  AugmentedLabels result;
  EventRoster expanded;
  std::map<std::string, std::vector<std::string>> cache;
  for (const auto& [clip, events] : group_by_clip(labels)) {
    const bool known = std::all_of(events.begin(), events.end(), [&](const Event& e) { return ontology.contains(e.class_id); });
    if (!known) {
      result.dropped_clips.push_back(clip);
      continue;
    }
    for (const auto& e : events) {
      expanded.push_back(e);
      auto it = cache.find(e.class_id);
      if (it == cache.end()) it = cache.emplace(e.class_id, ontology.ancestors(e.class_id)).first;
      for (const auto& a : it->second) {
        Event copy = e;
        copy.class_id = a;
        expanded.push_back(std::move(copy));
      }
    }
  }
  result.roster = merge_spans(expanded);
  return result;
}

ClassSplit split_common_rare(const EventRoster& roster, double threshold_seconds) {
  ClassSplit split;
  for (const auto& e : roster) split.seconds[e.class_id] += e.duration();
  for (const auto& [c, s] : split.seconds) (s < threshold_seconds ? split.rare : split.common).insert(c);
  return split;
}

EventRoster remove_classes(const EventRoster& roster, const std::set<std::string>& classes) {
  EventRoster out;
  std::copy_if(roster.begin(), roster.end(), std::back_inserter(out), [&](const Event& e) { return !classes.count(e.class_id); });
  return out;
}

std::vector<double> resample_weights(const EventRoster& roster, const std::vector<std::string>& clip_ids) {
  std::map<std::string, std::set<std::string>> clip_classes;
  for (const auto& e : roster) clip_classes[e.clip_id].insert(e.class_id);
  std::map<std::string, double> count;
  for (const auto& id : clip_ids) {
    auto it = clip_classes.find(id);
    if (it == clip_classes.end()) continue;
    for (const auto& c : it->second) count[c] += 1;
  }
  std::vector<double> w(clip_ids.size(), 0.0);
  double smallest = 0;
  for (std::size_t i = 0; i < clip_ids.size(); ++i) {
    auto it = clip_classes.find(clip_ids[i]);
    if (it == clip_classes.end()) continue;
    for (const auto& c : it->second) w[i] = std::max(w[i], 1.0 / count[c]);
    smallest = smallest == 0 ? w[i] : std::min(smallest, w[i]);
  }
  if (smallest == 0) smallest = 1;
  double sum = 0;
  for (auto& x : w) {
    if (x == 0) x = smallest;
    sum += x;
  }
  if (sum > 0) {
    for (auto& x : w) x *= static_cast<double>(w.size()) / sum;
  }
  return w;
}

}  // namespace dasm
