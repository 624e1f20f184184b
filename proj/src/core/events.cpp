// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/core/events.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "dasm/core/errors.hpp"

namespace dasm {

namespace {

std::string number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_number(const std::string& s, const std::string& where) {
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ValidationError(where + ": bad number '" + s + "'");
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

std::string format_roster(const EventRoster& roster) {
  std::ostringstream os;
  os << "# " << kRosterVersion << "\n";
  for (const auto& e : roster) {
    os << e.clip_id << '\t' << e.class_id << '\t' << number(e.onset) << '\t' << number(e.offset);
    if (e.score) os << '\t' << number(*e.score);
    os << '\n';
  }
  return os.str();
}

EventRoster parse_roster(const std::string& text, const std::string& origin) {
  EventRoster out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line[0] == '#') {
      const auto pos = line.find("dasm-roster/");
      if (pos != std::string::npos && line.compare(pos + 12, 2, "1.") != 0) {
        throw CompatibilityError(where + ": unsupported roster version '" + line.substr(pos) + "'");
      }
      continue;
    }
    auto f = split_tabs(line);
    if (f.size() != 4 && f.size() != 5) throw ValidationError(where + ": expected 4 or 5 tab-separated fields");
    Event e{f[0], f[1], parse_number(f[2], where), parse_number(f[3], where), std::nullopt};
    if (f.size() == 5) e.score = parse_number(f[4], where);
    if (e.clip_id.empty() || e.class_id.empty()) throw ValidationError(where + ": empty clip or class id");
    if (!(e.onset >= 0 && e.onset < e.offset)) throw ValidationError(where + ": need 0 <= onset < offset");
    out.push_back(std::move(e));
  }
  return out;
}

void write_roster(const std::filesystem::path& path, const EventRoster& roster) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os << format_roster(roster);
}

EventRoster read_roster(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_roster(buf.str(), path.string());
}

std::vector<std::pair<std::string, EventRoster>> group_by_clip(const EventRoster& roster) {
  std::vector<std::pair<std::string, EventRoster>> out;
  std::map<std::string, std::size_t> index;
  for (const auto& e : roster) {
    auto [it, fresh] = index.try_emplace(e.clip_id, out.size());
    if (fresh) out.emplace_back(e.clip_id, EventRoster{});
    out[it->second].second.push_back(e);
  }
  return out;
}

std::vector<std::string> classes_in(const EventRoster& roster) {
  std::set<std::string> s;
  for (const auto& e : roster) s.insert(e.class_id);
  return {s.begin(), s.end()};
}

}  // namespace dasm
