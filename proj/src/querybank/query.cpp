// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/querybank/query.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dasm/core/errors.hpp"
#include "dasm/core/hash.hpp"

DASM_BEGIN_NAMESPACE

namespace {

void normalize(std::vector<float>& v, const std::string& what) {
  double sq = 0;
  for (float x : v) sq += double(x) * x;
  const double n = std::sqrt(sq);
  if (!(n > 0) || !std::isfinite(n)) throw InputError(what + ": embedding has zero or non-finite norm");
  for (float& x : v) x = static_cast<float>(x / n);
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

std::string encode_payload(const std::vector<float>& v) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(v.size() * 8);
  for (float x : v) {
    auto bits = std::bit_cast<std::uint32_t>(x);
    for (int s = 28; s >= 0; s -= 4) out.push_back(digits[(bits >> s) & 0xF]);
  }
  return out;
}

std::vector<float> decode_payload(const std::string& s, std::size_t dim, const std::string& where) {
  if (s.size() != dim * 8) throw ValidationError(where + ": payload length does not match dim");
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    std::uint32_t bits = 0;
    for (std::size_t k = 0; k < 8; ++k) {
      const char c = s[i * 8 + k];
      int d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else throw ValidationError(where + ": bad hex digit in payload");
      bits = (bits << 4) | static_cast<std::uint32_t>(d);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

}  // namespace

const char* to_string(Modality m) { return m == Modality::Text ? "text" : "audio"; }
const char* to_string(QueryRole r) { return r == QueryRole::Base ? "base" : "novel"; }
const char* to_string(QueryMode m) {
  switch (m) {
    case QueryMode::Text: return "text";
    case QueryMode::Audio: return "audio";
    case QueryMode::Mixed: return "mixed";
  }
  return "?";
}

Modality parse_modality(const std::string& s) {
  if (s == "text") return Modality::Text;
  if (s == "audio") return Modality::Audio;
  throw ConfigError("unknown modality '" + s + "'");
}

QueryRole parse_query_role(const std::string& s) {
  if (s == "base") return QueryRole::Base;
  if (s == "novel") return QueryRole::Novel;
  throw ConfigError("unknown query role '" + s + "'");
}

QueryMode parse_query_mode(const std::string& s) {
  if (s == "text") return QueryMode::Text;
  if (s == "audio") return QueryMode::Audio;
  if (s == "mixed") return QueryMode::Mixed;
  throw ConfigError("unknown query mode '" + s + "'");
}

StubEmbeddingProvider::StubEmbeddingProvider(std::size_t dim, std::size_t mel_bins, std::uint64_t seed)
    : dim_(dim), mel_bins_(mel_bins), seed_(seed) {
  if (dim == 0 || mel_bins == 0) throw ConfigError("stub provider needs positive dim and mel_bins");
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f / std::sqrt(static_cast<float>(mel_bins)));
  projection_.resize(mel_bins * dim);
  for (auto& w : projection_) w = n(rng);
}

std::vector<float> StubEmbeddingProvider::embed_text(const std::string& prompt) const {
  std::mt19937_64 rng(fnv1a(prompt));
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(dim_);
  for (auto& x : v) x = n(rng);
  return v;
}

num::Tensor StubEmbeddingProvider::embed_audio(const MelSpectrogram& features) const {
  const auto& x = features.values;
  if (x.rank() != 2 || x.dim(1) != mel_bins_) {
    throw DimensionError("stub provider expects [frames×" + std::to_string(mel_bins_) + "] features, got " +
                         num::shape_string(x.shape()));
  }
  const std::size_t t_len = x.dim(0);
  std::vector<Real> out(t_len * dim_, Real(0));
  std::vector<double> centred(mel_bins_);
  for (std::size_t t = 0; t < t_len; ++t) {
    double mean = 0;
    for (std::size_t b = 0; b < mel_bins_; ++b) mean += x.at(t, b);
    mean /= static_cast<double>(mel_bins_);
    for (std::size_t b = 0; b < mel_bins_; ++b) centred[b] = x.at(t, b) - mean;
    for (std::size_t d = 0; d < dim_; ++d) {
      double acc = 0;
      for (std::size_t b = 0; b < mel_bins_; ++b) acc += centred[b] * projection_[b * dim_ + d];
      out[t * dim_ + d] = static_cast<Real>(acc);
    }
  }
  return num::Tensor::from({t_len, dim_}, std::move(out));
}

std::string text_prompt(const std::string& class_name) { return "sound of " + class_name; }

QueryVector build_text_query(const std::string& class_name, const EmbeddingProvider& provider) {
  if (class_name.empty()) throw InputError("text query needs a non-empty class name");
  QueryVector q;
  q.class_id = class_name;
  q.modality = Modality::Text;
  q.provenance = text_prompt(class_name);
  q.embedding = provider.embed_text(q.provenance);
  normalize(q.embedding, "text query '" + class_name + "'");
  return q;
}

QueryVector build_audio_query(const std::string& class_id, const std::vector<MelSpectrogram>& segments,
                              const EmbeddingProvider& provider, std::string provenance) {
  if (segments.empty()) throw InputError("audio query '" + class_id + "' needs at least one segment");
  std::vector<double> sum(provider.dim(), 0.0);
  std::size_t frames = 0;
  for (const auto& seg : segments) {
    const auto e = provider.embed_audio(seg);
    for (std::size_t t = 0; t < e.dim(0); ++t) {
      for (std::size_t d = 0; d < e.dim(1); ++d) sum[d] += e.at(t, d);
    }
    frames += e.dim(0);
  }
  if (frames == 0) throw InputError("audio query '" + class_id + "' has only empty segments");
  QueryVector q;
  q.class_id = class_id;
  q.modality = Modality::Audio;
  q.provenance = std::move(provenance);
  q.embedding.resize(sum.size());
  for (std::size_t d = 0; d < sum.size(); ++d) q.embedding[d] = static_cast<float>(sum[d] / frames);
  normalize(q.embedding, "audio query '" + class_id + "'");
  return q;
}

AudioExemplar embed_exemplar(const MelSpectrogram& segment, const EmbeddingProvider& provider) {
  const auto e = provider.embed_audio(segment);
  AudioExemplar out;
  out.sum.assign(e.dim(1), 0.0);
  for (std::size_t t = 0; t < e.dim(0); ++t) {
    for (std::size_t d = 0; d < e.dim(1); ++d) out.sum[d] += e.at(t, d);
  }
  out.frames = e.dim(0);
  return out;
}

std::vector<float> pool_exemplars(const std::vector<const AudioExemplar*>& exemplars) {
  if (exemplars.empty()) throw InputError("pool_exemplars: no exemplars");
  std::vector<double> sum(exemplars.front()->sum.size(), 0.0);
  std::size_t frames = 0;
  for (const auto* x : exemplars) {
    if (x->sum.size() != sum.size()) throw DimensionError("pool_exemplars: dim mismatch");
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += x->sum[d];
    frames += x->frames;
  }
  if (frames == 0) throw InputError("pool_exemplars: empty exemplars");
  std::vector<float> out(sum.size());
  for (std::size_t d = 0; d < sum.size(); ++d) out[d] = static_cast<float>(sum[d] / frames);
  normalize(out, "pooled audio query");
  return out;
}

MelSpectrogram crop_segment(const MelSpectrogram& mel, double onset, double offset) {
  const std::size_t t_len = mel.frames();
  if (t_len == 0) throw InputError("cannot crop an empty spectrogram");
  auto lo = static_cast<long>(std::lround(onset / mel.hop_seconds));
  auto hi = static_cast<long>(std::lround(offset / mel.hop_seconds));
  lo = std::clamp(lo, 0L, static_cast<long>(t_len) - 1);
  hi = std::clamp(hi, lo + 1, static_cast<long>(t_len));
  const std::size_t bins = mel.values.dim(1);
  auto src = mel.values.data();
  std::vector<Real> out(src.begin() + lo * bins, src.begin() + hi * bins);
  return MelSpectrogram{num::Tensor::from({static_cast<std::size_t>(hi - lo), bins}, std::move(out)),
                        mel.hop_seconds, mel.mel_bins};
}

std::vector<MelSpectrogram> subsample_segments(const std::vector<MelSpectrogram>& segments, double seconds,
                                               std::mt19937_64& rng) {
  std::vector<std::size_t> order(segments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<MelSpectrogram> out;
  double left = seconds;
  for (auto i : order) {
    if (left <= 0) break;
    const auto& s = segments[i];
    const double dur = s.frames() * s.hop_seconds;
    if (dur <= left) {
      out.push_back(s);
      left -= dur;
    } else {
      const auto keep = static_cast<std::size_t>(std::floor(left / s.hop_seconds + 1e-9));
      if (keep > 0) out.push_back(crop_segment(s, 0.0, keep * s.hop_seconds));
      left = 0;
    }
  }
  return out;
}

Modality sample_modality(QueryMode mode, bool has_text, bool has_audio, std::mt19937_64& rng) {
  if (!has_text && !has_audio) throw ConfigError("class has neither a text nor an audio query");
  if (!has_text) return Modality::Audio;
  if (!has_audio) return Modality::Text;
  switch (mode) {
    case QueryMode::Text: return Modality::Text;
    case QueryMode::Audio: return Modality::Audio;
    case QueryMode::Mixed: return std::bernoulli_distribution(0.5)(rng) ? Modality::Text : Modality::Audio;
  }
  return Modality::Text;
}

const QueryVector& QueryEntry::get(Modality m) const {
  const auto& slot = m == Modality::Text ? text : audio;
  if (!slot) throw ConfigError("class '" + class_id + "' has no " + to_string(m) + " query");
  return *slot;
}

void QueryStore::add(const QueryVector& q) {
  if (q.class_id.empty()) throw InputError("query without class id");
  if (q.embedding.empty()) throw InputError("query '" + q.class_id + "' has an empty embedding");
  for (float x : q.embedding) {
    if (!std::isfinite(x)) throw InputError("query '" + q.class_id + "' has a non-finite embedding");
  }
  if (q.provenance.find_first_of("\t\n\r") != std::string::npos) {
    throw InputError("query '" + q.class_id + "' provenance contains a tab or newline");
  }
  if (dim_ == 0) dim_ = q.embedding.size();
  if (q.embedding.size() != dim_) {
    throw DimensionError("query '" + q.class_id + "' has dim " + std::to_string(q.embedding.size()) +
                         ", store has " + std::to_string(dim_));
  }
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const QueryEntry& e) { return e.class_id == q.class_id; });
  if (it == entries_.end()) {
    QueryEntry e{q.class_id, q.role, std::nullopt, std::nullopt};
    auto pos = entries_.end();
    if (q.role == QueryRole::Base) {
      pos = std::find_if(entries_.begin(), entries_.end(), [](const QueryEntry& x) { return x.role == QueryRole::Novel; });
    }
    it = entries_.insert(pos, std::move(e));
  } else if (it->role != q.role) {
    throw InputError("class '" + q.class_id + "' registered as both base and novel");
  }
  auto& slot = q.modality == Modality::Text ? it->text : it->audio;
  if (slot) throw InputError("duplicate " + std::string(to_string(q.modality)) + " query for '" + q.class_id + "'");
  slot = q;
}

const QueryEntry& QueryStore::at(const std::string& class_id) const {
  for (const auto& e : entries_) {
    if (e.class_id == class_id) return e;
  }
  throw InputError("query store has no class '" + class_id + "'");
}

bool QueryStore::contains(const std::string& class_id) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const QueryEntry& e) { return e.class_id == class_id; });
}

std::vector<std::string> QueryStore::class_ids(std::optional<QueryRole> role) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (!role || e.role == *role) out.push_back(e.class_id);
  }
  return out;
}

std::string QueryStore::serialize() const {
  std::ostringstream os;
  os << "# " << kQueryStoreVersion << "\n";
  for (const auto& e : entries_) {
    for (const auto* q : {e.text ? &*e.text : nullptr, e.audio ? &*e.audio : nullptr}) {
      if (!q) continue;
      os << q->class_id << '\t' << to_string(q->role) << '\t' << to_string(q->modality) << '\t' << q->embedding.size()
         << '\t' << encode_payload(q->embedding) << '\t' << q->provenance << '\n';
    }
  }
  return os.str();
}

QueryStore QueryStore::parse(const std::string& text, const std::string& origin) {
  QueryStore store;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  bool saw_version = false;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("dasm-querystore/");
      if (pos != std::string::npos) {
        if (line.compare(pos + 16, 2, "1.") != 0) {
          throw CompatibilityError(where + ": unsupported query store version '" + line.substr(pos) + "'");
        }
        saw_version = true;
      }
      continue;
    }
    if (!saw_version) throw ValidationError(where + ": missing query store version header");
    auto f = split_tabs(line);
    if (f.size() != 6) throw ValidationError(where + ": expected 6 tab-separated fields");
    QueryVector q;
    q.class_id = f[0];
    try {
      q.role = parse_query_role(f[1]);
      q.modality = parse_modality(f[2]);
    } catch (const ConfigError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    std::size_t dim = 0;
    try {
      dim = std::stoul(f[3]);
    } catch (const std::exception&) {
      throw ValidationError(where + ": bad dim '" + f[3] + "'");
    }
    q.embedding = decode_payload(f[4], dim, where);
    q.provenance = f[5];
    try {
      store.add(q);
    } catch (const Error& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return store;
}

void QueryStore::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os << serialize();
}

QueryStore QueryStore::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse(buf.str(), path.string());
}

namespace {
bool same_vector(const std::optional<QueryVector>& a, const std::optional<QueryVector>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  if (a->class_id != b->class_id || a->modality != b->modality || a->role != b->role ||
      a->provenance != b->provenance || a->embedding.size() != b->embedding.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a->embedding.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a->embedding[i]) != std::bit_cast<std::uint32_t>(b->embedding[i])) return false;
  }
  return true;
}
}  // namespace

bool QueryStore::operator==(const QueryStore& other) const {
  if (dim_ != other.dim_ || entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.class_id != b.class_id || a.role != b.role || !same_vector(a.text, b.text) || !same_vector(a.audio, b.audio)) {
      return false;
    }
  }
  return true;
}

std::vector<QueryVector> assemble_inference_queries(const std::vector<QueryVector>& base,
                                                    const std::vector<QueryVector>& novel) {
  std::vector<QueryVector> out;
  out.reserve(base.size() + novel.size());
  auto push = [&](const QueryVector& q, QueryRole role) {
    for (const auto& existing : out) {
      if (existing.class_id == q.class_id) throw InputError("duplicate query class id '" + q.class_id + "'");
    }
    if (!out.empty() && out.front().embedding.size() != q.embedding.size()) {
      throw DimensionError("query '" + q.class_id + "' dimension differs from the base queries");
    }
    out.push_back(q);
    out.back().role = role;
  };
  for (const auto& q : base) push(q, QueryRole::Base);
  for (const auto& q : novel) push(q, QueryRole::Novel);
  return out;
}

std::vector<QueryVector> assemble_inference_queries(const QueryStore& store, Modality base_modality,
                                                    const std::vector<QueryVector>& novel) {
  std::vector<QueryVector> base;
  for (const auto& e : store.entries()) {
    if (e.role == QueryRole::Base) base.push_back(e.has(base_modality) ? e.get(base_modality) : e.get(e.text ? Modality::Text : Modality::Audio));
  }
  return assemble_inference_queries(base, novel);
}

num::Tensor query_matrix(const std::vector<QueryVector>& queries) {
  if (queries.empty()) throw InputError("no queries");
  const std::size_t d = queries.front().embedding.size();
  std::vector<Real> v;
  v.reserve(queries.size() * d);
  for (const auto& q : queries) {
    if (q.embedding.size() != d) throw DimensionError("query '" + q.class_id + "' has mismatched dimension");
    v.insert(v.end(), q.embedding.begin(), q.embedding.end());
  }
  return num::Tensor::from({queries.size(), d}, std::move(v));
}

DASM_END_NAMESPACE
