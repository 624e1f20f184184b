// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dasm/frontend/audio.hpp"

DASM_BEGIN_NAMESPACE

enum class Modality { Text, Audio };
enum class QueryRole { Base, Novel };

const char* to_string(Modality m);
const char* to_string(QueryRole r);
Modality parse_modality(const std::string& s);
QueryRole parse_query_role(const std::string& s);

struct QueryVector {
  std::string class_id;
  Modality modality = Modality::Text;
  QueryRole role = QueryRole::Base;
  std::vector<float> embedding;
  /// Prompt text, or the source segments for audio queries.
  std::string provenance;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<float> embed_text(const std::string& prompt) const = 0;
  /// Time-distributed embedding [frames×dim].
  virtual num::Tensor embed_audio(const MelSpectrogram& features) const = 0;
};

/// Deterministic stand-in for a pretrained joint audio-text encoder.
///
/// Text: the FNV-1a hash of the prompt bytes seeds a Gaussian draw, so equal
/// prompts give equal vectors and unrelated prompts are near-orthogonal.
/// Audio: each mel frame is centred on its own mean (removing overall level)
/// and multiplied by a fixed Gaussian [mel_bins×dim] matrix drawn from `seed`.
class StubEmbeddingProvider final : public EmbeddingProvider {
 public:
  StubEmbeddingProvider(std::size_t dim, std::size_t mel_bins, std::uint64_t seed);
  std::size_t dim() const override { return dim_; }
  std::size_t mel_bins() const { return mel_bins_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<float> embed_text(const std::string& prompt) const override;
  num::Tensor embed_audio(const MelSpectrogram& features) const override;

 private:
  std::size_t dim_, mel_bins_;
  std::uint64_t seed_;
  std::vector<float> projection_;
};

std::string text_prompt(const std::string& class_name);

/// Embeds "sound of {class}" and unit-normalizes.
QueryVector build_text_query(const std::string& class_name, const EmbeddingProvider& provider);

/// Mean of the time-distributed features over all frames of all segments
/// (equivalently, per-segment means weighted by length), unit-normalized.
QueryVector build_audio_query(const std::string& class_id, const std::vector<MelSpectrogram>& segments,
                              const EmbeddingProvider& provider, std::string provenance = {});

/// Frame-summed embedding of one segment; pooled exemplars average to an
/// audio query.
struct AudioExemplar {
  std::vector<double> sum;
  std::size_t frames = 0;
};
AudioExemplar embed_exemplar(const MelSpectrogram& segment, const EmbeddingProvider& provider);

/// Unit-normalized mean over the pooled exemplars.
std::vector<float> pool_exemplars(const std::vector<const AudioExemplar*>& exemplars);

/// Frames [round(onset/hop), round(offset/hop)) of `mel`, at least one frame.
MelSpectrogram crop_segment(const MelSpectrogram& mel, double onset, double offset);

/// Randomly ordered segments truncated so their total duration is at most
/// `seconds`. Returns everything if less audio is available.
std::vector<MelSpectrogram> subsample_segments(const std::vector<MelSpectrogram>& segments, double seconds,
                                               std::mt19937_64& rng);

enum class QueryMode { Text, Audio, Mixed };
const char* to_string(QueryMode m);
QueryMode parse_query_mode(const std::string& s);

/// Modality for one training example. Mixed mode draws a fair coin when both
/// are available; otherwise the available one is used.
Modality sample_modality(QueryMode mode, bool has_text, bool has_audio, std::mt19937_64& rng);

/// Per-class query vectors in either modality. Base classes precede novel ones.
struct QueryEntry {
  std::string class_id;
  QueryRole role = QueryRole::Base;
  std::optional<QueryVector> text;
  std::optional<QueryVector> audio;

  const QueryVector& get(Modality m) const;
  bool has(Modality m) const { return m == Modality::Text ? text.has_value() : audio.has_value(); }
};

inline constexpr const char* kQueryStoreVersion = "dasm-querystore/1.0";

/// Text file, one row per (class, modality):
///
///   # dasm-querystore/1.0
///   class_id <TAB> role <TAB> modality <TAB> dim <TAB> payload <TAB> provenance
///
/// role is base|novel, modality text|audio, payload is dim IEEE-754 binary32
/// values as 8 lowercase hex digits each (big-endian bit pattern, no
/// separators). Provenance is free text without tabs or newlines. Rows of one
/// class are contiguous; base classes come first.
class QueryStore {
 public:
  /// Adds or extends a class. Base entries are placed before any novel entry.
  void add(const QueryVector& q);

  const std::vector<QueryEntry>& entries() const { return entries_; }
  const QueryEntry& at(const std::string& class_id) const;
  bool contains(const std::string& class_id) const;
  std::size_t dim() const { return dim_; }
  std::vector<std::string> class_ids(std::optional<QueryRole> role = std::nullopt) const;

  std::string serialize() const;
  static QueryStore parse(const std::string& text, const std::string& origin = "query store");
  void save(const std::filesystem::path& path) const;
  static QueryStore load(const std::filesystem::path& path);

  bool operator==(const QueryStore&) const;

 private:
  std::vector<QueryEntry> entries_;
  std::size_t dim_ = 0;
};

/// Base queries in store order, then `novel` in the given order.
std::vector<QueryVector> assemble_inference_queries(const std::vector<QueryVector>& base,
                                                    const std::vector<QueryVector>& novel);
std::vector<QueryVector> assemble_inference_queries(const QueryStore& store, Modality base_modality,
                                                    const std::vector<QueryVector>& novel);

/// Stacks embeddings into [N×D].
num::Tensor query_matrix(const std::vector<QueryVector>& queries);

DASM_END_NAMESPACE
