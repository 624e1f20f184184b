// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <vector>

#include "dasm/decoder/model.hpp"
#include "dasm/eval/psds.hpp"
#include "dasm/querybank/query.hpp"
#include "dasm/training/labels.hpp"
#include "dasm/training/synthetic.hpp"
#include "dasm/training/trainer.hpp"

DASM_BEGIN_NAMESPACE

struct DatasetConfig {
  std::size_t train_clips = 800;
  std::size_t eval_clips = 200;
  /// Held-out clips whose event crops become audio queries.
  std::size_t query_clips = 120;
  double clip_seconds = 2.0;
  int min_events = 1;
  int max_events = 3;
  double min_duration = 0.3;
  double max_duration = 1.2;
  double min_snr_db = 6.0;
  double max_snr_db = 20.0;
  double noise_rms = 0.01;
  std::vector<std::string> rare_leaves = default_rare_leaves();
  /// Draw weight of rare leaves in the training split; eval and query splits
  /// use `heldout_rare_weight`.
  double rare_weight = 0.1;
  double heldout_rare_weight = 1.0;
  /// Common/rare boundary on total annotated training seconds.
  double rare_threshold_seconds = 30.0;

  SyntheticSpec spec(double leaf_rare_weight) const;
  void validate() const;
};

struct QueryConfig {
  std::uint64_t provider_seed = 7;
  Modality eval_modality = Modality::Audio;
  /// Total audio per class for audio queries; 0 uses every crop.
  double audio_seconds = 0.0;
};

struct EvalConfig {
  std::size_t median_window = 5;
  std::size_t thresholds = 50;
  PsdsConfig psds;
};

enum class Protocol { Partial, Full };
const char* to_string(Protocol p);

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "run";
  Protocol protocol = Protocol::Partial;
  FrontendConfig frontend;
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  EvalConfig eval;
  DatasetConfig dataset;
  QueryConfig query;

  /// Laptop-scale defaults used by the CLI and the acceptance runs.
  static RunConfig desk();
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Overlays `j` on `cfg`. Unknown keys or ill-typed values raise
/// ValidationError naming the offending path.
void apply_json(RunConfig& cfg, const nlohmann::json& j);
nlohmann::json model_to_json(const ModelConfig& cfg);
ModelConfig model_from_json(const nlohmann::json& j);

// Data.

struct ClipRecord {
  std::string id;
  MelSpectrogram mel;
  EventRoster events;  // leaf labels
};

struct SplitData {
  std::vector<ClipRecord> clips;
  EventRoster roster;
  double seconds = 0;
};

struct Dataset {
  SyntheticSpec spec;
  Ontology ontology;
  SplitData train, eval, query;
};

using ClipSink = std::function<void(const std::string& split, const std::string& clip_id, const Waveform& audio)>;

/// Deterministic in (cfg.seed, split, clip index). `sink` sees every waveform.
Dataset generate_dataset(const RunConfig& cfg, const ClipSink& sink = {});

/// Writes WAVs, rosters, ontology and manifest under `dir`. Refuses a
/// non-empty directory unless `force`.
nlohmann::json write_dataset(const std::filesystem::path& dir, const RunConfig& cfg, bool force);
Dataset load_dataset(const std::filesystem::path& dir, const FrontendConfig& frontend);

struct ProtocolClasses {
  std::vector<std::string> base;
  std::vector<std::string> novel;
  ClassSplit split;
  std::set<std::string> common() const { return {base.begin(), base.end()}; }
  std::set<std::string> rare() const { return {novel.begin(), novel.end()}; }
};

/// Partial: common classes are base, rare classes novel. Full: every class is
/// base. Class order follows the ontology.
ProtocolClasses protocol_classes(const Dataset& data, const RunConfig& cfg);

/// Event crops of the query split for every class (augmented labels).
std::map<std::string, std::vector<MelSpectrogram>> query_segments(const Dataset& data);

QueryStore build_query_store(const Dataset& data, const ProtocolClasses& classes, const QueryConfig& cfg,
                             std::size_t dim, std::uint64_t seed);

/// Embedded event crops of the split per class (augmented labels), aligned
/// with `classes`.
std::vector<std::vector<AudioExemplar>> training_exemplars(const SplitData& split, const Ontology& ontology,
                                                          const std::vector<std::string>& classes,
                                                          const EmbeddingProvider& provider);

/// Augmented labels restricted to `classes`, frame targets at the model rate
/// and resampling weights.
TrainingSet make_training_set(const SplitData& split, const Ontology& ontology, const std::vector<std::string>& classes);

// Inference and scoring.

struct ClipScores {
  std::string clip_id;
  num::Tensor frame;  // [T×N]
  num::Tensor clip;   // [N]
  double frames_per_second = 50;
};

std::vector<ClipScores> score_clips(const DasmModel& model, const std::vector<ClipRecord>& clips,
                                    const std::vector<QueryVector>& queries, std::size_t n_base, MaskStrategy strategy);

/// Median-filters each clip once, then extracts events at every threshold.
std::map<double, EventRoster> detect(const std::vector<ClipScores>& scores, const std::vector<std::string>& classes,
                                     const std::vector<double>& thresholds, std::size_t median_window);

struct PsdsReport {
  double psds = 0, psds_c = 0, psds_r = 0;
  PsdsResult all;
};

PsdsReport evaluate_detections(const std::map<double, EventRoster>& detections, const EventRoster& references,
                               double seconds, const PsdsConfig& cfg, const std::set<std::string>& common,
                               const std::set<std::string>& rare);

/// Augmented reference labels of a split restricted to `classes`.
EventRoster reference_labels(const SplitData& split, const Ontology& ontology, const std::set<std::string>& classes);

// End-to-end helpers.

struct TrainedModel {
  std::unique_ptr<DasmModel> model;
  ProtocolClasses classes;
  QueryStore store;
  std::vector<StepRecord> log;
};

TrainedModel train_model(const Dataset& data, const RunConfig& cfg,
                         const std::function<void(const StepRecord&)>& on_step = {});

/// Base queries from the store (modality `m`, falling back to the other) with
/// the store's novel queries appended, scored on the eval split.
PsdsReport evaluate_model(const DasmModel& model, const Dataset& data, const QueryStore& store,
                          const ProtocolClasses& classes, const RunConfig& cfg, MaskStrategy strategy, Modality m);

// Checkpoints carry the model config and class lists as JSON metadata.

void save_model(const std::filesystem::path& path, const DasmModel& model, const nlohmann::json& extra = {});
struct LoadedModel {
  std::unique_ptr<DasmModel> model;
  nlohmann::json metadata;
  std::string hash;
};
LoadedModel load_model(const std::filesystem::path& path);

DASM_END_NAMESPACE
