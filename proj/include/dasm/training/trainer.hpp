// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dasm/decoder/model.hpp"
#include "dasm/frontend/audio.hpp"
#include "dasm/querybank/query.hpp"
#include "dasm/training/loss.hpp"

DASM_BEGIN_NAMESPACE

inline constexpr const char* kBackboneGroup = "backbone";

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  double lr_backbone = 1.5e-4;
  double lr_rest = 2e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// The backbone group receives no updates for steps [0, freeze_steps).
  std::size_t freeze_steps = 1000;
  std::uint64_t seed = 0;
  QueryMode query_mode = QueryMode::Mixed;
  /// Draw clips by their resampling weight instead of uniformly.
  bool resample = true;
  bool spec_augment = false;
  bool time_shift = false;
  double mixup_probability = 0.0;
  SpecAugmentConfig spec_augment_config;
  /// Audio queries are pooled per example from 1..k random training
  /// exemplars of each class; 0 uses the store's fixed queries.
  std::size_t query_exemplars = 0;
  /// Encoder alignment steps run before detection training (0 disables).
  std::size_t align_steps = 0;
  double align_lr = 1e-3;

  void validate() const;
};

/// Adam with decoupled weight decay. Per-parameter learning rates come from
/// the parameter's group; parameters that are not recording gradients are
/// skipped entirely (moments untouched).
class AdamW {
 public:
  AdamW(num::ParameterList params, double beta1, double beta2, double epsilon, double weight_decay);
  void step(const std::map<std::string, double>& lr_by_group, double default_lr);
  std::size_t steps_taken() const { return t_; }

 private:
  num::ParameterList params_;
  std::vector<std::vector<double>> m_, v_;
  std::vector<std::size_t> count_;
  double beta1_, beta2_, eps_, wd_;
  std::size_t t_ = 0;
};

struct TrainingExample {
  std::string clip_id;
  MelSpectrogram mel;
  /// [T×N] frame targets in `TrainingSet::classes` order at the model rate.
  num::Tensor targets;
};

struct TrainingSet {
  std::vector<std::string> classes;
  std::vector<TrainingExample> examples;
  /// Per-example draw weight; uniform when empty.
  std::vector<double> weights;
  /// Per-class audio exemplars (aligned with `classes`); may be empty.
  std::vector<std::vector<AudioExemplar>> exemplars;
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0;
  double frame_loss = 0;
  double clip_loss = 0;
  bool backbone_frozen = false;
};

class Trainer {
 public:
  Trainer(DasmModel& model, const TrainingSet& data, const QueryStore& queries, TrainConfig cfg, LossConfig loss);

  /// One optimizer step on a freshly drawn batch. Throws on a non-finite loss.
  StepRecord step();
  std::vector<StepRecord> run(const std::function<void(const StepRecord&)>& on_step = {});
  std::size_t steps_done() const { return step_; }

 private:
  num::Tensor queries_for(Modality m);

  DasmModel& model_;
  const TrainingSet& data_;
  TrainConfig cfg_;
  LossConfig loss_;
  AdamW opt_;
  std::mt19937_64 rng_;
  std::vector<bool> has_text_, has_audio_;
  num::Tensor text_queries_, audio_queries_;
  std::size_t step_ = 0;
};

/// Trains the audio encoder so its coarse and fused frame features point along
/// the provider's audio embedding of the same frames (mean cosine loss). Uses
/// no labels. Returns the loss per step.
std::vector<double> align_encoder(DasmModel& model, const std::vector<MelSpectrogram>& clips,
                                  const EmbeddingProvider& provider, std::size_t steps, std::size_t batch_size,
                                  double lr, std::uint64_t seed);

/// Frame-level macro F1 at `threshold` over the given classes; classes with
/// no positive frame and no positive prediction are skipped.
double frame_macro_f1(const std::vector<num::Tensor>& predictions, const std::vector<num::Tensor>& targets,
                      double threshold = 0.5);

DASM_END_NAMESPACE
