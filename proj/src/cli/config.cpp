// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "dasm/cli/pipeline.hpp"
#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE

using nlohmann::json;

namespace {

// Reads known keys from one JSON object and reports whatever is left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("config: '" + where(key) + "' has the wrong type (" + e.what() + ")");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError("config: unknown key '" + where(it.key()) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E, typename Parse>
void get_enum(Section& s, const char* key, E& out, Parse parse) {
  std::string name;
  const bool present = s.child(key) != nullptr;
  s.get(key, name);
  if (!present) return;
  try {
    out = parse(name);
  } catch (const Error& e) {
    throw ValidationError("config: '" + s.where(key) + "': " + e.what());
  }
}

Protocol parse_protocol(const std::string& s) {
  if (s == "partial") return Protocol::Partial;
  if (s == "full") return Protocol::Full;
  throw ConfigError("unknown protocol '" + s + "' (partial|full)");
}

}  // namespace

const char* to_string(Protocol p) { return p == Protocol::Partial ? "partial" : "full"; }

json model_to_json(const ModelConfig& m) {
  return {{"dim", m.encoder.dim},
          {"heads", m.encoder.heads},
          {"ffn_ratio", m.encoder.ffn_ratio},
          {"mel_bins", m.encoder.mel_bins},
          {"patch_t", m.encoder.patch_t},
          {"patch_f", m.encoder.patch_f},
          {"coarse_blocks", m.encoder.coarse_blocks},
          {"upsample", m.encoder.upsample},
          {"cnn_blocks", m.encoder.cnn_blocks},
          {"cnn_channels", m.encoder.cnn_channels},
          {"event_blocks", m.decoder.event_blocks},
          {"context_blocks", m.decoder.context_blocks},
          {"conv_kernel", m.decoder.conv_kernel},
          {"cross_attention_positions", m.decoder.cross_attention_positions},
          {"seed", m.seed},
          {"ablation",
           {{"event_decoder", m.ablation.event_decoder},
            {"context", m.ablation.context},
            {"clip_prior", m.ablation.clip_prior}}}};
}

namespace {

void apply_model(ModelConfig& m, const json& j, const std::string& path) {
  Section s(j, path);
  std::size_t dim = m.encoder.dim, heads = m.encoder.heads, ffn = m.encoder.ffn_ratio;
  s.get("dim", dim);
  s.get("heads", heads);
  s.get("ffn_ratio", ffn);
  m.set_width(dim, heads, ffn);
  s.get("mel_bins", m.encoder.mel_bins);
  s.get("patch_t", m.encoder.patch_t);
  s.get("patch_f", m.encoder.patch_f);
  s.get("coarse_blocks", m.encoder.coarse_blocks);
  s.get("upsample", m.encoder.upsample);
  s.get("cnn_blocks", m.encoder.cnn_blocks);
  s.get("cnn_channels", m.encoder.cnn_channels);
  s.get("event_blocks", m.decoder.event_blocks);
  s.get("context_blocks", m.decoder.context_blocks);
  s.get("conv_kernel", m.decoder.conv_kernel);
  s.get("cross_attention_positions", m.decoder.cross_attention_positions);
  s.get("seed", m.seed);
  if (const json* a = s.child("ablation")) {
    Section as(*a, s.where("ablation"));
    as.get("event_decoder", m.ablation.event_decoder);
    as.get("context", m.ablation.context);
    as.get("clip_prior", m.ablation.clip_prior);
    as.finish();
  }
  s.finish();
}

}  // namespace

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  apply_model(m, j, "model");
  m.validate();
  return m;
}

json to_json(const RunConfig& c) {
  const auto& d = c.dataset;
  const auto& t = c.train;
  const auto& p = c.eval.psds;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"protocol", to_string(c.protocol)},
      {"frontend",
       {{"sample_rate", c.frontend.sample_rate},
        {"window", c.frontend.window},
        {"hop", c.frontend.hop},
        {"mel_bins", c.frontend.mel_bins},
        {"f_min", c.frontend.f_min},
        {"f_max", c.frontend.f_max}}},
      {"model", model_to_json(c.model)},
      {"loss",
       {{"alpha", c.loss.alpha},
        {"gamma_pos", c.loss.gamma_pos},
        {"gamma_neg", c.loss.gamma_neg},
        {"prob_margin", c.loss.prob_margin}}},
      {"train",
       {{"steps", t.steps},
        {"batch_size", t.batch_size},
        {"lr_backbone", t.lr_backbone},
        {"lr_rest", t.lr_rest},
        {"weight_decay", t.weight_decay},
        {"freeze_steps", t.freeze_steps},
        {"query_mode", to_string(t.query_mode)},
        {"resample", t.resample},
        {"query_exemplars", t.query_exemplars},
        {"align_steps", t.align_steps},
        {"align_lr", t.align_lr},
        {"spec_augment", t.spec_augment},
        {"time_shift", t.time_shift},
        {"mixup_probability", t.mixup_probability}}},
      {"eval",
       {{"median_window", c.eval.median_window},
        {"thresholds", c.eval.thresholds},
        {"dtc", p.dtc},
        {"gtc", p.gtc},
        {"cttc", p.cttc},
        {"alpha_ct", p.alpha_ct},
        {"alpha_st", p.alpha_st},
        {"e_max", p.e_max}}},
      {"dataset",
       {{"train_clips", d.train_clips},
        {"eval_clips", d.eval_clips},
        {"query_clips", d.query_clips},
        {"clip_seconds", d.clip_seconds},
        {"min_events", d.min_events},
        {"max_events", d.max_events},
        {"min_duration", d.min_duration},
        {"max_duration", d.max_duration},
        {"min_snr_db", d.min_snr_db},
        {"max_snr_db", d.max_snr_db},
        {"noise_rms", d.noise_rms},
        {"rare_leaves", d.rare_leaves},
        {"rare_weight", d.rare_weight},
        {"heldout_rare_weight", d.heldout_rare_weight},
        {"rare_threshold_seconds", d.rare_threshold_seconds}}},
      {"query",
       {{"provider_seed", c.query.provider_seed},
        {"eval_modality", to_string(c.query.eval_modality)},
        {"audio_seconds", c.query.audio_seconds}}},
  };
}

void apply_json(RunConfig& c, const json& j) {
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  get_enum(root, "protocol", c.protocol, parse_protocol);
  if (const json* f = root.child("frontend")) {
    Section s(*f, "frontend");
    s.get("sample_rate", c.frontend.sample_rate);
    s.get("window", c.frontend.window);
    s.get("hop", c.frontend.hop);
    s.get("mel_bins", c.frontend.mel_bins);
    s.get("f_min", c.frontend.f_min);
    s.get("f_max", c.frontend.f_max);
    s.finish();
  }
  if (const json* m = root.child("model")) apply_model(c.model, *m, "model");
  if (const json* l = root.child("loss")) {
    Section s(*l, "loss");
    s.get("alpha", c.loss.alpha);
    s.get("gamma_pos", c.loss.gamma_pos);
    s.get("gamma_neg", c.loss.gamma_neg);
    s.get("prob_margin", c.loss.prob_margin);
    s.finish();
  }
  if (const json* t = root.child("train")) {
    Section s(*t, "train");
    s.get("steps", c.train.steps);
    s.get("batch_size", c.train.batch_size);
    s.get("lr_backbone", c.train.lr_backbone);
    s.get("lr_rest", c.train.lr_rest);
    s.get("weight_decay", c.train.weight_decay);
    s.get("freeze_steps", c.train.freeze_steps);
    get_enum(s, "query_mode", c.train.query_mode, parse_query_mode);
    s.get("resample", c.train.resample);
    s.get("query_exemplars", c.train.query_exemplars);
    s.get("align_steps", c.train.align_steps);
    s.get("align_lr", c.train.align_lr);
    s.get("spec_augment", c.train.spec_augment);
    s.get("time_shift", c.train.time_shift);
    s.get("mixup_probability", c.train.mixup_probability);
    s.finish();
  }
  if (const json* e = root.child("eval")) {
    Section s(*e, "eval");
    s.get("median_window", c.eval.median_window);
    s.get("thresholds", c.eval.thresholds);
    s.get("dtc", c.eval.psds.dtc);
    s.get("gtc", c.eval.psds.gtc);
    s.get("cttc", c.eval.psds.cttc);
    s.get("alpha_ct", c.eval.psds.alpha_ct);
    s.get("alpha_st", c.eval.psds.alpha_st);
    s.get("e_max", c.eval.psds.e_max);
    s.finish();
    c.eval.psds.thresholds = PsdsConfig::default_thresholds(c.eval.thresholds);
  }
  if (const json* d = root.child("dataset")) {
    Section s(*d, "dataset");
    auto& x = c.dataset;
    s.get("train_clips", x.train_clips);
    s.get("eval_clips", x.eval_clips);
    s.get("query_clips", x.query_clips);
    s.get("clip_seconds", x.clip_seconds);
    s.get("min_events", x.min_events);
    s.get("max_events", x.max_events);
    s.get("min_duration", x.min_duration);
    s.get("max_duration", x.max_duration);
    s.get("min_snr_db", x.min_snr_db);
    s.get("max_snr_db", x.max_snr_db);
    s.get("noise_rms", x.noise_rms);
    s.get("rare_leaves", x.rare_leaves);
    s.get("rare_weight", x.rare_weight);
    s.get("heldout_rare_weight", x.heldout_rare_weight);
    s.get("rare_threshold_seconds", x.rare_threshold_seconds);
    s.finish();
  }
  if (const json* q = root.child("query")) {
    Section s(*q, "query");
    s.get("provider_seed", c.query.provider_seed);
    get_enum(s, "eval_modality", c.query.eval_modality, parse_modality);
    s.get("audio_seconds", c.query.audio_seconds);
    s.finish();
  }
  root.finish();
}

SyntheticSpec DatasetConfig::spec(double leaf_rare_weight) const {
  auto s = default_synthetic_spec(rare_leaves, leaf_rare_weight);
  s.clip_seconds = clip_seconds;
  s.min_events = min_events;
  s.max_events = max_events;
  s.min_duration = min_duration;
  s.max_duration = max_duration;
  s.min_snr_db = min_snr_db;
  s.max_snr_db = max_snr_db;
  s.noise_rms = noise_rms;
  return s;
}

void DatasetConfig::validate() const {
  if (train_clips == 0 || eval_clips == 0 || query_clips == 0) throw ConfigError("dataset: every split needs clips");
  if (!(rare_weight > 0 && heldout_rare_weight > 0)) throw ConfigError("dataset: rare weights must be positive");
  if (rare_threshold_seconds < 0) throw ConfigError("dataset: negative rare threshold");
  spec(rare_weight).validate();
}

RunConfig RunConfig::desk() {
  RunConfig c;
  c.model.set_width(32, 4, 2);
  c.model.encoder.mel_bins = c.frontend.mel_bins;
  c.model.encoder.cnn_blocks = 4;
  c.model.encoder.cnn_channels = 8;
  c.train.steps = 2000;
  c.train.batch_size = 8;
  c.train.freeze_steps = 1000;
  c.train.spec_augment = true;
  c.train.time_shift = true;
  c.train.query_exemplars = 4;
  c.train.align_steps = 1500;
  c.eval.psds.thresholds = PsdsConfig::default_thresholds(c.eval.thresholds);
  return c;
}

void RunConfig::validate() const {
  try {
    frontend.validate();
    model.validate();
    loss.validate();
    train.validate();
    dataset.validate();
    eval.psds.validate();
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (model.encoder.mel_bins != frontend.mel_bins) {
    throw ValidationError("config: model.mel_bins differs from frontend.mel_bins");
  }
  if (eval.median_window % 2 == 0) throw ValidationError("config: eval.median_window must be odd");
  const std::size_t frames = frontend.frames_for(static_cast<std::size_t>(dataset.clip_seconds * frontend.sample_rate));
  if (frames % model.encoder.patch_t != 0) {
    throw ValidationError("config: clip of " + std::to_string(frames) + " mel frames is not a multiple of patch_t " +
                          std::to_string(model.encoder.patch_t));
  }
}

DASM_END_NAMESPACE
