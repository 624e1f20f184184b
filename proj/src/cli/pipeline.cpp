// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/cli/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "dasm/core/errors.hpp"
#include "dasm/core/hash.hpp"
#include "dasm/numerics/checkpoint.hpp"

DASM_BEGIN_NAMESPACE

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSplits[] = {"train", "eval", "query"};

std::size_t split_size(const DatasetConfig& d, const std::string& split) {
  if (split == "train") return d.train_clips;
  if (split == "eval") return d.eval_clips;
  return d.query_clips;
}

SplitData& split_of(Dataset& data, const std::string& split) {
  if (split == "train") return data.train;
  if (split == "eval") return data.eval;
  return data.query;
}

std::string clip_name(const std::string& split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", split.c_str(), i);
  return buf;
}

std::mt19937_64 clip_rng(std::uint64_t seed, const std::string& clip_id) {
  Fnv1a h;
  h.update(&seed, sizeof seed);
  h.update(clip_id);
  return std::mt19937_64(h.digest());
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace

Dataset generate_dataset(const RunConfig& cfg, const ClipSink& sink) {
  cfg.dataset.validate();
  Dataset data;
  data.spec = cfg.dataset.spec(cfg.dataset.rare_weight);
  data.ontology = data.spec.ontology();
  const auto heldout = cfg.dataset.spec(cfg.dataset.heldout_rare_weight);
  MelFrontend frontend(cfg.frontend);
  for (std::string split : kSplits) {
    auto& out = split_of(data, split);
    const auto& spec = split == "train" ? data.spec : heldout;
    for (std::size_t i = 0; i < split_size(cfg.dataset, split); ++i) {
      const auto id = clip_name(split, i);
      auto rng = clip_rng(cfg.seed, id);
      auto clip = generate_synthetic_clip(spec, rng, id);
      if (sink) sink(split, id, clip.audio);
      out.clips.push_back({id, frontend(clip.audio), clip.events});
      out.roster.insert(out.roster.end(), clip.events.begin(), clip.events.end());
      out.seconds += clip.audio.seconds();
    }
  }
  return data;
}

json write_dataset(const fs::path& dir, const RunConfig& cfg, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw InputError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
  }
  for (std::string split : kSplits) fs::create_directories(dir / split);
  json clips = json::object();
  auto data = generate_dataset(cfg, [&](const std::string& split, const std::string& id, const Waveform& audio) {
    write_wav(dir / split / (id + ".wav"), audio);
    clips[split].push_back(id);
  });
  data.ontology.save(dir / "ontology.tsv");
  json manifest = {{"version", "dasm-dataset/1.0"}, {"seed", cfg.seed}, {"config", to_json(cfg)}, {"splits", json::object()}};
  for (std::string split : kSplits) {
    const auto& s = split_of(data, split);
    write_roster(dir / split / "roster.tsv", s.roster);
    manifest["splits"][split] = {{"clips", clips[split]}, {"clip_count", s.clips.size()}, {"seconds", s.seconds},
                                 {"events", s.roster.size()}};
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  return manifest;
}

Dataset load_dataset(const fs::path& dir, const FrontendConfig& frontend_cfg) {
  const auto manifest = read_json(dir / "manifest.json");
  const std::string version = manifest.value("version", "");
  if (version.rfind("dasm-dataset/1.", 0) != 0) throw CompatibilityError("unsupported dataset version '" + version + "'");
  RunConfig cfg;
  apply_json(cfg, manifest.at("config"));
  Dataset data;
  data.spec = cfg.dataset.spec(cfg.dataset.rare_weight);
  data.ontology = Ontology::load(dir / "ontology.tsv");
  MelFrontend frontend(frontend_cfg);
  for (std::string split : kSplits) {
    auto& out = split_of(data, split);
    out.roster = read_roster(dir / split / "roster.tsv");
    std::map<std::string, EventRoster> by_clip;
    for (const auto& [id, events] : group_by_clip(out.roster)) by_clip[id] = events;
    for (const auto& id : manifest.at("splits").at(split).at("clips")) {
      const auto name = id.get<std::string>();
      const auto audio = read_wav(dir / split / (name + ".wav"));
      out.seconds += audio.seconds();
      out.clips.push_back({name, frontend(audio), by_clip[name]});
    }
  }
  return data;
}

ProtocolClasses protocol_classes(const Dataset& data, const RunConfig& cfg) {
  ProtocolClasses pc;
  const auto augmented = label_augment(data.train.roster, data.ontology).roster;
  pc.split = split_common_rare(augmented, cfg.dataset.rare_threshold_seconds);
  for (const auto& c : data.ontology.classes()) {
    const bool rare = !pc.split.common.count(c);
    if (cfg.protocol == Protocol::Partial && rare) {
      pc.novel.push_back(c);
    } else {
      pc.base.push_back(c);
    }
  }
  return pc;
}

std::map<std::string, std::vector<MelSpectrogram>> query_segments(const Dataset& data) {
  std::map<std::string, std::vector<MelSpectrogram>> out;
  std::map<std::string, const ClipRecord*> clips;
  for (const auto& c : data.query.clips) clips[c.id] = &c;
  for (const auto& e : label_augment(data.query.roster, data.ontology).roster) {
    out[e.class_id].push_back(crop_segment(clips.at(e.clip_id)->mel, e.onset, e.offset));
  }
  return out;
}

QueryStore build_query_store(const Dataset& data, const ProtocolClasses& classes, const QueryConfig& cfg,
                             std::size_t dim, std::uint64_t seed) {
  StubEmbeddingProvider provider(dim, data.train.clips.at(0).mel.mel_bins, cfg.provider_seed);
  const auto segments = query_segments(data);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  QueryStore store;
  auto add = [&](const std::string& c, QueryRole role) {
    auto text = build_text_query(c, provider);
    text.role = role;
    store.add(text);
    auto it = segments.find(c);
    if (it == segments.end()) return;
    auto segs = cfg.audio_seconds > 0 ? subsample_segments(it->second, cfg.audio_seconds, rng) : it->second;
    if (segs.empty()) return;
    double seconds = 0;
    for (const auto& s : segs) seconds += s.frames() * s.hop_seconds;
    auto audio = build_audio_query(c, segs, provider,
                                   std::to_string(segs.size()) + " crops, " + std::to_string(seconds) + " s");
    audio.role = role;
    store.add(audio);
  };
  for (const auto& c : classes.base) add(c, QueryRole::Base);
  for (const auto& c : classes.novel) add(c, QueryRole::Novel);
  return store;
}

TrainingSet make_training_set(const SplitData& split, const Ontology& ontology, const std::vector<std::string>& classes) {
  TrainingSet set;
  set.classes = classes;
  const std::set<std::string> keep(classes.begin(), classes.end());
  const auto roster = reference_labels(split, ontology, keep);
  std::map<std::string, EventRoster> by_clip;
  for (const auto& [id, events] : group_by_clip(roster)) by_clip[id] = events;
  std::vector<std::string> ids;
  for (const auto& clip : split.clips) {
    const std::size_t frames = clip.mel.frames() / EncoderConfig::fine_time_pool;
    const double fps = 1.0 / (clip.mel.hop_seconds * EncoderConfig::fine_time_pool);
    set.examples.push_back({clip.id, clip.mel, frame_targets(by_clip[clip.id], classes, frames, fps)});
    ids.push_back(clip.id);
  }
  set.weights = resample_weights(roster, ids);
  return set;
}

std::vector<std::vector<AudioExemplar>> training_exemplars(const SplitData& split, const Ontology& ontology,
                                                          const std::vector<std::string>& classes,
                                                          const EmbeddingProvider& provider) {
  std::map<std::string, const ClipRecord*> clips;
  for (const auto& c : split.clips) clips[c.id] = &c;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = i;
  std::vector<std::vector<AudioExemplar>> out(classes.size());
  for (const auto& e : reference_labels(split, ontology, {classes.begin(), classes.end()})) {
    out[index.at(e.class_id)].push_back(embed_exemplar(crop_segment(clips.at(e.clip_id)->mel, e.onset, e.offset), provider));
  }
  return out;
}

EventRoster reference_labels(const SplitData& split, const Ontology& ontology, const std::set<std::string>& classes) {
  auto augmented = label_augment(split.roster, ontology);
  if (!augmented.dropped_clips.empty()) {
    throw ValidationError("clip '" + augmented.dropped_clips.front() + "' has classes outside the ontology");
  }
  EventRoster out;
  for (const auto& e : augmented.roster) {
    if (classes.count(e.class_id)) out.push_back(e);
  }
  return out;
}

std::vector<ClipScores> score_clips(const DasmModel& model, const std::vector<ClipRecord>& clips,
                                    const std::vector<QueryVector>& queries, std::size_t n_base, MaskStrategy strategy) {
  const auto q = query_matrix(queries);
  if (q.dim(1) != model.config().decoder.dim) {
    throw CompatibilityError("query dim " + std::to_string(q.dim(1)) + " does not match model dim " +
                             std::to_string(model.config().decoder.dim));
  }
  std::vector<ClipScores> out;
  out.reserve(clips.size());
  num::NoGradGuard guard;
  for (const auto& clip : clips) {
    auto pred = model.infer(clip.mel.values, q, n_base, strategy, clip.mel.hop_seconds);
    out.push_back({clip.id, pred.frame.detach(), pred.clip.detach(), pred.frames_per_second});
  }
  return out;
}

std::map<double, EventRoster> detect(const std::vector<ClipScores>& scores, const std::vector<std::string>& classes,
                                     const std::vector<double>& thresholds, std::size_t median_window) {
  std::map<double, EventRoster> out;
  for (double t : thresholds) out[t];
  for (const auto& s : scores) {
    const auto filtered = median_filter(s.frame, median_window);
    for (double t : thresholds) {
      auto events = extract_events(filtered, classes, t, 1.0 / s.frames_per_second, s.clip_id);
      auto& dst = out[t];
      dst.insert(dst.end(), events.begin(), events.end());
    }
  }
  return out;
}

PsdsReport evaluate_detections(const std::map<double, EventRoster>& detections, const EventRoster& references,
                               double seconds, const PsdsConfig& cfg, const std::set<std::string>& common,
                               const std::set<std::string>& rare) {
  PsdsReport r;
  r.all = psds(detections, references, seconds, cfg);
  r.psds = r.all.score;
  if (!common.empty()) r.psds_c = psds(detections, references, seconds, cfg, common).score;
  if (!rare.empty()) r.psds_r = psds(detections, references, seconds, cfg, rare).score;
  return r;
}

TrainedModel train_model(const Dataset& data, const RunConfig& cfg, const std::function<void(const StepRecord&)>& on_step) {
  cfg.validate();
  TrainedModel out;
  out.classes = protocol_classes(data, cfg);
  out.store = build_query_store(data, out.classes, cfg.query, cfg.model.decoder.dim, cfg.seed);
  auto set = make_training_set(data.train, data.ontology, out.classes.base);
  if (cfg.train.query_exemplars > 0) {
    StubEmbeddingProvider provider(cfg.model.decoder.dim, cfg.frontend.mel_bins, cfg.query.provider_seed);
    set.exemplars = training_exemplars(data.train, data.ontology, out.classes.base, provider);
  }
  auto model_cfg = cfg.model;
  out.model = std::make_unique<DasmModel>(model_cfg);
  if (cfg.train.align_steps > 0) {
    StubEmbeddingProvider provider(cfg.model.decoder.dim, cfg.frontend.mel_bins, cfg.query.provider_seed);
    std::vector<MelSpectrogram> mels;
    for (const auto& c : data.train.clips) mels.push_back(c.mel);
    align_encoder(*out.model, mels, provider, cfg.train.align_steps, cfg.train.batch_size, cfg.train.align_lr,
                  cfg.seed ^ 0xa11ce5ULL);
  }
  auto train_cfg = cfg.train;
  train_cfg.seed = cfg.seed ^ cfg.train.seed;
  Trainer trainer(*out.model, set, out.store, train_cfg, cfg.loss);
  out.log = trainer.run(on_step);
  return out;
}

PsdsReport evaluate_model(const DasmModel& model, const Dataset& data, const QueryStore& store,
                          const ProtocolClasses& classes, const RunConfig& cfg, MaskStrategy strategy, Modality m) {
  std::vector<QueryVector> novel;
  for (const auto& c : classes.novel) {
    const auto& e = store.at(c);
    novel.push_back(e.has(m) ? e.get(m) : e.get(m == Modality::Text ? Modality::Audio : Modality::Text));
  }
  const auto queries = assemble_inference_queries(store, m, novel);
  std::vector<std::string> ids;
  for (const auto& q : queries) ids.push_back(q.class_id);
  const auto scores = score_clips(model, data.eval.clips, queries, classes.base.size(), strategy);
  const auto detections = detect(scores, ids, cfg.eval.psds.thresholds, cfg.eval.median_window);
  const std::set<std::string> all(ids.begin(), ids.end());
  const auto refs = reference_labels(data.eval, data.ontology, all);
  return evaluate_detections(detections, refs, data.eval.seconds, cfg.eval.psds, classes.common(), classes.rare());
}

void save_model(const fs::path& path, const DasmModel& model, const json& extra) {
  json meta = {{"model", model_to_json(model.config())}};
  if (!extra.is_null()) meta["run"] = extra;
  num::write_checkpoint(path, num::capture(model.parameters(), meta.dump()));
}

LoadedModel load_model(const fs::path& path) {
  const auto ckpt = num::read_checkpoint(path);
  LoadedModel out;
  try {
    out.metadata = json::parse(ckpt.metadata);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": checkpoint metadata is not JSON");
  }
  out.model = std::make_unique<DasmModel>(model_from_json(out.metadata.at("model")));
  num::restore(ckpt, out.model->parameters());
  const auto bytes = num::encode_checkpoint(ckpt);
  Fnv1a h;
  h.update(bytes.data(), bytes.size());
  out.hash = hex64(h.digest());
  return out;
}

DASM_END_NAMESPACE
