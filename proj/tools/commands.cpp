// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <boost/program_options.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dasm/cli/pipeline.hpp"
#include "dasm/core/errors.hpp"
#include "dasm/eval/svg.hpp"
#include "dasm/frontend/audio.hpp"
#include "selftest.hpp"

namespace dasm::cli {

namespace po = boost::program_options;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDetectionsVersion = "dasm-detections/1.0";
constexpr const char* kReportVersion = "dasm-report/1.0";

struct Parsed {
  po::variables_map vm;
  bool help = false;
};

Parsed parse(const std::vector<std::string>& args, po::options_description& opts, const char* usage) {
  opts.add_options()("help,h", "show this help");
  Parsed p;
  po::store(po::command_line_parser(args).options(opts).run(), p.vm);
  po::notify(p.vm);
  if (p.vm.count("help")) {
    std::cout << usage << "\n" << opts << "\n";
    p.help = true;
  }
  return p;
}

void add_config_options(po::options_description& opts) {
  opts.add_options()("config", po::value<std::string>(), "JSON run configuration")(
      "set", po::value<std::vector<std::string>>()->composing(), "override, e.g. --set train.steps=500 (repeatable)")(
      "seed", po::value<std::uint64_t>(), "random seed (overrides the config)");
}

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os << text;
}

json dotted(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key.path=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json out = value;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) out = json{{*it, out}};
  return out;
}

/// Desk defaults, then the config file, then --set overrides, then --seed.
RunConfig resolve_config(const po::variables_map& vm) {
  RunConfig cfg = RunConfig::desk();
  if (vm.count("config")) apply_json(cfg, read_json_file(vm["config"].as<std::string>()));
  if (vm.count("set")) {
    for (const auto& s : vm["set"].as<std::vector<std::string>>()) apply_json(cfg, dotted(s));
  }
  if (vm.count("seed")) cfg.seed = vm["seed"].as<std::uint64_t>();
  cfg.validate();
  return cfg;
}

void prepare_output(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw InputError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
  }
  fs::create_directories(dir);
}

std::string require(const po::variables_map& vm, const char* key) {
  if (!vm.count(key)) throw ValidationError(std::string("missing required option --") + key);
  return vm[key].as<std::string>();
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("bad number '" + item + "' in list '" + s + "'");
    }
  }
  return out;
}

json classes_json(const ProtocolClasses& pc) {
  json seconds = json::object();
  for (const auto& [c, s] : pc.split.seconds) seconds[c] = s;
  return {{"base", pc.base},
          {"novel", pc.novel},
          {"common", std::vector<std::string>(pc.split.common.begin(), pc.split.common.end())},
          {"rare", std::vector<std::string>(pc.split.rare.begin(), pc.split.rare.end())},
          {"seconds", seconds}};
}

/// Pads with the clip's quietest frame so the length divides the patch size.
MelSpectrogram pad_frames(const MelSpectrogram& mel, std::size_t patch) {
  const std::size_t frames = mel.frames(), bins = mel.mel_bins;
  if (frames == 0) throw InputError("empty audio clip");
  const std::size_t padded = (frames + patch - 1) / patch * patch;
  if (padded == frames) return mel;
  const auto v = mel.values.data();
  const Real floor = *std::min_element(v.begin(), v.end());
  std::vector<Real> out(padded * bins, floor);
  std::copy(v.begin(), v.end(), out.begin());
  MelSpectrogram p = mel;
  p.values = num::Tensor::from({padded, bins}, std::move(out));
  return p;
}

json roc_json(const PsdsResult& r) {
  json rows = json::array();
  for (const auto& p : r.points) {
    rows.push_back({{"threshold", p.threshold}, {"mean_tpr", p.mean_tpr}, {"tpr", p.tpr}, {"efpr", p.efpr}});
  }
  return rows;
}

}  // namespace

// gen

int cmd_gen(const std::vector<std::string>& args) {
  po::options_description opts("gen options");
  add_config_options(opts);
  opts.add_options()("out", po::value<std::string>(), "dataset directory")("force", "overwrite a non-empty directory");
  auto p = parse(args, opts, "usage: dasm gen --out DIR [--config FILE] [--set k=v] [--seed N] [--force]");
  if (p.help) return 0;
  const fs::path out = require(p.vm, "out");
  const auto cfg = resolve_config(p.vm);
  const auto manifest = write_dataset(out, cfg, p.vm.count("force") > 0);
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");
  for (const auto& [split, info] : manifest.at("splits").items()) {
    std::printf("%-6s %5zu clips  %8.1f s  %6zu events\n", split.c_str(), info.at("clip_count").get<std::size_t>(),
                info.at("seconds").get<double>(), info.at("events").get<std::size_t>());
  }
  return 0;
}

// train

int cmd_train(const std::vector<std::string>& args) {
  po::options_description opts("train options");
  add_config_options(opts);
  opts.add_options()("data", po::value<std::string>(), "dataset directory written by 'dasm gen'")(
      "out", po::value<std::string>(), "run directory")("partial", "rare classes are held out as novel (default)")(
      "full", "all classes are base classes")(
      "ablation", po::value<std::vector<std::string>>()->composing(),
      "no-event-decoder | no-context | no-clip-loss | no-clip-prior (repeatable)")("force", "overwrite a non-empty run directory");
  auto p = parse(args, opts,
                 "usage: dasm train --data DIR --out DIR [--partial|--full] [--ablation NAME]... [--config FILE]");
  if (p.help) return 0;
  if (p.vm.count("partial") && p.vm.count("full")) throw ValidationError("--partial and --full are exclusive");
  const fs::path data_dir = require(p.vm, "data");
  const fs::path out = require(p.vm, "out");
  auto cfg = resolve_config(p.vm);
  if (p.vm.count("full")) cfg.protocol = Protocol::Full;
  if (p.vm.count("partial")) cfg.protocol = Protocol::Partial;
  if (p.vm.count("ablation")) {
    for (const auto& a : p.vm["ablation"].as<std::vector<std::string>>()) {
      if (a == "no-event-decoder") cfg.model.ablation.event_decoder = false;
      else if (a == "no-context") cfg.model.ablation.context = false;
      else if (a == "no-clip-loss") cfg.loss.alpha = 0.0;
      else if (a == "no-clip-prior") cfg.model.ablation.clip_prior = false;
      else throw ValidationError("unknown ablation '" + a + "'");
    }
  }
  cfg.output_dir = out.string();
  cfg.validate();
  if (!fs::exists(data_dir / "manifest.json")) throw InputError("no dataset at " + data_dir.string());
  prepare_output(out, p.vm.count("force") > 0);
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");

  const auto data = load_dataset(data_dir, cfg.frontend);
  std::ofstream metrics(out / "metrics.jsonl");
  auto trained = train_model(data, cfg, [&](const StepRecord& r) {
    metrics << json{{"step", r.step}, {"loss", r.loss}, {"frame_loss", r.frame_loss}, {"clip_loss", r.clip_loss},
                    {"backbone_frozen", r.backbone_frozen}}
                   .dump()
            << "\n";
    if (r.step % 100 == 0 || r.step + 1 == cfg.train.steps) {
      std::printf("step %5zu  loss %.5f  frame %.5f  clip %.5f%s\n", r.step, r.loss, r.frame_loss, r.clip_loss,
                  r.backbone_frozen ? "  (backbone frozen)" : "");
      std::fflush(stdout);
    }
  });
  const auto classes = classes_json(trained.classes);
  write_text(out / "classes.json", classes.dump(2) + "\n");
  trained.store.save(out / "queries.tsv");
  const std::set<std::string> base(trained.classes.base.begin(), trained.classes.base.end());
  write_roster(out / "train_roster.tsv", reference_labels(data.train, data.ontology, base));
  save_model(out / "model.ckpt", *trained.model,
             {{"classes", classes}, {"protocol", to_string(cfg.protocol)}, {"config", to_json(cfg)}});
  std::printf("wrote %s\n", (out / "model.ckpt").string().c_str());
  return 0;
}

// infer

int cmd_infer(const std::vector<std::string>& args) {
  po::options_description opts("infer options");
  opts.add_options()("checkpoint", po::value<std::string>(), "model checkpoint")(
      "queries", po::value<std::string>(), "query store (base and novel queries)")(
      "audio", po::value<std::string>(), "directory of 16 kHz mono WAV files")(
      "out", po::value<std::string>(), "detections JSON to write")(
      "mask-strategy", po::value<std::string>()->default_value("base-visible"), "base-visible | base-invisible | train-no-mask")(
      "modality", po::value<std::string>()->default_value("audio"), "query modality: audio | text")(
      "thresholds", po::value<std::string>()->default_value("50"),
      "operating points: a count N (uniform in [0.01, 0.99]) or a comma list")(
      "median-window", po::value<std::size_t>()->default_value(5), "median filter length in frames (odd)")(
      "no-novel", "score base queries only")("dump-scores", po::value<std::string>(), "directory for per-clip score matrices");
  auto p = parse(args, opts, "usage: dasm infer --checkpoint FILE --queries FILE --audio DIR --out FILE [options]");
  if (p.help) return 0;
  const auto loaded = load_model(require(p.vm, "checkpoint"));
  const auto store = QueryStore::load(require(p.vm, "queries"));
  const fs::path audio_dir = require(p.vm, "audio");
  const fs::path out = require(p.vm, "out");
  const auto strategy = parse_mask_strategy(p.vm["mask-strategy"].as<std::string>());
  const auto modality = parse_modality(p.vm["modality"].as<std::string>());
  const auto median_window = p.vm["median-window"].as<std::size_t>();
  if (median_window % 2 == 0) throw ValidationError("--median-window must be odd");

  const auto spec = p.vm["thresholds"].as<std::string>();
  std::vector<double> thresholds;
  if (spec.find(',') == std::string::npos && spec.find('.') == std::string::npos) {
    thresholds = PsdsConfig::default_thresholds(static_cast<std::size_t>(std::stoul(spec)));
  } else {
    thresholds = parse_list(spec);
  }
  for (double t : thresholds) {
    if (!(t > 0 && t < 1)) throw ValidationError("thresholds must lie in (0, 1)");
  }

  if (store.dim() != loaded.model->config().decoder.dim) {
    throw CompatibilityError("query store dim " + std::to_string(store.dim()) + " does not match model dim " +
                             std::to_string(loaded.model->config().decoder.dim));
  }
  std::vector<QueryVector> novel;
  if (!p.vm.count("no-novel")) {
    for (const auto& id : store.class_ids(QueryRole::Novel)) {
      const auto& e = store.at(id);
      novel.push_back(e.has(modality) ? e.get(modality) : e.get(e.text ? Modality::Text : Modality::Audio));
    }
  }
  const auto queries = assemble_inference_queries(store, modality, novel);
  const auto n_base = store.class_ids(QueryRole::Base).size();
  std::vector<std::string> classes;
  for (const auto& q : queries) classes.push_back(q.class_id);

  std::vector<fs::path> wavs;
  if (!fs::is_directory(audio_dir)) throw InputError("no audio directory " + audio_dir.string());
  for (const auto& e : fs::directory_iterator(audio_dir)) {
    if (e.path().extension() == ".wav") wavs.push_back(e.path());
  }
  std::sort(wavs.begin(), wavs.end());
  if (wavs.empty()) throw InputError("no .wav files in " + audio_dir.string());

  RunConfig run = RunConfig::desk();
  if (loaded.metadata.contains("run") && loaded.metadata["run"].contains("config")) {
    apply_json(run, loaded.metadata["run"]["config"]);
  }
  const std::size_t patch = loaded.model->config().encoder.patch_t;
  std::vector<ClipRecord> clips;
  std::map<std::string, double> seconds;
  for (const auto& w : wavs) {
    const auto audio = read_wav(w);
    if (audio.sample_rate != run.frontend.sample_rate) {
      throw InputError(w.string() + ": sample rate " + std::to_string(audio.sample_rate) + " Hz, expected " +
                       std::to_string(run.frontend.sample_rate));
    }
    const auto id = w.stem().string();
    seconds[id] = audio.seconds();
    clips.push_back({id, pad_frames(log_mel(audio, run.frontend), patch), {}});
  }
  const auto scores = score_clips(*loaded.model, clips, queries, n_base, strategy);
  const auto detections = detect(scores, classes, thresholds, median_window);

  json doc = {{"version", kDetectionsVersion},
              {"mask_strategy", to_string(strategy)},
              {"checkpoint_hash", loaded.hash},
              {"modality", to_string(modality)},
              {"classes", classes},
              {"base_count", n_base},
              {"thresholds", thresholds},
              {"median_window", median_window},
              {"clips", json::array()}};
  std::map<std::string, json> per_clip;
  for (const auto& c : clips) per_clip[c.id] = json::array();
  for (const auto& [t, roster] : detections) {
    for (auto e : roster) {
      if (e.onset >= seconds[e.clip_id]) continue;
      e.offset = std::min(e.offset, seconds[e.clip_id]);
      per_clip[e.clip_id].push_back(
          {{"class_id", e.class_id}, {"onset", e.onset}, {"offset", e.offset}, {"score", e.score.value_or(0.0)}, {"threshold", t}});
    }
  }
  for (const auto& c : clips) {
    doc["clips"].push_back({{"clip_id", c.id},
                            {"seconds", seconds[c.id]},
                            {"mask_strategy", to_string(strategy)},
                            {"checkpoint_hash", loaded.hash},
                            {"events", per_clip[c.id]}});
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(out, doc.dump(1) + "\n");

  if (p.vm.count("dump-scores")) {
    const fs::path dir = p.vm["dump-scores"].as<std::string>();
    fs::create_directories(dir);
    for (const auto& s : scores) {
      json m = {{"clip_id", s.clip_id}, {"classes", classes}, {"frames_per_second", s.frames_per_second},
                {"clip", std::vector<double>(s.clip.data().begin(), s.clip.data().end())}, {"frame", json::array()}};
      for (std::size_t t = 0; t < s.frame.dim(0); ++t) {
        std::vector<double> row(s.frame.data().begin() + t * s.frame.dim(1), s.frame.data().begin() + (t + 1) * s.frame.dim(1));
        m["frame"].push_back(row);
      }
      write_text(dir / (s.clip_id + ".json"), m.dump() + "\n");
    }
  }
  std::printf("%zu clips, %zu classes (%zu novel), %zu thresholds -> %s\n", clips.size(), classes.size(),
              classes.size() - n_base, thresholds.size(), out.string().c_str());
  return 0;
}

// eval

namespace {

struct DetectionFile {
  std::map<double, EventRoster> rosters;
  std::vector<std::string> classes;
  double seconds = 0;
  json header;
};

DetectionFile read_detections(const fs::path& path) {
  const auto doc = read_json_file(path);
  const std::string version = doc.value("version", "");
  if (version.rfind("dasm-detections/1.", 0) != 0) {
    throw CompatibilityError(path.string() + ": unsupported detections version '" + version + "'");
  }
  DetectionFile f;
  f.classes = doc.at("classes").get<std::vector<std::string>>();
  for (double t : doc.at("thresholds").get<std::vector<double>>()) f.rosters[t];
  for (const auto& clip : doc.at("clips")) {
    const auto id = clip.at("clip_id").get<std::string>();
    f.seconds += clip.at("seconds").get<double>();
    for (const auto& e : clip.at("events")) {
      const double t = e.at("threshold").get<double>();
      auto it = f.rosters.find(t);
      if (it == f.rosters.end()) throw ValidationError(path.string() + ": event threshold not in the threshold list");
      it->second.push_back(Event{id, e.at("class_id").get<std::string>(), e.at("onset").get<double>(),
                                 e.at("offset").get<double>(), e.at("score").get<double>()});
    }
  }
  f.header = doc;
  f.header.erase("clips");
  return f;
}

}  // namespace

int cmd_eval(const std::vector<std::string>& args) {
  po::options_description opts("eval options");
  opts.add_options()("detections", po::value<std::string>(), "detections JSON from 'dasm infer'")(
      "references", po::value<std::string>(), "reference roster (TSV)")(
      "ontology", po::value<std::string>(), "augment references with ancestor labels from this ontology")(
      "classes", po::value<std::string>(), "classes.json of a run (common/rare lists)")(
      "mode", po::value<std::string>()->default_value("as"), "as (no class-variance penalty) | desed")(
      "subset", po::value<std::string>()->default_value("all"), "all | common | rare: subset for the headline score")(
      "duration", po::value<double>(), "total evaluated audio in seconds (default: from the detections file)")(
      "out", po::value<std::string>(), "report JSON to write")("svg", po::value<std::string>(), "directory for SVG plots");
  auto p = parse(args, opts, "usage: dasm eval --detections FILE --references FILE [--ontology FILE] [options]");
  if (p.help) return 0;
  const auto det = read_detections(require(p.vm, "detections"));
  auto refs = read_roster(require(p.vm, "references"));
  if (p.vm.count("ontology")) {
    auto aug = label_augment(refs, Ontology::load(p.vm["ontology"].as<std::string>()));
    if (!aug.dropped_clips.empty()) {
      throw ValidationError("reference clip '" + aug.dropped_clips.front() + "' has classes outside the ontology");
    }
    refs = aug.roster;
  }
  const std::string mode = p.vm["mode"].as<std::string>();
  PsdsConfig cfg = mode == "as" ? PsdsConfig::audioset() : mode == "desed" ? PsdsConfig::desed()
                                                                           : throw ValidationError("--mode must be as or desed");
  const std::string subset = p.vm["subset"].as<std::string>();
  if (subset != "all" && subset != "common" && subset != "rare") throw ValidationError("--subset must be all, common or rare");

  const std::set<std::string> query_classes(det.classes.begin(), det.classes.end());
  const auto ref_classes_v = classes_in(refs);
  const std::set<std::string> ref_classes(ref_classes_v.begin(), ref_classes_v.end());
  std::vector<std::string> offenders;
  for (const auto& c : ref_classes) {
    if (!query_classes.count(c)) offenders.push_back(c);
  }
  if (!offenders.empty()) {
    std::string msg = "reference classes without a query in the detections file:";
    for (const auto& o : offenders) msg += " " + o + ";";
    throw ValidationError(msg);
  }

  std::set<std::string> common, rare;
  if (p.vm.count("classes")) {
    const auto cj = read_json_file(p.vm["classes"].as<std::string>());
    for (const auto& c : cj.at("common")) {
      if (query_classes.count(c.get<std::string>())) common.insert(c.get<std::string>());
    }
    for (const auto& c : cj.at("rare")) {
      if (query_classes.count(c.get<std::string>())) rare.insert(c.get<std::string>());
    }
  } else if (subset != "all") {
    throw ValidationError("--subset " + subset + " needs --classes");
  }
  const double seconds = p.vm.count("duration") ? p.vm["duration"].as<double>() : det.seconds;
  const auto report = evaluate_detections(det.rosters, refs, seconds, cfg, common, rare);
  const double headline = subset == "all" ? report.psds : subset == "common" ? report.psds_c : report.psds_r;

  json doc = {{"version", kReportVersion},
              {"mode", mode},
              {"subset", subset},
              {"score", headline},
              {"psds", report.psds},
              {"psds_c", common.empty() ? json(nullptr) : json(report.psds_c)},
              {"psds_r", rare.empty() ? json(nullptr) : json(report.psds_r)},
              {"parameters", {{"dtc", cfg.dtc}, {"gtc", cfg.gtc}, {"cttc", cfg.cttc}, {"alpha_ct", cfg.alpha_ct},
                              {"alpha_st", cfg.alpha_st}, {"e_max", cfg.e_max}}},
              {"dataset_seconds", seconds},
              {"detections", det.header},
              {"roc", roc_json(report.all)}};
  std::printf("PSDS %.4f", report.psds);
  if (!common.empty()) std::printf("  PSDS_c %.4f", report.psds_c);
  if (!rare.empty()) std::printf("  PSDS_r %.4f", report.psds_r);
  std::printf("\n");
  if (p.vm.count("out")) {
    const fs::path out = p.vm["out"].as<std::string>();
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out, doc.dump(2) + "\n");
    std::ofstream roc(fs::path(out).replace_extension(".roc.jsonl"));
    for (const auto& row : doc["roc"]) roc << row.dump() << "\n";
  }
  if (p.vm.count("svg")) {
    const fs::path dir = p.vm["svg"].as<std::string>();
    fs::create_directories(dir);
    write_text(dir / "roc.svg", roc_svg(report.all, cfg.e_max, "PSD-ROC (" + mode + ")"));
    auto mid = det.rosters.lower_bound(0.5);
    if (mid == det.rosters.end()) mid = std::prev(det.rosters.end());
    std::size_t drawn = 0;
    for (const auto& [id, events] : group_by_clip(refs)) {
      if (drawn++ == 5) break;
      double end = 0;
      for (const auto& e : events) end = std::max(end, e.offset);
      EventRoster dets;
      for (const auto& e : mid->second) {
        if (e.clip_id == id) dets.push_back(e), end = std::max(end, e.offset);
      }
      write_text(dir / ("timeline_" + id + ".svg"), timeline_svg(id, end, events, dets));
    }
  }
  return 0;
}

// query-sweep

int cmd_query_sweep(const std::vector<std::string>& args) {
  po::options_description opts("query-sweep options");
  opts.add_options()("run", po::value<std::string>(), "run directory from 'dasm train' (checkpoint, queries, config)")(
      "data", po::value<std::string>(), "dataset directory (query and eval splits)")(
      "durations", po::value<std::string>(), "comma list of total audio-query seconds per novel class")(
      "seed", po::value<std::uint64_t>()->default_value(0), "sub-sampling seed")(
      "mask-strategy", po::value<std::string>()->default_value("base-visible"), "mask strategy")(
      "out", po::value<std::string>(), "output directory");
  auto p = parse(args, opts, "usage: dasm query-sweep --run DIR --data DIR --durations 1,2,5 --out DIR");
  if (p.help) return 0;
  const fs::path run = require(p.vm, "run");
  const fs::path out = require(p.vm, "out");
  auto durations = parse_list(require(p.vm, "durations"));
  RunConfig cfg = RunConfig::desk();
  apply_json(cfg, read_json_file(run / "config.json"));
  const auto loaded = load_model(run / "model.ckpt");
  const auto store = QueryStore::load(run / "queries.tsv");
  const auto data = load_dataset(require(p.vm, "data"), cfg.frontend);
  const auto strategy = parse_mask_strategy(p.vm["mask-strategy"].as<std::string>());
  const auto seed = p.vm["seed"].as<std::uint64_t>();

  ProtocolClasses classes;
  classes.base = store.class_ids(QueryRole::Base);
  classes.novel = store.class_ids(QueryRole::Novel);
  if (classes.novel.empty()) throw ValidationError("the run has no novel classes to sweep");
  const auto segments = query_segments(data);
  StubEmbeddingProvider provider(store.dim(), cfg.frontend.mel_bins, cfg.query.provider_seed);

  double available = 0;
  for (const auto& c : classes.novel) {
    double s = 0;
    auto it = segments.find(c);
    if (it == segments.end()) throw InputError("novel class '" + c + "' has no event in the query split");
    for (const auto& seg : it->second) s += seg.frames() * seg.hop_seconds;
    available = available == 0 ? s : std::min(available, s);
  }
  fs::create_directories(out);
  std::ofstream table(out / "sweep.tsv");
  table << "# dasm-sweep/1.0\nrequested_seconds\tused_seconds\tpsds_r\n";
  json rows = json::array();
  std::vector<double> xs, ys;
  for (double d : durations) {
    double used = d;
    if (!(d > 0) || d > available) {
      used = available;
      std::fprintf(stderr, "warning: %.3g s exceeds the %.3g s of query audio available for every novel class; clamped\n",
                   d, available);
    }
    std::mt19937_64 rng(seed);
    QueryStore swept;
    for (const auto& c : classes.base) {
      const auto& e = store.at(c);
      if (e.text) swept.add(*e.text);
      if (e.audio) swept.add(*e.audio);
    }
    for (const auto& c : classes.novel) {
      const auto segs = subsample_segments(segments.at(c), used, rng);
      auto q = build_audio_query(c, segs, provider, "sweep " + std::to_string(used) + " s");
      q.role = QueryRole::Novel;
      swept.add(q);
    }
    const auto report = evaluate_model(*loaded.model, data, swept, classes, cfg, strategy, Modality::Audio);
    table << d << '\t' << used << '\t' << report.psds_r << '\n';
    rows.push_back({{"requested_seconds", d}, {"used_seconds", used}, {"psds_r", report.psds_r}});
    xs.push_back(used);
    ys.push_back(report.psds_r);
    std::printf("%8.2f s  PSDS_r %.4f\n", used, report.psds_r);
  }
  write_text(out / "sweep.json", json{{"version", "dasm-sweep/1.0"}, {"seed", seed}, {"rows", rows}}.dump(2) + "\n");
  write_text(out / "sweep.svg", line_chart_svg(xs, ys, "audio query seconds per class", "PSDS_r", "Query duration sweep"));
  return 0;
}

// selftest

int cmd_selftest(const std::vector<std::string>& args) {
  po::options_description opts("selftest options");
  opts.add_options()("seed", po::value<std::uint64_t>()->default_value(1), "seed for randomized checks");
  auto p = parse(args, opts, "usage: dasm selftest [--seed N]");
  if (p.help) return 0;
  const auto results = run_selftest(p.vm["seed"].as<std::uint64_t>());
  bool ok = true;
  for (const auto& r : results) {
    std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace dasm::cli
