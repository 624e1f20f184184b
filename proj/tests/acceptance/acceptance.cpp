// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate: one PASS/FAIL line per criterion. Usage:
//   dasm_acceptance [criterion ...]     (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dasm/cli/pipeline.hpp"
#include "dasm/numerics/checkpoint.hpp"
#include "dasm/numerics/ops.hpp"
#include "gradient_suite.hpp"
#include "psds_oracle.hpp"

namespace fs = std::filesystem;
using namespace dasm;
using num::Tensor;

namespace {

// Tolerances and budgets.
constexpr double kOpGradTol = 1e-4;
constexpr double kModelGradTol = 1e-3;
constexpr double kGradSeconds = 120;
constexpr double kBoundSlack = 1e-7;
constexpr double kInvarianceTol = 1e-6;
constexpr double kMaskRatio = 1.5;
constexpr double kMaskSeconds = 30 * 60;
constexpr double kOverfitF1 = 0.9;
constexpr std::size_t kOverfitSteps = 1000;
constexpr double kOverfitSeconds = 10 * 60;
constexpr double kOracleTol = 1e-9;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelConfig small_model(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.set_width(32, 4, 2);
  cfg.encoder.mel_bins = 32;
  cfg.encoder.cnn_blocks = 2;
  cfg.encoder.cnn_channels = 4;
  cfg.seed = seed;
  return cfg;
}

// 1. Gradient integrity.

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t failed = 0, total = 0;
  double worst_op = 0, worst_model = 0;
  std::string first_failure;
  for (const auto& c : dasm::testing::operation_gradient_cases()) {
    ++total;
    worst_op = std::max(worst_op, c.max_relative_error);
    if (!(c.max_relative_error < kOpGradTol)) failed++, first_failure = first_failure.empty() ? c.name : first_failure;
  }
  for (const auto& c : dasm::testing::model_gradient_cases()) {
    ++total;
    worst_model = std::max(worst_model, c.max_relative_error);
    if (!(c.max_relative_error < kModelGradTol)) failed++, first_failure = first_failure.empty() ? c.name : first_failure;
  }
  const double secs = elapsed(t0);
  Outcome o;
  o.passed = failed == 0 && secs < kGradSeconds;
  o.detail = std::to_string(total) + " checks, worst op rel.err " + fmt("%.2e", worst_op) + ", worst model " +
             fmt("%.2e", worst_model) + fmt(", %.1f s", secs);
  if (failed) o.detail += ", " + std::to_string(failed) + " failed (first: " + first_failure + ")";
  return o;
}

// 2. Frame scores never exceed the clip score; the no-clip-prior switch breaks it.

double bound_excess(const ModelConfig& cfg, std::mt19937_64& rng) {
  DasmModel model(cfg);
  const std::size_t frames = 8 * (2 + rng() % 6), n = 1 + rng() % 6;
  const auto pred = model.forward(Tensor::randn({frames, 32}, rng, 2), num::l2_normalize_rows(Tensor::randn({n, 32}, rng)));
  double worst = -1;
  for (std::size_t t = 0; t < pred.frame.dim(0); ++t) {
    for (std::size_t c = 0; c < n; ++c) worst = std::max(worst, double(pred.frame.at(t, c)) - pred.clip[c]);
  }
  return worst;
}

Outcome factorization() {
  std::mt19937_64 rng(2);
  double worst = -1;
  std::size_t violations = 0;
  for (int i = 0; i < 100; ++i) {
    const double e = bound_excess(small_model(1000 + i), rng);
    worst = std::max(worst, e);
    violations += e > kBoundSlack;
  }
  std::size_t ablated = 0;
  for (int i = 0; i < 100; ++i) {
    auto cfg = small_model(2000 + i);
    cfg.ablation.clip_prior = false;
    ablated += bound_excess(cfg, rng) > kBoundSlack;
  }
  return {violations == 0 && ablated > 0,
          std::to_string(violations) + "/100 violations (max frame - clip " + fmt("%.3g", worst) +
              "); without the clip prior " + std::to_string(ablated) + "/100 passes violate"};
}

// 3. Appending novel queries leaves base scores unchanged.

Outcome base_invariance() {
  std::mt19937_64 rng(3);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    DasmModel model(small_model(3000 + i));
    const std::size_t frames = 8 * (2 + rng() % 6), n_base = 1 + rng() % 6, n_novel = 1 + rng() % 5;
    const Tensor mel = Tensor::randn({frames, 32}, rng, 2);
    const Tensor base = num::l2_normalize_rows(Tensor::randn({n_base, 32}, rng));
    const Tensor all = num::concat_rows({base, num::l2_normalize_rows(Tensor::randn({n_novel, 32}, rng))});
    for (auto s : {MaskStrategy::BaseVisibleToNovel, MaskStrategy::BaseInvisibleToNovel}) {
      const auto ref = model.infer(mel, base, n_base, s);
      const auto out = model.infer(mel, all, n_base, s);
      for (std::size_t c = 0; c < n_base; ++c) {
        worst = std::max(worst, std::abs(double(out.clip[c]) - ref.clip[c]));
        for (std::size_t t = 0; t < ref.frame.dim(0); ++t) {
          worst = std::max(worst, std::abs(double(out.frame.at(t, c)) - ref.frame.at(t, c)));
        }
      }
    }
  }
  return {worst <= kInvarianceTol, "max base score change " + fmt("%.3g", worst) + " over 20 models x 2 strategies"};
}

// 4. Masking direction on the partial protocol.

RunConfig masking_config() {
  RunConfig cfg = RunConfig::desk();
  cfg.seed = 0;
  cfg.protocol = Protocol::Partial;
  cfg.query.eval_modality = Modality::Audio;
  cfg.validate();
  return cfg;
}

Outcome masking_direction() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = masking_config();
  const auto data = generate_dataset(cfg);
  auto trained = train_model(data, cfg);
  const auto m = cfg.query.eval_modality;
  const auto visible = evaluate_model(*trained.model, data, trained.store, trained.classes, cfg,
                                      MaskStrategy::BaseVisibleToNovel, m);
  const auto invisible = evaluate_model(*trained.model, data, trained.store, trained.classes, cfg,
                                        MaskStrategy::BaseInvisibleToNovel, m);
  const double secs = elapsed(t0);
  const bool shape = trained.classes.base.size() >= 12 && trained.classes.novel.size() >= 3 && cfg.train.steps >= 2000;
  Outcome o;
  o.passed = shape && secs < kMaskSeconds && visible.psds_r > 0 && visible.psds_r >= kMaskRatio * invisible.psds_r;
  o.detail = std::to_string(trained.classes.base.size()) + " base / " + std::to_string(trained.classes.novel.size()) +
             " novel, " + std::to_string(cfg.train.steps) + " steps: PSDS_r visible " + fmt("%.4f", visible.psds_r) +
             " vs invisible " + fmt("%.4f", invisible.psds_r) + " (PSDS_c " + fmt("%.4f", visible.psds_c) + fmt("), %.0f s", secs);
  return o;
}

// 5. Decoder ablations on the closed-set protocol.

RunConfig ablation_config() {
  RunConfig cfg = RunConfig::desk();
  cfg.seed = 0;
  cfg.protocol = Protocol::Full;
  cfg.query.eval_modality = Modality::Text;
  cfg.validate();
  return cfg;
}

Outcome decoder_ablations() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto base_cfg = ablation_config();
  const auto data = generate_dataset(base_cfg);
  struct Variant {
    const char* name;
    std::function<void(RunConfig&)> apply;
  };
  const std::vector<Variant> variants{
      {"full", [](RunConfig&) {}},
      {"no-event-decoder", [](RunConfig& c) { c.model.ablation.event_decoder = false; }},
      {"no-context", [](RunConfig& c) { c.model.ablation.context = false; }},
      {"no-clip-loss", [](RunConfig& c) { c.loss.alpha = 0.0; }},
      {"no-clip-prior", [](RunConfig& c) { c.model.ablation.clip_prior = false; }},
  };
  std::vector<double> scores;
  std::string detail;
  for (const auto& v : variants) {
    auto cfg = base_cfg;
    v.apply(cfg);
    auto trained = train_model(data, cfg);
    const auto r = evaluate_model(*trained.model, data, trained.store, trained.classes, cfg,
                                  MaskStrategy::BaseVisibleToNovel, cfg.query.eval_modality);
    scores.push_back(r.psds);
    detail += std::string(detail.empty() ? "" : ", ") + v.name + " " + fmt("%.4f", r.psds);
  }
  const bool ordered = std::all_of(scores.begin() + 1, scores.end(), [&](double s) { return scores[0] > s; });
  return {ordered, "PSDS " + detail + fmt(" (%.0f s)", elapsed(t0))};
}

// 6. Overfitting a fixed 32-clip set.

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = RunConfig::desk();
  cfg.seed = 6;
  cfg.protocol = Protocol::Full;
  cfg.dataset.train_clips = 32;
  cfg.dataset.eval_clips = 1;
  cfg.dataset.query_clips = 40;
  cfg.dataset.rare_weight = 1.0;
  cfg.validate();
  const auto data = generate_dataset(cfg);
  const auto classes = protocol_classes(data, cfg);
  const auto store = build_query_store(data, classes, cfg.query, cfg.model.decoder.dim, cfg.seed);
  auto set = make_training_set(data.train, data.ontology, classes.base);
  DasmModel model(cfg.model);
  TrainConfig tc;
  tc.steps = kOverfitSteps;
  tc.batch_size = 8;
  tc.freeze_steps = 0;
  tc.resample = false;
  tc.query_mode = QueryMode::Text;
  tc.lr_backbone = 1e-3;
  tc.lr_rest = 2e-3;
  tc.seed = cfg.seed;
  Trainer trainer(model, set, store, tc, cfg.loss);
  const Tensor queries = [&] {
    std::vector<QueryVector> q;
    for (const auto& c : set.classes) q.push_back(store.at(c).get(Modality::Text));
    return query_matrix(q);
  }();
  double best = 0;
  std::size_t reached = 0;
  while (trainer.steps_done() < kOverfitSteps) {
    for (int i = 0; i < 100; ++i) trainer.step();
    std::vector<Tensor> preds, targets;
    {
      num::NoGradGuard guard;
      for (const auto& ex : set.examples) {
        preds.push_back(model.forward(ex.mel.values, queries, nullptr, ex.mel.hop_seconds).frame);
        targets.push_back(ex.targets);
      }
    }
    best = std::max(best, frame_macro_f1(preds, targets, 0.5));
    if (best > kOverfitF1) {
      reached = trainer.steps_done();
      break;
    }
  }
  const double secs = elapsed(t0);
  return {reached > 0 && secs < kOverfitSeconds,
          "macro F1 " + fmt("%.3f", best) + (reached ? " at step " + std::to_string(reached) : " (not reached)") +
              ", " + std::to_string(set.classes.size()) + " classes" +
              fmt(", %.0f s", secs)};
}

// 7. PSDS engine against the brute-force oracle.

Outcome psds_oracle() {
  std::mt19937_64 rng(7);
  double worst = 0;
  std::size_t nonzero = 0;
  for (int i = 0; i < 25; ++i) {
    const auto c = dasm::testing::random_psds_case(rng, 5, 3, 4);
    PsdsConfig cfg = PsdsConfig::audioset();
    cfg.thresholds.clear();
    for (const auto& [t, r] : c.detections) cfg.thresholds.push_back(t);
    // Small cases have few seconds of audio, so a wide eFPR axis keeps scores off zero.
    for (double alpha : {0.0, 1.0}) {
      for (double e_max : {100.0, 1000.0}) {
        cfg.alpha_st = alpha;
        cfg.e_max = e_max;
        const double a = psds(c.detections, c.references, c.dataset_seconds, cfg).score;
        const double b = dasm::testing::brute_force_psds(c.detections, c.references, c.dataset_seconds, cfg.dtc,
                                                         cfg.gtc, alpha, e_max);
        worst = std::max(worst, std::abs(a - b));
        nonzero += b > 0;
      }
    }
  }
  const EventRoster refs{{"a", "x", 1.0, 2.0, std::nullopt}, {"b", "y", 3.0, 7.5, std::nullopt}};
  PsdsConfig cfg = PsdsConfig::audioset();
  std::map<double, EventRoster> perfect, empty;
  for (double t : cfg.thresholds) perfect[t] = refs, empty[t] = {};
  const double p = psds(perfect, refs, 20, cfg).score, e = psds(empty, refs, 20, cfg).score;
  return {worst <= kOracleTol && p == 1.0 && e == 0.0,
          "max |engine - oracle| " + fmt("%.2e", worst) + " over 25 cases x 4 settings (" + std::to_string(nonzero) +
              " non-zero); perfect " + fmt("%.17g", p) + ", empty " +
              fmt("%.17g", e)};
}

// 8. Label augmentation properties and the common/rare boundary.

Outcome label_augmentation() {
  std::mt19937_64 rng(8);
  std::size_t closure = 0, idem = 0, hier = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Ontology onto;
    const std::size_t n = 3 + rng() % 10;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) {
      names.push_back("c" + std::to_string(i));
      std::vector<std::string> parents;
      for (std::size_t k = 0, np = i == 0 ? 0 : rng() % 3; k < np; ++k) {
        const auto p = names[rng() % i];
        if (std::find(parents.begin(), parents.end(), p) == parents.end()) parents.push_back(p);
      }
      onto.add(names.back(), parents);
    }
    onto.validate();
    EventRoster roster;
    std::uniform_real_distribution<double> on(0, 9);
    for (std::size_t e = 0, ne = 1 + rng() % 12; e < ne; ++e) {
      const double t = std::round(on(rng) * 100) / 100;
      roster.push_back({"clip" + std::to_string(rng() % 3), names[rng() % n], t, t + 0.05 + (rng() % 100) / 100.0, std::nullopt});
    }
    const auto once = label_augment(roster, onto).roster;
    idem += label_augment(once, onto).roster != once;
    for (const auto& e : roster) {
      for (const auto& a : onto.ancestors(e.class_id)) {
        const bool covered = std::any_of(once.begin(), once.end(), [&](const Event& x) {
          return x.clip_id == e.clip_id && x.class_id == a && x.onset <= e.onset && x.offset >= e.offset;
        });
        closure += !covered;
      }
    }
    for (const auto& [clip, events] : group_by_clip(once)) {
      const auto y = frame_targets(events, names, 500, 50.0);
      for (std::size_t c = 0; c < n; ++c) {
        for (const auto& a : onto.ancestors(names[c])) {
          const auto ai = static_cast<std::size_t>(std::find(names.begin(), names.end(), a) - names.begin());
          for (std::size_t f = 0; f < 500; ++f) hier += y.at(f, c) > 0 && !(y.at(f, ai) > 0);
        }
      }
    }
  }
  const EventRoster boundary{{"a", "exact", 0, 200, std::nullopt}, {"b", "exact", 0, 160, std::nullopt},
                             {"c", "short", 0, 359.99, std::nullopt}};
  const auto split = split_common_rare(boundary, 360.0);
  const bool edge = split.common.count("exact") && split.rare.count("short") && split.common.size() == 1;
  return {closure == 0 && idem == 0 && hier == 0 && edge,
          "100 random ontologies: " + std::to_string(closure) + " closure, " + std::to_string(idem) + " idempotence, " +
              std::to_string(hier) + " hierarchy violations; 360 s -> common, 359.99 s -> rare: " + (edge ? "yes" : "no")};
}

// 9. Median filter oracle and augmentation properties.

Outcome median_and_augment() {
  std::mt19937_64 rng(9);
  std::size_t median_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t t_len = 5 + rng() % 60;
    const Tensor col = Tensor::uniform({t_len, 1}, rng, 0, 1);
    const auto out = median_filter(col, 5);
    for (std::size_t t = 0; t < t_len; ++t) {
      std::vector<Real> w;
      for (long k = -2; k <= 2; ++k) {
        w.push_back(col[static_cast<std::size_t>(std::clamp<long>(static_cast<long>(t) + k, 0, static_cast<long>(t_len) - 1))]);
      }
      std::sort(w.begin(), w.end());
      median_bad += out[t] != w[2];
    }
  }
  std::size_t aug_bad = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t frames = 8 * (2 + rng() % 6), bins = 16;
    MelSpectrogram a{Tensor::randn({frames, bins}, rng), 0.01, bins}, b{Tensor::randn({frames, bins}, rng), 0.01, bins};
    Tensor la = Tensor::zeros({frames / 2, 3}), lb = Tensor::zeros({frames / 2, 3});
    std::bernoulli_distribution on(0.3);
    for (auto& v : la.mutable_data()) v = on(rng);
    for (auto& v : lb.mutable_data()) v = on(rng);
    const auto eq = [](const Tensor& x, const Tensor& y) { return std::equal(x.data().begin(), x.data().end(), y.data().begin()); };
    const auto m1 = mixup(a, b, la, lb, 1.0);
    aug_bad += !eq(m1.features.values, a.values) || !eq(m1.labels, la);
    const auto s0 = time_shift(a, la, 0), sf = time_shift(a, la, static_cast<long>(frames));
    aug_bad += !eq(s0.features.values, a.values) || !eq(sf.features.values, a.values) || !eq(s0.labels, la);
    const long shift = 2 * (static_cast<long>(rng() % frames) - static_cast<long>(frames / 2));
    const auto sh = time_shift(a, la, shift);
    std::vector<Real> before(a.values.data().begin(), a.values.data().end()), after(sh.features.values.data().begin(), sh.features.values.data().end());
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    double pos_before = 0, pos_after = 0;
    for (Real v : la.data()) pos_before += v;
    for (Real v : sh.labels.data()) pos_after += v;
    aug_bad += before != after || pos_before != pos_after;
    std::mt19937_64 r2(i);
    aug_bad += !eq(spec_augment(a, {0, 10, 0, 4}, r2).values, a.values);
    num::Mask applied;
    const auto sa = spec_augment(a, {2, 6, 2, 4}, r2, &applied);
    std::size_t changed_outside = 0;
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = 0; f < bins; ++f) changed_outside += !applied.allowed(t, f) && sa.values.at(t, f) != a.values.at(t, f);
    }
    aug_bad += changed_outside > 0;
  }
  return {median_bad == 0 && aug_bad == 0,
          "median: " + std::to_string(median_bad) + " mismatches over 1000 columns; augmentation: " +
              std::to_string(aug_bad) + " property violations over 50 draws"};
}

// 10. Determinism and bit-exact round trips.

Outcome determinism() {
  RunConfig cfg = RunConfig::desk();
  cfg.seed = 10;
  cfg.dataset.train_clips = 60;
  cfg.dataset.eval_clips = 4;
  cfg.dataset.query_clips = 40;
  cfg.train.steps = 30;
  cfg.train.freeze_steps = 10;
  cfg.train.mixup_probability = 0.3;
  cfg.validate();
  const auto data = generate_dataset(cfg);
  auto a = train_model(data, cfg);
  auto b = train_model(data, cfg);
  bool curve = a.log.size() == b.log.size();
  for (std::size_t i = 0; curve && i < a.log.size(); ++i) {
    curve = std::bit_cast<std::uint64_t>(a.log[i].loss) == std::bit_cast<std::uint64_t>(b.log[i].loss);
  }
  const fs::path dir = fs::temp_directory_path() / "dasm_acceptance_roundtrip";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  save_model(dir / "a.ckpt", *a.model, {{"note", "round trip"}});
  const auto loaded = load_model(dir / "a.ckpt");
  save_model(dir / "b.ckpt", *loaded.model, loaded.metadata.value("run", nlohmann::json{}));
  const bool ckpt = slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt") &&
                    num::parameter_hash(loaded.model->parameters()) == num::parameter_hash(a.model->parameters());
  a.store.save(dir / "a.tsv");
  const auto store = QueryStore::load(dir / "a.tsv");
  store.save(dir / "b.tsv");
  const bool queries = store == a.store && slurp(dir / "a.tsv") == slurp(dir / "b.tsv");
  fs::remove_all(dir);
  return {curve && ckpt && queries, std::string("loss curve (") + std::to_string(a.log.size()) + " steps) bitwise: " +
                                        (curve ? "yes" : "no") + "; checkpoint round trip: " + (ckpt ? "yes" : "no") +
                                        "; query store round trip: " + (queries ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient integrity", gradients},
      {2, "factorization bound", factorization},
      {3, "base invariance under masking", base_invariance},
      {4, "masking direction (visible vs invisible)", masking_direction},
      {5, "decoder ablation ordering", decoder_ablations},
      {6, "overfit smoke test", overfit},
      {7, "PSDS oracle equivalence", psds_oracle},
      {8, "label augmentation", label_augmentation},
      {9, "median filter and augmentations", median_and_augment},
      {10, "determinism and round trips", determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.passed;
    std::printf("[%s] criterion %d, %s: %s\n", o.passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
