// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dasm/core/errors.hpp"
#include "dasm/core/events.hpp"
#include "dasm/training/labels.hpp"
#include "dasm/training/loss.hpp"
#include "dasm/training/synthetic.hpp"
#include "dasm/training/trainer.hpp"

using namespace dasm;
using num::Tensor;

namespace {

Event ev(std::string clip, std::string cls, double on, double off) { return Event{clip, cls, on, off, std::nullopt}; }

Ontology chain() {
  Ontology o;
  o.add("root");
  o.add("mid", {"root"});
  o.add("leaf", {"mid"});
  o.validate();
  return o;
}

PredictionGrid grid(std::vector<Real> frame, std::size_t t, std::size_t n, std::vector<Real> clip) {
  return {Tensor::from({n}, clip), Tensor::from({t, n}, frame), 50.0};
}

}  // namespace

// Loss.

TEST(Loss, ZeroExponentsGiveBinaryCrossEntropy) {
  LossConfig cfg{0.5, 0.0, 0.0, 0.0, 1e-7};
  auto p = Tensor::from({4}, {0.2f, 0.7f, 0.9f, 0.4f});
  auto y = Tensor::from({4}, {1, 0, 1, 0});
  double expect = -(std::log(0.2) + std::log(0.3) + std::log(0.9) + std::log(0.6)) / 4;
  EXPECT_NEAR(asymmetric_focal_loss(p, y, cfg).item(), expect, 1e-6);
}

TEST(Loss, NegativeFocusingExample) {
  LossConfig cfg{0.5, 0.0, 2.0, 0.0, 1e-7};
  auto l = asymmetric_focal_loss(Tensor::from({1}, {0.3f}), Tensor::from({1}, {0}), cfg).item();
  EXPECT_NEAR(l, 0.09 * -std::log(0.7), 1e-6);
  EXPECT_NEAR(l, 0.0321, 1e-4);
}

TEST(Loss, PerfectPositiveIsTiny) {
  LossConfig cfg;
  EXPECT_LT(asymmetric_focal_loss(Tensor::from({1}, {1}), Tensor::from({1}, {1}), cfg).item(), 1e-6);
}

TEST(Loss, MarginSilencesEasyNegatives) {
  LossConfig cfg;
  EXPECT_EQ(asymmetric_focal_loss(Tensor::from({1}, {0.04f}), Tensor::from({1}, {0}), cfg).item(), 0.0f);
}

TEST(Loss, TotalExamples) {
  LossConfig cfg;
  auto y = Tensor::from({2, 2}, {1, 0, 1, 0});
  auto yc = clip_targets_from_frames(y);
  EXPECT_EQ(yc[0], 1.0f);
  EXPECT_EQ(yc[1], 0.0f);
  auto perfect = grid({1, 0, 1, 0}, 2, 2, {1, 0});
  EXPECT_LT(total_loss(perfect, y, yc, cfg).total.item(), 1e-5);

  auto g = grid({0.6f, 0.3f, 0.8f, 0.2f}, 2, 2, {0.7f, 0.4f});
  LossConfig a0 = cfg, a1 = cfg, a2 = cfg;
  a0.alpha = 0;
  a1.alpha = 0.5;
  a2.alpha = 1.0;
  auto t0 = total_loss(g, y, yc, a0);
  EXPECT_EQ(t0.total.item(), static_cast<Real>(t0.frame));
  auto t1 = total_loss(g, y, yc, a1);
  auto t2 = total_loss(g, y, yc, a2);
  EXPECT_NEAR(t2.total.item() - t0.total.item(), 2 * (t1.total.item() - t0.total.item()), 1e-6);
  EXPECT_GT(t1.total.item(), 0);
}

TEST(Loss, InconsistentTargetsRejected) {
  auto y = Tensor::from({2, 1}, {1, 0});
  auto g = grid({0.5f, 0.5f}, 2, 1, {0.5f});
  EXPECT_THROW(total_loss(g, y, Tensor::from({1}, {0}), LossConfig{}), ValidationError);
}

// Rosters and ontology.

TEST(Roster, RoundTrip) {
  EventRoster r{ev("a", "x", 0.1, 0.30000000000000004), ev("b", "y", 1, 2)};
  r[1].score = 0.25;
  auto back = parse_roster(format_roster(r));
  EXPECT_EQ(back, r);
  EXPECT_THROW(parse_roster("# dasm-roster/2.0\n"), CompatibilityError);
  EXPECT_THROW(parse_roster("a\tx\t2\t1\n"), ValidationError);
  EXPECT_THROW(parse_roster("a\tx\t1\n"), ValidationError);
}

TEST(Ontology, AncestorsAndCycles) {
  auto o = chain();
  EXPECT_EQ(o.ancestors("leaf"), (std::vector<std::string>{"mid", "root"}));
  EXPECT_TRUE(o.ancestors("root").empty());
  EXPECT_EQ(o.roots(), (std::vector<std::string>{"root"}));
  EXPECT_EQ(o.leaves(), (std::vector<std::string>{"leaf"}));
  Ontology bad;
  bad.add("a", {"b"});
  bad.add("b", {"a"});
  EXPECT_THROW(bad.validate(), ConfigError);
  Ontology dangling;
  dangling.add("a", {"missing"});
  EXPECT_THROW(dangling.validate(), ConfigError);
}

TEST(Ontology, FileRoundTrip) {
  auto o = default_synthetic_spec().ontology();
  auto back = Ontology::parse(o.format());
  EXPECT_EQ(back.format(), o.format());
  EXPECT_EQ(back.classes().size(), 20u);
  EXPECT_EQ(back.leaves().size(), 14u);
}

// Label augmentation.

TEST(LabelAugment, ChainClosure) {
  auto out = label_augment({ev("c", "leaf", 1, 2)}, chain());
  ASSERT_EQ(out.roster.size(), 3u);
  for (const auto& e : out.roster) {
    EXPECT_EQ(e.onset, 1);
    EXPECT_EQ(e.offset, 2);
  }
}

TEST(LabelAugment, RootUnchanged) {
  EventRoster in{ev("c", "root", 1, 2)};
  EXPECT_EQ(label_augment(in, chain()).roster, in);
}

TEST(LabelAugment, AdjacentAncestorsMerge) {
  Ontology o;
  o.add("p");
  o.add("a", {"p"});
  o.add("b", {"p"});
  auto out = label_augment({ev("c", "a", 0, 1), ev("c", "b", 1, 2)}, o).roster;
  EventRoster expect{ev("c", "a", 0, 1), ev("c", "b", 1, 2), ev("c", "p", 0, 2)};
  EXPECT_EQ(out, expect);
}

TEST(LabelAugment, UnknownClassDropsClip) {
  auto out = label_augment({ev("c1", "leaf", 0, 1), ev("c2", "leaf", 0, 1), ev("c2", "alien", 0, 1)}, chain());
  EXPECT_EQ(out.dropped_clips, (std::vector<std::string>{"c2"}));
  for (const auto& e : out.roster) EXPECT_EQ(e.clip_id, "c1");
}

TEST(LabelAugment, IdempotentAndHierarchyConsistent) {
  const auto spec = default_synthetic_spec();
  const auto ont = spec.ontology();
  std::mt19937_64 rng(3);
  EventRoster roster;
  auto classes = ont.classes();
  std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 1);
  std::uniform_real_distribution<double> t(0, 9);
  for (int c = 0; c < 20; ++c) {
    for (int k = 0; k < 5; ++k) {
      const double on = t(rng);
      roster.push_back(ev("clip" + std::to_string(c), classes[pick(rng)], on, on + 0.5));
    }
  }
  auto once = label_augment(roster, ont).roster;
  auto twice = label_augment(once, ont).roster;
  EXPECT_EQ(once, twice);
  for (const auto& [clip, events] : group_by_clip(once)) {
    auto y = frame_targets(events, classes, 500, 50.0);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      for (const auto& a : ont.ancestors(classes[c])) {
        const auto ai = std::find(classes.begin(), classes.end(), a) - classes.begin();
        for (std::size_t f = 0; f < 500; ++f) {
          if (y.at(f, c) > 0) {
            ASSERT_GT(y.at(f, ai), 0) << clip << " " << classes[c] << " " << a;
          }
        }
      }
    }
  }
}

TEST(Split, SixMinuteBoundary) {
  EventRoster r{ev("a", "short", 0, 359), ev("b", "exact", 0, 200), ev("c", "exact", 0, 160)};
  auto s = split_common_rare(r);
  EXPECT_TRUE(s.rare.count("short"));
  EXPECT_TRUE(s.common.count("exact"));
  auto empty = split_common_rare({});
  EXPECT_TRUE(empty.common.empty() && empty.rare.empty());
  auto stripped = remove_classes(r, s.rare);
  EXPECT_EQ(stripped.size(), 2u);
}

TEST(Resample, Examples) {
  EventRoster even{ev("a", "x", 0, 1), ev("b", "y", 0, 1)};
  for (double w : resample_weights(even, {"a", "b"})) EXPECT_DOUBLE_EQ(w, 1.0);

  EventRoster skewed{ev("a", "x", 0, 1), ev("b", "x", 0, 1), ev("c", "x", 0, 1), ev("c", "rare", 0, 1), ev("d", "x", 0, 1)};
  std::vector<std::string> ids{"a", "b", "c", "d"};
  auto w = resample_weights(skewed, ids);
  double sum = 0;
  for (double x : w) sum += x;
  EXPECT_NEAR(sum, 4.0, 1e-6);
  EXPECT_EQ(std::max_element(w.begin(), w.end()) - w.begin(), 2);
  EXPECT_NEAR(w[2] / w[0], 4.0, 1e-12);
}

// Synthetic data.

TEST(Synthetic, DefaultSpecShape) {
  auto spec = default_synthetic_spec();
  EXPECT_EQ(spec.classes.size(), 20u);
  EXPECT_EQ(spec.leaf_classes().size(), 14u);
  EXPECT_EQ(spec.find("tone_1300").weight, 0.1);
  EXPECT_EQ(spec.ontology().ancestors("tone_1300"), (std::vector<std::string>{"steady_tone", "tonal"}));
}

TEST(Synthetic, ZeroEventsIsNoiseFloor) {
  auto spec = default_synthetic_spec();
  std::mt19937_64 rng(1);
  auto clip = render_synthetic_clip(spec, {}, rng);
  EXPECT_TRUE(clip.events.empty());
  double sq = 0;
  for (float x : clip.audio.samples) sq += double(x) * x;
  EXPECT_NEAR(std::sqrt(sq / clip.audio.samples.size()), spec.noise_rms, 0.05 * spec.noise_rms);
}

TEST(Synthetic, SingleToneLabelExact) {
  auto spec = default_synthetic_spec();
  std::mt19937_64 rng(1);
  auto clip = render_synthetic_clip(spec, {{"tone_500", 2.0, 3.0, 10.0}}, rng, "c");
  ASSERT_EQ(clip.events.size(), 1u);
  EXPECT_EQ(clip.events[0], ev("c", "tone_500", 2.0, 3.0));
  EXPECT_EQ(clip.audio.samples.size(), 160000u);
}

TEST(Synthetic, DeterministicPerSeed) {
  auto spec = default_synthetic_spec();
  std::mt19937_64 a(9), b(9);
  auto x = generate_synthetic_clip(spec, a);
  auto y = generate_synthetic_clip(spec, b);
  EXPECT_EQ(x.audio.samples, y.audio.samples);
  EXPECT_EQ(x.events, y.events);
  EXPECT_GE(x.events.size(), 1u);
  EXPECT_LE(x.events.size(), 4u);
}

TEST(Synthetic, RejectsImpossiblePlacement) {
  auto spec = default_synthetic_spec();
  spec.max_duration = spec.clip_seconds + 1;
  std::mt19937_64 rng(0);
  EXPECT_THROW(generate_synthetic_clip(spec, rng), ConfigError);
  auto ok = default_synthetic_spec();
  EXPECT_THROW(render_synthetic_clip(ok, {{"tone_500", 9.5, 10.5, 10}}, rng), ConfigError);
  EXPECT_THROW(render_synthetic_clip(ok, {{"tonal", 1, 2, 10}}, rng), ConfigError);
}

TEST(Synthetic, BandEnergyExceedsNoiseBySnr) {
  auto spec = default_synthetic_spec();
  for (const auto& leaf : spec.leaf_classes()) {
    std::mt19937_64 rng(std::hash<std::string>{}(leaf));
    const double snr = 6.0;
    auto clip = render_synthetic_clip(spec, {{leaf, 1.0, 2.5, snr}}, rng);
    auto excess = band_excess_db(clip, 0, spec);
    ASSERT_TRUE(excess.has_value()) << leaf;
    EXPECT_GE(*excess, snr - 0.5) << leaf;
  }
}

TEST(FrameTargets, OverlapRule) {
  auto y = frame_targets({ev("c", "a", 0.1, 0.2), ev("c", "b", 0.015, 0.021)}, {"a", "b"}, 20, 50.0);
  for (std::size_t f = 0; f < 20; ++f) EXPECT_EQ(y.at(f, 0), (f >= 5 && f < 10) ? 1.0f : 0.0f) << f;
  EXPECT_EQ(y.at(0, 1), 1.0f);
  EXPECT_EQ(y.at(1, 1), 1.0f);
  EXPECT_EQ(y.at(2, 1), 0.0f);
}

// Optimization.

namespace {

struct Fixture {
  ModelConfig model_cfg;
  TrainingSet data;
  QueryStore store;

  explicit Fixture(std::size_t clips, std::uint64_t seed = 1) {
    model_cfg.set_width(16, 4);
    model_cfg.encoder.mel_bins = 32;
    model_cfg.encoder.cnn_blocks = 2;
    model_cfg.encoder.cnn_channels = 4;
    model_cfg.seed = seed;
    FrontendConfig fe;
    fe.mel_bins = 32;
    SyntheticSpec spec = default_synthetic_spec();
    spec.clip_seconds = 1.28;
    spec.max_duration = 0.6;
    spec.min_duration = 0.2;
    spec.max_events = 2;
    data.classes = {"tone_500", "tone_2000", "noise_high", "chirp_up_low"};
    for (std::size_t i = 0; i < data.classes.size(); ++i) {
      QueryVector q;
      q.class_id = data.classes[i];
      q.embedding.assign(16, 0.0f);
      q.embedding[i] = 1.0f;
      store.add(q);
    }
    std::mt19937_64 rng(seed);
    MelFrontend frontend(fe);
    std::uniform_int_distribution<std::size_t> pick(0, data.classes.size() - 1);
    for (std::size_t c = 0; c < clips; ++c) {
      const auto cls = data.classes[pick(rng)];
      auto clip = render_synthetic_clip(spec, {{cls, 0.2 + 0.05 * (c % 4), 0.7 + 0.05 * (c % 4), 15}}, rng);
      auto mel = frontend(clip.audio);
      auto y = frame_targets(clip.events, data.classes, mel.frames() / 2, 50.0);
      data.examples.push_back({"c" + std::to_string(c), mel, y});
    }
  }
};

}  // namespace

TEST(AdamW, ZeroLearningRateLeavesParameters) {
  Fixture fx(4);
  DasmModel model(fx.model_cfg);
  const auto before = num::parameter_hash(model.parameters());
  TrainConfig cfg;
  cfg.steps = 3;
  cfg.batch_size = 2;
  cfg.freeze_steps = 0;
  cfg.lr_backbone = cfg.lr_rest = 0;
  Trainer trainer(model, fx.data, fx.store, cfg, LossConfig{});
  trainer.run();
  EXPECT_EQ(num::parameter_hash(model.parameters()), before);
}

TEST(AdamW, FreezeKeepsBackboneFixed) {
  Fixture fx(4);
  DasmModel model(fx.model_cfg);
  const auto backbone = num::parameter_hash(model.parameters(), kBackboneGroup);
  const auto all = num::parameter_hash(model.parameters());
  TrainConfig cfg;
  cfg.steps = 4;
  cfg.batch_size = 2;
  cfg.freeze_steps = 2;
  Trainer trainer(model, fx.data, fx.store, cfg, LossConfig{});
  trainer.step();
  trainer.step();
  EXPECT_EQ(num::parameter_hash(model.parameters(), kBackboneGroup), backbone);
  EXPECT_NE(num::parameter_hash(model.parameters()), all);
  trainer.step();
  EXPECT_NE(num::parameter_hash(model.parameters(), kBackboneGroup), backbone);
}

TEST(AdamW, ConfigValidation) {
  TrainConfig cfg;
  cfg.steps = 10;
  cfg.freeze_steps = 11;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Trainer, ReproducibleLossCurve) {
  Fixture fx(6);
  TrainConfig cfg;
  cfg.steps = 5;
  cfg.batch_size = 2;
  cfg.freeze_steps = 2;
  cfg.spec_augment = true;
  cfg.time_shift = true;
  cfg.mixup_probability = 0.5;
  std::vector<double> curves[2];
  for (auto& curve : curves) {
    DasmModel model(fx.model_cfg);
    Trainer trainer(model, fx.data, fx.store, cfg, LossConfig{});
    for (const auto& r : trainer.run()) curve.push_back(r.loss);
  }
  EXPECT_EQ(curves[0], curves[1]);
}

TEST(Trainer, OverfitsFixedBatch) {
  Fixture fx(8);
  DasmModel model(fx.model_cfg);
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.batch_size = 8;
  cfg.freeze_steps = 0;
  cfg.resample = false;
  cfg.lr_backbone = 1e-3;
  cfg.lr_rest = 3e-3;
  Trainer trainer(model, fx.data, fx.store, cfg, LossConfig{});
  auto log = trainer.run();
  EXPECT_LE(log.back().frame_loss, 0.5 * log.front().frame_loss)
      << "first " << log.front().frame_loss << " last " << log.back().frame_loss;
}

TEST(Trainer, ExemplarPoolsAreUsedAndReproducible) {
  Fixture fx(6);
  StubEmbeddingProvider provider(16, 32, 2);
  fx.data.exemplars.resize(fx.data.classes.size());
  for (std::size_t c = 0; c < fx.data.classes.size(); ++c) {
    for (const auto& ex : fx.data.examples) fx.data.exemplars[c].push_back(embed_exemplar(ex.mel, provider));
  }
  TrainConfig cfg;
  cfg.steps = 4;
  cfg.batch_size = 2;
  cfg.freeze_steps = 1;
  cfg.query_mode = QueryMode::Audio;
  std::vector<double> curves[3];
  for (int run = 0; run < 3; ++run) {
    cfg.query_exemplars = run < 2 ? 3 : 0;
    DasmModel model(fx.model_cfg);
    Trainer trainer(model, fx.data, fx.store, cfg, LossConfig{});
    for (const auto& r : trainer.run()) curves[run].push_back(r.loss);
  }
  EXPECT_EQ(curves[0], curves[1]);
  EXPECT_NE(curves[0], curves[2]);
  fx.data.exemplars.pop_back();
  DasmModel model(fx.model_cfg);
  EXPECT_THROW(Trainer(model, fx.data, fx.store, cfg, LossConfig{}), DimensionError);
}

TEST(Trainer, EncoderAlignmentReducesCosineLoss) {
  Fixture fx(6);
  StubEmbeddingProvider provider(16, 32, 2);
  std::vector<MelSpectrogram> mels;
  for (const auto& ex : fx.data.examples) mels.push_back(ex.mel);
  DasmModel model(fx.model_cfg);
  const auto decoder_before = num::parameter_hash(model.parameters());
  const auto log = align_encoder(model, mels, provider, 60, 4, 3e-3, 1);
  ASSERT_EQ(log.size(), 60u);
  const double first = (log[0] + log[1] + log[2]) / 3, last = (log[57] + log[58] + log[59]) / 3;
  EXPECT_LT(last, 0.7 * first) << first << " -> " << last;
  EXPECT_NE(num::parameter_hash(model.parameters()), decoder_before);
  StubEmbeddingProvider wrong(8, 32, 2);
  EXPECT_THROW(align_encoder(model, mels, wrong, 1, 1, 1e-3, 1), CompatibilityError);
}

TEST(Metrics, MacroF1) {
  auto y = Tensor::from({4, 2}, {1, 0, 1, 0, 0, 0, 0, 1});
  EXPECT_DOUBLE_EQ(frame_macro_f1({y}, {y}), 1.0);
  auto p = Tensor::from({4, 2}, {1, 0, 0, 0, 0, 0, 0, 1});
  EXPECT_NEAR(frame_macro_f1({p}, {y}), (2.0 / 3.0 + 1.0) / 2, 1e-12);
}
