// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "selftest.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dasm/decoder/model.hpp"
#include "dasm/eval/psds.hpp"
#include "dasm/numerics/ops.hpp"
#include "dasm/training/labels.hpp"

namespace dasm::cli {

namespace {

using num::Tensor;

ModelConfig small_model(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.set_width(16, 4);
  cfg.encoder.mel_bins = 32;
  cfg.encoder.cnn_blocks = 2;
  cfg.encoder.cnn_channels = 4;
  cfg.seed = seed;
  return cfg;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

SelftestResult median_check(std::mt19937_64& rng) {
  std::size_t bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t_len = 5 + rng() % 40;
    Tensor col = Tensor::uniform({t_len, 1}, rng, 0, 1);
    const auto out = median_filter(col, 5);
    for (std::size_t t = 0; t < t_len; ++t) {
      std::vector<Real> w;
      for (long k = -2; k <= 2; ++k) {
        const long i = std::clamp<long>(static_cast<long>(t) + k, 0, static_cast<long>(t_len) - 1);
        w.push_back(col[static_cast<std::size_t>(i)]);
      }
      std::sort(w.begin(), w.end());
      bad += out[t] != w[2];
    }
  }
  return {"median filter matches sorted window", bad == 0, std::to_string(bad) + " mismatches over 200 columns"};
}

SelftestResult bound_check(std::mt19937_64& rng) {
  double worst = -1e9;
  for (int trial = 0; trial < 5; ++trial) {
    DasmModel model(small_model(rng()));
    const auto pred = model.forward(Tensor::randn({32, 32}, rng), num::l2_normalize_rows(Tensor::randn({3, 16}, rng)));
    for (std::size_t t = 0; t < pred.frame.dim(0); ++t) {
      for (std::size_t n = 0; n < pred.frame.dim(1); ++n) worst = std::max(worst, double(pred.frame.at(t, n) - pred.clip[n]));
    }
  }
  return {"frame score <= clip score", worst <= 1e-7, "max excess " + fmt(worst)};
}

SelftestResult invariance_check(std::mt19937_64& rng) {
  double worst = 0;
  for (int trial = 0; trial < 5; ++trial) {
    DasmModel model(small_model(rng()));
    const Tensor mel = Tensor::randn({32, 32}, rng);
    const Tensor base = num::l2_normalize_rows(Tensor::randn({4, 16}, rng));
    const auto ref = model.infer(mel, base, 4, MaskStrategy::BaseVisibleToNovel);
    const Tensor all = num::concat_rows({base, num::l2_normalize_rows(Tensor::randn({2, 16}, rng))});
    for (auto s : {MaskStrategy::BaseVisibleToNovel, MaskStrategy::BaseInvisibleToNovel}) {
      const auto out = model.infer(mel, all, 4, s);
      for (std::size_t n = 0; n < 4; ++n) {
        worst = std::max(worst, std::abs(double(out.clip[n]) - ref.clip[n]));
        for (std::size_t t = 0; t < ref.frame.dim(0); ++t) {
          worst = std::max(worst, std::abs(double(out.frame.at(t, n)) - ref.frame.at(t, n)));
        }
      }
    }
  }
  return {"novel queries leave base scores unchanged", worst <= 1e-6, "max change " + fmt(worst)};
}

SelftestResult augment_check(std::mt19937_64& rng) {
  Ontology onto;
  onto.add("root");
  onto.add("mid", {"root"});
  onto.add("leaf_a", {"mid"});
  onto.add("leaf_b", {"root"});
  onto.validate();
  const std::vector<std::string> leaves{"leaf_a", "leaf_b"};
  bool ok = true;
  for (int trial = 0; trial < 50 && ok; ++trial) {
    EventRoster roster;
    for (int i = 0; i < 4; ++i) {
      const double on = std::uniform_real_distribution<double>(0, 8)(rng);
      roster.push_back({"c" + std::to_string(rng() % 2), leaves[rng() % 2], on, on + 0.5, std::nullopt});
    }
    const auto once = label_augment(roster, onto).roster;
    ok = label_augment(once, onto).roster == once;
    for (const auto& e : once) {
      if (e.class_id != "leaf_a" || !ok) continue;
      const auto covers = [&](const std::string& cls) {
        return std::any_of(once.begin(), once.end(), [&](const Event& p) {
          return p.clip_id == e.clip_id && p.class_id == cls && p.onset <= e.onset && p.offset >= e.offset;
        });
      };
      ok = covers("mid") && covers("root");
    }
  }
  return {"label augmentation closed and idempotent", ok, "50 random rosters"};
}

SelftestResult psds_check() {
  const EventRoster refs{{"a", "x", 1.0, 2.0, std::nullopt}, {"b", "y", 0.5, 3.0, std::nullopt}};
  PsdsConfig cfg = PsdsConfig::audioset();
  cfg.thresholds = {0.25, 0.75};
  std::map<double, EventRoster> perfect{{0.25, refs}, {0.75, refs}}, empty{{0.25, {}}, {0.75, {}}};
  const double p = psds(perfect, refs, 20.0, cfg).score, e = psds(empty, refs, 20.0, cfg).score;
  return {"PSDS perfect = 1, empty = 0", p == 1.0 && e == 0.0, "perfect " + fmt(p) + ", empty " + fmt(e)};
}

}  // namespace

std::vector<SelftestResult> run_selftest(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {median_check(rng), bound_check(rng), invariance_check(rng), augment_check(rng), psds_check()};
}

}  // namespace dasm::cli
