// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/training/trainer.hpp"

#include <cmath>
#include <sstream>

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE

void TrainConfig::validate() const {
  if (steps == 0 || batch_size == 0) throw ConfigError("train: steps and batch_size must be positive");
  if (freeze_steps > steps) throw ConfigError("train: freeze_steps exceeds steps");
  if (lr_backbone < 0 || lr_rest < 0 || weight_decay < 0) throw ConfigError("train: negative learning rate or decay");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0)) throw ConfigError("train: bad Adam constants");
  if (!(mixup_probability >= 0 && mixup_probability <= 1)) throw ConfigError("train: mixup_probability outside [0,1]");
}

AdamW::AdamW(num::ParameterList params, double beta1, double beta2, double epsilon, double weight_decay)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(epsilon), wd_(weight_decay) {
  for (const auto& p : params_) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
  count_.assign(params_.size(), 0);
}

void AdamW::step(const std::map<std::string, double>& lr_by_group, double default_lr) {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.value.requires_grad()) continue;
    auto it = lr_by_group.find(p.group);
    const double lr = it == lr_by_group.end() ? default_lr : it->second;
    const auto n = ++count_[i];
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(n));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(n));
    auto w = p.value.mutable_data();
    auto g = p.value.mutable_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      m[k] = beta1_ * m[k] + (1 - beta1_) * gk;
      v[k] = beta2_ * v[k] + (1 - beta2_) * gk * gk;
      const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_) + wd_ * w[k];
      w[k] = static_cast<Real>(w[k] - lr * update);
    }
  }
}

Trainer::Trainer(DasmModel& model, const TrainingSet& data, const QueryStore& queries, TrainConfig cfg, LossConfig loss)
    : model_(model),
      data_(data),
      cfg_(cfg),
      loss_(loss),
      opt_(model.parameters(), cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay),
      rng_(cfg.seed) {
  cfg_.validate();
  loss_.validate();
  if (data_.examples.empty()) throw InputError("train: empty training set");
  if (data_.classes.empty()) throw InputError("train: no training classes");
  if (!data_.weights.empty() && data_.weights.size() != data_.examples.size()) {
    throw DimensionError("train: weight count differs from example count");
  }
  std::vector<QueryVector> text, audio;
  for (const auto& c : data_.classes) {
    const auto& e = queries.at(c);
    has_text_.push_back(e.has(Modality::Text));
    has_audio_.push_back(e.has(Modality::Audio));
    text.push_back(e.get(e.has(Modality::Text) ? Modality::Text : Modality::Audio));
    audio.push_back(e.get(e.has(Modality::Audio) ? Modality::Audio : Modality::Text));
  }
  text_queries_ = query_matrix(text);
  audio_queries_ = query_matrix(audio);
  if (text_queries_.dim(1) != model_.config().decoder.dim) {
    throw CompatibilityError("train: query dim " + std::to_string(text_queries_.dim(1)) + " differs from model dim " +
                             std::to_string(model_.config().decoder.dim));
  }
  if (!data_.exemplars.empty() && data_.exemplars.size() != data_.classes.size()) {
    throw DimensionError("train: exemplar pools do not match the class list");
  }
  if (cfg_.query_exemplars > 0) {
    for (std::size_t c = 0; c < data_.exemplars.size(); ++c) has_audio_[c] = has_audio_[c] || !data_.exemplars[c].empty();
  }
  for (const auto& ex : data_.examples) {
    if (ex.targets.rank() != 2 || ex.targets.dim(1) != data_.classes.size()) {
      throw DimensionError("train: targets of '" + ex.clip_id + "' do not match the class list");
    }
  }
}

num::Tensor Trainer::queries_for(Modality m) {
  if (m == Modality::Text) return text_queries_;
  if (cfg_.query_exemplars == 0 || data_.exemplars.empty()) return audio_queries_;
  num::Tensor q = audio_queries_.detach();
  const std::size_t dim = q.dim(1);
  auto values = q.mutable_data();
  for (std::size_t c = 0; c < data_.exemplars.size(); ++c) {
    const auto& pool = data_.exemplars[c];
    if (pool.empty()) continue;
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min(cfg_.query_exemplars, pool.size()))(rng_);
    std::uniform_int_distribution<std::size_t> idx(0, pool.size() - 1);
    std::vector<const AudioExemplar*> picked;
    for (std::size_t i = 0; i < k; ++i) picked.push_back(&pool[idx(rng_)]);
    const auto v = pool_exemplars(picked);
    for (std::size_t d = 0; d < dim; ++d) values[c * dim + d] = v[d];
  }
  return q;
}

StepRecord Trainer::step() {
  const bool frozen = step_ < cfg_.freeze_steps;
  num::set_group_trainable(model_.parameters(), kBackboneGroup, !frozen);
  num::zero_grad(model_.parameters());

  std::discrete_distribution<std::size_t> pick;
  if (cfg_.resample && !data_.weights.empty()) {
    pick = std::discrete_distribution<std::size_t>(data_.weights.begin(), data_.weights.end());
  } else {
    std::vector<double> ones(data_.examples.size(), 1.0);
    pick = std::discrete_distribution<std::size_t>(ones.begin(), ones.end());
  }
  std::bernoulli_distribution do_mixup(cfg_.mixup_probability);

  StepRecord rec;
  rec.step = step_;
  rec.backbone_frozen = frozen;
  const Real seed = Real(1) / static_cast<Real>(cfg_.batch_size);
  for (std::size_t b = 0; b < cfg_.batch_size; ++b) {
    const auto& ex = data_.examples[pick(rng_)];
    MelSpectrogram mel = ex.mel;
    num::Tensor targets = ex.targets;
    if (cfg_.mixup_probability > 0 && do_mixup(rng_)) {
      const auto& other = data_.examples[pick(rng_)];
      if (other.mel.frames() == mel.frames()) {
        auto mixed = mixup(mel, other.mel, targets, other.targets, sample_mixup_lambda(rng_));
        mel = std::move(mixed.features);
        targets = std::move(mixed.labels);
      }
    }
    if (cfg_.time_shift) {
      const long ratio = static_cast<long>(mel.frames() / targets.dim(0));
      const long rows = static_cast<long>(targets.dim(0));
      const long units = std::uniform_int_distribution<long>(-rows + 1, rows - 1)(rng_);
      auto shifted = time_shift(mel, targets, units * ratio);
      mel = std::move(shifted.features);
      targets = std::move(shifted.labels);
    }
    if (cfg_.spec_augment) mel = spec_augment(mel, cfg_.spec_augment_config, rng_);

    bool any_text = false, any_audio = false;
    for (std::size_t c = 0; c < has_text_.size(); ++c) {
      any_text = any_text || has_text_[c];
      any_audio = any_audio || has_audio_[c];
    }
    const Modality modality = sample_modality(cfg_.query_mode, any_text, any_audio, rng_);

    num::GradientTape tape;
    auto pred = model_.forward(mel.values, queries_for(modality), nullptr, mel.hop_seconds);
    if (pred.frame.dim(0) != targets.dim(0)) {
      throw DimensionError("train: '" + ex.clip_id + "' targets have " + std::to_string(targets.dim(0)) +
                           " frames, model produced " + std::to_string(pred.frame.dim(0)));
    }
    auto terms = total_loss(pred, targets, clip_targets_from_frames(targets), loss_);
    const double value = terms.total.item();
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "training diverged at step " << step_ << " on clip '" << ex.clip_id << "': loss " << value
         << " (frame " << terms.frame << ", clip " << terms.clip << ")";
      throw Error(os.str());
    }
    tape.backward(terms.total, seed);
    rec.loss += value / cfg_.batch_size;
    rec.frame_loss += terms.frame / cfg_.batch_size;
    rec.clip_loss += terms.clip / cfg_.batch_size;
  }
  opt_.step({{kBackboneGroup, cfg_.lr_backbone}}, cfg_.lr_rest);
  ++step_;
  return rec;
}

std::vector<StepRecord> Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  std::vector<StepRecord> log;
  while (step_ < cfg_.steps) {
    log.push_back(step());
    if (on_step) on_step(log.back());
  }
  num::set_group_trainable(model_.parameters(), kBackboneGroup, true);
  return log;
}

std::vector<double> align_encoder(DasmModel& model, const std::vector<MelSpectrogram>& clips,
                                  const EmbeddingProvider& provider, std::size_t steps, std::size_t batch_size,
                                  double lr, std::uint64_t seed) {
  if (clips.empty()) throw InputError("align: no clips");
  if (batch_size == 0) throw ConfigError("align: batch_size must be positive");
  if (provider.dim() != model.config().encoder.dim) throw CompatibilityError("align: provider dim differs from model dim");
  const std::size_t patch = model.config().encoder.patch_t;
  // Targets depend only on the clip, so they are embedded once.
  std::vector<num::Tensor> fine_targets, coarse_targets;
  for (const auto& mel : clips) {
    const auto e = provider.embed_audio(mel);
    fine_targets.push_back(num::l2_normalize_rows(num::mean_row_groups(e, EncoderConfig::fine_time_pool)));
    coarse_targets.push_back(num::l2_normalize_rows(num::mean_row_groups(e, patch)));
  }
  AdamW opt(model.parameters(), 0.9, 0.999, 1e-8, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, clips.size() - 1);
  std::vector<double> log;
  const Real seed_grad = Real(1) / static_cast<Real>(batch_size);
  for (std::size_t step = 0; step < steps; ++step) {
    num::zero_grad(model.parameters());
    double total = 0;
    for (std::size_t b = 0; b < batch_size; ++b) {
      const std::size_t i = pick(rng);
      num::GradientTape tape;
      const auto out = model.encoder()(clips[i].values, clips[i].hop_seconds);
      const auto fine = num::sum(num::mul(num::l2_normalize_rows(out.fused.values), fine_targets[i]));
      const auto coarse = num::sum(num::mul(num::l2_normalize_rows(out.coarse.values), coarse_targets[i]));
      const auto loss = num::add(num::scale(fine, Real(-1) / static_cast<Real>(out.fused.values.dim(0))),
                                 num::scale(coarse, Real(-1) / static_cast<Real>(out.coarse.values.dim(0))));
      tape.backward(loss, seed_grad);
      total += 2.0 + loss.item();
    }
    opt.step({}, lr);
    log.push_back(total / static_cast<double>(batch_size));
  }
  return log;
}

double frame_macro_f1(const std::vector<num::Tensor>& predictions, const std::vector<num::Tensor>& targets,
                      double threshold) {
  if (predictions.size() != targets.size()) throw DimensionError("f1: prediction and target counts differ");
  std::vector<double> tp, fp, fn;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& y = targets[i];
    if (p.shape() != y.shape()) throw DimensionError("f1: shape mismatch");
    const std::size_t n = p.dim(1);
    if (tp.empty()) tp.assign(n, 0), fp.assign(n, 0), fn.assign(n, 0);
    if (tp.size() != n) throw DimensionError("f1: class count differs between clips");
    for (std::size_t t = 0; t < p.dim(0); ++t) {
      for (std::size_t c = 0; c < n; ++c) {
        const bool pos = p.at(t, c) >= threshold;
        const bool truth = y.at(t, c) > 0.5;
        tp[c] += pos && truth;
        fp[c] += pos && !truth;
        fn[c] += !pos && truth;
      }
    }
  }
  double sum = 0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < tp.size(); ++c) {
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    sum += 2 * tp[c] / denom;
    ++counted;
  }
  return counted ? sum / counted : 1.0;
}

DASM_END_NAMESPACE
