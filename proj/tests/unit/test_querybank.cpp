// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dasm/core/errors.hpp"
#include "dasm/querybank/query.hpp"

using namespace dasm;

namespace {

double norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * b[i];
  return s / (norm(a) * norm(b));
}

MelSpectrogram constant_mel(std::size_t frames, std::size_t bins, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  std::vector<float> row(bins);
  for (auto& x : row) x = n(rng);
  std::vector<float> v;
  for (std::size_t t = 0; t < frames; ++t) v.insert(v.end(), row.begin(), row.end());
  return {num::Tensor::from({frames, bins}, v), 0.01, bins};
}

QueryVector unit(const std::string& id, std::vector<float> e, Modality m = Modality::Text,
                 QueryRole r = QueryRole::Base) {
  QueryVector q;
  q.class_id = id;
  q.embedding = std::move(e);
  q.modality = m;
  q.role = r;
  q.provenance = "test " + id;
  return q;
}

}  // namespace

TEST(TextQuery, DeterministicAndNormalized) {
  StubEmbeddingProvider p(32, 16, 5);
  auto a = build_text_query("cat", p);
  auto b = build_text_query("cat", p);
  EXPECT_EQ(a.embedding, b.embedding);
  EXPECT_NEAR(norm(a.embedding), 1.0, 1e-6);
  EXPECT_EQ(a.provenance, "sound of cat");
  EXPECT_EQ(a.modality, Modality::Text);
}

TEST(TextQuery, DistinctClassesDiffer) {
  StubEmbeddingProvider p(32, 16, 5);
  auto cat = build_text_query("cat", p);
  auto dog = build_text_query("dog", p);
  EXPECT_LT(cosine(cat.embedding, dog.embedding), 1 - 1e-6);
}

TEST(TextQuery, PureFunctionOfPromptBytes) {
  StubEmbeddingProvider p(32, 16, 5), q(32, 16, 99);
  EXPECT_EQ(p.embed_text("sound of cat"), q.embed_text("sound of cat"));
}

TEST(TextQuery, EmptyNameRejected) {
  StubEmbeddingProvider p(8, 8, 0);
  EXPECT_THROW(build_text_query("", p), InputError);
}

TEST(AudioQuery, SingleFrameIsNormalizedFrameFeature) {
  StubEmbeddingProvider p(12, 10, 3);
  auto seg = constant_mel(1, 10, 1);
  auto q = build_audio_query("x", {seg}, p);
  auto f = p.embed_audio(seg);
  std::vector<float> row(f.data().begin(), f.data().end());
  const double n = norm(row);
  for (std::size_t d = 0; d < 12; ++d) EXPECT_NEAR(q.embedding[d], row[d] / n, 1e-6);
}

TEST(AudioQuery, IdenticalSegmentsIdempotent) {
  StubEmbeddingProvider p(12, 10, 3);
  auto seg = constant_mel(7, 10, 2);
  auto one = build_audio_query("x", {seg}, p);
  auto three = build_audio_query("x", {seg, seg, seg}, p);
  for (std::size_t d = 0; d < 12; ++d) EXPECT_NEAR(one.embedding[d], three.embedding[d], 1e-6);
}

TEST(AudioQuery, LengthWeightedMean) {
  StubEmbeddingProvider p(12, 10, 3);
  auto s1 = constant_mel(1, 10, 4);
  auto s3 = constant_mel(3, 10, 5);
  auto u = p.embed_audio(s1);
  auto v = p.embed_audio(s3);
  std::vector<float> expect(12);
  for (std::size_t d = 0; d < 12; ++d) expect[d] = (u.at(0, d) + 3 * v.at(0, d)) / 4;
  const double n = norm(expect);
  auto q = build_audio_query("x", {s1, s3}, p);
  for (std::size_t d = 0; d < 12; ++d) EXPECT_NEAR(q.embedding[d], expect[d] / n, 1e-6);
}

TEST(AudioQuery, LevelInvariantPerFrame) {
  StubEmbeddingProvider p(12, 10, 3);
  auto seg = constant_mel(4, 10, 6);
  auto louder = seg;
  std::vector<float> v(seg.values.data().begin(), seg.values.data().end());
  for (auto& x : v) x += 3.0f;
  louder.values = num::Tensor::from(seg.values.shape(), v);
  auto a = build_audio_query("x", {seg}, p);
  auto b = build_audio_query("x", {louder}, p);
  for (std::size_t d = 0; d < 12; ++d) EXPECT_NEAR(a.embedding[d], b.embedding[d], 1e-5);
}

TEST(AudioQuery, EmptyListRejected) {
  StubEmbeddingProvider p(8, 8, 0);
  EXPECT_THROW(build_audio_query("x", {}, p), InputError);
}

TEST(AudioQuery, CropAndSubsample) {
  auto mel = constant_mel(100, 4, 1);
  auto c = crop_segment(mel, 0.2, 0.5);
  EXPECT_EQ(c.frames(), 30u);
  std::vector<MelSpectrogram> segs{crop_segment(mel, 0, 0.5), crop_segment(mel, 0, 0.3), crop_segment(mel, 0, 0.4)};
  std::mt19937_64 rng(1);
  auto sub = subsample_segments(segs, 0.6, rng);
  std::size_t frames = 0;
  for (const auto& s : sub) frames += s.frames();
  EXPECT_EQ(frames, 60u);
  std::mt19937_64 rng2(1);
  auto all = subsample_segments(segs, 100.0, rng2);
  EXPECT_EQ(all.size(), 3u);
}

TEST(AudioQuery, PooledExemplarsMatchDirectQuery) {
  StubEmbeddingProvider p(12, 10, 3);
  std::mt19937_64 rng(4);
  std::vector<MelSpectrogram> segs;
  for (std::size_t n : {3u, 7u, 1u}) segs.push_back({num::Tensor::randn({n, 10}, rng), 0.01, 10});
  std::vector<AudioExemplar> ex;
  for (const auto& s : segs) ex.push_back(embed_exemplar(s, p));
  const auto pooled = pool_exemplars({&ex[0], &ex[1], &ex[2]});
  const auto direct = build_audio_query("x", segs, p).embedding;
  for (std::size_t d = 0; d < 12; ++d) EXPECT_NEAR(pooled[d], direct[d], 1e-6);
  EXPECT_THROW(pool_exemplars({}), InputError);
}

TEST(Modality, FixedModes) {
  std::mt19937_64 rng(0);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sample_modality(QueryMode::Text, true, true, rng), Modality::Text);
    EXPECT_EQ(sample_modality(QueryMode::Audio, true, true, rng), Modality::Audio);
  }
}

TEST(Modality, MixedIsFair) {
  std::mt19937_64 rng(42);
  int text = 0;
  for (int i = 0; i < 10000; ++i) text += sample_modality(QueryMode::Mixed, true, true, rng) == Modality::Text;
  EXPECT_GE(text, 4700);
  EXPECT_LE(text, 5300);
}

TEST(Modality, FallsBackToAvailable) {
  std::mt19937_64 rng(0);
  EXPECT_EQ(sample_modality(QueryMode::Text, false, true, rng), Modality::Audio);
  EXPECT_EQ(sample_modality(QueryMode::Mixed, true, false, rng), Modality::Text);
  EXPECT_THROW(sample_modality(QueryMode::Mixed, false, false, rng), ConfigError);
}

TEST(Assemble, Examples) {
  auto a = unit("A", {1, 0}), b = unit("B", {0, 1}), c = unit("C", {1, 1});
  auto base = assemble_inference_queries({a, b}, {});
  ASSERT_EQ(base.size(), 2u);
  EXPECT_EQ(base[0].class_id, "A");
  EXPECT_EQ(base[1].class_id, "B");
  auto all = assemble_inference_queries({a, b}, {c});
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[2].class_id, "C");
  EXPECT_EQ(all[2].role, QueryRole::Novel);
  EXPECT_THROW(assemble_inference_queries({a, b}, {a}), InputError);
}

TEST(QueryStore, BaseBeforeNovelAndUniqueIds) {
  QueryStore s;
  s.add(unit("N1", {1, 0}, Modality::Text, QueryRole::Novel));
  s.add(unit("B1", {0, 1}));
  s.add(unit("B1", {0, 1}, Modality::Audio));
  s.add(unit("B2", {1, 1}));
  EXPECT_EQ(s.class_ids(), (std::vector<std::string>{"B1", "B2", "N1"}));
  EXPECT_THROW(s.add(unit("B1", {0, 1})), InputError);
  EXPECT_THROW(s.add(unit("B1", {0, 1}, Modality::Text, QueryRole::Novel)), InputError);
  EXPECT_THROW(s.add(unit("X", {0, 1, 2})), DimensionError);
  auto q = assemble_inference_queries(s, Modality::Audio, {});
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0].modality, Modality::Audio);
  EXPECT_EQ(q[1].modality, Modality::Text);
}

TEST(QueryStore, RoundTripBitExact) {
  StubEmbeddingProvider p(24, 8, 11);
  QueryStore s;
  for (std::string c : {"alpha", "beta", "gamma"}) s.add(build_text_query(c, p));
  s.add(build_audio_query("alpha", {constant_mel(5, 8, 1)}, p, "clip_0:0.5-1.25"));
  auto odd = unit("delta", std::vector<float>(24, 0.0f), Modality::Audio, QueryRole::Novel);
  odd.embedding[0] = -0.0f;
  odd.embedding[1] = 1e-45f;
  odd.embedding[2] = 3.4028235e38f;
  s.add(odd);
  auto path = std::filesystem::temp_directory_path() / "dasm_store_roundtrip.tsv";
  s.save(path);
  auto back = QueryStore::load(path);
  EXPECT_TRUE(back == s);
  EXPECT_EQ(back.serialize(), s.serialize());
  EXPECT_TRUE(std::signbit(back.at("delta").get(Modality::Audio).embedding[0]));
  std::filesystem::remove(path);
}

TEST(QueryStore, RejectsBadFiles) {
  EXPECT_THROW(QueryStore::parse("# dasm-querystore/2.0\n"), CompatibilityError);
  EXPECT_THROW(QueryStore::parse("a\tbase\ttext\t1\t3f800000\tp\n"), ValidationError);
  EXPECT_THROW(QueryStore::parse("# dasm-querystore/1.0\na\tbase\ttext\t2\t3f800000\tp\n"), ValidationError);
  EXPECT_THROW(QueryStore::parse("# dasm-querystore/1.0\na\tbase\tvideo\t1\t3f800000\tp\n"), ValidationError);
  auto ok = QueryStore::parse("# dasm-querystore/1.7\na\tbase\ttext\t1\t3f800000\tp\n");
  EXPECT_EQ(ok.at("a").get(Modality::Text).embedding[0], 1.0f);
}

TEST(QueryMatrix, StacksRowsInOrder) {
  auto m = query_matrix({unit("A", {1, 2}), unit("B", {3, 4})});
  EXPECT_EQ(m.shape(), (num::Shape{2, 2}));
  EXPECT_EQ(m.at(1, 0), 3.0f);
}
