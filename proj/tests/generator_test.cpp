#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "logsieve/generator.hpp"
#include "test_util.hpp"

namespace {

using namespace logsieve;
using logsieve::testing::check_gradients;
using logsieve::testing::tiny_encoder_config;

TEST(SampleMask, ExactCountAtHalfRatio) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    auto m = sample_mask(10, 0.5, rng);
    int set = 0;
    for (auto b : m) set += b;
    EXPECT_EQ(set, 5);
  }
}

TEST(SampleMask, ZeroRatioMasksNothing) {
  Rng rng(2);
  auto m = sample_mask(10, 0.0, rng);
  for (auto b : m) EXPECT_EQ(b, 0);
}

TEST(SampleMask, MinimumOneWhenRatioPositive) {
  Rng rng(3);
  auto m = sample_mask(3, 0.1, rng);  // round(0.3) = 0 lifted to 1
  int set = 0;
  for (auto b : m) set += b;
  EXPECT_EQ(set, 1);
}

TEST(SampleMask, PositionalFrequencyIsUniform) {
  Rng rng(4);
  const int d = 20, trials = 10000;
  std::vector<int64_t> hits(d, 0);
  for (int i = 0; i < trials; ++i) {
    auto m = sample_mask(d, 0.5, rng);
    for (int j = 0; j < d; ++j) hits[j] += m[j];
  }
  for (int j = 0; j < d; ++j)
    EXPECT_NEAR(hits[j] / double(trials), 0.5, 0.03) << "position " << j;
}

TEST(ApplyMask, Examples) {
  EXPECT_EQ(apply_mask({4, 5, 6}, {0, 1, 0}),
            (std::vector<TokenId>{4, Vocabulary::kMask, 6}));
  EXPECT_EQ(apply_mask({4, 5, 6}, {0, 0, 0}), (std::vector<TokenId>{4, 5, 6}));
  EXPECT_EQ(apply_mask({4, 5, 6}, {1, 1, 1}),
            (std::vector<TokenId>{Vocabulary::kMask, Vocabulary::kMask, Vocabulary::kMask}));
  EXPECT_THROW(apply_mask({4, 5}, {1}), std::invalid_argument);
}

TEST(RandomGenerate, NoMaskIsIdentity) {
  Rng rng(5);
  auto out = random_generate({4, 5, 6}, {0, 0, 0}, 10, rng);
  EXPECT_EQ(out.tokens, (std::vector<TokenId>{4, 5, 6}));
}

TEST(RandomGenerate, NeverEmitsOriginalOrReservedPadClsMask) {
  Rng rng(6);
  for (int i = 0; i < 20000; ++i) {
    auto out = random_generate({7}, {1}, 13, rng);
    EXPECT_NE(out.tokens[0], 7);
    EXPECT_NE(out.tokens[0], Vocabulary::kPad);
    EXPECT_NE(out.tokens[0], Vocabulary::kCls);
    EXPECT_NE(out.tokens[0], Vocabulary::kMask);
  }
}

TEST(RandomGenerate, UniformOverCandidatesExcludingOriginal) {
  // vocab 13 gives 10 candidates (UNK + 9 events); excluding the original
  // leaves 9, each expected at 1/9
  Rng rng(7);
  const int draws = 100000;
  std::map<TokenId, int64_t> counts;
  for (int i = 0; i < draws; ++i) {
    auto out = random_generate({7}, {1}, 13, rng);
    counts[out.tokens[0]]++;
  }
  EXPECT_EQ(counts.size(), 9u);
  for (const auto& [tok, n] : counts)
    EXPECT_NEAR(n / double(draws), 1.0 / 9.0, 0.02 / 9.0 + 0.004) << "token " << tok;
}

TEST(RandomGenerate, TinyVocabularyIsRejected) {
  Rng rng(8);
  EXPECT_THROW(random_generate({4}, {1}, 5, rng), std::invalid_argument);
}

TEST(Complement, WorkedExamples) {
  auto a = complement_distribution({1.0, 0.0, 0.0});
  EXPECT_NEAR(a[0], 0.0, 1e-12);
  EXPECT_NEAR(a[1], 0.5, 1e-12);
  EXPECT_NEAR(a[2], 0.5, 1e-12);

  auto b = complement_distribution({0.9, 0.1});
  EXPECT_NEAR(b[0], 0.1, 1e-12);
  EXPECT_NEAR(b[1], 0.9, 1e-12);

  std::vector<double> uniform(5, 0.2);
  auto c = complement_distribution(uniform);
  for (double p : c) EXPECT_NEAR(p, 0.2, 1e-12);
}

TEST(Complement, SumsToOneOnRandomDistributions) {
  Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + rng.uniform_int(63);
    std::vector<double> p(n);
    double total = 0;
    for (auto& x : p) {
      x = rng.uniform_real();
      total += x;
    }
    for (auto& x : p) x /= total;
    auto comp = complement_distribution(p);
    double sum = 0;
    for (double x : comp) {
      EXPECT_GE(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Complement, InvolutionOnlyForTwoElementSupports) {
  auto twice2 = complement_distribution(complement_distribution({0.3, 0.7}));
  EXPECT_NEAR(twice2[0], 0.3, 1e-12);
  EXPECT_NEAR(twice2[1], 0.7, 1e-12);
  auto twice3 = complement_distribution(complement_distribution({0.6, 0.3, 0.1}));
  EXPECT_GT(std::abs(twice3[0] - 0.6), 1e-3);
}

TEST(Complement, SingletonSupportIsRejected) {
  EXPECT_THROW(complement_distribution({1.0}), std::invalid_argument);
}

GeneratorModel<float> tiny_generator(int vocab, uint64_t seed) {
  auto cfg = tiny_encoder_config();
  cfg.vocab_size = vocab;
  cfg.max_len = 8;
  GeneratorModel<float> model;
  Rng rng(seed);
  model.init(cfg, rng);
  return model;
}

TEST(MlmForward, RowsSumToOneAndExcludeReserved) {
  auto model = tiny_generator(12, 21);
  PackedBatch batch;
  batch.append({4, Vocabulary::kMask, 6, Vocabulary::kMask});
  MaskedPositions masked;
  masked.packed_index = {1, 3};
  masked.truth = {5, 7};
  auto probs = mlm_forward(model, batch, masked);
  ASSERT_EQ(probs.rows, 2);
  ASSERT_EQ(probs.cols, 12);
  for (int r = 0; r < probs.rows; ++r) {
    double sum = 0;
    for (int c = 0; c < probs.cols; ++c) sum += probs.at(r, c);
    EXPECT_NEAR(sum, 1.0, 1e-6);
    EXPECT_EQ(probs.at(r, Vocabulary::kPad), 0.0);
    EXPECT_EQ(probs.at(r, Vocabulary::kCls), 0.0);
    EXPECT_EQ(probs.at(r, Vocabulary::kMask), 0.0);
    EXPECT_GT(probs.at(r, Vocabulary::kUnk), 0.0);
  }
}

TEST(MlmForward, DeterministicInEvalMode) {
  auto model = tiny_generator(12, 22);
  PackedBatch batch;
  batch.append({4, Vocabulary::kMask, 6});
  MaskedPositions masked;
  masked.packed_index = {1};
  masked.truth = {5};
  auto a = mlm_forward(model, batch, masked);
  auto b = mlm_forward(model, batch, masked);
  EXPECT_EQ(a.data, b.data);
}

TEST(MlmLoss, PointMassOnTruthGivesZero) {
  Matrix<double> probs(1, 8);
  probs.at(0, 5) = 1.0;
  EXPECT_NEAR(mlm_loss(probs, {5}), 0.0, 1e-12);
}

TEST(MlmLoss, UniformOverEightGivesLogEight) {
  Matrix<double> probs(1, 9);
  for (int c = 1; c < 9; ++c) probs.at(0, c) = 1.0 / 8.0;
  EXPECT_NEAR(mlm_loss(probs, {5}), std::log(8.0), 1e-9);
}

TEST(MlmLoss, MonotoneInTruthProbability) {
  double prev = 1e9;
  for (double pt : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    Matrix<double> probs(1, 5);
    probs.at(0, 2) = pt;
    for (int c : {0, 1, 3, 4}) probs.at(0, c) = (1.0 - pt) / 4.0;
    const double l = mlm_loss(probs, {2});
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(MlmLoss, NoMaskedPositionsIsAnError) {
  Matrix<double> probs(0, 5);
  EXPECT_THROW(mlm_loss(probs, {}), std::invalid_argument);
}

TEST(MlmGenerate, NoMaskIsIdentity) {
  auto model = tiny_generator(12, 23);
  Rng rng(24);
  auto out = mlm_generate(model, {4, 5, 6}, {0, 0, 0}, rng);
  EXPECT_EQ(out.tokens, (std::vector<TokenId>{4, 5, 6}));
}

TEST(MlmGenerate, UnmaskedPositionsUntouchedAndReplacedFlagEqualsMask) {
  auto model = tiny_generator(12, 25);
  Rng rng(26);
  const std::vector<TokenId> s = {4, 5, 6, 7, 8};
  const MaskPattern m = {0, 1, 0, 1, 0};
  auto out = mlm_generate(model, s, m, rng);
  EXPECT_EQ(out.replaced, m);
  for (size_t i = 0; i < s.size(); ++i)
    if (!m[i]) EXPECT_EQ(out.tokens[i], s[i]);
}

TEST(MlmGenerate, SamplingMatchesComplementDistribution) {
  auto model = tiny_generator(13, 27);  // 10 candidates
  // compute the model's own complement distribution for this context
  PackedBatch batch;
  batch.append({4, Vocabulary::kMask, 6});
  MaskedPositions masked;
  masked.packed_index = {1};
  masked.truth = {5};
  auto probs = mlm_forward(model, batch, masked);
  std::vector<double> support;
  std::vector<TokenId> tokens;
  for (int c = 0; c < probs.cols; ++c)
    if (c == Vocabulary::kUnk || c >= Vocabulary::kReserved) {
      support.push_back(probs.at(0, c));
      tokens.push_back(c);
    }
  auto comp = complement_distribution(support);

  Rng rng(28);
  const int draws = 100000;
  std::map<TokenId, int64_t> counts;
  for (int i = 0; i < draws; ++i) {
    auto out = mlm_generate(model, {4, 5, 6}, {0, 1, 0}, rng);
    counts[out.tokens[1]]++;
  }
  for (size_t i = 0; i < tokens.size(); ++i)
    EXPECT_NEAR(counts[tokens[i]] / double(draws), comp[i], 0.02)
        << "token " << tokens[i];
}

TEST(MlmGenerate, NearPointMassRarelyKeepsTruth) {
  // With P(truth) = 0.99 over 10 candidates the complement assigns the truth
  // (1-0.99)/9 ~ 0.00111, so a kept truth should be about 1 in 900 draws.
  std::vector<double> p(10, 0.01 / 9.0);
  p[3] = 0.99;
  auto comp = complement_distribution(p);
  EXPECT_NEAR(comp[3], 0.01 / 9.0, 1e-9);
  Rng rng(29);
  const int draws = 100000;
  int64_t kept = 0;
  for (int i = 0; i < draws; ++i) kept += (rng.categorical(comp) == 3);
  EXPECT_LT(kept / double(draws), 0.01);
}

TEST(MlmTraining, GradientsMatchFiniteDifferences) {
  auto cfg = tiny_encoder_config();
  cfg.vocab_size = 9;
  GeneratorModel<double> model, grads;
  Rng rng(30);
  model.init(cfg, rng);
  grads.zero_like(model);
  grads.set_zero();

  PackedBatch batch;
  batch.append({4, Vocabulary::kMask, 6, Vocabulary::kMask});
  batch.append({Vocabulary::kMask, 5});
  MaskedPositions masked;
  masked.packed_index = {1, 3, 4};
  masked.truth = {5, 7, 4};

  auto loss = [&]() {
    GeneratorModel<double> scratch;
    scratch.zero_like(model);
    scratch.set_zero();
    // loss only; gradients discarded
    return mlm_loss_and_grad(model, batch, masked, scratch, false, nullptr);
  };
  mlm_loss_and_grad(model, batch, masked, grads, false, nullptr);
  check_gradients(model.named_tensors(), grads.named_tensors(), loss, /*samples=*/6);
}

TEST(GeneratorOps, CounterAdvancesOnGeneratorWork) {
  auto model = tiny_generator(12, 31);
  Rng rng(32);
  const uint64_t before = generator_op_count();
  random_generate({4, 5}, {1, 0}, 12, rng);
  mlm_generate(model, {4, 5}, {0, 1}, rng);
  EXPECT_GE(generator_op_count(), before + 2);
}

}  // namespace
