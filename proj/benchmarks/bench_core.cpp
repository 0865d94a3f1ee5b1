#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "laqsum/bpe.hpp"
#include "laqsum/corpus.hpp"
#include "laqsum/ops.hpp"
#include "laqsum/rouge.hpp"
#include "laqsum/weak_labels.hpp"

namespace {

using laqsum::ad::Tensor;

Tensor<float> random_matrix(int rows, int cols, std::mt19937_64& rng, bool requires_grad = false) {
  std::normal_distribution<float> normal;
  std::vector<float> v(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (auto& x : v) x = normal(rng);
  return Tensor<float>::from({rows, cols}, std::move(v), requires_grad);
}

std::vector<int> random_ids(int n, int alphabet, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, alphabet - 1);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (auto& x : out) x = pick(rng);
  return out;
}

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  laqsum::ad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(laqsum::ad::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256);

void BM_MatmulBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  const auto a = random_matrix(n, n, rng, true), b = random_matrix(n, n, rng, true);
  for (auto _ : state) {
    auto loss = laqsum::ad::sum(laqsum::ad::matmul(a, b));
    loss.backward();
  }
}
BENCHMARK(BM_MatmulBackward)->RangeMultiplier(2)->Range(32, 128);

void BM_LcsPositions(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  const auto doc = random_ids(n, 50, rng), target = random_ids(n / 4, 50, rng);
  for (auto _ : state) benchmark::DoNotOptimize(laqsum::lcs_positions(doc, target));
  state.SetComplexityN(n);
}
BENCHMARK(BM_LcsPositions)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNSquared);

std::vector<std::string> synthetic_texts(int n) {
  laqsum::SyntheticSpec spec;
  const auto corpus = laqsum::generate_synthetic(spec, n);
  std::vector<std::string> out;
  for (const auto& ex : corpus.generic) {
    out.push_back(ex.document);
    out.push_back(ex.summary);
  }
  return out;
}

void BM_Rouge(benchmark::State& state) {
  const auto texts = synthetic_texts(64);
  const auto variant = static_cast<laqsum::RougeVariant>(state.range(0));
  std::vector<std::vector<std::string>> tokens;
  for (const auto& t : texts) tokens.push_back(laqsum::rouge_tokenize(t));
  for (auto _ : state)
    for (std::size_t i = 0; i + 1 < tokens.size(); i += 2)
      benchmark::DoNotOptimize(laqsum::rouge(variant, tokens[i + 1], tokens[i]));
  state.SetLabel(laqsum::to_string(variant));
}
BENCHMARK(BM_Rouge)->DenseRange(0, 3);

void BM_BpeTrain(benchmark::State& state) {
  const auto texts = synthetic_texts(200);
  for (auto _ : state)
    benchmark::DoNotOptimize(laqsum::MergeTable::train(texts, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_BpeTrain)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_BpeEncode(benchmark::State& state) {
  const auto texts = synthetic_texts(200);
  const auto table = laqsum::MergeTable::train(texts, 500);
  std::size_t bytes = 0;
  for (const auto& t : texts) bytes += t.size();
  for (auto _ : state)
    for (const auto& t : texts) benchmark::DoNotOptimize(table.encode_prefixed(t));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes));
}
BENCHMARK(BM_BpeEncode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
