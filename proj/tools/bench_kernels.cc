// Reference (serial) vs parallel kernels, and the whole graph in both modes.
// Thread count is the benchmark argument where one applies.

#include <benchmark/benchmark.h>

#include <random>

#include "refneed/classifier/classifier.h"
#include "refneed/runtime/kernels.h"

using namespace refneed;
namespace k = refneed::kernels;

namespace {

std::vector<float> random_floats(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

std::vector<std::int8_t> random_s8(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<std::int8_t> v(n);
  for (auto& x : v) x = static_cast<std::int8_t>(static_cast<int>(rng() % 255) - 127);
  return v;
}

// One DistilBERT-sized projection: 128 tokens x 768 -> 768.
constexpr std::int64_t kM = 128, kK = 768, kN = 768;

void BM_GemmF32Reference(benchmark::State& state) {
  const auto a = random_floats(kM * kK, 1), b = random_floats(kK * kN, 2);
  std::vector<float> c(kM * kN);
  for (auto _ : state) {
    k::reference::gemm_f32(a.data(), b.data(), c.data(), kM, kN, kK);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * kM * kN * kK);
}
BENCHMARK(BM_GemmF32Reference)->Unit(benchmark::kMillisecond);

void BM_GemmF32Parallel(benchmark::State& state) {
  const auto a = random_floats(kM * kK, 1), b = random_floats(kK * kN, 2);
  const k::PackedF32 packed = k::pack_f32(b.data(), kK, kN, false);
  std::vector<float> c(kM * kN);
  for (auto _ : state) {
    k::parallel::gemm_f32(a.data(), packed, c.data(), kM, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * kM * kN * kK);
}
BENCHMARK(BM_GemmF32Parallel)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_GemmU8S8Reference(benchmark::State& state) {
  std::vector<std::uint8_t> a(kM * kK);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<std::uint8_t>(i * 31 % 251);
  const auto b = random_s8(kK * kN, 3);
  std::vector<std::int32_t> c(kM * kN);
  for (auto _ : state) {
    k::reference::gemm_u8s8(a.data(), 128, b.data(), 0, c.data(), kM, kN, kK);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * kM * kN * kK);
}
BENCHMARK(BM_GemmU8S8Reference)->Unit(benchmark::kMillisecond);

void BM_GemmU8S8Parallel(benchmark::State& state) {
  std::vector<std::uint8_t> a(kM * kK);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<std::uint8_t>(i * 31 % 251);
  const auto b = random_s8(kK * kN, 3);
  const k::PackedS8 packed = k::pack_s8(b.data(), kK, kN, 0);
  std::vector<std::int32_t> c(kM * kN);
  for (auto _ : state) {
    k::parallel::gemm_u8s8(a.data(), 128, packed, c.data(), kM, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * kM * kN * kK);
}
BENCHMARK(BM_GemmU8S8Parallel)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_DynamicQuantizeReference(benchmark::State& state) {
  const auto x = random_floats(kM * kK, 4);
  std::vector<std::uint8_t> y(x.size());
  float s;
  std::uint8_t zp;
  for (auto _ : state) {
    k::reference::dynamic_quantize(x.data(), x.size(), y.data(), &s, &zp);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_DynamicQuantizeReference)->Unit(benchmark::kMicrosecond);

void BM_DynamicQuantizeParallel(benchmark::State& state) {
  const auto x = random_floats(kM * kK, 4);
  std::vector<std::uint8_t> y(x.size());
  float s;
  std::uint8_t zp;
  for (auto _ : state) {
    k::parallel::dynamic_quantize(x.data(), x.size(), y.data(), &s, &zp, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_DynamicQuantizeParallel)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_SoftmaxReference(benchmark::State& state) {
  auto x = random_floats(12 * kM * kM, 5);
  for (auto _ : state) {
    k::reference::softmax(x.data(), 12 * kM, kM);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_SoftmaxReference)->Unit(benchmark::kMicrosecond);

void BM_SoftmaxParallel(benchmark::State& state) {
  auto x = random_floats(12 * kM * kM, 5);
  for (auto _ : state) {
    k::parallel::softmax(x.data(), 12 * kM, kM, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_SoftmaxParallel)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

ClassifierInput sample_input() {
  return {"en", "History",
          "The bridge was completed in 1932 after four years of construction and remained the "
          "longest in the region until 1965.",
          "It was designed by a local engineering firm.", "Plans for a crossing existed since 1890."};
}

void graph_bench(benchmark::State& state, const char* bundle, runtime::ExecMode mode) {
  const Classifier c = Classifier::from_bundle(std::string(REFNEED_SOURCE_DIR) + "/" + bundle,
                                               static_cast<int>(state.range(0)), mode);
  const ClassifierInput in = sample_input();
  for (auto _ : state) benchmark::DoNotOptimize(c.predict(in).prob);
}

void BM_TinyGraphReference(benchmark::State& state) {
  graph_bench(state, "tests/fixtures/bundle_tiny", runtime::ExecMode::kReference);
}
BENCHMARK(BM_TinyGraphReference)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_TinyGraphParallel(benchmark::State& state) {
  graph_bench(state, "tests/fixtures/bundle_tiny", runtime::ExecMode::kParallel);
}
BENCHMARK(BM_TinyGraphParallel)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_TinyInt8GraphParallel(benchmark::State& state) {
  graph_bench(state, "tests/fixtures/bundle_tiny_int8", runtime::ExecMode::kParallel);
}
BENCHMARK(BM_TinyInt8GraphParallel)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
