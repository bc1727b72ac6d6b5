#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "kernel_common.h"
#include "refneed/runtime/kernels.h"

namespace refneed::kernels {

namespace {

constexpr std::int64_t kPanel = 32;  // columns per packed panel
constexpr int kRows = 6;             // rows per register tile

std::int64_t panels(std::int64_t n) { return (n + kPanel - 1) / kPanel; }

bool cpu_avx512_f32() {
  static const bool ok = __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("fma");
  return ok;
}

bool cpu_avx512_vnni() {
  static const bool ok = __builtin_cpu_supports("avx512f") &&
                         __builtin_cpu_supports("avx512bw") &&
                         __builtin_cpu_supports("avx512vnni");
  return ok;
}

// --- float tiles -------------------------------------------------------------

template <int MR>
__attribute__((target("avx512f,fma"))) void f32_tile_avx512(
    const float* a, std::int64_t lda, const float* panel, std::int64_t k, float* c,
    std::int64_t ldc, std::int64_t cols) {
  __m512 acc0[MR], acc1[MR];
  for (int r = 0; r < MR; ++r) acc0[r] = acc1[r] = _mm512_setzero_ps();
  for (std::int64_t p = 0; p < k; ++p) {
    const __m512 b0 = _mm512_loadu_ps(panel + p * kPanel);
    const __m512 b1 = _mm512_loadu_ps(panel + p * kPanel + 16);
    for (int r = 0; r < MR; ++r) {
      const __m512 av = _mm512_set1_ps(a[r * lda + p]);
      acc0[r] = _mm512_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm512_fmadd_ps(av, b1, acc1[r]);
    }
  }
  const __mmask16 m0 = cols >= 16 ? 0xFFFF : static_cast<__mmask16>((1u << cols) - 1);
  const __mmask16 m1 = cols >= 32   ? 0xFFFF
                       : cols <= 16 ? 0
                                    : static_cast<__mmask16>((1u << (cols - 16)) - 1);
  for (int r = 0; r < MR; ++r) {
    _mm512_mask_storeu_ps(c + r * ldc, m0, acc0[r]);
    _mm512_mask_storeu_ps(c + r * ldc + 16, m1, acc1[r]);
  }
}

void f32_tile_generic(const float* a, std::int64_t lda, int rows, const float* panel,
                      std::int64_t k, float* c, std::int64_t ldc, std::int64_t cols) {
  float acc[kRows][kPanel] = {};
  for (std::int64_t p = 0; p < k; ++p) {
    const float* b = panel + p * kPanel;
    for (int r = 0; r < rows; ++r) {
      const float av = a[r * lda + p];
      for (int j = 0; j < kPanel; ++j) acc[r][j] += av * b[j];
    }
  }
  for (int r = 0; r < rows; ++r) std::memcpy(c + r * ldc, acc[r], cols * sizeof(float));
}

void f32_tile(const float* a, std::int64_t lda, int rows, const float* panel,
              std::int64_t k, float* c, std::int64_t ldc, std::int64_t cols) {
  if (!cpu_avx512_f32()) {
    f32_tile_generic(a, lda, rows, panel, k, c, ldc, cols);
    return;
  }
  switch (rows) {
    case 6: f32_tile_avx512<6>(a, lda, panel, k, c, ldc, cols); break;
    case 5: f32_tile_avx512<5>(a, lda, panel, k, c, ldc, cols); break;
    case 4: f32_tile_avx512<4>(a, lda, panel, k, c, ldc, cols); break;
    case 3: f32_tile_avx512<3>(a, lda, panel, k, c, ldc, cols); break;
    case 2: f32_tile_avx512<2>(a, lda, panel, k, c, ldc, cols); break;
    default: f32_tile_avx512<1>(a, lda, panel, k, c, ldc, cols); break;
  }
}

// --- int8 tiles --------------------------------------------------------------

// Raw u8 x s8 sums (no zero-point handling) for a rows x 32 tile. `a` rows
// are k4 bytes long.
template <int MR>
__attribute__((target("avx512f,avx512bw,avx512vnni"))) void s8_tile_vnni(
    const std::uint8_t* a, std::int64_t lda, const std::int8_t* panel, std::int64_t groups,
    std::int32_t* out) {
  __m512i acc0[MR], acc1[MR];
  for (int r = 0; r < MR; ++r) acc0[r] = acc1[r] = _mm512_setzero_si512();
  for (std::int64_t g = 0; g < groups; ++g) {
    const __m512i b0 = _mm512_loadu_si512(panel + g * 128);
    const __m512i b1 = _mm512_loadu_si512(panel + g * 128 + 64);
    for (int r = 0; r < MR; ++r) {
      std::int32_t quad;
      std::memcpy(&quad, a + r * lda + 4 * g, 4);
      const __m512i av = _mm512_set1_epi32(quad);
      acc0[r] = _mm512_dpbusd_epi32(acc0[r], av, b0);
      acc1[r] = _mm512_dpbusd_epi32(acc1[r], av, b1);
    }
  }
  for (int r = 0; r < MR; ++r) {
    _mm512_storeu_si512(out + r * kPanel, acc0[r]);
    _mm512_storeu_si512(out + r * kPanel + 16, acc1[r]);
  }
}

void s8_tile_generic(const std::uint8_t* a, std::int64_t lda, int rows,
                     const std::int8_t* panel, std::int64_t groups, std::int32_t* out) {
  for (int r = 0; r < rows; ++r) {
    std::int32_t acc[kPanel] = {};
    for (std::int64_t g = 0; g < groups; ++g) {
      const std::uint8_t* av = a + r * lda + 4 * g;
      const std::int8_t* b = panel + g * 128;
      for (int j = 0; j < kPanel; ++j) {
        for (int q = 0; q < 4; ++q) acc[j] += static_cast<std::int32_t>(av[q]) * b[j * 4 + q];
      }
    }
    std::memcpy(out + r * kPanel, acc, sizeof(acc));
  }
}

void s8_tile(const std::uint8_t* a, std::int64_t lda, int rows, const std::int8_t* panel,
             std::int64_t groups, std::int32_t* out) {
  if (!cpu_avx512_vnni()) {
    s8_tile_generic(a, lda, rows, panel, groups, out);
    return;
  }
  switch (rows) {
    case 6: s8_tile_vnni<6>(a, lda, panel, groups, out); break;
    case 5: s8_tile_vnni<5>(a, lda, panel, groups, out); break;
    case 4: s8_tile_vnni<4>(a, lda, panel, groups, out); break;
    case 3: s8_tile_vnni<3>(a, lda, panel, groups, out); break;
    case 2: s8_tile_vnni<2>(a, lda, panel, groups, out); break;
    default: s8_tile_vnni<1>(a, lda, panel, groups, out); break;
  }
}

// Bit-identical to the scalar loop: true division, round-half-even, clamp.
// Single pass over cache-resident activations beats an OpenMP split here.
__attribute__((target("avx512f,avx512bw"))) void dynamic_quantize_avx512(
    const float* x, std::int64_t n, std::uint8_t* y, float* scale, std::uint8_t* zero_point) {
  __m512 vlo = _mm512_setzero_ps(), vhi = _mm512_setzero_ps();
  std::int64_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m512 v = _mm512_loadu_ps(x + i);
    vlo = _mm512_min_ps(v, vlo);  // NaN lanes keep the running value
    vhi = _mm512_max_ps(v, vhi);
  }
  float lo = _mm512_reduce_min_ps(vlo), hi = _mm512_reduce_max_ps(vhi);
  for (std::int64_t j = i; j < n; ++j) {
    lo = std::min(lo, x[j]);
    hi = std::max(hi, x[j]);
  }
  const float s = hi == lo ? 1.0f : (hi - lo) / 255.0f;
  const float zp = std::nearbyint(std::clamp(0.0f - lo / s, 0.0f, 255.0f));
  const __m512 vs = _mm512_set1_ps(s), vzp = _mm512_set1_ps(zp);
  const __m512 v0 = _mm512_setzero_ps(), v255 = _mm512_set1_ps(255.0f);
  for (i = 0; i < n; i += 16) {
    const __mmask16 m = n - i >= 16 ? 0xFFFF : static_cast<__mmask16>((1u << (n - i)) - 1);
    const __m512 v = _mm512_maskz_loadu_ps(m, x + i);
    __m512 q = _mm512_roundscale_ps(_mm512_div_ps(v, vs), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    q = _mm512_min_ps(_mm512_max_ps(_mm512_add_ps(q, vzp), v0), v255);
    _mm512_mask_cvtusepi32_storeu_epi8(y + i, m, _mm512_cvtps_epu32(q));
  }
  *scale = s;
  *zero_point = static_cast<std::uint8_t>(zp);
}

}  // namespace

bool has_avx512_f32() { return cpu_avx512_f32(); }
bool has_avx512_vnni() { return cpu_avx512_vnni(); }

PackedF32 pack_f32(const float* b, std::int64_t k, std::int64_t n, bool transposed) {
  PackedF32 packed;
  packed.k = k;
  packed.n = n;
  packed.data.assign(panels(n) * k * kPanel, 0.0f);
  for (std::int64_t p = 0; p < panels(n); ++p) {
    for (std::int64_t kk = 0; kk < k; ++kk) {
      float* dst = packed.data.data() + (p * k + kk) * kPanel;
      for (std::int64_t jj = 0; jj < kPanel; ++jj) {
        const std::int64_t j = p * kPanel + jj;
        if (j < n) dst[jj] = transposed ? b[j * k + kk] : b[kk * n + j];
      }
    }
  }
  return packed;
}

PackedS8 pack_s8(const std::int8_t* b, std::int64_t k, std::int64_t n,
                 std::int8_t zero_point) {
  PackedS8 packed;
  packed.k = k;
  packed.n = n;
  packed.k4 = (k + 3) / 4 * 4;
  packed.zero_point = zero_point;
  const std::int64_t groups = packed.k4 / 4;
  packed.data.assign(panels(n) * groups * kPanel * 4, 0);
  packed.col_sums.assign(n, 0);
  for (std::int64_t kk = 0; kk < k; ++kk) {
    for (std::int64_t j = 0; j < n; ++j) {
      const std::int64_t p = j / kPanel, jj = j % kPanel, g = kk / 4, q = kk % 4;
      packed.data[((p * groups + g) * kPanel + jj) * 4 + q] = b[kk * n + j];
      packed.col_sums[j] += b[kk * n + j];
    }
  }
  return packed;
}

namespace parallel {

void gemm_f32(const float* a, const PackedF32& b, float* c, std::int64_t m, int threads) {
  const std::int64_t k = b.k, n = b.n;
  const std::int64_t row_blocks = (m + kRows - 1) / kRows;
  const std::int64_t tiles = row_blocks * panels(n);
#pragma omp parallel for num_threads(threads) if (threads > 1 && tiles > 1) schedule(static)
  for (std::int64_t t = 0; t < tiles; ++t) {
    const std::int64_t rb = t / panels(n), p = t % panels(n);
    const std::int64_t r0 = rb * kRows;
    const int rows = static_cast<int>(std::min<std::int64_t>(kRows, m - r0));
    const std::int64_t cols = std::min(kPanel, n - p * kPanel);
    f32_tile(a + r0 * k, k, rows, b.data.data() + p * k * kPanel, k, c + r0 * n + p * kPanel,
             n, cols);
  }
}

void gemm_u8s8(const std::uint8_t* a, std::uint8_t a_zp, const PackedS8& b,
               std::int32_t* c, std::int64_t m, int threads) {
  const std::int64_t k = b.k, n = b.n, k4 = b.k4, groups = k4 / 4;
  std::vector<std::uint8_t> padded;
  const std::uint8_t* rows_a = a;
  if (k4 != k) {
    padded.assign(m * k4, 0);
    for (std::int64_t i = 0; i < m; ++i) std::memcpy(&padded[i * k4], a + i * k, k);
    rows_a = padded.data();
  }
  std::vector<std::int32_t> row_sums(m, 0);
  for (std::int64_t i = 0; i < m; ++i) {
    std::int32_t s = 0;
    for (std::int64_t p = 0; p < k; ++p) s += a[i * k + p];
    row_sums[i] = s;
  }
  const std::int32_t azp = a_zp, bzp = b.zero_point;
  const std::int32_t both = static_cast<std::int32_t>(k) * azp * bzp;
  const std::int64_t row_blocks = (m + kRows - 1) / kRows;
  const std::int64_t tiles = row_blocks * panels(n);
#pragma omp parallel for num_threads(threads) if (threads > 1 && tiles > 1) schedule(static)
  for (std::int64_t t = 0; t < tiles; ++t) {
    const std::int64_t rb = t / panels(n), p = t % panels(n);
    const std::int64_t r0 = rb * kRows;
    const int rows = static_cast<int>(std::min<std::int64_t>(kRows, m - r0));
    const std::int64_t cols = std::min(kPanel, n - p * kPanel);
    alignas(64) std::int32_t tile[kRows * kPanel];
    s8_tile(rows_a + r0 * k4, k4, rows, b.data.data() + p * groups * kPanel * 4, groups, tile);
    for (int r = 0; r < rows; ++r) {
      std::int32_t* out = c + (r0 + r) * n + p * kPanel;
      const std::int32_t row_term = bzp * row_sums[r0 + r];
      for (std::int64_t j = 0; j < cols; ++j) {
        out[j] = tile[r * kPanel + j] - azp * b.col_sums[p * kPanel + j] - row_term + both;
      }
    }
  }
}

void softmax(float* x, std::int64_t rows, std::int64_t cols, int threads) {
#pragma omp parallel for num_threads(threads) if (threads > 1 && rows > 1) schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) reference::softmax(x + r * cols, 1, cols);
}

void layer_norm(const float* x, const float* gamma, const float* beta, float* y,
                std::int64_t rows, std::int64_t cols, float epsilon, int threads) {
#pragma omp parallel for num_threads(threads) if (threads > 1 && rows > 1) schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    reference::layer_norm(x + r * cols, gamma, beta, y + r * cols, 1, cols, epsilon);
  }
}

void unary(Unary op, const float* x, float* y, std::int64_t n, int threads) {
#pragma omp parallel for num_threads(threads) if (threads > 1 && n > 4096) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) y[i] = apply_unary(op, x[i]);
}

void dynamic_quantize(const float* x, std::int64_t n, std::uint8_t* y, float* scale,
                      std::uint8_t* zero_point, int threads) {
  if (cpu_avx512_f32() && __builtin_cpu_supports("avx512bw")) {
    dynamic_quantize_avx512(x, n, y, scale, zero_point);
    return;
  }
  float lo = 0.0f, hi = 0.0f;
#pragma omp parallel for num_threads(threads) if (threads > 1 && n > 4096) \
    reduction(min : lo) reduction(max : hi) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    lo = std::min(lo, x[i]);
    hi = std::max(hi, x[i]);
  }
  const float s = hi == lo ? 1.0f : (hi - lo) / 255.0f;
  const float zp = std::nearbyint(std::clamp(0.0f - lo / s, 0.0f, 255.0f));
#pragma omp parallel for num_threads(threads) if (threads > 1 && n > 4096) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(x[i] / s) + zp, 0.0f, 255.0f));
  }
  *scale = s;
  *zero_point = static_cast<std::uint8_t>(zp);
}

}  // namespace parallel

}  // namespace refneed::kernels
