#include <algorithm>
#include <cmath>
#include <limits>

#include "refneed/runtime/kernels.h"
#include "kernel_common.h"

namespace refneed::kernels {

namespace reference {

void gemm_f32(const float* a, const float* b, float* c, std::int64_t m, std::int64_t n,
              std::int64_t k) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      float sum = 0.0f;
      for (std::int64_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = sum;
    }
  }
}

void gemm_u8s8(const std::uint8_t* a, std::uint8_t a_zp, const std::int8_t* b,
               std::int8_t b_zp, std::int32_t* c, std::int64_t m, std::int64_t n,
               std::int64_t k) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      std::int32_t sum = 0;
      for (std::int64_t p = 0; p < k; ++p) {
        sum += (static_cast<std::int32_t>(a[i * k + p]) - a_zp) *
               (static_cast<std::int32_t>(b[p * n + j]) - b_zp);
      }
      c[i * n + j] = sum;
    }
  }
}

void softmax(float* x, std::int64_t rows, std::int64_t cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    float* row = x + r * cols;
    float max = -std::numeric_limits<float>::infinity();
    for (std::int64_t j = 0; j < cols; ++j) max = std::max(max, row[j]);
    float sum = 0.0f;
    for (std::int64_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - max);
      sum += row[j];
    }
    for (std::int64_t j = 0; j < cols; ++j) row[j] /= sum;
  }
}

void layer_norm(const float* x, const float* gamma, const float* beta, float* y,
                std::int64_t rows, std::int64_t cols, float epsilon) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* in = x + r * cols;
    float* out = y + r * cols;
    float mean = 0.0f;
    for (std::int64_t j = 0; j < cols; ++j) mean += in[j];
    mean /= static_cast<float>(cols);
    float var = 0.0f;
    for (std::int64_t j = 0; j < cols; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<float>(cols);
    const float inv = 1.0f / std::sqrt(var + epsilon);
    for (std::int64_t j = 0; j < cols; ++j) {
      out[j] = (in[j] - mean) * inv * gamma[j] + (beta ? beta[j] : 0.0f);
    }
  }
}

void unary(Unary op, const float* x, float* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] = apply_unary(op, x[i]);
}

void dynamic_quantize(const float* x, std::int64_t n, std::uint8_t* y, float* scale,
                      std::uint8_t* zero_point) {
  float lo = 0.0f, hi = 0.0f;
  for (std::int64_t i = 0; i < n; ++i) {
    lo = std::min(lo, x[i]);
    hi = std::max(hi, x[i]);
  }
  const float s = hi == lo ? 1.0f : (hi - lo) / 255.0f;
  const float zp = std::nearbyint(std::clamp(0.0f - lo / s, 0.0f, 255.0f));
  for (std::int64_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(x[i] / s) + zp, 0.0f, 255.0f));
  }
  *scale = s;
  *zero_point = static_cast<std::uint8_t>(zp);
}

}  // namespace reference

}  // namespace refneed::kernels
