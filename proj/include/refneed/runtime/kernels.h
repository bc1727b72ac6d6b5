#ifndef REFNEED_RUNTIME_KERNELS_H_
#define REFNEED_RUNTIME_KERNELS_H_

#include <cstdint>
#include <memory>
#include <vector>

// Compute kernels behind the graph runtime. `reference` holds plain serial
// loops kept as the testing oracle; `parallel` holds the production versions
// (panel-packed GEMMs with AVX-512 paths when the CPU has them, OpenMP across
// rows). Both produce the same results: bit-identical for integer kernels,
// within float rounding otherwise.
namespace refneed::kernels {

enum class Unary { kErf, kTanh, kSigmoid, kRelu, kExp, kLog, kSqrt, kNeg, kAbs };

// Right-hand GEMM operand B (K x N) rearranged into 32-column panels.
struct PackedF32 {
  std::int64_t k = 0;
  std::int64_t n = 0;
  std::vector<float> data;  // [ceil(n/32)][k][32], zero padded
};

// int8 B (K x N) rearranged for u8 x s8 dot products: 32-column panels of
// 4-deep K groups, plus per-column sums for zero-point correction.
struct PackedS8 {
  std::int64_t k = 0;
  std::int64_t n = 0;
  std::int64_t k4 = 0;  // k rounded up to a multiple of 4
  std::int8_t zero_point = 0;
  std::vector<std::int8_t> data;  // [ceil(n/32)][k4/4][32][4]
  std::vector<std::int32_t> col_sums;
};

// `b` is K x N row-major, or N x K when `transposed`.
PackedF32 pack_f32(const float* b, std::int64_t k, std::int64_t n, bool transposed);
PackedS8 pack_s8(const std::int8_t* b, std::int64_t k, std::int64_t n,
                 std::int8_t zero_point);

// True when the AVX-512 code paths are in use on this machine.
bool has_avx512_f32();
bool has_avx512_vnni();

namespace reference {

// C (M x N) = A (M x K) * B (K x N).
void gemm_f32(const float* a, const float* b, float* c, std::int64_t m, std::int64_t n,
              std::int64_t k);
// C = (A - a_zp) * (B - b_zp) accumulated in int32.
void gemm_u8s8(const std::uint8_t* a, std::uint8_t a_zp, const std::int8_t* b,
               std::int8_t b_zp, std::int32_t* c, std::int64_t m, std::int64_t n,
               std::int64_t k);
// Row-wise softmax over `cols`, in place.
void softmax(float* x, std::int64_t rows, std::int64_t cols);
void layer_norm(const float* x, const float* gamma, const float* beta, float* y,
                std::int64_t rows, std::int64_t cols, float epsilon);
void unary(Unary op, const float* x, float* y, std::int64_t n);
// Per-tensor asymmetric uint8 quantization over the range [min(0,x), max(0,x)].
void dynamic_quantize(const float* x, std::int64_t n, std::uint8_t* y, float* scale,
                      std::uint8_t* zero_point);

}  // namespace reference

namespace parallel {

void gemm_f32(const float* a, const PackedF32& b, float* c, std::int64_t m, int threads);
void gemm_u8s8(const std::uint8_t* a, std::uint8_t a_zp, const PackedS8& b,
               std::int32_t* c, std::int64_t m, int threads);
void softmax(float* x, std::int64_t rows, std::int64_t cols, int threads);
void layer_norm(const float* x, const float* gamma, const float* beta, float* y,
                std::int64_t rows, std::int64_t cols, float epsilon, int threads);
void unary(Unary op, const float* x, float* y, std::int64_t n, int threads);
void dynamic_quantize(const float* x, std::int64_t n, std::uint8_t* y, float* scale,
                      std::uint8_t* zero_point, int threads);

}  // namespace parallel

}  // namespace refneed::kernels

#endif  // REFNEED_RUNTIME_KERNELS_H_
