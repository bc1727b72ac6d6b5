#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "refneed/runtime/kernels.h"
#include "test_util.h"

using namespace refneed;
using refneed::testing::Gen;

namespace {

std::vector<float> random_floats(Gen& g, std::size_t n, float scale = 1.0f) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>((g.uniform() * 2.0 - 1.0) * scale);
  return v;
}

// |a - b| <= tol * (1 + |b|)
void check_close(const std::vector<float>& a, const std::vector<float>& b, float tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::fabs(a[i] - b[i]) > tol * (1.0f + std::fabs(b[i]))) {
      FAIL("element " << i << ": " << a[i] << " vs " << b[i]);
    }
  }
}

}  // namespace

TEST_CASE("float gemm: parallel matches reference on random shapes") {
  Gen g(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::int64_t m = 1 + g.below(40), n = 1 + g.below(90), k = 1 + g.below(80);
    const bool transposed = g.chance(0.5);
    const int threads = 1 + static_cast<int>(g.below(4));
    const auto a = random_floats(g, m * k);
    const auto b = random_floats(g, k * n);  // K x N, or N x K when transposed
    std::vector<float> b_rows(k * n);
    for (std::int64_t p = 0; p < k; ++p) {
      for (std::int64_t j = 0; j < n; ++j) {
        b_rows[p * n + j] = transposed ? b[j * k + p] : b[p * n + j];
      }
    }
    std::vector<float> want(m * n), got(m * n);
    kernels::reference::gemm_f32(a.data(), b_rows.data(), want.data(), m, n, k);
    const auto packed = kernels::pack_f32(b.data(), k, n, transposed);
    kernels::parallel::gemm_f32(a.data(), packed, got.data(), m, threads);
    CAPTURE(m);
    CAPTURE(n);
    CAPTURE(k);
    check_close(got, want, 1e-5f);
  }
}

TEST_CASE("float gemm: reference against hand-computed product") {
  const std::vector<float> a{1, 2, 3, 4, 5, 6};       // 2x3
  const std::vector<float> b{7, 8, 9, 10, 11, 12};    // 3x2
  std::vector<float> c(4);
  kernels::reference::gemm_f32(a.data(), b.data(), c.data(), 2, 2, 3);
  CHECK(c == std::vector<float>{58, 64, 139, 154});
}

TEST_CASE("int8 gemm: parallel is bit-identical to reference") {
  Gen g(12);
  for (int trial = 0; trial < 80; ++trial) {
    const std::int64_t m = 1 + g.below(30), n = 1 + g.below(100), k = 1 + g.below(70);
    const auto a_zp = static_cast<std::uint8_t>(g.below(256));
    const auto b_zp = static_cast<std::int8_t>(static_cast<int>(g.below(256)) - 128);
    const int threads = 1 + static_cast<int>(g.below(4));
    std::vector<std::uint8_t> a(m * k);
    std::vector<std::int8_t> b(k * n);
    for (auto& x : a) x = static_cast<std::uint8_t>(g.below(256));
    for (auto& x : b) x = static_cast<std::int8_t>(static_cast<int>(g.below(256)) - 128);
    std::vector<std::int32_t> want(m * n), got(m * n);
    kernels::reference::gemm_u8s8(a.data(), a_zp, b.data(), b_zp, want.data(), m, n, k);
    const auto packed = kernels::pack_s8(b.data(), k, n, b_zp);
    kernels::parallel::gemm_u8s8(a.data(), a_zp, packed, got.data(), m, threads);
    CAPTURE(m);
    CAPTURE(n);
    CAPTURE(k);
    REQUIRE(got == want);
  }
}

TEST_CASE("int8 gemm: reference subtracts zero points") {
  const std::vector<std::uint8_t> a{130, 128, 255, 0};  // 2x2, zp 128
  const std::vector<std::int8_t> b{1, -2, 3, 4};        // 2x2, zp -1
  std::vector<std::int32_t> c(4);
  kernels::reference::gemm_u8s8(a.data(), 128, b.data(), -1, c.data(), 2, 2, 2);
  // (a - 128) = [[2, 0], [127, -128]], (b + 1) = [[2, -1], [4, 5]]
  CHECK(c == std::vector<std::int32_t>{4, -2, 254 - 512, -127 - 640});
}

TEST_CASE("dynamic quantization matches frozen onnxruntime outputs") {
  struct Case {
    std::vector<float> x;
    std::vector<std::uint8_t> y;
    std::uint32_t scale_bits;
    std::uint8_t zp;
  };
  const std::vector<Case> cases = {
      {{-1, 0, 2, 0.5f}, {0, 85, 255, 127}, 1010876609u, 85},
      {{0.25f, 1.5f, 3.0f, -0.125f, 0.75f}, {30, 132, 255, 0, 71}, 1011402953u, 10},
      {{0, 0, 0}, {0, 0, 0}, 1065353216u, 0},
      {{-2, -1, -0.5f}, {0, 128, 191}, 1006665857u, 255},
      {{1, 2, 4}, {64, 127, 255}, 1015054465u, 0},
  };
  for (const Case& c : cases) {
    for (int parallel = 0; parallel < 2; ++parallel) {
      std::vector<std::uint8_t> y(c.x.size());
      float scale = 0;
      std::uint8_t zp = 0;
      const auto n = static_cast<std::int64_t>(c.x.size());
      if (parallel) {
        kernels::parallel::dynamic_quantize(c.x.data(), n, y.data(), &scale, &zp, 3);
      } else {
        kernels::reference::dynamic_quantize(c.x.data(), n, y.data(), &scale, &zp);
      }
      std::uint32_t bits;
      std::memcpy(&bits, &scale, sizeof bits);
      CHECK(y == c.y);
      CHECK(bits == c.scale_bits);
      CHECK(zp == c.zp);
    }
  }
}

TEST_CASE("dynamic quantization: parallel equals reference on random data") {
  Gen g(13);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t n = 1 + g.below(5000);
    auto x = random_floats(g, n, static_cast<float>(0.01 + g.uniform() * 20));
    if (g.chance(0.2)) for (auto& v : x) v = std::fabs(v);
    std::vector<std::uint8_t> y1(n), y2(n);
    float s1, s2;
    std::uint8_t z1, z2;
    kernels::reference::dynamic_quantize(x.data(), n, y1.data(), &s1, &z1);
    kernels::parallel::dynamic_quantize(x.data(), n, y2.data(), &s2, &z2, 4);
    REQUIRE(y1 == y2);
    REQUIRE(s1 == s2);
    REQUIRE(z1 == z2);
    // Zero is exactly representable.
    const float zero_back = (static_cast<float>(z1) - z1) * s1;
    CHECK(zero_back == 0.0f);
  }
}

TEST_CASE("softmax, layer norm and unary ops: parallel matches reference") {
  Gen g(14);
  for (int trial = 0; trial < 30; ++trial) {
    const std::int64_t rows = 1 + g.below(20), cols = 1 + g.below(70);
    const int threads = 1 + static_cast<int>(g.below(4));
    const auto x = random_floats(g, rows * cols, 8.0f);

    auto s1 = x, s2 = x;
    kernels::reference::softmax(s1.data(), rows, cols);
    kernels::parallel::softmax(s2.data(), rows, cols, threads);
    check_close(s2, s1, 1e-6f);
    for (std::int64_t r = 0; r < rows; ++r) {
      double sum = 0;
      for (std::int64_t c = 0; c < cols; ++c) sum += s1[r * cols + c];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }

    const auto gamma = random_floats(g, cols), beta = random_floats(g, cols);
    std::vector<float> l1(rows * cols), l2(rows * cols);
    kernels::reference::layer_norm(x.data(), gamma.data(), beta.data(), l1.data(), rows, cols, 1e-5f);
    kernels::parallel::layer_norm(x.data(), gamma.data(), beta.data(), l2.data(), rows, cols, 1e-5f,
                                  threads);
    check_close(l2, l1, 1e-6f);

    for (auto op : {kernels::Unary::kErf, kernels::Unary::kTanh, kernels::Unary::kSigmoid,
                    kernels::Unary::kRelu, kernels::Unary::kExp, kernels::Unary::kNeg,
                    kernels::Unary::kAbs}) {
      std::vector<float> u1(x.size()), u2(x.size());
      kernels::reference::unary(op, x.data(), u1.data(), rows * cols);
      kernels::parallel::unary(op, x.data(), u2.data(), rows * cols, threads);
      check_close(u2, u1, 1e-6f);
    }
  }
}

TEST_CASE("layer norm: reference against closed form") {
  const std::vector<float> x{1, 2, 3, 4};
  const std::vector<float> gamma{1, 1, 2, 2}, beta{0, 0, 0, 1};
  std::vector<float> y(4);
  kernels::reference::layer_norm(x.data(), gamma.data(), beta.data(), y.data(), 1, 4, 0.0f);
  // mean 2.5, variance 1.25
  const double inv = 1.0 / std::sqrt(1.25);
  CHECK(y[0] == doctest::Approx(-1.5 * inv));
  CHECK(y[1] == doctest::Approx(-0.5 * inv));
  CHECK(y[2] == doctest::Approx(2 * 0.5 * inv));
  CHECK(y[3] == doctest::Approx(2 * 1.5 * inv + 1));
}
