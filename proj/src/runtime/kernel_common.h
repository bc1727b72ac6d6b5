#ifndef REFNEED_SRC_RUNTIME_KERNEL_COMMON_H_
#define REFNEED_SRC_RUNTIME_KERNEL_COMMON_H_

#include <cmath>

#include "refneed/runtime/kernels.h"

namespace refneed::kernels {

inline float apply_unary(Unary op, float v) {
  switch (op) {
    case Unary::kErf: return std::erf(v);
    case Unary::kTanh: return std::tanh(v);
    case Unary::kSigmoid:
      return v >= 0 ? 1.0f / (1.0f + std::exp(-v)) : std::exp(v) / (1.0f + std::exp(v));
    case Unary::kRelu: return v > 0 ? v : 0.0f;
    case Unary::kExp: return std::exp(v);
    case Unary::kLog: return std::log(v);
    case Unary::kSqrt: return std::sqrt(v);
    case Unary::kNeg: return -v;
    case Unary::kAbs: return std::fabs(v);
  }
  return v;
}

}  // namespace refneed::kernels

#endif  // REFNEED_SRC_RUNTIME_KERNEL_COMMON_H_
