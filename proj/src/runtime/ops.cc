#include "ops.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "refneed/common/errors.h"
#include "refneed/runtime/kernels.h"

namespace refneed::runtime {

std::int64_t Attributes::get_int(const std::string& name, std::int64_t fallback) const {
  auto it = map_.find(name);
  return it == map_.end() ? fallback : it->second.i;
}

float Attributes::get_float(const std::string& name, float fallback) const {
  auto it = map_.find(name);
  return it == map_.end() ? fallback : it->second.f;
}

std::vector<std::int64_t> Attributes::get_ints(const std::string& name) const {
  auto it = map_.find(name);
  return it == map_.end() ? std::vector<std::int64_t>{} : it->second.ints;
}

std::vector<float> Attributes::get_floats(const std::string& name) const {
  auto it = map_.find(name);
  return it == map_.end() ? std::vector<float>{} : it->second.floats;
}

const Tensor* Attributes::get_tensor(const std::string& name) const {
  auto it = map_.find(name);
  return it == map_.end() || it->second.kind != Attribute::Kind::kTensor ? nullptr
                                                                         : &it->second.t;
}

const Tensor& OpContext::input(std::size_t i) const {
  if (!has(i)) {
    throw BackendError(node.op_type + " '" + node.name + "': missing input " +
                       std::to_string(i));
  }
  return *in[i];
}

const Attributes& OpContext::attrs() const { return node.attrs; }

namespace {

[[noreturn]] void fail(const OpContext& ctx, const std::string& msg) {
  throw BackendError(ctx.node.op_type + " '" + ctx.node.name + "': " + msg);
}

std::int64_t normalize_axis(const OpContext& ctx, std::int64_t axis, std::int64_t rank) {
  if (axis < -rank || axis >= std::max<std::int64_t>(rank, 1)) {
    fail(ctx, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return axis < 0 ? axis + rank : axis;
}

std::vector<std::int64_t> ints_of(const Tensor& t) {
  std::vector<std::int64_t> out(t.size());
  for (std::int64_t i = 0; i < t.size(); ++i) out[i] = t.int_at(i);
  return out;
}

Shape strides_of(const Shape& shape) {
  Shape s(shape.size(), 1);
  for (std::int64_t i = static_cast<std::int64_t>(shape.size()) - 2; i >= 0; --i) {
    s[i] = s[i + 1] * shape[i + 1];
  }
  return s;
}

template <typename F>
void dispatch_numeric(const OpContext& ctx, DType t, F&& f) {
  switch (t) {
    case DType::kFloat: f(float{}); break;
    case DType::kDouble: f(double{}); break;
    case DType::kInt32: f(std::int32_t{}); break;
    case DType::kInt64: f(std::int64_t{}); break;
    case DType::kUInt8: f(std::uint8_t{}); break;
    case DType::kInt8: f(std::int8_t{}); break;
    default: fail(ctx, std::string("unsupported element type ") + dtype_name(t));
  }
}

template <typename F>
void dispatch_all(DType t, F&& f) {
  switch (t) {
    case DType::kFloat: f(float{}); break;
    case DType::kDouble: f(double{}); break;
    case DType::kInt32: f(std::int32_t{}); break;
    case DType::kInt64: f(std::int64_t{}); break;
    case DType::kUInt8: f(std::uint8_t{}); break;
    case DType::kInt8: f(std::int8_t{}); break;
    case DType::kBool: f(bool{}); break;
  }
}

// --- strided iteration ---------------------------------------------------------

// Output shape plus, per operand, an element stride for every output axis
// (0 where the operand is broadcast) and a base offset.
struct StridedPlan {
  Shape out;
  std::vector<Shape> strides;
  std::vector<std::int64_t> base;
};

// Calls fn(out_pos, len, offsets, steps) for each contiguous run along the
// last output axis.
template <typename Fn>
void for_each_run(const StridedPlan& plan, Fn&& fn) {
  const std::size_t nin = plan.strides.size();
  const std::int64_t total = shape_size(plan.out);
  std::vector<std::int64_t> off(plan.base);
  if (nin == 0) off.clear();
  if (total == 0) return;
  const std::size_t rank = plan.out.size();
  if (rank == 0) {
    std::vector<std::int64_t> steps(nin, 0);
    fn(0, 1, off.data(), steps.data());
    return;
  }
  std::vector<std::int64_t> steps(nin);
  for (std::size_t k = 0; k < nin; ++k) steps[k] = plan.strides[k][rank - 1];
  const std::int64_t inner = plan.out[rank - 1];
  std::vector<std::int64_t> counter(rank, 0);
  for (std::int64_t pos = 0; pos < total; pos += inner) {
    fn(pos, inner, off.data(), steps.data());
    for (std::int64_t axis = static_cast<std::int64_t>(rank) - 2; axis >= 0; --axis) {
      if (++counter[axis] < plan.out[axis]) {
        for (std::size_t k = 0; k < nin; ++k) off[k] += plan.strides[k][axis];
        break;
      }
      for (std::size_t k = 0; k < nin; ++k) {
        off[k] -= plan.strides[k][axis] * (plan.out[axis] - 1);
      }
      counter[axis] = 0;
    }
  }
}

Shape broadcast_shape(const OpContext& ctx, const std::vector<const Shape*>& shapes) {
  std::size_t rank = 0;
  for (const Shape* s : shapes) rank = std::max(rank, s->size());
  Shape out(rank, 1);
  for (const Shape* s : shapes) {
    const std::size_t pad = rank - s->size();
    for (std::size_t i = 0; i < s->size(); ++i) {
      const std::int64_t d = (*s)[i];
      std::int64_t& o = out[pad + i];
      if (d == o || d == 1) continue;
      if (o == 1) {
        o = d;
      } else {
        fail(ctx, "shapes " + shape_string(*shapes[0]) + " and " + shape_string(*s) +
                      " are not broadcastable");
      }
    }
  }
  return out;
}

Shape broadcast_strides(const Shape& in, const Shape& out) {
  Shape s(out.size(), 0);
  const Shape own = strides_of(in);
  const std::size_t pad = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) s[pad + i] = in[i] == 1 ? 0 : own[i];
  return s;
}

StridedPlan broadcast_plan(const OpContext& ctx, const std::vector<const Tensor*>& ins) {
  std::vector<const Shape*> shapes;
  for (const Tensor* t : ins) shapes.push_back(&t->shape());
  StridedPlan plan;
  plan.out = broadcast_shape(ctx, shapes);
  for (const Tensor* t : ins) {
    plan.strides.push_back(broadcast_strides(t->shape(), plan.out));
    plan.base.push_back(0);
  }
  return plan;
}

// Copies elements of `in` selected by a one-operand plan into a new tensor.
Tensor strided_copy(const Tensor& in, const StridedPlan& plan) {
  Tensor out(in.dtype(), plan.out);
  dispatch_all(in.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* src = in.data<T>();
    T* dst = out.data<T>();
    for_each_run(plan, [&](std::int64_t pos, std::int64_t len, const std::int64_t* off,
                           const std::int64_t* step) {
      const T* s = src + off[0];
      if (step[0] == 1) {
        std::copy(s, s + len, dst + pos);
      } else {
        for (std::int64_t l = 0; l < len; ++l) dst[pos + l] = s[l * step[0]];
      }
    });
  });
  return out;
}

// --- elementwise ----------------------------------------------------------------

enum class Arith { kAdd, kSub, kMul, kDiv, kPow };

template <typename T>
T arith(Arith op, T a, T b) {
  switch (op) {
    case Arith::kAdd: return a + b;
    case Arith::kSub: return a - b;
    case Arith::kMul: return a * b;
    case Arith::kDiv:
      if constexpr (std::is_integral_v<T>) {
        return b == 0 ? T{0} : static_cast<T>(a / b);
      } else {
        return a / b;
      }
    case Arith::kPow:
      return static_cast<T>(std::pow(static_cast<double>(a), static_cast<double>(b)));
  }
  return a;
}

template <Arith kOp>
void op_arith(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const Tensor& b = ctx.input(1);
  if (a.dtype() != b.dtype()) fail(ctx, "operand types differ");
  const StridedPlan plan = broadcast_plan(ctx, {&a, &b});
  Tensor out(a.dtype(), plan.out);
  dispatch_numeric(ctx, a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = a.data<T>();
    const T* pb = b.data<T>();
    T* po = out.data<T>();
    for_each_run(plan, [&](std::int64_t pos, std::int64_t len, const std::int64_t* off,
                           const std::int64_t* step) {
      const T* x = pa + off[0];
      const T* y = pb + off[1];
      T* o = po + pos;
      if (step[0] == 1 && step[1] == 1) {
        for (std::int64_t l = 0; l < len; ++l) o[l] = arith<T>(kOp, x[l], y[l]);
      } else if (step[0] == 1 && step[1] == 0) {
        const T yv = *y;
        for (std::int64_t l = 0; l < len; ++l) o[l] = arith<T>(kOp, x[l], yv);
      } else {
        for (std::int64_t l = 0; l < len; ++l) {
          o[l] = arith<T>(kOp, x[l * step[0]], y[l * step[1]]);
        }
      }
    });
  });
  ctx.out[0] = std::move(out);
}

enum class Compare { kEq, kGt, kGe, kLt, kLe };

template <Compare kOp>
void op_compare(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const Tensor& b = ctx.input(1);
  if (a.dtype() != b.dtype()) fail(ctx, "operand types differ");
  const StridedPlan plan = broadcast_plan(ctx, {&a, &b});
  Tensor out(DType::kBool, plan.out);
  bool* po = out.data<bool>();
  dispatch_all(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = a.data<T>();
    const T* pb = b.data<T>();
    for_each_run(plan, [&](std::int64_t pos, std::int64_t len, const std::int64_t* off,
                           const std::int64_t* step) {
      for (std::int64_t l = 0; l < len; ++l) {
        const T x = pa[off[0] + l * step[0]];
        const T y = pb[off[1] + l * step[1]];
        bool r = false;
        switch (kOp) {
          case Compare::kEq: r = x == y; break;
          case Compare::kGt: r = x > y; break;
          case Compare::kGe: r = x >= y; break;
          case Compare::kLt: r = x < y; break;
          case Compare::kLe: r = x <= y; break;
        }
        po[pos + l] = r;
      }
    });
  });
  ctx.out[0] = std::move(out);
}

template <bool kAnd>
void op_logic(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const Tensor& b = ctx.input(1);
  const StridedPlan plan = broadcast_plan(ctx, {&a, &b});
  Tensor out(DType::kBool, plan.out);
  const bool* pa = a.data<bool>();
  const bool* pb = b.data<bool>();
  bool* po = out.data<bool>();
  for_each_run(plan, [&](std::int64_t pos, std::int64_t len, const std::int64_t* off,
                         const std::int64_t* step) {
    for (std::int64_t l = 0; l < len; ++l) {
      const bool x = pa[off[0] + l * step[0]], y = pb[off[1] + l * step[1]];
      po[pos + l] = kAnd ? (x && y) : (x || y);
    }
  });
  ctx.out[0] = std::move(out);
}

void op_not(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  Tensor out(DType::kBool, a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out.data<bool>()[i] = !a.data<bool>()[i];
  ctx.out[0] = std::move(out);
}

void op_isnan(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  Tensor out(DType::kBool, a.shape());
  if (a.dtype() == DType::kFloat) {
    for (std::int64_t i = 0; i < a.size(); ++i) out.data<bool>()[i] = std::isnan(a.data<float>()[i]);
  } else if (a.dtype() == DType::kDouble) {
    for (std::int64_t i = 0; i < a.size(); ++i) out.data<bool>()[i] = std::isnan(a.data<double>()[i]);
  } else {
    fail(ctx, "IsNaN needs a floating-point input");
  }
  ctx.out[0] = std::move(out);
}

void op_where(OpContext& ctx) {
  const Tensor& c = ctx.input(0);
  const Tensor& x = ctx.input(1);
  const Tensor& y = ctx.input(2);
  if (x.dtype() != y.dtype()) fail(ctx, "operand types differ");
  const StridedPlan plan = broadcast_plan(ctx, {&c, &x, &y});
  Tensor out(x.dtype(), plan.out);
  const bool* pc = c.data<bool>();
  dispatch_all(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = x.data<T>();
    const T* py = y.data<T>();
    T* po = out.data<T>();
    for_each_run(plan, [&](std::int64_t pos, std::int64_t len, const std::int64_t* off,
                           const std::int64_t* step) {
      for (std::int64_t l = 0; l < len; ++l) {
        po[pos + l] = pc[off[0] + l * step[0]] ? px[off[1] + l * step[1]]
                                                : py[off[2] + l * step[2]];
      }
    });
  });
  ctx.out[0] = std::move(out);
}

template <kernels::Unary kOp>
void op_unary(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  if (a.dtype() == DType::kFloat) {
    Tensor out(DType::kFloat, a.shape());
    if (ctx.mode == ExecMode::kParallel) {
      kernels::parallel::unary(kOp, a.data<float>(), out.data<float>(), a.size(), ctx.threads);
    } else {
      kernels::reference::unary(kOp, a.data<float>(), out.data<float>(), a.size());
    }
    ctx.out[0] = std::move(out);
    return;
  }
  // Integer inputs: only the sign/rectifier ops are meaningful.
  if (kOp != kernels::Unary::kNeg && kOp != kernels::Unary::kAbs &&
      kOp != kernels::Unary::kRelu) {
    fail(ctx, std::string("unsupported element type ") + dtype_name(a.dtype()));
  }
  Tensor out(a.dtype(), a.shape());
  dispatch_numeric(ctx, a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* p = a.data<T>();
    T* o = out.data<T>();
    for (std::int64_t i = 0; i < a.size(); ++i) {
      if (kOp == kernels::Unary::kNeg) o[i] = static_cast<T>(-p[i]);
      if (kOp == kernels::Unary::kAbs) o[i] = p[i] < 0 ? static_cast<T>(-p[i]) : p[i];
      if (kOp == kernels::Unary::kRelu) o[i] = p[i] > 0 ? p[i] : T{0};
    }
  });
  ctx.out[0] = std::move(out);
}

// --- shape manipulation ----------------------------------------------------------

void op_identity(OpContext& ctx) { ctx.out[0] = ctx.input(0); }

void op_cast(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const DType to = dtype_from_onnx(static_cast<int>(ctx.attrs().get_int("to", 1)));
  if (to == a.dtype()) {
    ctx.out[0] = a;
    return;
  }
  Tensor out(to, a.shape());
  dispatch_all(a.dtype(), [&](auto from_tag) {
    using From = decltype(from_tag);
    const From* src = a.data<From>();
    dispatch_all(to, [&](auto to_tag) {
      using To = decltype(to_tag);
      To* dst = out.data<To>();
      for (std::int64_t i = 0; i < a.size(); ++i) {
        if constexpr (std::is_same_v<To, bool>) {
          dst[i] = src[i] != From{0};
        } else if constexpr (std::is_floating_point_v<From> && std::is_integral_v<To>) {
          const From v = src[i];
          dst[i] = std::isfinite(v) ? static_cast<To>(v) : To{0};
        } else {
          dst[i] = static_cast<To>(src[i]);
        }
      }
    });
  });
  ctx.out[0] = std::move(out);
}

void op_shape(OpContext& ctx) {
  const Shape& s = ctx.input(0).shape();
  const std::int64_t rank = static_cast<std::int64_t>(s.size());
  std::int64_t start = ctx.attrs().get_int("start", 0);
  std::int64_t end = ctx.attrs().get_int("end", rank);
  if (start < 0) start += rank;
  if (end < 0) end += rank;
  start = std::clamp<std::int64_t>(start, 0, rank);
  end = std::clamp<std::int64_t>(end, 0, rank);
  std::vector<std::int64_t> dims;
  for (std::int64_t i = start; i < end; ++i) dims.push_back(s[i]);
  ctx.out[0] = Tensor::from<std::int64_t>({static_cast<std::int64_t>(dims.size())}, dims);
}

void op_reshape(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  std::vector<std::int64_t> target = ints_of(ctx.input(1));
  const bool allow_zero = ctx.attrs().get_int("allowzero", 0) != 0;
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 0 && !allow_zero) {
      if (i >= a.shape().size()) fail(ctx, "zero dim refers past input rank");
      target[i] = a.shape()[i];
    }
    if (target[i] == -1) {
      if (infer >= 0) fail(ctx, "more than one -1 in target shape");
      infer = static_cast<int>(i);
    } else if (target[i] < 0) {
      fail(ctx, "invalid target dimension");
    } else {
      known *= target[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || a.size() % known != 0) fail(ctx, "cannot infer reshape dimension");
    target[infer] = a.size() / known;
  }
  if (shape_size(target) != a.size()) {
    fail(ctx, "cannot reshape " + shape_string(a.shape()) + " to " + shape_string(target));
  }
  ctx.out[0] = a.reshaped(target);
}

void op_flatten(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const std::int64_t rank = a.rank();
  std::int64_t axis = ctx.attrs().get_int("axis", 1);
  if (axis < 0) axis += rank;
  if (axis < 0 || axis > rank) fail(ctx, "axis out of range");
  std::int64_t outer = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= a.shape()[i];
  ctx.out[0] = a.reshaped({outer, outer == 0 ? 0 : a.size() / std::max<std::int64_t>(outer, 1)});
}

std::vector<std::int64_t> axes_operand(const OpContext& ctx) {
  if (ctx.has(1)) return ints_of(ctx.input(1));
  return ctx.attrs().get_ints("axes");
}

void op_unsqueeze(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  std::vector<std::int64_t> axes = axes_operand(ctx);
  const std::int64_t rank = a.rank() + static_cast<std::int64_t>(axes.size());
  for (auto& ax : axes) ax = normalize_axis(ctx, ax, rank);
  std::sort(axes.begin(), axes.end());
  Shape out;
  std::size_t next = 0, src = 0;
  for (std::int64_t i = 0; i < rank; ++i) {
    if (next < axes.size() && axes[next] == i) {
      out.push_back(1);
      ++next;
    } else {
      out.push_back(a.shape()[src++]);
    }
  }
  ctx.out[0] = a.reshaped(out);
}

void op_squeeze(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  std::vector<std::int64_t> axes = axes_operand(ctx);
  for (auto& ax : axes) ax = normalize_axis(ctx, ax, a.rank());
  Shape out;
  for (std::int64_t i = 0; i < a.rank(); ++i) {
    const bool listed = std::find(axes.begin(), axes.end(), i) != axes.end();
    if (axes.empty() ? a.shape()[i] == 1 : listed) {
      if (a.shape()[i] != 1) fail(ctx, "cannot squeeze a dimension that is not 1");
      continue;
    }
    out.push_back(a.shape()[i]);
  }
  ctx.out[0] = a.reshaped(out);
}

void op_concat(OpContext& ctx) {
  std::vector<const Tensor*> parts;
  for (std::size_t i = 0; i < ctx.num_inputs(); ++i) {
    if (ctx.has(i)) parts.push_back(ctx.in[i]);
  }
  if (parts.empty()) fail(ctx, "no inputs");
  const Tensor& first = *parts[0];
  const std::int64_t axis = normalize_axis(ctx, ctx.attrs().get_int("axis", 0), first.rank());
  Shape out_shape = first.shape();
  out_shape[axis] = 0;
  for (const Tensor* t : parts) {
    if (t->rank() != first.rank() || t->dtype() != first.dtype()) fail(ctx, "inconsistent inputs");
    for (std::int64_t d = 0; d < first.rank(); ++d) {
      if (d != axis && t->shape()[d] != first.shape()[d]) fail(ctx, "inconsistent shapes");
    }
    out_shape[axis] += t->shape()[axis];
  }
  Tensor out(first.dtype(), out_shape);
  std::int64_t outer = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= out_shape[d];
  std::int64_t inner = 1;
  for (std::int64_t d = axis + 1; d < first.rank(); ++d) inner *= out_shape[d];
  const std::size_t esize = dtype_size(first.dtype());
  auto* dst = static_cast<std::byte*>(out.raw());
  const std::int64_t out_row = out_shape[axis] * inner;
  std::int64_t offset = 0;
  for (const Tensor* t : parts) {
    const std::int64_t row = t->shape()[axis] * inner;
    const auto* src = static_cast<const std::byte*>(t->raw());
    for (std::int64_t o = 0; o < outer; ++o) {
      std::memcpy(dst + (o * out_row + offset) * esize, src + o * row * esize, row * esize);
    }
    offset += row;
  }
  ctx.out[0] = std::move(out);
}

void op_transpose(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  std::vector<std::int64_t> perm = ctx.attrs().get_ints("perm");
  if (perm.empty()) {
    for (std::int64_t i = a.rank() - 1; i >= 0; --i) perm.push_back(i);
  }
  if (static_cast<std::int64_t>(perm.size()) != a.rank()) fail(ctx, "perm length != rank");
  const Shape in_strides = strides_of(a.shape());
  StridedPlan plan;
  plan.strides.resize(1);
  plan.base = {0};
  for (std::int64_t p : perm) {
    p = normalize_axis(ctx, p, a.rank());
    plan.out.push_back(a.shape()[p]);
    plan.strides[0].push_back(in_strides[p]);
  }
  ctx.out[0] = strided_copy(a, plan);
}

void op_expand(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const Shape target = ints_of(ctx.input(1));
  StridedPlan plan;
  plan.out = broadcast_shape(ctx, {&a.shape(), &target});
  plan.strides = {broadcast_strides(a.shape(), plan.out)};
  plan.base = {0};
  ctx.out[0] = strided_copy(a, plan);
}

void op_slice(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const std::vector<std::int64_t> starts = ints_of(ctx.input(1));
  const std::vector<std::int64_t> ends = ints_of(ctx.input(2));
  std::vector<std::int64_t> axes;
  if (ctx.has(3)) {
    axes = ints_of(ctx.input(3));
  } else {
    for (std::size_t i = 0; i < starts.size(); ++i) axes.push_back(static_cast<std::int64_t>(i));
  }
  std::vector<std::int64_t> steps(starts.size(), 1);
  if (ctx.has(4)) steps = ints_of(ctx.input(4));
  if (ends.size() != starts.size() || axes.size() != starts.size() ||
      steps.size() != starts.size()) {
    fail(ctx, "starts/ends/axes/steps lengths differ");
  }
  const Shape in_strides = strides_of(a.shape());
  StridedPlan plan;
  plan.out = a.shape();
  plan.strides = {in_strides};
  plan.base = {0};
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const std::int64_t axis = normalize_axis(ctx, axes[i], a.rank());
    const std::int64_t dim = a.shape()[axis];
    const std::int64_t step = steps[i];
    if (step == 0) fail(ctx, "step must not be 0");
    std::int64_t start = starts[i], end = ends[i];
    if (start < 0) start += dim;
    if (end < 0) end += dim;
    std::int64_t count;
    if (step > 0) {
      start = std::clamp<std::int64_t>(start, 0, dim);
      end = std::clamp<std::int64_t>(end, 0, dim);
      count = end > start ? (end - start + step - 1) / step : 0;
    } else {
      start = std::clamp<std::int64_t>(start, 0, dim - 1);
      end = std::clamp<std::int64_t>(end, -1, dim - 1);
      count = start > end ? (start - end + (-step) - 1) / (-step) : 0;
    }
    plan.out[axis] = count;
    if (count > 0) plan.base[0] += start * in_strides[axis];
    plan.strides[0][axis] = in_strides[axis] * step;
  }
  ctx.out[0] = strided_copy(a, plan);
}

void op_gather(OpContext& ctx) {
  const Tensor& data = ctx.input(0);
  const Tensor& indices = ctx.input(1);
  const std::int64_t axis = normalize_axis(ctx, ctx.attrs().get_int("axis", 0), data.rank());
  Shape out_shape(data.shape().begin(), data.shape().begin() + axis);
  out_shape.insert(out_shape.end(), indices.shape().begin(), indices.shape().end());
  out_shape.insert(out_shape.end(), data.shape().begin() + axis + 1, data.shape().end());
  Tensor out(data.dtype(), out_shape);
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= data.shape()[d];
  for (std::int64_t d = axis + 1; d < data.rank(); ++d) inner *= data.shape()[d];
  const std::int64_t dim = data.shape()[axis];
  const std::size_t esize = dtype_size(data.dtype());
  const auto* src = static_cast<const std::byte*>(data.raw());
  auto* dst = static_cast<std::byte*>(out.raw());
  const std::int64_t n = indices.size();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < n; ++i) {
      std::int64_t idx = indices.int_at(i);
      if (idx < 0) idx += dim;
      if (idx < 0 || idx >= dim) {
        fail(ctx, "index " + std::to_string(indices.int_at(i)) + " out of range for axis of size " +
                      std::to_string(dim));
      }
      std::memcpy(dst + ((o * n + i) * inner) * esize, src + ((o * dim + idx) * inner) * esize,
                  inner * esize);
    }
  }
  ctx.out[0] = std::move(out);
}

void op_range(OpContext& ctx) {
  const Tensor& start = ctx.input(0);
  const Tensor& limit = ctx.input(1);
  const Tensor& delta = ctx.input(2);
  dispatch_numeric(ctx, start.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T s = start.data<T>()[0], l = limit.data<T>()[0], d = delta.data<T>()[0];
    if (d == T{0}) fail(ctx, "delta must not be 0");
    const double count_f = std::ceil((static_cast<double>(l) - static_cast<double>(s)) /
                                     static_cast<double>(d));
    const std::int64_t count = std::max<std::int64_t>(0, static_cast<std::int64_t>(count_f));
    Tensor out(start.dtype(), {count});
    T* o = out.data<T>();
    for (std::int64_t i = 0; i < count; ++i) o[i] = static_cast<T>(s + static_cast<T>(i) * d);
    ctx.out[0] = std::move(out);
  });
}

void op_constant_of_shape(OpContext& ctx) {
  const Shape shape = ints_of(ctx.input(0));
  const Tensor* value = ctx.attrs().get_tensor("value");
  if (!value) {
    ctx.out[0] = Tensor(DType::kFloat, shape);
    return;
  }
  Tensor out(value->dtype(), shape);
  const std::size_t esize = dtype_size(value->dtype());
  auto* dst = static_cast<std::byte*>(out.raw());
  for (std::int64_t i = 0; i < out.size(); ++i) std::memcpy(dst + i * esize, value->raw(), esize);
  ctx.out[0] = std::move(out);
}

// --- reductions and normalization --------------------------------------------------

void op_softmax(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  if (a.dtype() != DType::kFloat) fail(ctx, "float input required");
  const std::int64_t rank = a.rank();
  const std::int64_t axis = normalize_axis(ctx, ctx.attrs().get_int("axis", ctx.opset >= 13 ? -1 : 1), rank);
  Tensor out(DType::kFloat, a.shape());
  std::copy(a.data<float>(), a.data<float>() + a.size(), out.data<float>());
  std::int64_t cols = 1;
  if (ctx.opset < 13) {
    for (std::int64_t d = axis; d < rank; ++d) cols *= a.shape()[d];
  } else if (axis == rank - 1) {
    cols = a.shape()[axis];
  } else {
    // Softmax along an inner axis: gather each lane, normalize, scatter back.
    std::int64_t inner = 1;
    for (std::int64_t d = axis + 1; d < rank; ++d) inner *= a.shape()[d];
    const std::int64_t dim = a.shape()[axis];
    const std::int64_t outer = a.size() / std::max<std::int64_t>(dim * inner, 1);
    std::vector<float> lane(dim);
    float* o = out.data<float>();
    for (std::int64_t p = 0; p < outer; ++p) {
      for (std::int64_t q = 0; q < inner; ++q) {
        for (std::int64_t k = 0; k < dim; ++k) lane[k] = o[(p * dim + k) * inner + q];
        kernels::reference::softmax(lane.data(), 1, dim);
        for (std::int64_t k = 0; k < dim; ++k) o[(p * dim + k) * inner + q] = lane[k];
      }
    }
    ctx.out[0] = std::move(out);
    return;
  }
  const std::int64_t rows = cols == 0 ? 0 : a.size() / cols;
  if (ctx.mode == ExecMode::kParallel) {
    kernels::parallel::softmax(out.data<float>(), rows, cols, ctx.threads);
  } else {
    kernels::reference::softmax(out.data<float>(), rows, cols);
  }
  ctx.out[0] = std::move(out);
}

void op_layer_norm(OpContext& ctx) {
  const Tensor& x = ctx.input(0);
  const Tensor& gamma = ctx.input(1);
  if (x.dtype() != DType::kFloat) fail(ctx, "float input required");
  const std::int64_t axis = normalize_axis(ctx, ctx.attrs().get_int("axis", -1), x.rank());
  std::int64_t cols = 1;
  for (std::int64_t d = axis; d < x.rank(); ++d) cols *= x.shape()[d];
  if (gamma.size() != cols || (ctx.has(2) && ctx.input(2).size() != cols)) {
    fail(ctx, "scale/bias must match the normalized shape");
  }
  for (std::size_t i = 1; i < ctx.node.outputs.size(); ++i) {
    if (ctx.node.outputs[i] >= 0) fail(ctx, "mean/inv-std outputs are not supported");
  }
  const float eps = ctx.attrs().get_float("epsilon", 1e-5f);
  const std::int64_t rows = cols == 0 ? 0 : x.size() / cols;
  const float* beta = ctx.has(2) ? ctx.input(2).data<float>() : nullptr;
  Tensor out(DType::kFloat, x.shape());
  if (ctx.mode == ExecMode::kParallel) {
    kernels::parallel::layer_norm(x.data<float>(), gamma.data<float>(), beta, out.data<float>(),
                                  rows, cols, eps, ctx.threads);
  } else {
    kernels::reference::layer_norm(x.data<float>(), gamma.data<float>(), beta,
                                   out.data<float>(), rows, cols, eps);
  }
  ctx.out[0] = std::move(out);
}

void op_reduce_mean(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  if (a.dtype() != DType::kFloat) fail(ctx, "float input required");
  std::vector<std::int64_t> axes =
      ctx.opset >= 18 && ctx.has(1) ? ints_of(ctx.input(1)) : ctx.attrs().get_ints("axes");
  const bool keepdims = ctx.attrs().get_int("keepdims", 1) != 0;
  std::vector<bool> reduce(a.rank(), axes.empty());
  for (std::int64_t ax : axes) reduce[normalize_axis(ctx, ax, a.rank())] = true;
  Shape kept;
  Shape out_shape;
  for (std::int64_t d = 0; d < a.rank(); ++d) {
    kept.push_back(reduce[d] ? 1 : a.shape()[d]);
    if (!reduce[d]) {
      out_shape.push_back(a.shape()[d]);
    } else if (keepdims) {
      out_shape.push_back(1);
    }
  }
  std::vector<double> sums(shape_size(kept), 0.0);
  const Shape kept_strides = strides_of(kept);
  const Shape in_strides = strides_of(a.shape());
  const float* p = a.data<float>();
  for (std::int64_t i = 0; i < a.size(); ++i) {
    std::int64_t rem = i, target = 0;
    for (std::int64_t d = 0; d < a.rank(); ++d) {
      const std::int64_t c = rem / in_strides[d];
      rem %= in_strides[d];
      if (!reduce[d]) target += c * kept_strides[d];
    }
    sums[target] += p[i];
  }
  const double count = static_cast<double>(a.size()) / std::max<std::size_t>(sums.size(), 1);
  Tensor out(DType::kFloat, out_shape);
  for (std::size_t i = 0; i < sums.size(); ++i) {
    out.data<float>()[i] = static_cast<float>(sums[i] / count);
  }
  ctx.out[0] = std::move(out);
}

// --- matrix products ---------------------------------------------------------------

struct PackedMatMul {
  kernels::PackedF32 b;
};

struct PackedMatMulInteger {
  kernels::PackedS8 b;
};

// Shapes of a batched product A[..., M, K] x B[..., K, N].
struct MatMulDims {
  Shape out;
  std::int64_t m, n, k, batch;
  std::vector<std::int64_t> a_off, b_off;  // per batch entry, in elements
};

MatMulDims matmul_dims(const OpContext& ctx, Shape as, Shape bs) {
  const bool a_vec = as.size() == 1, b_vec = bs.size() == 1;
  if (a_vec) as.insert(as.begin(), 1);
  if (b_vec) bs.push_back(1);
  if (as.size() < 2 || bs.size() < 2) fail(ctx, "operands must have rank >= 1");
  MatMulDims d;
  d.m = as[as.size() - 2];
  d.k = as.back();
  d.n = bs.back();
  if (bs[bs.size() - 2] != d.k) {
    fail(ctx, "inner dimensions differ: " + shape_string(as) + " x " + shape_string(bs));
  }
  const Shape a_batch(as.begin(), as.end() - 2), b_batch(bs.begin(), bs.end() - 2);
  const Shape batch = broadcast_shape(ctx, {&a_batch, &b_batch});
  d.batch = shape_size(batch);
  StridedPlan plan;
  plan.out = batch;
  plan.strides = {broadcast_strides(a_batch, batch), broadcast_strides(b_batch, batch)};
  plan.base = {0, 0};
  for_each_run(plan, [&](std::int64_t, std::int64_t len, const std::int64_t* off,
                         const std::int64_t* step) {
    for (std::int64_t l = 0; l < len; ++l) {
      d.a_off.push_back((off[0] + l * step[0]) * d.m * d.k);
      d.b_off.push_back((off[1] + l * step[1]) * d.k * d.n);
    }
  });
  d.out = batch;
  if (!a_vec) d.out.push_back(d.m);
  if (!b_vec) d.out.push_back(d.n);
  return d;
}

void op_matmul(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const Tensor& b = ctx.input(1);
  if (a.dtype() != DType::kFloat || b.dtype() != DType::kFloat) fail(ctx, "float inputs required");
  const MatMulDims d = matmul_dims(ctx, a.shape(), b.shape());
  Tensor out(DType::kFloat, d.out);
  const float* pa = a.data<float>();
  const float* pb = b.data<float>();
  float* pc = out.data<float>();
  const auto* packed = static_cast<const PackedMatMul*>(ctx.node.packed.get());
  if (ctx.mode == ExecMode::kParallel && packed && b.rank() == 2) {
    // Constant 2-D weight: all batch rows form one tall GEMM.
    kernels::parallel::gemm_f32(pa, packed->b, pc, d.batch * d.m, ctx.threads);
  } else {
    for (std::int64_t i = 0; i < d.batch; ++i) {
      float* c = pc + i * d.m * d.n;
      if (ctx.mode == ExecMode::kParallel) {
        const kernels::PackedF32 pk = kernels::pack_f32(pb + d.b_off[i], d.k, d.n, false);
        kernels::parallel::gemm_f32(pa + d.a_off[i], pk, c, d.m, ctx.threads);
      } else {
        kernels::reference::gemm_f32(pa + d.a_off[i], pb + d.b_off[i], c, d.m, d.n, d.k);
      }
    }
  }
  ctx.out[0] = std::move(out);
}

void op_gemm(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const Tensor& b = ctx.input(1);
  if (a.rank() != 2 || b.rank() != 2) fail(ctx, "2-D operands required");
  if (a.dtype() != DType::kFloat || b.dtype() != DType::kFloat) fail(ctx, "float inputs required");
  const bool ta = ctx.attrs().get_int("transA", 0) != 0;
  const bool tb = ctx.attrs().get_int("transB", 0) != 0;
  const float alpha = ctx.attrs().get_float("alpha", 1.0f);
  const float beta = ctx.attrs().get_float("beta", 1.0f);
  const std::int64_t m = ta ? a.shape()[1] : a.shape()[0];
  const std::int64_t k = ta ? a.shape()[0] : a.shape()[1];
  const std::int64_t n = tb ? b.shape()[0] : b.shape()[1];
  if ((tb ? b.shape()[1] : b.shape()[0]) != k) fail(ctx, "inner dimensions differ");
  std::vector<float> a_rows;
  const float* pa = a.data<float>();
  if (ta) {
    a_rows.resize(m * k);
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t p = 0; p < k; ++p) a_rows[i * k + p] = pa[p * m + i];
    }
    pa = a_rows.data();
  }
  Tensor out(DType::kFloat, {m, n});
  float* pc = out.data<float>();
  const auto* packed = static_cast<const PackedMatMul*>(ctx.node.packed.get());
  if (ctx.mode == ExecMode::kParallel) {
    if (packed) {
      kernels::parallel::gemm_f32(pa, packed->b, pc, m, ctx.threads);
    } else {
      const kernels::PackedF32 pk = kernels::pack_f32(b.data<float>(), k, n, tb);
      kernels::parallel::gemm_f32(pa, pk, pc, m, ctx.threads);
    }
  } else {
    std::vector<float> b_rows;
    const float* pb = b.data<float>();
    if (tb) {
      b_rows.resize(k * n);
      for (std::int64_t j = 0; j < n; ++j) {
        for (std::int64_t p = 0; p < k; ++p) b_rows[p * n + j] = pb[j * k + p];
      }
      pb = b_rows.data();
    }
    kernels::reference::gemm_f32(pa, pb, pc, m, n, k);
  }
  if (alpha != 1.0f) {
    for (std::int64_t i = 0; i < m * n; ++i) pc[i] *= alpha;
  }
  if (ctx.has(2) && beta != 0.0f) {
    const Tensor& c = ctx.input(2);
    const Shape target{m, n};
    const Shape cs = broadcast_strides(c.shape(), broadcast_shape(ctx, {&c.shape(), &target}));
    const float* bias = c.data<float>();
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        pc[i * n + j] += beta * bias[i * cs[0] + j * cs[1]];
      }
    }
  }
  ctx.out[0] = std::move(out);
}

void op_matmul_integer(OpContext& ctx) {
  const Tensor& a = ctx.input(0);
  const Tensor& b = ctx.input(1);
  if (a.dtype() != DType::kUInt8 || b.dtype() != DType::kInt8) {
    fail(ctx, "only uint8 x int8 operands are supported");
  }
  if (b.rank() != 2) fail(ctx, "2-D weight operand required");
  std::uint8_t a_zp = 0;
  std::int8_t b_zp = 0;
  if (ctx.has(2)) {
    if (ctx.input(2).size() != 1) fail(ctx, "per-row activation zero points are not supported");
    a_zp = ctx.input(2).data<std::uint8_t>()[0];
  }
  if (ctx.has(3)) {
    if (ctx.input(3).size() != 1) fail(ctx, "per-column weight zero points are not supported");
    b_zp = ctx.input(3).data<std::int8_t>()[0];
  }
  const MatMulDims d = matmul_dims(ctx, a.shape(), b.shape());
  Tensor out(DType::kInt32, d.out);
  const std::int64_t rows = d.batch * d.m;
  const auto* packed = static_cast<const PackedMatMulInteger*>(ctx.node.packed.get());
  if (ctx.mode == ExecMode::kParallel) {
    if (packed && packed->b.zero_point == b_zp) {
      kernels::parallel::gemm_u8s8(a.data<std::uint8_t>(), a_zp, packed->b, out.data<std::int32_t>(),
                                   rows, ctx.threads);
    } else {
      const kernels::PackedS8 pk = kernels::pack_s8(b.data<std::int8_t>(), d.k, d.n, b_zp);
      kernels::parallel::gemm_u8s8(a.data<std::uint8_t>(), a_zp, pk, out.data<std::int32_t>(),
                                   rows, ctx.threads);
    }
  } else {
    kernels::reference::gemm_u8s8(a.data<std::uint8_t>(), a_zp, b.data<std::int8_t>(), b_zp,
                                  out.data<std::int32_t>(), rows, d.n, d.k);
  }
  ctx.out[0] = std::move(out);
}

void op_dynamic_quantize_linear(OpContext& ctx) {
  const Tensor& x = ctx.input(0);
  if (x.dtype() != DType::kFloat) fail(ctx, "float input required");
  Tensor y(DType::kUInt8, x.shape());
  float scale = 1.0f;
  std::uint8_t zp = 0;
  if (ctx.mode == ExecMode::kParallel) {
    kernels::parallel::dynamic_quantize(x.data<float>(), x.size(), y.data<std::uint8_t>(), &scale,
                                        &zp, ctx.threads);
  } else {
    kernels::reference::dynamic_quantize(x.data<float>(), x.size(), y.data<std::uint8_t>(),
                                         &scale, &zp);
  }
  ctx.out[0] = std::move(y);
  if (ctx.out.size() > 1) ctx.out[1] = Tensor::scalar<float>(scale);
  if (ctx.out.size() > 2) ctx.out[2] = Tensor::scalar<std::uint8_t>(zp);
}

}  // namespace

const std::map<std::string, OpFn>& op_table() {
  using kernels::Unary;
  static const std::map<std::string, OpFn> table = {
      {"Abs", op_unary<Unary::kAbs>},
      {"Add", op_arith<Arith::kAdd>},
      {"And", op_logic<true>},
      {"Cast", op_cast},
      {"Concat", op_concat},
      {"ConstantOfShape", op_constant_of_shape},
      {"Div", op_arith<Arith::kDiv>},
      {"DynamicQuantizeLinear", op_dynamic_quantize_linear},
      {"Equal", op_compare<Compare::kEq>},
      {"Erf", op_unary<Unary::kErf>},
      {"Exp", op_unary<Unary::kExp>},
      {"Expand", op_expand},
      {"Flatten", op_flatten},
      {"Gather", op_gather},
      {"Gemm", op_gemm},
      {"Greater", op_compare<Compare::kGt>},
      {"GreaterOrEqual", op_compare<Compare::kGe>},
      {"Identity", op_identity},
      {"IsNaN", op_isnan},
      {"LayerNormalization", op_layer_norm},
      {"Less", op_compare<Compare::kLt>},
      {"LessOrEqual", op_compare<Compare::kLe>},
      {"Log", op_unary<Unary::kLog>},
      {"MatMul", op_matmul},
      {"MatMulInteger", op_matmul_integer},
      {"Mul", op_arith<Arith::kMul>},
      {"Neg", op_unary<Unary::kNeg>},
      {"Not", op_not},
      {"Or", op_logic<false>},
      {"Pow", op_arith<Arith::kPow>},
      {"Range", op_range},
      {"ReduceMean", op_reduce_mean},
      {"Relu", op_unary<Unary::kRelu>},
      {"Reshape", op_reshape},
      {"Shape", op_shape},
      {"Sigmoid", op_unary<Unary::kSigmoid>},
      {"Slice", op_slice},
      {"Softmax", op_softmax},
      {"Sqrt", op_unary<Unary::kSqrt>},
      {"Squeeze", op_squeeze},
      {"Sub", op_arith<Arith::kSub>},
      {"Tanh", op_unary<Unary::kTanh>},
      {"Transpose", op_transpose},
      {"Unsqueeze", op_unsqueeze},
      {"Where", op_where},
  };
  return table;
}

OpFn find_op(const std::string& op_type) {
  auto it = op_table().find(op_type);
  return it == op_table().end() ? nullptr : it->second;
}

void prepack(Node& node, const std::vector<const Tensor*>& constants) {
  const Tensor* b = constants.size() > 1 ? constants[1] : nullptr;
  if (!b || b->rank() != 2) return;
  if (node.op_type == "MatMul" && b->dtype() == DType::kFloat) {
    auto packed = std::make_shared<PackedMatMul>();
    packed->b = kernels::pack_f32(b->data<float>(), b->shape()[0], b->shape()[1], false);
    node.packed = std::move(packed);
  } else if (node.op_type == "Gemm" && b->dtype() == DType::kFloat) {
    const bool tb = node.attrs.get_int("transB", 0) != 0;
    const std::int64_t k = tb ? b->shape()[1] : b->shape()[0];
    const std::int64_t n = tb ? b->shape()[0] : b->shape()[1];
    auto packed = std::make_shared<PackedMatMul>();
    packed->b = kernels::pack_f32(b->data<float>(), k, n, tb);
    node.packed = std::move(packed);
  } else if (node.op_type == "MatMulInteger" && b->dtype() == DType::kInt8) {
    std::int8_t zp = 0;
    if (constants.size() > 3 && constants[3]) {
      if (constants[3]->size() != 1) return;
      zp = constants[3]->data<std::int8_t>()[0];
    } else if (node.inputs.size() > 3 && node.inputs[3] >= 0) {
      return;  // runtime zero point
    }
    auto packed = std::make_shared<PackedMatMulInteger>();
    packed->b = kernels::pack_s8(b->data<std::int8_t>(), b->shape()[0], b->shape()[1], zp);
    node.packed = std::move(packed);
  }
}

}  // namespace refneed::runtime
