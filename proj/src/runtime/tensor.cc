#include "refneed/runtime/tensor.h"

#include <cstdlib>
#include <cstring>
#include <new>

#include "refneed/common/errors.h"

namespace refneed::runtime {

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::kFloat: return 4;
    case DType::kUInt8: return 1;
    case DType::kInt8: return 1;
    case DType::kInt32: return 4;
    case DType::kInt64: return 8;
    case DType::kBool: return sizeof(bool);
    case DType::kDouble: return 8;
  }
  return 0;
}

const char* dtype_name(DType t) {
  switch (t) {
    case DType::kFloat: return "float32";
    case DType::kUInt8: return "uint8";
    case DType::kInt8: return "int8";
    case DType::kInt32: return "int32";
    case DType::kInt64: return "int64";
    case DType::kBool: return "bool";
    case DType::kDouble: return "float64";
  }
  return "?";
}

DType dtype_from_onnx(int code) {
  switch (code) {
    case 1: case 2: case 3: case 6: case 7: case 9: case 11:
      return static_cast<DType>(code);
    default:
      throw BackendError("unsupported tensor element type " + std::to_string(code));
  }
}

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw BackendError("negative dimension in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(DType dtype, Shape shape)
    : dtype_(dtype), shape_(std::move(shape)), size_(shape_size(shape_)) {
  const std::size_t bytes = std::max<std::size_t>(64, (this->bytes() + 63) / 64 * 64);
  void* p = std::aligned_alloc(64, bytes);
  if (!p) throw std::bad_alloc();
  std::memset(p, 0, bytes);
  buffer_ = std::shared_ptr<std::byte>(static_cast<std::byte*>(p),
                                       [](std::byte* q) { std::free(q); });
}

std::int64_t Tensor::dim(std::int64_t axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw BackendError("axis " + std::to_string(axis) + " out of range for shape " +
                       shape_string(shape_));
  }
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size_) {
    throw BackendError("cannot reshape " + shape_string(shape_) + " to " +
                       shape_string(shape));
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

std::int64_t Tensor::int_at(std::int64_t i) const {
  switch (dtype_) {
    case DType::kFloat: return static_cast<std::int64_t>(data<float>()[i]);
    case DType::kUInt8: return data<std::uint8_t>()[i];
    case DType::kInt8: return data<std::int8_t>()[i];
    case DType::kInt32: return data<std::int32_t>()[i];
    case DType::kInt64: return data<std::int64_t>()[i];
    case DType::kBool: return data<bool>()[i];
    case DType::kDouble: return static_cast<std::int64_t>(data<double>()[i]);
  }
  return 0;
}

double Tensor::float_at(std::int64_t i) const {
  switch (dtype_) {
    case DType::kFloat: return data<float>()[i];
    case DType::kDouble: return data<double>()[i];
    default: return static_cast<double>(int_at(i));
  }
}

void Tensor::check_type(DType expected) const {
  if (expected != dtype_) {
    throw BackendError(std::string("tensor holds ") + dtype_name(dtype_) + ", accessed as " +
                       dtype_name(expected));
  }
}

void Tensor::throw_size_mismatch() {
  throw BackendError("value count does not match tensor shape");
}

}  // namespace refneed::runtime
