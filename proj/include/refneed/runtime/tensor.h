#ifndef REFNEED_RUNTIME_TENSOR_H_
#define REFNEED_RUNTIME_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace refneed::runtime {

// Element types, numbered as in the ONNX TensorProto enum.
enum class DType : int {
  kFloat = 1,
  kUInt8 = 2,
  kInt8 = 3,
  kInt32 = 6,
  kInt64 = 7,
  kBool = 9,
  kDouble = 11,
};

std::size_t dtype_size(DType t);
const char* dtype_name(DType t);
// Throws BackendError for codes outside the supported set.
DType dtype_from_onnx(int code);

template <typename T> constexpr DType dtype_of();
template <> constexpr DType dtype_of<float>() { return DType::kFloat; }
template <> constexpr DType dtype_of<std::uint8_t>() { return DType::kUInt8; }
template <> constexpr DType dtype_of<std::int8_t>() { return DType::kInt8; }
template <> constexpr DType dtype_of<std::int32_t>() { return DType::kInt32; }
template <> constexpr DType dtype_of<std::int64_t>() { return DType::kInt64; }
template <> constexpr DType dtype_of<bool>() { return DType::kBool; }
template <> constexpr DType dtype_of<double>() { return DType::kDouble; }

using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor. Storage is 64-byte aligned and shared between
// copies; kernels treat inputs as immutable and write only to tensors they
// allocated.
class Tensor {
 public:
  Tensor() = default;
  // Zero-initialized.
  Tensor(DType dtype, Shape shape);

  template <typename T>
  static Tensor from(Shape shape, const std::vector<T>& values) {
    Tensor t(dtype_of<T>(), std::move(shape));
    if (static_cast<std::int64_t>(values.size()) != t.size()) throw_size_mismatch();
    T* out = t.data<T>();
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i];
    return t;
  }

  template <typename T>
  static Tensor scalar(T value) {
    return from<T>({}, {value});
  }

  bool defined() const { return static_cast<bool>(buffer_); }
  DType dtype() const { return dtype_; }
  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(std::int64_t axis) const;
  std::int64_t size() const { return size_; }
  std::size_t bytes() const { return static_cast<std::size_t>(size_) * dtype_size(dtype_); }

  template <typename T>
  T* data() {
    check_type(dtype_of<T>());
    return reinterpret_cast<T*>(buffer_.get());
  }
  template <typename T>
  const T* data() const {
    check_type(dtype_of<T>());
    return reinterpret_cast<const T*>(buffer_.get());
  }
  void* raw() { return buffer_.get(); }
  const void* raw() const { return buffer_.get(); }

  // Same storage, new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  template <typename T>
  std::vector<T> to_vector() const {
    const T* p = data<T>();
    return std::vector<T>(p, p + size_);
  }

  // Element i converted to int64 / double, for any numeric dtype.
  std::int64_t int_at(std::int64_t i) const;
  double float_at(std::int64_t i) const;

 private:
  void check_type(DType expected) const;
  [[noreturn]] static void throw_size_mismatch();

  DType dtype_ = DType::kFloat;
  Shape shape_;
  std::int64_t size_ = 0;
  std::shared_ptr<std::byte> buffer_;
};

}  // namespace refneed::runtime

#endif  // REFNEED_RUNTIME_TENSOR_H_
