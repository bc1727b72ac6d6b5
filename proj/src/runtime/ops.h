#ifndef REFNEED_SRC_RUNTIME_OPS_H_
#define REFNEED_SRC_RUNTIME_OPS_H_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "refneed/runtime/graph.h"
#include "refneed/runtime/tensor.h"

namespace refneed::runtime {

struct Attribute {
  enum class Kind { kInt, kFloat, kString, kInts, kFloats, kTensor };
  Kind kind = Kind::kInt;
  std::int64_t i = 0;
  float f = 0.0f;
  std::string s;
  std::vector<std::int64_t> ints;
  std::vector<float> floats;
  Tensor t;
};

class Attributes {
 public:
  void set(const std::string& name, Attribute a) { map_[name] = std::move(a); }
  bool has(const std::string& name) const { return map_.count(name) > 0; }
  std::int64_t get_int(const std::string& name, std::int64_t fallback) const;
  float get_float(const std::string& name, float fallback) const;
  std::vector<std::int64_t> get_ints(const std::string& name) const;
  std::vector<float> get_floats(const std::string& name) const;
  const Tensor* get_tensor(const std::string& name) const;

 private:
  std::map<std::string, Attribute> map_;
};

struct Node;

struct OpContext {
  const Node& node;
  std::vector<const Tensor*> in;  // nullptr for omitted optional inputs
  std::vector<Tensor>& out;
  ExecMode mode;
  int threads;
  int opset;

  std::size_t num_inputs() const { return in.size(); }
  bool has(std::size_t i) const { return i < in.size() && in[i] != nullptr; }
  const Tensor& input(std::size_t i) const;
  const Attributes& attrs() const;
};

using OpFn = void (*)(OpContext&);

struct Node {
  std::string op_type;
  std::string name;
  std::vector<int> inputs;   // value ids, -1 when omitted
  std::vector<int> outputs;  // value ids, -1 when omitted
  Attributes attrs;
  OpFn fn = nullptr;
  std::shared_ptr<const void> packed;  // pre-packed constant operand
};

// nullptr when the operator is not supported.
OpFn find_op(const std::string& op_type);
const std::map<std::string, OpFn>& op_table();

// Pre-packs a constant right-hand operand for parallel GEMM kernels. Inputs
// that are not constant are nullptr.
void prepack(Node& node, const std::vector<const Tensor*>& constants);

}  // namespace refneed::runtime

#endif  // REFNEED_SRC_RUNTIME_OPS_H_
