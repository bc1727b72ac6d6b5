#include "refneed/runtime/graph.h"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "onnx.pb.h"
#include "ops.h"
#include "refneed/common/errors.h"

namespace refneed::runtime {

namespace {

Tensor tensor_from_proto(const onnx::TensorProto& p) {
  const std::string label = p.name().empty() ? "<anonymous>" : p.name();
  if (p.data_location() == onnx::TensorProto::EXTERNAL) {
    throw BackendError("tensor '" + label + "' uses external data, which is not supported");
  }
  const DType dtype = dtype_from_onnx(p.data_type());
  Shape shape(p.dims().begin(), p.dims().end());
  for (std::int64_t d : shape) {
    if (d < 0) throw BackendError("tensor '" + label + "' has a negative dimension");
  }
  Tensor t(dtype, shape);
  const std::int64_t n = t.size();
  auto size_error = [&](std::int64_t got) {
    return BackendError("tensor '" + label + "' of shape " + shape_string(shape) + " holds " +
                        std::to_string(got) + " values");
  };
  if (p.has_raw_data()) {
    if (p.raw_data().size() != t.bytes()) {
      throw size_error(static_cast<std::int64_t>(p.raw_data().size() / dtype_size(dtype)));
    }
    if (n > 0) std::memcpy(t.raw(), p.raw_data().data(), t.bytes());
    return t;
  }
  switch (dtype) {
    case DType::kFloat:
      if (p.float_data_size() != n) throw size_error(p.float_data_size());
      std::copy(p.float_data().begin(), p.float_data().end(), t.data<float>());
      break;
    case DType::kDouble:
      if (p.double_data_size() != n) throw size_error(p.double_data_size());
      std::copy(p.double_data().begin(), p.double_data().end(), t.data<double>());
      break;
    case DType::kInt64:
      if (p.int64_data_size() != n) throw size_error(p.int64_data_size());
      std::copy(p.int64_data().begin(), p.int64_data().end(), t.data<std::int64_t>());
      break;
    case DType::kInt32:
    case DType::kInt8:
    case DType::kUInt8:
    case DType::kBool: {
      if (p.int32_data_size() != n) throw size_error(p.int32_data_size());
      for (std::int64_t i = 0; i < n; ++i) {
        const std::int32_t v = p.int32_data(static_cast<int>(i));
        switch (dtype) {
          case DType::kInt32: t.data<std::int32_t>()[i] = v; break;
          case DType::kInt8: t.data<std::int8_t>()[i] = static_cast<std::int8_t>(v); break;
          case DType::kUInt8: t.data<std::uint8_t>()[i] = static_cast<std::uint8_t>(v); break;
          default: t.data<bool>()[i] = v != 0; break;
        }
      }
      break;
    }
  }
  return t;
}

Attribute attribute_from_proto(const onnx::AttributeProto& p, const std::string& node) {
  Attribute a;
  switch (p.type()) {
    case onnx::AttributeProto::INT:
      a.kind = Attribute::Kind::kInt;
      a.i = p.i();
      break;
    case onnx::AttributeProto::FLOAT:
      a.kind = Attribute::Kind::kFloat;
      a.f = p.f();
      break;
    case onnx::AttributeProto::STRING:
      a.kind = Attribute::Kind::kString;
      a.s = p.s();
      break;
    case onnx::AttributeProto::INTS:
      a.kind = Attribute::Kind::kInts;
      a.ints.assign(p.ints().begin(), p.ints().end());
      break;
    case onnx::AttributeProto::FLOATS:
      a.kind = Attribute::Kind::kFloats;
      a.floats.assign(p.floats().begin(), p.floats().end());
      break;
    case onnx::AttributeProto::TENSOR:
      a.kind = Attribute::Kind::kTensor;
      a.t = tensor_from_proto(p.t());
      break;
    default:
      throw BackendError("node '" + node + "': attribute '" + p.name() +
                         "' has an unsupported type");
  }
  return a;
}

// The tensor a Constant node produces.
Tensor constant_value(const Node& node) {
  const Attributes& at = node.attrs;
  if (const Tensor* t = at.get_tensor("value")) return *t;
  if (at.has("value_float")) return Tensor::scalar<float>(at.get_float("value_float", 0.0f));
  if (at.has("value_int")) return Tensor::scalar<std::int64_t>(at.get_int("value_int", 0));
  if (at.has("value_ints")) {
    const auto v = at.get_ints("value_ints");
    return Tensor::from<std::int64_t>({static_cast<std::int64_t>(v.size())}, v);
  }
  if (at.has("value_floats")) {
    const auto v = at.get_floats("value_floats");
    return Tensor::from<float>({static_cast<std::int64_t>(v.size())}, v);
  }
  throw BackendError("Constant '" + node.name + "': unsupported value attribute");
}

}  // namespace

struct Graph::Impl {
  GraphOptions options;
  int opset = 0;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  std::vector<int> input_ids;
  std::vector<int> output_ids;
  int num_values = 0;
  std::vector<std::pair<int, Tensor>> constants;
  std::vector<Node> nodes;
  // Value ids whose last consumer is nodes[i]; freed after it runs.
  std::vector<std::vector<int>> release_after;
};

Graph::Graph(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Graph::Graph(Graph&&) noexcept = default;
Graph& Graph::operator=(Graph&&) noexcept = default;
Graph::~Graph() = default;

Graph Graph::load(const std::filesystem::path& path, const GraphOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendError("cannot open model " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), options);
}

Graph Graph::parse(const std::string& bytes, const GraphOptions& options) {
  onnx::ModelProto model;
  if (!model.ParseFromString(bytes)) throw BackendError("model is not a valid ONNX protobuf");
  if (options.num_threads < 1) throw BackendError("num_threads must be >= 1");
  auto impl = std::make_unique<Impl>();
  impl->options = options;
  for (const auto& op : model.opset_import()) {
    if (op.domain().empty() || op.domain() == "ai.onnx") {
      impl->opset = static_cast<int>(op.version());
    }
  }
  if (impl->opset == 0) throw BackendError("model imports no default-domain opset");
  const onnx::GraphProto& g = model.graph();

  std::map<std::string, int> ids;
  auto id_of = [&](const std::string& name) {
    auto [it, inserted] = ids.emplace(name, impl->num_values);
    if (inserted) ++impl->num_values;
    return it->second;
  };

  std::map<int, Tensor> constants;
  for (const auto& init : g.initializer()) constants[id_of(init.name())] = tensor_from_proto(init);
  if (g.sparse_initializer_size() > 0) throw BackendError("sparse initializers are not supported");
  for (const auto& vi : g.input()) {
    const int id = id_of(vi.name());
    if (constants.count(id)) continue;  // initializer with a default
    impl->input_names.push_back(vi.name());
    impl->input_ids.push_back(id);
  }

  const ExecMode fold_mode = ExecMode::kReference;
  for (const auto& np : g.node()) {
    const std::string label = np.name().empty() ? np.op_type() : np.name();
    if (!np.domain().empty() && np.domain() != "ai.onnx") {
      throw BackendError("node '" + label + "': unsupported domain '" + np.domain() + "'");
    }
    Node node;
    node.op_type = np.op_type();
    node.name = label;
    for (const auto& a : np.attribute()) node.attrs.set(a.name(), attribute_from_proto(a, label));
    for (const auto& name : np.input()) {
      if (name.empty()) {
        node.inputs.push_back(-1);
        continue;
      }
      auto it = ids.find(name);
      if (it == ids.end()) {
        throw BackendError("node '" + label + "': input '" + name + "' is not produced earlier");
      }
      node.inputs.push_back(it->second);
    }
    for (const auto& name : np.output()) node.outputs.push_back(name.empty() ? -1 : id_of(name));

    if (node.op_type == "Constant") {
      if (!node.outputs.empty() && node.outputs[0] >= 0) {
        constants[node.outputs[0]] = constant_value(node);
      }
      continue;
    }
    node.fn = find_op(node.op_type);
    if (!node.fn) throw BackendError("node '" + label + "': unsupported operator " + node.op_type);

    std::vector<const Tensor*> const_inputs;
    bool all_const = true;
    for (int id : node.inputs) {
      auto it = id < 0 ? constants.end() : constants.find(id);
      const_inputs.push_back(it == constants.end() ? nullptr : &it->second);
      if (id >= 0 && it == constants.end()) all_const = false;
    }
    if (all_const) {
      std::vector<Tensor> out(node.outputs.size());
      OpContext ctx{node, const_inputs, out, fold_mode, 1, impl->opset};
      node.fn(ctx);
      for (std::size_t i = 0; i < node.outputs.size(); ++i) {
        if (node.outputs[i] >= 0) constants[node.outputs[i]] = out[i];
      }
      continue;
    }
    if (options.mode == ExecMode::kParallel) prepack(node, const_inputs);
    impl->nodes.push_back(std::move(node));
  }

  for (const auto& vi : g.output()) {
    auto it = ids.find(vi.name());
    if (it == ids.end()) throw BackendError("graph output '" + vi.name() + "' is never produced");
    impl->output_names.push_back(vi.name());
    impl->output_ids.push_back(it->second);
  }

  // Keep only constants something still reads.
  std::vector<bool> used(impl->num_values, false);
  for (const Node& n : impl->nodes) {
    for (int id : n.inputs) {
      if (id >= 0) used[id] = true;
    }
  }
  for (int id : impl->output_ids) used[id] = true;
  for (auto& [id, t] : constants) {
    if (used[id]) impl->constants.emplace_back(id, std::move(t));
  }

  // Liveness: free each intermediate after its last reader.
  std::vector<int> last(impl->num_values, -1);
  for (std::size_t i = 0; i < impl->nodes.size(); ++i) {
    for (int id : impl->nodes[i].inputs) {
      if (id >= 0) last[id] = static_cast<int>(i);
    }
  }
  for (int id : impl->output_ids) last[id] = -1;
  impl->release_after.resize(impl->nodes.size());
  for (int id = 0; id < impl->num_values; ++id) {
    if (last[id] >= 0) impl->release_after[last[id]].push_back(id);
  }
  return Graph(std::move(impl));
}

std::vector<Tensor> Graph::run(const std::vector<std::pair<std::string, Tensor>>& feeds) const {
  const Impl& g = *impl_;
  std::vector<Tensor> values(g.num_values);
  for (const auto& [id, t] : g.constants) values[id] = t;
  std::vector<bool> fed(g.input_ids.size(), false);
  for (const auto& [name, tensor] : feeds) {
    std::size_t i = 0;
    while (i < g.input_names.size() && g.input_names[i] != name) ++i;
    if (i == g.input_names.size()) throw BackendError("unknown graph input '" + name + "'");
    values[g.input_ids[i]] = tensor;
    fed[i] = true;
  }
  for (std::size_t i = 0; i < fed.size(); ++i) {
    if (!fed[i]) throw BackendError("graph input '" + g.input_names[i] + "' was not fed");
  }

  std::vector<const Tensor*> in;
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& node = g.nodes[i];
    in.clear();
    for (int id : node.inputs) {
      if (id < 0) {
        in.push_back(nullptr);
        continue;
      }
      if (!values[id].defined()) {
        throw BackendError("node '" + node.name + "': input has no value");
      }
      in.push_back(&values[id]);
    }
    out.assign(node.outputs.size(), Tensor());
    OpContext ctx{node, in, out, g.options.mode, g.options.num_threads, g.opset};
    node.fn(ctx);
    for (std::size_t k = 0; k < node.outputs.size(); ++k) {
      if (node.outputs[k] >= 0) values[node.outputs[k]] = std::move(out[k]);
    }
    for (int id : g.release_after[i]) values[id] = Tensor();
  }

  std::vector<Tensor> result;
  for (int id : g.output_ids) {
    if (!values[id].defined()) throw BackendError("graph output has no value");
    result.push_back(values[id]);
  }
  return result;
}

const std::vector<std::string>& Graph::input_names() const { return impl_->input_names; }
const std::vector<std::string>& Graph::output_names() const { return impl_->output_names; }
const GraphOptions& Graph::options() const { return impl_->options; }
std::size_t Graph::node_count() const { return impl_->nodes.size(); }

std::set<std::string> Graph::op_types() const {
  std::set<std::string> out;
  for (const Node& n : impl_->nodes) out.insert(n.op_type);
  return out;
}

const std::set<std::string>& supported_ops() {
  static const std::set<std::string> ops = [] {
    std::set<std::string> s{"Constant"};
    for (const auto& [name, _] : op_table()) s.insert(name);
    return s;
  }();
  return ops;
}

}  // namespace refneed::runtime
