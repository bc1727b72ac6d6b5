#ifndef REFNEED_RUNTIME_GRAPH_H_
#define REFNEED_RUNTIME_GRAPH_H_

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "refneed/runtime/tensor.h"

namespace refneed::runtime {

enum class ExecMode {
  kReference,  // serial reference kernels; the testing oracle
  kParallel,   // packed, vectorized, OpenMP kernels
};

struct GraphOptions {
  ExecMode mode = ExecMode::kParallel;
  int num_threads = 1;
};

// An ONNX computation graph loaded for CPU execution. Supports the operator
// subset used by exported BERT-family sequence classifiers, in float and
// dynamically quantized (MatMulInteger) form. Subgraphs whose inputs are all
// constant are folded at load; constant GEMM weights are pre-packed in
// parallel mode. A loaded graph is immutable and run() may be called from
// several threads at once.
class Graph {
 public:
  // Throws BackendError when the file cannot be parsed or uses an
  // unsupported operator, data type or feature.
  static Graph load(const std::filesystem::path& path, const GraphOptions& options = {});
  static Graph parse(const std::string& bytes, const GraphOptions& options = {});

  Graph(Graph&&) noexcept;
  Graph& operator=(Graph&&) noexcept;
  ~Graph();

  // Feeds are matched by input name; returns the graph outputs in order.
  std::vector<Tensor> run(const std::vector<std::pair<std::string, Tensor>>& feeds) const;

  const std::vector<std::string>& input_names() const;
  const std::vector<std::string>& output_names() const;
  const GraphOptions& options() const;
  // Nodes left after constant folding, and their operator types.
  std::size_t node_count() const;
  std::set<std::string> op_types() const;

 private:
  struct Impl;
  explicit Graph(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

// Operators this runtime can execute.
const std::set<std::string>& supported_ops();

}  // namespace refneed::runtime

#endif  // REFNEED_RUNTIME_GRAPH_H_
