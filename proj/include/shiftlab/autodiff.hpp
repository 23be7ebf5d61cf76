#pragma once

#include <map>
#include <string>
#include <vector>

#include "shiftlab/layers.hpp"
#include "shiftlab/tensor.hpp"

namespace shiftlab {

// Ordered collection of named tensors (weights, biases, Adam moments, ...).
class ParameterSet {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  const std::vector<std::string>& order() const { return order_; }
  std::size_t count() const { return order_.size(); }
  bool empty() const { return order_.empty(); }

  // Same names, same shapes, all values zero.
  static ParameterSet zeros_like(const ParameterSet& other);

 private:
  std::vector<std::string> order_;
  std::map<std::string, Tensor> values_;
};

// Parameter names for layer i of a spec: "layer<i>.weight" / "layer<i>.bias".
std::string weight_name(std::size_t layer_index);
std::string bias_name(std::size_t layer_index);

// Logits for a batch; x is (B, C, H, W).
Tensor forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& x);

struct BackwardResult {
  double loss = 0.0;
  ParameterSet gradients;  // same names/shapes as the learnable parameters
  Tensor probabilities;    // (B, classes)
};

// Mean cross-entropy over the batch and its gradient with respect to every
// parameter. Max-pool routes gradient to the first maximal cell in row-major
// scan order; the blur kernel is fixed and contributes no parameter gradient.
BackwardResult backward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch,
                        const std::vector<int>& labels);

}  // namespace shiftlab
