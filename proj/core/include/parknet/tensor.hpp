#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace parknet {

namespace detail {

struct TensorImpl {
  std::vector<int64_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  // Persistent gradient accumulator. Allocated lazily, starts at zero,
  // accumulated additively by every backward() call.
  std::vector<double> grad;

  // Reverse-mode graph edges. backward_fn reads the node's upstream gradient
  // and adds each parent's contribution into parent_grads[i] (null when that
  // parent does not need a gradient).
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(const std::vector<double>& grad_out,
                     const std::vector<std::vector<double>*>& parent_grads)>
      backward_fn;

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t s : shape) n *= s;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

std::string shape_to_string(const std::vector<int64_t>& shape);

// Dense row-major f64 tensor with reverse-mode autodiff. Value-semantic
// handle over shared storage; ops live in ops.hpp. Graphs are define-by-run:
// each forward pass records fresh nodes, and backward() may be called
// repeatedly (gradients accumulate additively until zero_grad()).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<int64_t> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int64_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int64_t>& shape() const { return impl_->shape; }
  int64_t dim() const { return static_cast<int64_t>(impl_->shape.size()); }
  int64_t size(int64_t axis) const;  // negative axis counts from the back
  int64_t numel() const { return impl_->numel(); }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  // Gradient accumulator; allocates zeros on first access.
  std::vector<double>& grad() const;
  void zero_grad();

  double item() const;  // scalar tensors only
  double at(const std::vector<int64_t>& index) const;
  void set(const std::vector<int64_t>& index, double value);

  // Same data, cut loose from the graph.
  Tensor detach() const;

  // Reverse-mode sweep from a scalar. Every requires_grad tensor reachable
  // through the graph receives dL/dx added into its .grad().
  void backward() const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
  static Tensor from_impl(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Free-function spelling of Tensor::backward().
void backward(const Tensor& loss);

// Extension point for custom differentiable operations: records a graph node
// whose backward_fn adds each parent's contribution into parent_grads[i]
// (entries are null for parents that do not need gradients). The node is
// recorded only when some parent requires a gradient.
using BackwardFn = std::function<void(const std::vector<double>& grad_out,
                                      const std::vector<std::vector<double>*>& parent_grads)>;
Tensor make_op_node(std::vector<int64_t> shape, std::vector<double> data,
                    const std::vector<Tensor>& parents, BackwardFn fn);

}  // namespace parknet
