#include "parknet/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace parknet {

std::string shape_to_string(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

int64_t checked_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t s : shape) {
    if (s <= 0) {
      throw std::invalid_argument("tensor extents must be positive, got shape " +
                                  shape_to_string(shape));
    }
    n *= s;
  }
  return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int64_t> shape, double value, bool requires_grad) {
  const int64_t n = checked_numel(shape);
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<size_t>(n), value);
  impl->requires_grad = requires_grad;
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor Tensor::from_data(std::vector<int64_t> shape, std::vector<double> data,
                         bool requires_grad) {
  const int64_t n = checked_numel(shape);
  if (n != static_cast<int64_t>(data.size())) {
    throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_to_string(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

int64_t Tensor::size(int64_t axis) const {
  const int64_t d = dim();
  if (axis < 0) axis += d;
  if (axis < 0 || axis >= d) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for shape " +
                            shape_to_string(shape()));
  }
  return impl_->shape[static_cast<size_t>(axis)];
}

std::vector<double>& Tensor::grad() const {
  if (!impl_->requires_grad) {
    throw std::logic_error("grad() requested on a tensor with requires_grad=false");
  }
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::logic_error("item() requires a scalar tensor, got shape " +
                           shape_to_string(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(const std::vector<int64_t>& index) const {
  if (index.size() != impl_->shape.size()) {
    throw std::out_of_range("index rank mismatch for shape " + shape_to_string(shape()));
  }
  int64_t off = 0;
  for (size_t d = 0; d < index.size(); ++d) {
    if (index[d] < 0 || index[d] >= impl_->shape[d]) {
      throw std::out_of_range("index out of range for shape " + shape_to_string(shape()));
    }
    off = off * impl_->shape[d] + index[d];
  }
  return impl_->data[static_cast<size_t>(off)];
}

void Tensor::set(const std::vector<int64_t>& index, double value) {
  if (index.size() != impl_->shape.size()) {
    throw std::out_of_range("index rank mismatch for shape " + shape_to_string(shape()));
  }
  int64_t off = 0;
  for (size_t d = 0; d < index.size(); ++d) {
    if (index[d] < 0 || index[d] >= impl_->shape[d]) {
      throw std::out_of_range("index out of range for shape " + shape_to_string(shape()));
    }
    off = off * impl_->shape[d] + index[d];
  }
  impl_->data[static_cast<size_t>(off)] = value;
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = false;
  return from_impl(std::move(impl));
}

Tensor Tensor::from_impl(std::shared_ptr<detail::TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

void Tensor::backward() const { parknet::backward(*this); }

Tensor make_op_node(std::vector<int64_t> shape, std::vector<double> data,
                    const std::vector<Tensor>& parents, BackwardFn fn) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  impl->requires_grad = rg;
  if (rg) {
    impl->parents.reserve(parents.size());
    for (const auto& p : parents) impl->parents.push_back(p.impl());
    impl->backward_fn = std::move(fn);
  }
  return Tensor::from_impl(std::move(impl));
}

void backward(const Tensor& loss) {
  using detail::TensorImpl;
  if (!loss.defined()) throw std::logic_error("backward() on an undefined tensor");
  if (loss.numel() != 1) {
    throw std::logic_error("backward() requires a scalar loss, got shape " +
                           shape_to_string(loss.shape()));
  }

  TensorImpl* root = loss.impl().get();
  if (!root->requires_grad) {
    throw std::logic_error("backward() on a tensor that is not connected to any parameter");
  }

  // Reverse topological order via iterative post-order DFS over parent edges,
  // pruned to the requires_grad subgraph.
  std::vector<TensorImpl*> topo;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorImpl* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  // Transient per-call buffers keep repeated backward() calls additive:
  // only the final per-node totals are folded into the persistent .grad.
  std::unordered_map<TensorImpl*, std::vector<double>> buffers;
  buffers[root] = {1.0};

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorImpl* node = *it;
    auto found = buffers.find(node);
    if (found == buffers.end()) continue;  // unreachable along grad-needing paths
    std::vector<double>& gout = found->second;

    if (node->backward_fn) {
      std::vector<std::vector<double>*> parent_bufs(node->parents.size(), nullptr);
      for (size_t i = 0; i < node->parents.size(); ++i) {
        TensorImpl* p = node->parents[i].get();
        if (!p->requires_grad) continue;
        auto [slot, inserted] = buffers.try_emplace(p);
        if (inserted) slot->second.assign(p->data.size(), 0.0);
        parent_bufs[i] = &slot->second;
      }
      node->backward_fn(gout, parent_bufs);
    }

    node->ensure_grad();
    for (size_t i = 0; i < gout.size(); ++i) node->grad[i] += gout[i];
    buffers.erase(node);
  }
}

}  // namespace parknet
