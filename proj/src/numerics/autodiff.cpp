#include "shaperefine/numerics/autodiff.hpp"

#include "shaperefine/error.hpp"

namespace shaperefine::numerics {

Tape& Var::tape() const {
  if (!tape_) throw Error("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(*this); }

Tensor Gradients::of(const Var& v) const {
  if (v.id() >= grads_.size()) throw Error("Var does not belong to this backward pass");
  const GradBuffer& g = grads_[v.id()];
  if (g.empty()) return Tensor::zeros(shapes_[v.id()]);
  return Tensor(shapes_[v.id()], g);
}

void Tape::check_owned(const Var& v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw Error("Var belongs to a different tape");
}

Var Tape::input(Tensor value) {
  if (consumed_) throw Error("tape already consumed by backward()");
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  if (consumed_) throw Error("tape already consumed by backward()");
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (consumed_) throw Error("tape already consumed by backward()");
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(const Var& v) const {
  check_owned(v);
  return nodes_[v.id_].value;
}

bool Tape::requires_grad(const Var& v) const {
  check_owned(v);
  return nodes_[v.id_].requires_grad;
}

Gradients Tape::backward(const Var& loss) {
  check_owned(loss);
  if (consumed_) throw Error("tape already consumed by backward()");
  if (nodes_[loss.id_].value.size() != 1) {
    throw Error("backward() needs a scalar loss, got shape " + shape_string(nodes_[loss.id_].value.shape()));
  }
  consumed_ = true;

  Gradients out;
  out.grads_.resize(nodes_.size());
  out.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) out.shapes_.push_back(n.value.shape());

  auto& grads = out.grads_;
  if (!nodes_[loss.id_].requires_grad) return out;
  grads[loss.id_] = {1.0};

  std::vector<GradBuffer*> in_ptrs;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (grads[i].empty() || !node.backward) continue;
    in_ptrs.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::size_t j = node.inputs[k];
      if (!nodes_[j].requires_grad) continue;
      if (grads[j].empty()) grads[j].assign(nodes_[j].value.size(), 0.0);
      in_ptrs[k] = &grads[j];
    }
    node.backward(grads[i], in_ptrs);
    // Interior gradients are no longer needed once propagated.
    if (!node.inputs.empty()) GradBuffer().swap(grads[i]);
    node.backward = nullptr;
  }
  return out;
}

}  // namespace shaperefine::numerics
