#include "sdgf/parameter.hpp"

#include "sdgf/errors.hpp"

namespace sdgf {

Var ParameterStore::add(const std::string& name, Tensor init, bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Var v(std::move(init), trainable);
  index_[name] = params_.size();
  params_.push_back(Parameter{name, v, trainable});
  return v;
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return params_[it->second];
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.size() != size()) throw ConfigError("parameter sets differ in size");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& src = other.params_[i];
    auto& dst = params_[i];
    if (src.name != dst.name || src.var.shape() != dst.var.shape()) {
      throw ConfigError("parameter mismatch: '" + dst.name + "' vs '" + src.name + "'");
    }
    dst.var.mutable_value() = src.var.value();
  }
}

GradientMap backward(const Var& loss, const ParameterStore& params) {
  for (const auto& p : params.all()) {
    Var handle = p.var;
    handle.zero_grad();
  }
  backward(loss);
  GradientMap grads;
  for (const auto& p : params.all()) {
    if (p.trainable) grads.emplace(p.name, p.var.grad());
  }
  return grads;
}

}  // namespace sdgf
