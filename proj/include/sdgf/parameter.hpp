#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sdgf/autodiff.hpp"

namespace sdgf {

struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;
};

using GradientMap = std::map<std::string, Tensor>;

/// Ordered collection of uniquely named parameters. Order is insertion
/// order, which fixes checkpoint layout and optimizer iteration.
class ParameterStore {
 public:
  /// Registers a new leaf; throws ConfigError on a duplicate name.
  Var add(const std::string& name, Tensor init, bool trainable = true);

  const Parameter& get(const std::string& name) const;
  Parameter& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter>& all() { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Total number of scalar values across all parameters.
  std::size_t scalar_count() const;

  void zero_grad();

  /// Copies values from `other`; names and shapes must match exactly.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

/// Clears the parameters' gradients, runs backward from `loss` and collects
/// the gradient of every trainable parameter (zeros where the loss does not
/// reach).
GradientMap backward(const Var& loss, const ParameterStore& params);

}  // namespace sdgf
