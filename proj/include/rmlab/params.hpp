#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rmlab/tape.hpp"
#include "rmlab/tensor.hpp"

namespace rmlab {

// Ordered collection of named parameter tensors. Every consumer (optimizer,
// serialization, gradient flattening) iterates in insertion order, which is
// what keeps training runs bit-reproducible.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor value);
  bool has(const std::string& name) const { return values_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t count() const { return names_.size(); }
  int total_size() const;

  // Moves every entry of `other` into this store; duplicate names are an
  // error. Used to join backbone and head parameter sets.
  void absorb(ParamStore&& other);

  // Same names and shapes, all values zero. Gradient accumulator shape.
  ParamStore zeros_like() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensor> values_;
};

// Tape leaves for each parameter of a store. Parameters selected as
// trainable become requires_grad leaves; the rest are constants.
struct ParamBinding {
  std::unordered_map<std::string, NodeId> ids;

  NodeId at(const std::string& name) const;
  bool has(const std::string& name) const { return ids.count(name) != 0; }
};

ParamBinding bind_params(Tape& tape, const ParamStore& params);
ParamBinding bind_params(Tape& tape, const ParamStore& params,
                         const std::function<bool(const std::string&)>& trainable);

}  // namespace rmlab
