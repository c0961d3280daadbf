#include "rmlab/params.hpp"

#include "rmlab/error.hpp"

namespace rmlab {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (has(name)) throw Error("duplicate parameter name: " + name);
  names_.push_back(name);
  return values_.emplace(name, std::move(value)).first->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw Error("unknown parameter name: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  return const_cast<ParamStore*>(this)->get(name);
}

int ParamStore::total_size() const {
  int n = 0;
  for (const auto& name : names_) n += get(name).size();
  return n;
}

void ParamStore::absorb(ParamStore&& other) {
  for (const auto& name : other.names_) add(name, std::move(other.values_.at(name)));
  other.names_.clear();
  other.values_.clear();
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& name : names_) out.add(name, Tensor::zeros(get(name).shape));
  return out;
}

NodeId ParamBinding::at(const std::string& name) const {
  auto it = ids.find(name);
  if (it == ids.end()) throw Error("parameter not bound on tape: " + name);
  return it->second;
}

ParamBinding bind_params(Tape& tape, const ParamStore& params) {
  return bind_params(tape, params, [](const std::string&) { return true; });
}

ParamBinding bind_params(Tape& tape, const ParamStore& params,
                         const std::function<bool(const std::string&)>& trainable) {
  ParamBinding binding;
  for (const auto& name : params.names())
    binding.ids.emplace(name, tape.leaf(params.get(name), trainable(name)));
  return binding;
}

}  // namespace rmlab
