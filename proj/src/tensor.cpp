#include "rmlab/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace rmlab {

int shape_numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<int> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (shape_numel(shape) != static_cast<int>(data.size()))
    throw ShapeError("tensor data size " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  int n = shape_numel(shape);
  t.shape = std::move(shape);
  t.data.assign(static_cast<std::size_t>(n), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.data.begin(), t.data.end(), value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.shape = {1};
  t.data = {value};
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  Tensor t;
  t.shape = {static_cast<int>(values.size())};
  t.data = std::move(values);
  return t;
}

double& Tensor::at(int i) {
  require_shape(dim() == 1, "at(i) on tensor of shape " + shape_str(shape));
  return data[static_cast<std::size_t>(i)];
}

double& Tensor::at(int i, int j) {
  require_shape(dim() == 2, "at(i,j) on tensor of shape " + shape_str(shape));
  return data[static_cast<std::size_t>(i) * shape[1] + j];
}

double& Tensor::at(int i, int j, int k) {
  require_shape(dim() == 3, "at(i,j,k) on tensor of shape " + shape_str(shape));
  return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
}

double Tensor::at(int i) const { return const_cast<Tensor*>(this)->at(i); }
double Tensor::at(int i, int j) const { return const_cast<Tensor*>(this)->at(i, j); }
double Tensor::at(int i, int j, int k) const { return const_cast<Tensor*>(this)->at(i, j, k); }

double Tensor::scalar_value() const {
  require_shape(size() == 1, "scalar_value() on tensor of shape " + shape_str(shape));
  return data[0];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void require_shape(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw ShapeError("softmax of empty vector");
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

}  // namespace rmlab
