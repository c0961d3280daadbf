#pragma once

#include <string>
#include <vector>

#include "rmlab/error.hpp"

namespace rmlab {

int shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Dense row-major tensor of doubles; the only numeric container in the
// project. Rank 1 to 3 covers every use (vectors, matrices, batched
// sequences). Scalars are rank-1 tensors of size 1.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor row(std::vector<double> values);

  int dim() const { return static_cast<int>(shape.size()); }
  int size() const { return static_cast<int>(data.size()); }

  double& at(int i);
  double& at(int i, int j);
  double& at(int i, int j, int k);
  double at(int i) const;
  double at(int i, int j) const;
  double at(int i, int j, int k) const;

  double scalar_value() const;  // requires size() == 1

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
};

// Throws ShapeError with the given message when cond is false.
void require_shape(bool cond, const std::string& what);

// Numerically stable softmax of a plain vector (max subtraction before exp).
std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace rmlab
