#include "rmlab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace rmlab {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;  // 1/sqrt(2*pi)

// c[M,N] += a[M,K] @ b[K,N]
void gemm_acc(const double* a, const double* b, double* c, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * K;
    double* crow = c + static_cast<std::size_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const double av = arow[k];
      const double* brow = b + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[M,K] += a[M,N] @ b[K,N]^T  (contiguous row dots)
void gemm_nt_acc(const double* a, const double* b, double* c, int M, int N, int K) {
  for (int i = 0; i < M; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * N;
    double* crow = c + static_cast<std::size_t>(i) * K;
    for (int k = 0; k < K; ++k) {
      const double* brow = b + static_cast<std::size_t>(k) * N;
      double s = 0.0;
      for (int j = 0; j < N; ++j) s += arow[j] * brow[j];
      crow[k] += s;
    }
  }
}

// c[K,N] += a[M,K]^T @ b[M,N]
void gemm_tn_acc(const double* a, const double* b, double* c, int M, int K, int N) {
  for (int m = 0; m < M; ++m) {
    const double* arow = a + static_cast<std::size_t>(m) * K;
    const double* brow = b + static_cast<std::size_t>(m) * N;
    for (int k = 0; k < K; ++k) {
      const double av = arow[k];
      double* crow = c + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) crow[j] += av * brow[j];
    }
  }
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tape::Node& Tape::node_at(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }
const Tape::Node& Tape::node_at(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }

NodeId Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("non-finite values in leaf tensor");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad = Tensor::zeros(n.value.shape);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::push(Tensor value, std::vector<NodeId> inputs,
                  std::function<void(Tape&, NodeId)> backward_fn, const char* op_name) {
  if (!value.all_finite())
    throw NumericError(std::string("non-finite values produced by op ") + op_name);
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  for (NodeId i : n.inputs) {
    if (node_at(i).requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) {
    n.grad = Tensor::zeros(n.value.shape);
    n.backward_fn = std::move(backward_fn);
  }
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = node_at(id);
  if (!n.requires_grad) throw Error("grad() on a node that does not require gradients");
  return n.grad;
}

void Tape::zero_grad() {
  for (Node& n : nodes_)
    if (n.requires_grad) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
}

void Tape::backward(NodeId root) {
  Node& r = node_at(root);
  require_shape(r.value.size() == 1,
                "backward root must be scalar, got shape " + shape_str(r.value.shape));
  zero_grad();
  if (!r.requires_grad) return;  // nothing on the tape participates
  r.grad.data[0] = 1.0;
  // Ids are topological, so one descending sweep settles reachability.
  std::vector<char> reachable(nodes_.size(), 0);
  reachable[static_cast<std::size_t>(root)] = 1;
  for (NodeId id = root; id >= 0; --id) {
    if (!reachable[static_cast<std::size_t>(id)]) continue;
    Node& n = node_at(id);
    for (NodeId in : n.inputs) reachable[static_cast<std::size_t>(in)] = 1;
    if (n.requires_grad && n.backward_fn) n.backward_fn(*this, id);
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_shape(ta.same_shape(tb),
                "add shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                if (t.node_at(a).requires_grad) {
                  Tensor& ga = t.node_at(a).grad;
                  for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                }
                if (t.node_at(b).requires_grad) {
                  Tensor& gb = t.node_at(b).grad;
                  for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
                }
              },
              "add");
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_shape(ta.same_shape(tb),
                "sub shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= tb.data[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                if (t.node_at(a).requires_grad) {
                  Tensor& ga = t.node_at(a).grad;
                  for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                }
                if (t.node_at(b).requires_grad) {
                  Tensor& gb = t.node_at(b).grad;
                  for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
                }
              },
              "sub");
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_shape(ta.same_shape(tb),
                "mul shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                const Tensor& va = t.node_at(a).value;
                const Tensor& vb = t.node_at(b).value;
                if (t.node_at(a).requires_grad) {
                  Tensor& ga = t.node_at(a).grad;
                  for (std::size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i] * vb.data[i];
                }
                if (t.node_at(b).requires_grad) {
                  Tensor& gb = t.node_at(b).grad;
                  for (std::size_t i = 0; i < g.data.size(); ++i)
                    gb.data[i] += g.data[i] * va.data[i];
                }
              },
              "mul");
}

NodeId Tape::scale(NodeId a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v *= c;
  return push(std::move(out), {a},
              [a, c](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                Tensor& ga = t.node_at(a).grad;
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
              },
              "scale");
}

NodeId Tape::add_scalar(NodeId a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v += c;
  return push(std::move(out), {a},
              [a](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                Tensor& ga = t.node_at(a).grad;
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
              },
              "add_scalar");
}

NodeId Tape::gelu(NodeId a) {
  const Tensor& ta = value(a);
  Tensor out = ta;
  for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
  return push(std::move(out), {a},
              [a](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                const Tensor& x = t.node_at(a).value;
                Tensor& ga = t.node_at(a).grad;
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                  const double xi = x.data[i];
                  const double cdf = 0.5 * (1.0 + std::erf(xi * M_SQRT1_2));
                  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
                  ga.data[i] += g.data[i] * (cdf + xi * pdf);
                }
              },
              "gelu");
}

NodeId Tape::softplus(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = stable_softplus(v);
  return push(std::move(out), {a},
              [a](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                const Tensor& x = t.node_at(a).value;
                Tensor& ga = t.node_at(a).grad;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                  ga.data[i] += g.data[i] * stable_sigmoid(x.data[i]);
              },
              "softplus");
}

NodeId Tape::sigmoid(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = stable_sigmoid(v);
  return push(std::move(out), {a},
              [a](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                const Tensor& y = t.node_at(self).value;
                Tensor& ga = t.node_at(a).grad;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                  ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
              },
              "sigmoid");
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_shape(tb.dim() == 2, "matmul rhs must be rank 2, got " + shape_str(tb.shape));
  require_shape(ta.dim() == 2 || ta.dim() == 3,
                "matmul lhs must be rank 2 or 3, got " + shape_str(ta.shape));
  const int K = ta.shape[ta.dim() - 1];
  require_shape(K == tb.shape[0], "matmul inner dims " + shape_str(ta.shape) + " x " +
                                      shape_str(tb.shape));
  const int N = tb.shape[1];
  const int M = ta.size() / K;  // all leading dims flattened
  std::vector<int> out_shape = ta.shape;
  out_shape.back() = N;
  Tensor out = Tensor::zeros(out_shape);
  gemm_acc(ta.data.data(), tb.data.data(), out.data.data(), M, K, N);
  return push(std::move(out), {a, b},
              [a, b, M, K, N](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                const Tensor& va = t.node_at(a).value;
                const Tensor& vb = t.node_at(b).value;
                if (t.node_at(a).requires_grad)
                  gemm_nt_acc(g.data.data(), vb.data.data(), t.node_at(a).grad.data.data(), M, N,
                              K);
                if (t.node_at(b).requires_grad)
                  gemm_tn_acc(va.data.data(), g.data.data(), t.node_at(b).grad.data.data(), M, K,
                              N);
              },
              "matmul");
}

NodeId Tape::bmatmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_shape(ta.dim() == 3 && tb.dim() == 3,
                "bmatmul needs rank-3 operands, got " + shape_str(ta.shape) + " x " +
                    shape_str(tb.shape));
  const int B = ta.shape[0], M = ta.shape[1], K = ta.shape[2];
  require_shape(tb.shape[0] == B && tb.shape[1] == K,
                "bmatmul shape mismatch " + shape_str(ta.shape) + " x " + shape_str(tb.shape));
  const int N = tb.shape[2];
  Tensor out = Tensor::zeros({B, M, N});
  for (int i = 0; i < B; ++i)
    gemm_acc(ta.data.data() + static_cast<std::size_t>(i) * M * K,
             tb.data.data() + static_cast<std::size_t>(i) * K * N,
             out.data.data() + static_cast<std::size_t>(i) * M * N, M, K, N);
  return push(std::move(out), {a, b},
              [a, b, B, M, K, N](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                const Tensor& va = t.node_at(a).value;
                const Tensor& vb = t.node_at(b).value;
                for (int i = 0; i < B; ++i) {
                  const double* gi = g.data.data() + static_cast<std::size_t>(i) * M * N;
                  if (t.node_at(a).requires_grad)
                    gemm_nt_acc(gi, vb.data.data() + static_cast<std::size_t>(i) * K * N,
                                t.node_at(a).grad.data.data() + static_cast<std::size_t>(i) * M * K,
                                M, N, K);
                  if (t.node_at(b).requires_grad)
                    gemm_tn_acc(va.data.data() + static_cast<std::size_t>(i) * M * K, gi,
                                t.node_at(b).grad.data.data() + static_cast<std::size_t>(i) * K * N,
                                M, K, N);
                }
              },
              "bmatmul");
}

NodeId Tape::transpose_last(NodeId a) {
  const Tensor& ta = value(a);
  require_shape(ta.dim() == 2 || ta.dim() == 3,
                "transpose_last needs rank 2 or 3, got " + shape_str(ta.shape));
  const int M = ta.shape[ta.dim() - 2], N = ta.shape[ta.dim() - 1];
  const int B = ta.size() / (M * N);
  std::vector<int> out_shape = ta.shape;
  std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
  Tensor out = Tensor::zeros(out_shape);
  for (int i = 0; i < B; ++i) {
    const double* src = ta.data.data() + static_cast<std::size_t>(i) * M * N;
    double* dst = out.data.data() + static_cast<std::size_t>(i) * M * N;
    for (int r = 0; r < M; ++r)
      for (int c = 0; c < N; ++c) dst[static_cast<std::size_t>(c) * M + r] = src[static_cast<std::size_t>(r) * N + c];
  }
  return push(std::move(out), {a},
              [a, B, M, N](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;  // [.., N, M]
                Tensor& ga = t.node_at(a).grad;
                for (int i = 0; i < B; ++i) {
                  const double* gsrc = g.data.data() + static_cast<std::size_t>(i) * M * N;
                  double* gdst = ga.data.data() + static_cast<std::size_t>(i) * M * N;
                  for (int c = 0; c < N; ++c)
                    for (int r = 0; r < M; ++r)
                      gdst[static_cast<std::size_t>(r) * N + c] += gsrc[static_cast<std::size_t>(c) * M + r];
                }
              },
              "transpose_last");
}

// ---------------------------------------------------------------------------
// normalization and reductions
// ---------------------------------------------------------------------------

NodeId Tape::softmax_lastdim(NodeId a) {
  const Tensor& ta = value(a);
  require_shape(ta.dim() >= 1, "softmax_lastdim of rank-0 tensor");
  const int D = ta.shape[ta.dim() - 1];
  const int rows = ta.size() / D;
  Tensor out = ta;
  for (int r = 0; r < rows; ++r) {
    double* row = out.data.data() + static_cast<std::size_t>(r) * D;
    double m = row[0];
    for (int j = 1; j < D; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < D; ++j) {
      row[j] = std::exp(row[j] - m);
      z += row[j];
    }
    for (int j = 0; j < D; ++j) row[j] /= z;
  }
  return push(std::move(out), {a},
              [a, rows, D](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                const Tensor& y = t.node_at(self).value;
                Tensor& ga = t.node_at(a).grad;
                for (int r = 0; r < rows; ++r) {
                  const double* gr = g.data.data() + static_cast<std::size_t>(r) * D;
                  const double* yr = y.data.data() + static_cast<std::size_t>(r) * D;
                  double* gar = ga.data.data() + static_cast<std::size_t>(r) * D;
                  double dot = 0.0;
                  for (int j = 0; j < D; ++j) dot += gr[j] * yr[j];
                  for (int j = 0; j < D; ++j) gar[j] += yr[j] * (gr[j] - dot);
                }
              },
              "softmax_lastdim");
}

NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gain);
  const Tensor& tb = value(bias);
  require_shape(tx.dim() >= 1, "layer_norm of rank-0 tensor");
  const int D = tx.shape[tx.dim() - 1];
  require_shape(tg.dim() == 1 && tg.shape[0] == D && tb.dim() == 1 && tb.shape[0] == D,
                "layer_norm gain/bias must be [D]=" + std::to_string(D));
  const int rows = tx.size() / D;
  Tensor out = Tensor::zeros(tx.shape);
  for (int r = 0; r < rows; ++r) {
    const double* xr = tx.data.data() + static_cast<std::size_t>(r) * D;
    double* yr = out.data.data() + static_cast<std::size_t>(r) * D;
    double mean = 0.0;
    for (int j = 0; j < D; ++j) mean += xr[j];
    mean /= D;
    double var = 0.0;
    for (int j = 0; j < D; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= D;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < D; ++j) yr[j] = tg.data[j] * ((xr[j] - mean) * inv) + tb.data[j];
  }
  return push(std::move(out), {x, gain, bias},
              [x, gain, bias, eps, rows, D](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                const Tensor& tx2 = t.node_at(x).value;
                const Tensor& tg2 = t.node_at(gain).value;
                for (int r = 0; r < rows; ++r) {
                  const double* xr = tx2.data.data() + static_cast<std::size_t>(r) * D;
                  const double* gr = g.data.data() + static_cast<std::size_t>(r) * D;
                  double mean = 0.0;
                  for (int j = 0; j < D; ++j) mean += xr[j];
                  mean /= D;
                  double var = 0.0;
                  for (int j = 0; j < D; ++j) var += (xr[j] - mean) * (xr[j] - mean);
                  var /= D;
                  const double inv = 1.0 / std::sqrt(var + eps);
                  // xhat and the two row means needed by the chain rule
                  double mean_gh = 0.0, mean_ghx = 0.0;
                  for (int j = 0; j < D; ++j) {
                    const double xhat = (xr[j] - mean) * inv;
                    const double gh = gr[j] * tg2.data[j];
                    mean_gh += gh;
                    mean_ghx += gh * xhat;
                  }
                  mean_gh /= D;
                  mean_ghx /= D;
                  if (t.node_at(x).requires_grad) {
                    double* gx = t.node_at(x).grad.data.data() + static_cast<std::size_t>(r) * D;
                    for (int j = 0; j < D; ++j) {
                      const double xhat = (xr[j] - mean) * inv;
                      const double gh = gr[j] * tg2.data[j];
                      gx[j] += inv * (gh - mean_gh - xhat * mean_ghx);
                    }
                  }
                  if (t.node_at(gain).requires_grad) {
                    Tensor& gg = t.node_at(gain).grad;
                    for (int j = 0; j < D; ++j)
                      gg.data[j] += gr[j] * ((xr[j] - mean) * inv);
                  }
                  if (t.node_at(bias).requires_grad) {
                    Tensor& gb = t.node_at(bias).grad;
                    for (int j = 0; j < D; ++j) gb.data[j] += gr[j];
                  }
                }
              },
              "layer_norm");
}

NodeId Tape::sum_all(NodeId a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (double v : ta.data) s += v;
  return push(Tensor::scalar(s), {a},
              [a](Tape& t, NodeId self) {
                const double g = t.node_at(self).grad.data[0];
                Tensor& ga = t.node_at(a).grad;
                for (double& v : ga.data) v += g;
              },
              "sum_all");
}

NodeId Tape::mean_all(NodeId a) {
  const Tensor& ta = value(a);
  const double n = static_cast<double>(ta.size());
  double s = 0.0;
  for (double v : ta.data) s += v;
  return push(Tensor::scalar(s / n), {a},
              [a, n](Tape& t, NodeId self) {
                const double g = t.node_at(self).grad.data[0] / n;
                Tensor& ga = t.node_at(a).grad;
                for (double& v : ga.data) v += g;
              },
              "mean_all");
}

NodeId Tape::sum_nodes(const std::vector<NodeId>& parts) {
  require_shape(!parts.empty(), "sum_nodes of empty list");
  Tensor out = value(parts[0]);
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Tensor& tp = value(parts[p]);
    require_shape(tp.same_shape(out), "sum_nodes shape mismatch at part " + std::to_string(p));
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += tp.data[i];
  }
  std::vector<NodeId> inputs = parts;
  return push(std::move(out), std::move(inputs),
              [parts](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                for (NodeId p : parts) {
                  if (!t.node_at(p).requires_grad) continue;
                  Tensor& gp = t.node_at(p).grad;
                  for (std::size_t i = 0; i < g.data.size(); ++i) gp.data[i] += g.data[i];
                }
              },
              "sum_nodes");
}

// ---------------------------------------------------------------------------
// broadcasting
// ---------------------------------------------------------------------------

NodeId Tape::add_suffix(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_shape(tb.dim() <= ta.dim(), "add_suffix rhs rank exceeds lhs rank");
  for (int i = 0; i < tb.dim(); ++i)
    require_shape(tb.shape[tb.dim() - 1 - i] == ta.shape[ta.dim() - 1 - i],
                  "add_suffix " + shape_str(tb.shape) + " is not a suffix of " +
                      shape_str(ta.shape));
  const int nb = tb.size();
  const int leading = ta.size() / nb;
  Tensor out = ta;
  for (int l = 0; l < leading; ++l) {
    double* row = out.data.data() + static_cast<std::size_t>(l) * nb;
    for (int j = 0; j < nb; ++j) row[j] += tb.data[j];
  }
  return push(std::move(out), {a, b},
              [a, b, leading, nb](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                if (t.node_at(a).requires_grad) {
                  Tensor& ga = t.node_at(a).grad;
                  for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                }
                if (t.node_at(b).requires_grad) {
                  Tensor& gb = t.node_at(b).grad;
                  for (int l = 0; l < leading; ++l) {
                    const double* row = g.data.data() + static_cast<std::size_t>(l) * nb;
                    for (int j = 0; j < nb; ++j) gb.data[j] += row[j];
                  }
                }
              },
              "add_suffix");
}

NodeId Tape::expand_leading(NodeId a, int n) {
  const Tensor& ta = value(a);
  require_shape(ta.dim() >= 1 && ta.shape[0] == 1,
                "expand_leading needs leading dim 1, got " + shape_str(ta.shape));
  require_shape(n >= 1, "expand_leading to non-positive size");
  const int m = ta.size();
  std::vector<int> out_shape = ta.shape;
  out_shape[0] = n;
  Tensor out = Tensor::zeros(out_shape);
  for (int r = 0; r < n; ++r)
    std::copy(ta.data.begin(), ta.data.end(), out.data.begin() + static_cast<std::size_t>(r) * m);
  return push(std::move(out), {a},
              [a, n, m](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                Tensor& ga = t.node_at(a).grad;
                for (int r = 0; r < n; ++r) {
                  const double* row = g.data.data() + static_cast<std::size_t>(r) * m;
                  for (int j = 0; j < m; ++j) ga.data[j] += row[j];
                }
              },
              "expand_leading");
}

// ---------------------------------------------------------------------------
// indexing and reshaping
// ---------------------------------------------------------------------------

NodeId Tape::slice_lastdim(NodeId a, int start, int len) {
  const Tensor& ta = value(a);
  require_shape(ta.dim() >= 1, "slice_lastdim of rank-0 tensor");
  const int L = ta.shape[ta.dim() - 1];
  require_shape(start >= 0 && len > 0 && start + len <= L,
                "slice_lastdim [" + std::to_string(start) + "," + std::to_string(start + len) +
                    ") out of range for last dim " + std::to_string(L));
  const int rows = ta.size() / L;
  std::vector<int> out_shape = ta.shape;
  out_shape.back() = len;
  Tensor out = Tensor::zeros(out_shape);
  for (int r = 0; r < rows; ++r) {
    const double* src = ta.data.data() + static_cast<std::size_t>(r) * L + start;
    std::copy(src, src + len, out.data.begin() + static_cast<std::size_t>(r) * len);
  }
  return push(std::move(out), {a},
              [a, start, len, rows, L](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                Tensor& ga = t.node_at(a).grad;
                for (int r = 0; r < rows; ++r) {
                  const double* gr = g.data.data() + static_cast<std::size_t>(r) * len;
                  double* gar = ga.data.data() + static_cast<std::size_t>(r) * L + start;
                  for (int j = 0; j < len; ++j) gar[j] += gr[j];
                }
              },
              "slice_lastdim");
}

NodeId Tape::concat_lastdim(const std::vector<NodeId>& parts) {
  require_shape(!parts.empty(), "concat_lastdim of empty list");
  const Tensor& t0 = value(parts[0]);
  std::vector<int> lead(t0.shape.begin(), t0.shape.end() - 1);
  int total = 0;
  std::vector<int> widths;
  for (NodeId p : parts) {
    const Tensor& tp = value(p);
    require_shape(tp.dim() == t0.dim() &&
                      std::equal(lead.begin(), lead.end(), tp.shape.begin()),
                  "concat_lastdim leading-dim mismatch");
    widths.push_back(tp.shape.back());
    total += tp.shape.back();
  }
  const int rows = t0.size() / t0.shape.back();
  std::vector<int> out_shape = t0.shape;
  out_shape.back() = total;
  Tensor out = Tensor::zeros(out_shape);
  int offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& tp = value(parts[p]);
    const int w = widths[p];
    for (int r = 0; r < rows; ++r)
      std::copy(tp.data.begin() + static_cast<std::size_t>(r) * w,
                tp.data.begin() + static_cast<std::size_t>(r) * w + w,
                out.data.begin() + static_cast<std::size_t>(r) * total + offset);
    offset += w;
  }
  std::vector<NodeId> inputs = parts;
  std::vector<NodeId> captured = parts;
  return push(std::move(out), std::move(inputs),
              [captured, widths, rows, total](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                int off = 0;
                for (std::size_t p = 0; p < captured.size(); ++p) {
                  const int w = widths[p];
                  if (t.node_at(captured[p]).requires_grad) {
                    Tensor& gp = t.node_at(captured[p]).grad;
                    for (int r = 0; r < rows; ++r) {
                      const double* gr = g.data.data() + static_cast<std::size_t>(r) * total + off;
                      double* dst = gp.data.data() + static_cast<std::size_t>(r) * w;
                      for (int j = 0; j < w; ++j) dst[j] += gr[j];
                    }
                  }
                  off += w;
                }
              },
              "concat_lastdim");
}

NodeId Tape::select_position(NodeId a, int pos) {
  const Tensor& ta = value(a);
  require_shape(ta.dim() == 2 || ta.dim() == 3,
                "select_position needs rank 2 or 3, got " + shape_str(ta.shape));
  const int D = ta.shape[ta.dim() - 1];
  const int S = ta.shape[ta.dim() - 2];
  const int B = ta.size() / (S * D);
  require_shape(pos >= 0 && pos < S,
                "select_position " + std::to_string(pos) + " out of range for length " +
                    std::to_string(S));
  std::vector<int> out_shape =
      ta.dim() == 3 ? std::vector<int>{B, D} : std::vector<int>{D};
  Tensor out = Tensor::zeros(out_shape);
  for (int b = 0; b < B; ++b) {
    const double* src = ta.data.data() + (static_cast<std::size_t>(b) * S + pos) * D;
    std::copy(src, src + D, out.data.begin() + static_cast<std::size_t>(b) * D);
  }
  return push(std::move(out), {a},
              [a, pos, B, S, D](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                Tensor& ga = t.node_at(a).grad;
                for (int b = 0; b < B; ++b) {
                  const double* gr = g.data.data() + static_cast<std::size_t>(b) * D;
                  double* dst = ga.data.data() + (static_cast<std::size_t>(b) * S + pos) * D;
                  for (int j = 0; j < D; ++j) dst[j] += gr[j];
                }
              },
              "select_position");
}

NodeId Tape::mean_rows(NodeId a) {
  const Tensor& ta = value(a);
  require_shape(ta.dim() == 2 || ta.dim() == 3,
                "mean_rows needs rank 2 or 3, got " + shape_str(ta.shape));
  const int D = ta.shape[ta.dim() - 1];
  const int S = ta.shape[ta.dim() - 2];
  const int B = ta.size() / (S * D);
  std::vector<int> out_shape =
      ta.dim() == 3 ? std::vector<int>{B, D} : std::vector<int>{D};
  Tensor out = Tensor::zeros(out_shape);
  for (int b = 0; b < B; ++b) {
    double* dst = out.data.data() + static_cast<std::size_t>(b) * D;
    for (int s = 0; s < S; ++s) {
      const double* src = ta.data.data() + (static_cast<std::size_t>(b) * S + s) * D;
      for (int j = 0; j < D; ++j) dst[j] += src[j];
    }
    for (int j = 0; j < D; ++j) dst[j] /= S;
  }
  return push(std::move(out), {a},
              [a, B, S, D](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                Tensor& ga = t.node_at(a).grad;
                for (int b = 0; b < B; ++b) {
                  const double* gr = g.data.data() + static_cast<std::size_t>(b) * D;
                  for (int s = 0; s < S; ++s) {
                    double* dst = ga.data.data() + (static_cast<std::size_t>(b) * S + s) * D;
                    for (int j = 0; j < D; ++j) dst[j] += gr[j] / S;
                  }
                }
              },
              "mean_rows");
}

NodeId Tape::reshape(NodeId a, std::vector<int> shape) {
  const Tensor& ta = value(a);
  require_shape(shape_numel(shape) == ta.size(),
                "reshape " + shape_str(ta.shape) + " -> " + shape_str(shape) +
                    " changes element count");
  Tensor out;
  out.shape = std::move(shape);
  out.data = ta.data;
  return push(std::move(out), {a},
              [a](Tape& t, NodeId self) {
                const Tensor& g = t.node_at(self).grad;
                Tensor& ga = t.node_at(a).grad;
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
              },
              "reshape");
}

NodeId Tape::element(NodeId a, int flat_index) {
  const Tensor& ta = value(a);
  require_shape(flat_index >= 0 && flat_index < ta.size(),
                "element index " + std::to_string(flat_index) + " out of range for " +
                    shape_str(ta.shape));
  return push(Tensor::scalar(ta.data[static_cast<std::size_t>(flat_index)]), {a},
              [a, flat_index](Tape& t, NodeId self) {
                t.node_at(a).grad.data[static_cast<std::size_t>(flat_index)] +=
                    t.node_at(self).grad.data[0];
              },
              "element");
}

// ---------------------------------------------------------------------------
// composites
// ---------------------------------------------------------------------------

NodeId affine(Tape& tape, NodeId x, NodeId w, NodeId b) {
  return tape.add_suffix(tape.matmul(x, w), b);
}

NodeId multi_head_attention(Tape& tape, NodeId query, NodeId keys, NodeId values,
                            const MhaWeights& w, int heads) {
  const Tensor& tq = tape.value(query);
  const Tensor& tk = tape.value(keys);
  const Tensor& tv = tape.value(values);
  require_shape(tq.dim() == 3 && tk.dim() == 3 && tv.dim() == 3,
                "attention operands must be rank 3 ([batch, positions, dim])");
  require_shape(tk.same_shape(tv), "attention keys/values shape mismatch " +
                                       shape_str(tk.shape) + " vs " + shape_str(tv.shape));
  require_shape(tq.shape[0] == tk.shape[0] && tq.shape[2] == tk.shape[2],
                "attention query/keys mismatch " + shape_str(tq.shape) + " vs " +
                    shape_str(tk.shape));
  const int D = tq.shape[2];
  require_shape(heads >= 1 && D % heads == 0,
                "model dim " + std::to_string(D) + " not divisible by " +
                    std::to_string(heads) + " heads");
  const int dh = D / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  NodeId q = affine(tape, query, w.wq, w.bq);
  NodeId k = tape.matmul(keys, w.wk);
  NodeId v = affine(tape, values, w.wv, w.bv);

  std::vector<NodeId> head_outs;
  head_outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    NodeId qh = tape.slice_lastdim(q, h * dh, dh);
    NodeId kh = tape.slice_lastdim(k, h * dh, dh);
    NodeId vh = tape.slice_lastdim(v, h * dh, dh);
    NodeId scores = tape.scale(tape.bmatmul(qh, tape.transpose_last(kh)), inv_sqrt);
    NodeId attn = tape.softmax_lastdim(scores);
    head_outs.push_back(tape.bmatmul(attn, vh));
  }
  NodeId merged = heads == 1 ? head_outs[0] : tape.concat_lastdim(head_outs);
  return affine(tape, merged, w.wo, w.bo);
}

}  // namespace rmlab
