//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "fmdock/common.hpp"
#include "fmdock/rng.hpp"

namespace fmdock::ad {

int ParameterSet::add(std::string name, Matrix init) {
  params_.push_back({ std::move(name), std::move(init) });
  return static_cast<int>(params_.size()) - 1;
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto &p: params_)
    n += static_cast<std::size_t>(p.value.size());
  return n;
}

int ParameterSet::find(const std::string &name) const {
  for (int i = 0; i < size(); ++i)
    if (params_[i].name == name)
      return i;
  return -1;
}

GradBuffer::GradBuffer(const ParameterSet &ps) {
  for (const auto &p: ps)
    grads.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
}

void GradBuffer::zero() {
  for (auto &g: grads)
    g.setZero();
}

GradBuffer &GradBuffer::operator+=(const GradBuffer &o) {
  for (std::size_t i = 0; i < grads.size(); ++i)
    grads[i] += o.grads[i];
  return *this;
}

void GradBuffer::scale(double s) {
  for (auto &g: grads)
    g *= s;
}

double GradBuffer::squared_norm() const {
  double s = 0.0;
  for (const auto &g: grads)
    s += g.squaredNorm();
  return s;
}

bool GradBuffer::all_finite() const {
  for (const auto &g: grads)
    if (!g.allFinite())
      return false;
  return true;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return { static_cast<int>(nodes_.size()) - 1 };
}

Var Tape::param(const ParameterSet &ps, int index, GradBuffer *grads) {
  Node n;
  n.value = ps[index].value;
  n.param = index;
  n.sink = grads;
  n.needs_grad = grads != nullptr;
  nodes_.push_back(std::move(n));
  return { static_cast<int>(nodes_.size()) - 1 };
}

Var Tape::push(Matrix value, std::vector<int> parents, BackFn back) {
  Node n;
  n.value = std::move(value);
  for (int p: parents)
    n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
  if (n.needs_grad)
    n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return { static_cast<int>(nodes_.size()) - 1 };
}

void Tape::accumulate(int id, const Matrix &g) {
  Node &n = nodes_[id];
  if (!n.needs_grad)
    return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(std::span<const std::pair<Var, Matrix>> seeds) {
  for (auto &n: nodes_)
    n.has_grad = false;
  for (const auto &[v, g]: seeds) {
    if (g.rows() != value(v).rows() || g.cols() != value(v).cols())
      throw DataError("backward: seed shape does not match output");
    accumulate(v.id, g);
  }
  for (int id = size() - 1; id >= 0; --id) {
    Node &n = nodes_[id];
    if (!n.has_grad)
      continue;
    if (n.param >= 0) {
      if (n.sink != nullptr)
        n.sink->grads[n.param] += n.grad;
    } else if (n.back) {
      // The node's gradient is complete once all later nodes ran.
      Matrix g = n.grad;
      n.back(*this, g);
    }
  }
}

Var matmul(Tape &t, Var a, Var b) {
  const Matrix &va = t.value(a), &vb = t.value(b);
  if (va.cols() != vb.rows())
    throw DataError("matmul: shape mismatch");
  return t.push(va * vb, { a.id, b.id },
                [a, b](Tape &tp, const Matrix &g) {
                  if (tp.needs_grad(a.id))
                    tp.accumulate(a.id, g * tp.value(b).transpose());
                  if (tp.needs_grad(b.id))
                    tp.accumulate(b.id, tp.value(a).transpose() * g);
                });
}

Var add(Tape &t, Var a, Var b) {
  const Matrix &va = t.value(a), &vb = t.value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw DataError("add: shape mismatch");
  return t.push(va + vb, { a.id, b.id }, [a, b](Tape &tp, const Matrix &g) {
    tp.accumulate(a.id, g);
    tp.accumulate(b.id, g);
  });
}

Var add_row(Tape &t, Var a, Var row) {
  const Matrix &va = t.value(a), &vr = t.value(row);
  if (vr.rows() != 1 || vr.cols() != va.cols())
    throw DataError("add_row: shape mismatch");
  Matrix out = va.rowwise() + vr.row(0);
  return t.push(std::move(out), { a.id, row.id },
                [a, row](Tape &tp, const Matrix &g) {
                  tp.accumulate(a.id, g);
                  if (tp.needs_grad(row.id))
                    tp.accumulate(row.id, g.colwise().sum());
                });
}

Var tanh(Tape &t, Var a) {
  Matrix out = t.value(a).array().tanh().matrix();
  Matrix deriv = (1.0 - out.array().square()).matrix();
  return t.push(std::move(out), { a.id },
                [a, deriv = std::move(deriv)](Tape &tp, const Matrix &g) {
                  tp.accumulate(a.id, g.cwiseProduct(deriv));
                });
}

Var mul(Tape &t, Var a, Var b) {
  const Matrix &va = t.value(a), &vb = t.value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw DataError("mul: shape mismatch");
  return t.push(va.cwiseProduct(vb), { a.id, b.id },
                [a, b](Tape &tp, const Matrix &g) {
                  if (tp.needs_grad(a.id))
                    tp.accumulate(a.id, g.cwiseProduct(tp.value(b)));
                  if (tp.needs_grad(b.id))
                    tp.accumulate(b.id, g.cwiseProduct(tp.value(a)));
                });
}

Var mean_rows(Tape &t, Var a) {
  const Matrix &va = t.value(a);
  const auto n = va.rows();
  Matrix out = n > 0 ? Matrix(va.colwise().mean())
                     : Matrix::Zero(1, va.cols());
  return t.push(std::move(out), { a.id }, [a, n](Tape &tp, const Matrix &g) {
    if (n == 0)
      return;
    Matrix ga = g.replicate(n, 1) / static_cast<double>(n);
    tp.accumulate(a.id, ga);
  });
}

Var gather_mean(Tape &t, Var a, const std::vector<std::vector<int>> &groups) {
  const Matrix &va = t.value(a);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(groups.size()), va.cols());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    if (groups[gi].empty())
      continue;
    for (int r: groups[gi]) {
      if (r < 0 || r >= va.rows())
        throw DataError("gather_mean: row index out of range");
      out.row(gi) += va.row(r);
    }
    out.row(gi) /= static_cast<double>(groups[gi].size());
  }
  const auto rows = va.rows(), cols = va.cols();
  return t.push(std::move(out), { a.id },
                [a, groups, rows, cols](Tape &tp, const Matrix &g) {
                  Matrix ga = Matrix::Zero(rows, cols);
                  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
                    if (groups[gi].empty())
                      continue;
                    double w = 1.0 / static_cast<double>(groups[gi].size());
                    for (int r: groups[gi])
                      ga.row(r) += w * g.row(gi);
                  }
                  tp.accumulate(a.id, ga);
                });
}

Var concat_cols(Tape &t, std::span<const Var> parts) {
  if (parts.empty())
    throw DataError("concat_cols: no inputs");
  const auto rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (Var p: parts) {
    if (t.value(p).rows() != rows)
      throw DataError("concat_cols: row count mismatch");
    cols += t.value(p).cols();
    ids.push_back(p.id);
    widths.push_back(t.value(p).cols());
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (Var p: parts) {
    out.middleCols(off, t.value(p).cols()) = t.value(p);
    off += t.value(p).cols();
  }
  return t.push(std::move(out), ids,
                [ids, widths](Tape &tp, const Matrix &g) {
                  Eigen::Index o = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (tp.needs_grad(ids[k]))
                      tp.accumulate(ids[k], g.middleCols(o, widths[k]));
                    o += widths[k];
                  }
                });
}

Var repeat_rows(Tape &t, Var row, int n) {
  const Matrix &vr = t.value(row);
  if (vr.rows() != 1)
    throw DataError("repeat_rows: expected a row vector");
  return t.push(vr.replicate(n, 1), { row.id },
                [row](Tape &tp, const Matrix &g) {
                  tp.accumulate(row.id, g.colwise().sum());
                });
}

Var row_sum(Tape &t, Var a) {
  const Matrix &va = t.value(a);
  const auto cols = va.cols();
  return t.push(va.rowwise().sum(), { a.id },
                [a, cols](Tape &tp, const Matrix &g) {
                  tp.accumulate(a.id, g.replicate(1, cols));
                });
}

Dense make_dense(ParameterSet &ps, const std::string &name, int in, int out,
                 std::uint64_t seed, double scale) {
  Rng rng(seed);
  double limit = scale * std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(in, out);
  for (int c = 0; c < out; ++c)
    for (int r = 0; r < in; ++r)
      w(r, c) = rng.uniform(-limit, limit);
  Dense d;
  d.weight = ps.add(name + ".weight", std::move(w));
  d.bias = ps.add(name + ".bias", Matrix::Zero(1, out));
  d.in = in;
  d.out = out;
  return d;
}

Var dense(Tape &t, const ParameterSet &ps, const Dense &layer, Var x,
          GradBuffer *grads) {
  if (t.value(x).cols() != layer.in)
    throw DataError("dense: input width " + std::to_string(t.value(x).cols())
                    + " != " + std::to_string(layer.in));
  Var w = t.param(ps, layer.weight, grads);
  Var b = t.param(ps, layer.bias, grads);
  return add_row(t, matmul(t, x, w), b);
}

std::string to_string(OptimizerConfig::Kind k) {
  return k == OptimizerConfig::Kind::AdamW ? "adamw" : "sgd";
}

OptimizerConfig::Kind optimizer_kind_from_string(const std::string &s) {
  if (s == "adamw")
    return OptimizerConfig::Kind::AdamW;
  if (s == "sgd" || s == "sgd_momentum")
    return OptimizerConfig::Kind::SgdMomentum;
  throw DataError("unknown optimizer '" + s + "' (expected sgd or adamw)");
}

namespace {

double clip_factor(const OptimizerConfig &cfg, const GradBuffer &g) {
  if (cfg.grad_clip <= 0.0)
    return 1.0;
  double norm = std::sqrt(g.squared_norm());
  return norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;
}

class SgdMomentum: public Optimizer {
public:
  SgdMomentum(const OptimizerConfig &cfg, const ParameterSet &ps)
      : cfg_(cfg), velocity_(ps) { }

  void step(ParameterSet &ps, const GradBuffer &g) override {
    double c = clip_factor(cfg_, g);
    for (int i = 0; i < ps.size(); ++i) {
      velocity_.grads[i] = cfg_.momentum * velocity_.grads[i] + c * g.grads[i];
      ps[i].value -= cfg_.learning_rate
                     * (velocity_.grads[i] + cfg_.weight_decay * ps[i].value);
    }
  }

private:
  OptimizerConfig cfg_;
  GradBuffer velocity_;
};

class AdamW: public Optimizer {
public:
  AdamW(const OptimizerConfig &cfg, const ParameterSet &ps)
      : cfg_(cfg), m_(ps), v_(ps) { }

  void step(ParameterSet &ps, const GradBuffer &g) override {
    ++t_;
    double c = clip_factor(cfg_, g);
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (int i = 0; i < ps.size(); ++i) {
      Matrix gi = c * g.grads[i];
      m_.grads[i] = cfg_.beta1 * m_.grads[i] + (1.0 - cfg_.beta1) * gi;
      v_.grads[i] = cfg_.beta2 * v_.grads[i]
                    + (1.0 - cfg_.beta2) * gi.cwiseAbs2();
      Matrix mhat = m_.grads[i] / bc1;
      Matrix vhat = v_.grads[i] / bc2;
      ps[i].value.array() *= 1.0 - cfg_.learning_rate * cfg_.weight_decay;
      ps[i].value.array() -= cfg_.learning_rate * mhat.array()
                             / (vhat.array().sqrt() + cfg_.eps);
    }
  }

private:
  OptimizerConfig cfg_;
  GradBuffer m_, v_;
  int t_ = 0;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig &cfg,
                                          const ParameterSet &ps) {
  if (cfg.kind == OptimizerConfig::Kind::AdamW)
    return std::make_unique<AdamW>(cfg, ps);
  return std::make_unique<SgdMomentum>(cfg, ps);
}

}  // namespace fmdock::ad
