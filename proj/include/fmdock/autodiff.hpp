//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fmdock::ad {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
};

/// Named parameter arrays of a model. Gradients live in a separate
/// GradBuffer so several tapes can run against the same parameters.
class ParameterSet {
public:
  int add(std::string name, Matrix init);
  int size() const { return static_cast<int>(params_.size()); }
  Parameter &operator[](int i) { return params_[i]; }
  const Parameter &operator[](int i) const { return params_[i]; }
  std::size_t num_scalars() const;
  int find(const std::string &name) const;  // -1 if absent

  std::vector<Parameter>::iterator begin() { return params_.begin(); }
  std::vector<Parameter>::iterator end() { return params_.end(); }
  std::vector<Parameter>::const_iterator begin() const {
    return params_.begin();
  }
  std::vector<Parameter>::const_iterator end() const { return params_.end(); }

private:
  std::vector<Parameter> params_;
};

/// Gradient accumulator shaped like a ParameterSet.
struct GradBuffer {
  std::vector<Matrix> grads;

  GradBuffer() = default;
  explicit GradBuffer(const ParameterSet &ps);
  void zero();
  GradBuffer &operator+=(const GradBuffer &o);
  void scale(double s);
  double squared_norm() const;
  bool all_finite() const;
};

struct Var {
  int id = -1;
};

/// Reverse-mode tape over dense matrices. Nodes are appended in
/// evaluation order, so the reverse sweep is a plain backward loop.
class Tape {
public:
  Var constant(Matrix value);
  /// Leaf bound to parameter `index`; its gradient is accumulated into
  /// `grads` (may be null for inference-only tapes).
  Var param(const ParameterSet &ps, int index, GradBuffer *grads);

  const Matrix &value(Var v) const { return nodes_[v.id].value; }
  const Matrix &grad(Var v) const { return nodes_[v.id].grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Seeds d(loss)/d(output) for each output and runs the reverse sweep.
  void backward(std::span<const std::pair<Var, Matrix>> seeds);

  // Op construction; `back` receives the node's own gradient and pushes
  // contributions into parents via accumulate().
  using BackFn = std::function<void(Tape &, const Matrix &grad)>;
  Var push(Matrix value, std::vector<int> parents, BackFn back);
  void accumulate(int id, const Matrix &g);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackFn back;
    bool needs_grad = false;
    bool has_grad = false;
    int param = -1;
    GradBuffer *sink = nullptr;
  };
  std::vector<Node> nodes_;
};

// ---- ops ----------------------------------------------------------------

Var matmul(Tape &t, Var a, Var b);
Var add(Tape &t, Var a, Var b);
/// a (n x d) + row (1 x d), broadcast over rows
Var add_row(Tape &t, Var a, Var row);
Var tanh(Tape &t, Var a);
/// Elementwise product.
Var mul(Tape &t, Var a, Var b);
/// n x d -> 1 x d
Var mean_rows(Tape &t, Var a);
/// Row g of the result is the mean of rows groups[g] of a (zero for an
/// empty group).
Var gather_mean(Tape &t, Var a, const std::vector<std::vector<int>> &groups);
Var concat_cols(Tape &t, std::span<const Var> parts);
/// 1 x d -> n x d
Var repeat_rows(Tape &t, Var row, int n);
/// n x d -> n x 1
Var row_sum(Tape &t, Var a);

// ---- layers ---------------------------------------------------------------

struct Dense {
  int weight = -1;  // in x out
  int bias = -1;    // 1 x out
  int in = 0;
  int out = 0;
};

/// Glorot-uniform weights, zero bias. `scale` shrinks the weights (used
/// for output heads).
Dense make_dense(ParameterSet &ps, const std::string &name, int in, int out,
                 std::uint64_t seed, double scale = 1.0);

Var dense(Tape &t, const ParameterSet &ps, const Dense &layer, Var x,
          GradBuffer *grads);

// ---- optimizers -------------------------------------------------------------

struct OptimizerConfig {
  enum class Kind { SgdMomentum, AdamW };
  Kind kind = Kind::AdamW;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // Gradients with a larger global norm are rescaled (0 disables).
  double grad_clip = 0.0;
};

std::string to_string(OptimizerConfig::Kind k);
OptimizerConfig::Kind optimizer_kind_from_string(const std::string &s);

class Optimizer {
public:
  virtual ~Optimizer() = default;
  virtual void step(ParameterSet &ps, const GradBuffer &g) = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig &cfg,
                                          const ParameterSet &ps);

}  // namespace fmdock::ad
