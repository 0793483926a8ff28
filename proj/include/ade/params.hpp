#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ade/graph.hpp"
#include "ade/tensor.hpp"

namespace ade {

// One named parameter with its gradient accumulator and Adam moments, all
// shaped identically.
struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
};

// Named parameter table. Iteration order is the sorted name order, which all
// serialization and coordinate enumeration relies on. The optimizer step
// counter is shared across all parameters updated in the same step.
class ParameterStore {
 public:
  Tensor& create(const std::string& name, Tensor init);
  bool has(const std::string& name) const { return params_.count(name) != 0; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t count() const { return params_.size(); }
  std::size_t total_coords() const;
  void zero_gradients();

  std::uint64_t step() const { return step_; }
  std::uint64_t advance_step() { return ++step_; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
  std::uint64_t step_ = 0;
};

// Creates graph leaves for store parameters on demand, memoized per name, and
// copies gradients back after backward().
class ParamBinder {
 public:
  ParamBinder(Graph& graph, const ParameterStore& store)
      : graph_(graph), store_(store) {}

  Var operator()(const std::string& name);
  const std::map<std::string, Var>& bound() const { return bound_; }

 private:
  Graph& graph_;
  const ParameterStore& store_;
  std::map<std::string, Var> bound_;
};

// A differentiable scalar computation over store parameters. build() must be
// deterministic: repeated calls on the same store state must produce the same
// value (finite differencing depends on this).
struct Objective {
  std::function<Var(Graph&, ParamBinder&)> build;
};

// Builds a fresh graph, backpropagates from the scalar root, zeroes all store
// gradients, then writes the exact reverse-mode gradient of every parameter
// the objective touched. Returns the objective value.
double evaluate_with_gradients(const Objective& objective, ParameterStore& store,
                               bool checked = true);

// Forward evaluation only; the store is left untouched.
double evaluate_value(const Objective& objective, const ParameterStore& store,
                      bool checked = true);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update over every parameter whose name starts with one
// of the given prefixes (all parameters when prefixes is empty). Advances the
// shared step counter once and zeroes the gradients it consumed.
void adam_step(ParameterStore& store, const AdamConfig& cfg,
               const std::vector<std::string>& prefixes = {});

// Scales the selected gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(ParameterStore& store, double max_norm,
                        const std::vector<std::string>& prefixes = {});

struct FdOptions {
  double eps = 1e-5;
  // Differences below this are treated as agreement: central differences of
  // an O(1) objective carry ~1e-11 of cancellation noise, which would
  // otherwise dominate coordinates whose true derivative is exactly zero.
  double abs_tol = 1e-9;
  // Above this many coordinates a seeded stratified subsample is checked
  // instead of every coordinate (at least two per tensor).
  std::size_t exhaustive_limit = 10000;
  std::size_t subsample = 2048;
  std::uint64_t seed = 20240813;
  // Restrict the check to these parameters (empty = all in the store).
  std::vector<std::string> names;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

// Central finite differences against evaluate_with_gradients. Relative error
// per coordinate is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
FdReport finite_difference_check(const Objective& objective, ParameterStore& store,
                                 const FdOptions& options = {});

}  // namespace ade
