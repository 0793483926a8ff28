#include "ade/params.hpp"

#include <cmath>
#include <stdexcept>

#include "ade/rng.hpp"

namespace ade {

namespace {

bool selected(const std::string& name, const std::vector<std::string>& prefixes) {
  if (prefixes.empty()) return true;
  for (const auto& p : prefixes) {
    if (name.rfind(p, 0) == 0) return true;
  }
  return false;
}

}  // namespace

Tensor& ParameterStore::create(const std::string& name, Tensor init) {
  if (params_.count(name)) throw std::logic_error("parameter already exists: " + name);
  Parameter p;
  p.grad = Tensor(init.shape());
  p.m = Tensor(init.shape());
  p.v = Tensor(init.shape());
  p.value = std::move(init);
  auto [it, ok] = params_.emplace(name, std::move(p));
  return it->second.value;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::logic_error("unknown parameter: " + name);
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::logic_error("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, p] : params_) out.push_back(name);
  return out;
}

std::size_t ParameterStore::total_coords() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_gradients() {
  for (auto& [name, p] : params_) {
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] = 0.0;
  }
}

Var ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = graph_.input(store_.at(name).value, /*requires_grad=*/true);
  bound_.emplace(name, v);
  return v;
}

double evaluate_with_gradients(const Objective& objective, ParameterStore& store,
                               bool checked) {
  Graph graph(checked);
  ParamBinder bind(graph, store);
  Var root = objective.build(graph, bind);
  const double value = graph.scalar_value(root);
  graph.backward(root);
  store.zero_gradients();
  for (const auto& [name, var] : bind.bound()) {
    store.at(name).grad = graph.gradient(var);
  }
  return value;
}

double evaluate_value(const Objective& objective, const ParameterStore& store,
                      bool checked) {
  Graph graph(checked);
  ParamBinder bind(graph, store);
  Var root = objective.build(graph, bind);
  return graph.scalar_value(root);
}

void adam_step(ParameterStore& store, const AdamConfig& cfg,
               const std::vector<std::string>& prefixes) {
  const double t = static_cast<double>(store.advance_step());
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : store) {
    if (!selected(name, prefixes)) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p.m[i] / bc1;
      const double vhat = p.v[i] / bc2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      p.grad[i] = 0.0;
    }
  }
}

double clip_global_norm(ParameterStore& store, double max_norm,
                        const std::vector<std::string>& prefixes) {
  double ss = 0.0;
  for (auto& [name, p] : store) {
    if (!selected(name, prefixes)) continue;
    for (std::size_t i = 0; i < p.grad.size(); ++i) ss += p.grad[i] * p.grad[i];
  }
  const double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& [name, p] : store) {
      if (!selected(name, prefixes)) continue;
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] *= f;
    }
  }
  return norm;
}

FdReport finite_difference_check(const Objective& objective, ParameterStore& store,
                                 const FdOptions& options) {
  evaluate_with_gradients(objective, store);
  std::vector<std::string> names = options.names.empty() ? store.names() : options.names;

  // Snapshot the analytic gradients before the probing evaluations overwrite
  // them.
  std::map<std::string, Tensor> analytic;
  for (const auto& name : names) analytic.emplace(name, store.at(name).grad);

  std::size_t total = 0;
  for (const auto& name : names) total += store.at(name).value.size();

  // Coordinate selection: everything when small, otherwise a seeded
  // stratified subsample with at least two coordinates per tensor.
  std::vector<std::pair<std::string, std::size_t>> coords;
  if (total <= options.exhaustive_limit) {
    for (const auto& name : names) {
      for (std::size_t i = 0; i < store.at(name).value.size(); ++i) coords.emplace_back(name, i);
    }
  } else {
    std::mt19937_64 rng(options.seed);
    for (const auto& name : names) {
      const std::size_t size = store.at(name).value.size();
      const double share = static_cast<double>(options.subsample) *
                           static_cast<double>(size) / static_cast<double>(total);
      std::size_t take = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(share)));
      take = std::min(take, size);
      for (std::size_t idx : sample_without_replacement(rng, size, take)) {
        coords.emplace_back(name, idx);
      }
    }
  }

  FdReport report;
  report.coords_checked = coords.size();
  for (const auto& [name, idx] : coords) {
    Tensor& value = store.at(name).value;
    const double saved = value[idx];
    value[idx] = saved + options.eps;
    const double fp = evaluate_value(objective, store);
    value[idx] = saved - options.eps;
    const double fm = evaluate_value(objective, store);
    value[idx] = saved;
    const double numeric = (fp - fm) / (2.0 * options.eps);
    const double a = analytic.at(name)[idx];
    if (std::fabs(a - numeric) <= options.abs_tol) continue;
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    const double rel = std::fabs(a - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_name = name;
      report.worst_index = idx;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace ade
