#include "ade/trainer.hpp"

#include <chrono>
#include <stdexcept>

#include "ade/errors.hpp"
#include "ade/rng.hpp"

namespace ade {

namespace {

const std::vector<std::string> kEncoderPrefixes = {"embedding", "enc_x", "enc_y"};
// Matches both critic and critic_y.
const std::vector<std::string> kCriticPrefixes = {"critic"};

// Seed-stream tags.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kDropStream = 3;

Batch chunk_batch(const std::vector<EncodedPair>& pairs, std::size_t begin,
                  std::size_t count) {
  Batch b;
  for (std::size_t i = 0; i < count; ++i) {
    b.contexts.push_back(pairs[begin + i].context);
    b.responses.push_back(pairs[begin + i].response);
    b.indices.push_back(pairs[begin + i].source_index);
  }
  return b;
}

std::vector<DropoutSpec> step_dropout(const TrainConfig& cfg, std::size_t step,
                                      std::size_t batch_size) {
  if (cfg.model.encoder.dropout <= 0.0) return {};
  std::vector<DropoutSpec> drops(2 * batch_size);
  for (std::size_t k = 0; k < drops.size(); ++k) {
    drops[k].rate = cfg.model.encoder.dropout;
    drops[k].seed = mix64(mix64(cfg.seed, kDropStream),
                          step * 0x10001ull + k);
  }
  return drops;
}

// One combined ascent objective so a single adam_step can update both critics.
Objective critic_phase_objective(const ModelConfig& cfg, const CriticInputs& ci) {
  const bool sym = cfg.reg_symmetric;
  Objective o;
  o.build = [sym, ci](Graph& g, ParamBinder& bind) {
    Var bound = g.mi_bound(
        critic_logits(g, bind, "critic", g.constant(ci.fy), g.constant(ci.ubar)),
        MiGrad::Exact);
    if (sym) {
      Var bound_y = g.mi_bound(critic_logits(g, bind, "critic_y",
                                             g.constant(ci.fx),
                                             g.constant(ci.ubar_y)),
                               MiGrad::Exact);
      bound = g.add(bound, bound_y);
    }
    return g.scale(bound, -1.0);
  };
  return o;
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (steps < 1) throw std::invalid_argument("train config: steps must be >= 1");
  if (batch < 2) throw std::invalid_argument("train config: batch must be >= 2");
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be > 0");
  if (!(grad_clip > 0.0))
    throw std::invalid_argument("train config: grad_clip must be > 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0))
    throw std::invalid_argument("train config: ema_decay must be in (0, 1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw std::invalid_argument("train config: val_fraction must be in [0, 1)");
  if (variant_regularized(model.variant) && critic_steps < 1)
    throw std::invalid_argument(
        "train config: critic_steps must be >= 1 for regularized variants");
}

ValMetrics validation_metrics(const ParameterStore& store,
                              const ModelConfig& cfg,
                              const std::vector<EncodedPair>& pairs,
                              std::size_t batch) {
  if (pairs.size() < 2)
    throw std::invalid_argument("validation needs at least 2 pairs");
  if (batch < 2) throw std::invalid_argument("validation batch must be >= 2");
  double sum = 0.0;
  std::size_t used = 0, hits = 0;
  for (std::size_t begin = 0; begin + 2 <= pairs.size();) {
    const std::size_t count = std::min(batch, pairs.size() - begin);
    if (count < 2) break;
    const Batch b = chunk_batch(pairs, begin, count);
    Graph g;
    ParamBinder bind(g, store);
    const BatchGraph bg = build_batch_graph(g, bind, cfg, b, {}, MiGrad::Exact);
    sum += g.scalar_value(bg.retrieval);
    const Tensor scores = g.value(bg.scores);
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t best_col = 0, best_row = 0;
      for (std::size_t j = 1; j < count; ++j) {
        if (scores(i, j) > scores(i, best_col)) best_col = j;
        if (scores(j, i) > scores(best_row, i)) best_row = j;
      }
      if (best_col == i) ++hits;
      if (best_row == i) ++hits;
    }
    used += count;
    begin += count;
  }
  return {sum / (2.0 * double(used)), double(hits) / (2.0 * double(used))};
}

TrainReport train(ParameterStore& store, const TrainConfig& cfg,
                  const std::vector<EncodedPair>& dataset,
                  const EvalHook& on_eval, const StepHook& on_step) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();

  // Seeded split; validation takes the tail of the shuffled order.
  std::mt19937_64 split_rng(mix64(cfg.seed, kSplitStream));
  const std::size_t n = dataset.size();
  const std::size_t val_n = std::size_t(double(n) * cfg.val_fraction);
  std::vector<EncodedPair> train_set, val_set;
  {
    const auto order = sample_without_replacement(split_rng, n, n);
    for (std::size_t i = 0; i < n; ++i) {
      (i < n - val_n ? train_set : val_set).push_back(dataset[order[i]]);
    }
  }
  if (train_set.size() < 2)
    throw DataError("training split has " + std::to_string(train_set.size()) +
                    " pairs; need at least 2");
  const bool has_val = val_set.size() >= 2;
  const std::size_t batch_size = std::min(cfg.batch, train_set.size());

  const bool regularized = variant_regularized(cfg.model.variant);
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  std::mt19937_64 batch_rng(mix64(cfg.seed, kBatchStream));
  EmaLog ema, ema_sym;
  ema.decay = ema_sym.decay = cfg.ema_decay;

  TrainReport report;
  report.train_pairs = train_set.size();
  report.val_pairs = val_set.size();

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const Batch batch =
        sample_batch_distinct_responses(train_set, batch_size, batch_rng);
    const std::vector<DropoutSpec> drops = step_dropout(cfg, step, batch_size);

    StepRecord rec;
    rec.step = step;

    if (regularized) {
      const CriticInputs ci = critic_inputs(store, cfg.model, batch, drops);
      const Objective ascent = critic_phase_objective(cfg.model, ci);
      for (std::size_t c = 0; c < cfg.critic_steps; ++c) {
        evaluate_with_gradients(ascent, store);
        adam_step(store, adam, kCriticPrefixes);
      }
      rec.critic_bound = critic_bound_value(store, "critic", ci.fy, ci.ubar);
    }

    {
      const MiGrad mode = regularized && ema.initialized ? MiGrad::EmaBlended
                                                         : MiGrad::Exact;
      Graph g;
      ParamBinder bind(g, store);
      const BatchGraph bg = build_batch_graph(g, bind, cfg.model, batch, drops,
                                              mode, ema.value, ema_sym.value);
      rec.total = g.scalar_value(bg.total);
      rec.retrieval = g.scalar_value(bg.retrieval);
      g.backward(bg.total);
      store.zero_gradients();
      for (const auto& [name, var] : bind.bound())
        store.at(name).grad = g.gradient(var);
      rec.grad_norm = clip_global_norm(store, cfg.grad_clip, kEncoderPrefixes);
      adam_step(store, adam, kEncoderPrefixes);

      if (bg.mi.valid()) {
        rec.mi = g.scalar_value(bg.mi);
        ema.update(mean_offdiag_log_denominator(g.value(bg.mi_logits)));
        if (bg.mi_sym.valid())
          ema_sym.update(mean_offdiag_log_denominator(g.value(bg.mi_logits_sym)));
      }
    }

    report.history.push_back(rec);
    if (on_step) on_step(rec);

    const bool last = step == cfg.steps;
    if (has_val && (last || (cfg.eval_every > 0 && step % cfg.eval_every == 0))) {
      const ValMetrics vm =
          validation_metrics(store, cfg.model, val_set, batch_size);
      report.val_history.push_back({step, vm.retrieval, vm.recall1});
      report.wall_seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - started)
                                .count();
      if (on_eval) on_eval(report);
    }
  }
  report.wall_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - started)
                            .count();
  return report;
}

}  // namespace ade
