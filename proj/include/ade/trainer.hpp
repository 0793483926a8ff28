#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ade/objectives.hpp"
#include "ade/params.hpp"

namespace ade {

struct TrainConfig {
  ModelConfig model;
  std::size_t steps = 1000;  // encoder updates
  std::size_t batch = 64;    // clamped to the training-split size
  // Critic updates before each encoder update (regularized variants only).
  std::size_t critic_steps = 1;
  double lr = 1e-4;
  double grad_clip = 5.0;   // global-norm cap on the encoder-side gradient
  double ema_decay = 0.99;  // denominator moving average for the blended adjoint
  double val_fraction = 0.1;
  // Validate every this many steps (and always after the last); 0 = end only.
  std::size_t eval_every = 0;
  std::uint64_t seed = 1;

  void validate() const;  // throws std::invalid_argument
};

struct StepRecord {
  std::size_t step = 0;      // 1-based
  double total = 0.0;        // encoder objective
  double retrieval = 0.0;
  double mi = 0.0;           // raw bound value; 0 for unregularized variants
  double grad_norm = 0.0;    // encoder-side norm before clipping
  double critic_bound = 0.0; // bound after this step's critic updates; 0 if none
};

struct ValRecord {
  std::size_t step = 0;
  double retrieval = 0.0;  // mean -log p per direction on the validation split
  double recall1 = 0.0;    // fraction of in-batch diagonals ranked first
};

struct TrainReport {
  std::vector<StepRecord> history;
  std::vector<ValRecord> val_history;
  std::size_t train_pairs = 0;
  std::size_t val_pairs = 0;
  double wall_seconds = 0.0;
};

// Called after each validation record is appended (checkpoint-on-eval etc).
using EvalHook = std::function<void(const TrainReport& so_far)>;
// Called after every optimizer step with that step's record (progress logs).
using StepHook = std::function<void(const StepRecord& rec)>;

// Alternating min-max training: each step first lets the critic tighten the
// leftover-information bound on detached features (critic_steps times), then
// updates embedding/enc_x/enc_y on the full objective, where the bound's
// adjoint uses the denominator moving average once it is initialized. The
// same dropout masks are used by both phases of a step, so the critic sees
// exactly the features the encoder step trains on. Deterministic for a fixed
// (config, dataset): every random choice derives from cfg.seed.
TrainReport train(ParameterStore& store, const TrainConfig& cfg,
                  const std::vector<EncodedPair>& dataset,
                  const EvalHook& on_eval = {}, const StepHook& on_step = {});

struct ValMetrics {
  double retrieval = 0.0;
  double recall1 = 0.0;
};

// Retrieval softmax metrics over the given pairs, scored in consecutive
// chunks of `batch` (a trailing chunk of one pair is skipped). retrieval is
// the mean -log p per direction; recall1 is the fraction of rows and columns
// of each chunk's score matrix whose diagonal entry ranks first (first-max
// tie-break). No dropout.
ValMetrics validation_metrics(const ParameterStore& store,
                              const ModelConfig& cfg,
                              const std::vector<EncodedPair>& pairs,
                              std::size_t batch);

}  // namespace ade
