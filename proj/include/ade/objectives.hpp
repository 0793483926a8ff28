#pragma once

#include <random>
#include <string>
#include <vector>

#include "ade/attention.hpp"
#include "ade/corpus.hpp"
#include "ade/encoder.hpp"
#include "ade/graph.hpp"
#include "ade/params.hpp"

namespace ade {

// Model variants. DE scores a pair by the cosine of the two mean-pooled
// towers; the attentive variants score by word-level alignment. "We" adds the
// residual word-embedding blend on top of each tower, "Reg" adds the
// adversarial leftover-information penalty.
enum class Variant { DE, Ade, AdeWe, AdeReg, AdeWeReg };

// Canonical names: de, ade, ade_we, ade_reg, ade_we_reg.
Variant parse_variant(const std::string& name);  // UsageError on anything else
const char* variant_name(Variant v);
bool variant_attentive(Variant v);
bool variant_word_residual(Variant v);
bool variant_regularized(Variant v);

struct ModelConfig {
  EncoderConfig encoder;  // word_residual is derived from the variant
  Variant variant = Variant::Ade;
  double gamma = 1.0;  // score temperature in the retrieval softmax
  double beta = 1.0;   // weight of the leftover-information penalty
  // Penalize the response towers' leftovers too (second critic); the two
  // penalty directions are averaged so beta keeps its meaning.
  bool reg_symmetric = false;

  void validate() const;
  EncoderConfig tower_config() const;
};

// Creates every parameter group (embedding, enc_x, enc_y, critic, critic_y)
// in that fixed order regardless of variant, so a single seed pins all values,
// checkpoints stay portable across variants, and groups a variant never
// touches can be asserted bitwise unchanged.
void create_model_params(ParameterStore& store, const ModelConfig& cfg,
                         std::size_t vocab, std::mt19937_64& rng);

// Bidirectional in-batch retrieval loss over an N x N score matrix whose rows
// are contexts, columns responses, and matched pairs the diagonal: the sum
// over both directions of -log softmax(scores / gamma) at the diagonal.
Var retrieval_loss_from_scores(Graph& g, Var scores, double gamma);

// Critic logits between response features (rows) and context leftovers
// (columns):
//   logits[n][m] = fy[n]' W ubar[m] + quad . ubar[m]^2 + lin . ubar[m] + b
// The quadratic and linear column terms matter because the leave-one-out
// bound is invariant to anything that depends on the row alone.
Var critic_logits(Graph& g, ParamBinder& bind, const std::string& prefix,
                  Var fy_rows, Var ubar_rows);

// Ascent objective for the critic on detached features (rows = samples):
// returns the negated leave-one-out bound, so descending it tightens the
// bound. Both tensors are K x d with K >= 2.
Objective critic_ascent_objective(std::string prefix, Tensor fy_rows,
                                  Tensor ubar_rows);

// Forward value of the bound under the current critic (raw, no blending).
double critic_bound_value(const ParameterStore& store, const std::string& prefix,
                          const Tensor& fy_rows, const Tensor& ubar_rows);

// log of the mean over rows of the leave-one-out denominator
// (1/(K-1)) sum_{m != n} exp(logits[n][m]), max-stabilized.
double mean_offdiag_log_denominator(const Tensor& logits);

// Log-space exponential moving average of that statistic. The first update
// adopts the batch value so early steps are not biased toward zero.
struct EmaLog {
  double decay = 0.99;
  double value = 0.0;
  bool initialized = false;
  void update(double batch_log);
};

struct BatchGraph {
  Var scores;         // N x N pair scores
  Var retrieval;      // scalar
  Var mi;             // scalar leftover-information bound; valid() when regularized
  Var mi_sym;         // scalar; valid() when regularized and reg_symmetric
  Var mi_logits;      // K x K critic logits backing mi (for the EMA statistic)
  Var mi_logits_sym;  // K x K logits backing mi_sym
  Var total;          // retrieval + beta * penalty
};

// Builds the full encoder-phase objective for one batch. drops is either
// empty (no dropout) or holds one spec per encode call: context n uses
// drops[2n], response n uses drops[2n+1]. ema_log / ema_log_sym are only read
// when mi_grad is EmaBlended.
BatchGraph build_batch_graph(Graph& g, ParamBinder& bind, const ModelConfig& cfg,
                             const Batch& batch,
                             const std::vector<DropoutSpec>& drops,
                             MiGrad mi_grad, double ema_log = 0.0,
                             double ema_log_sym = 0.0);

Objective encoder_objective(const ModelConfig& cfg, const Batch& batch,
                            std::vector<DropoutSpec> drops, MiGrad mi_grad,
                            double ema_log = 0.0, double ema_log_sym = 0.0);

// Plain-tensor tower outputs for one sequence (no dropout unless given).
struct SeqFeatures {
  Tensor features;  // L x model_dim
  Tensor pooled;    // rank-1 model_dim
  Mask mask;
};
SeqFeatures encode_plain(const ParameterStore& store, const ModelConfig& cfg,
                         const TokenSequence& seq, bool context_tower,
                         const DropoutSpec* drop = nullptr);

// Variant-aware score for one encoded pair.
double variant_score(const ModelConfig& cfg, const SeqFeatures& ctx,
                     const SeqFeatures& resp);

// Detached per-pair features the critic phase trains against, stacked K x d.
// fy/ubar feed the primary critic; fx/ubar_y feed the symmetric one.
struct CriticInputs {
  Tensor fy;      // attended response features
  Tensor ubar;    // context leftovers
  Tensor fx;      // attended context features
  Tensor ubar_y;  // response leftovers
};
CriticInputs critic_inputs(const ParameterStore& store, const ModelConfig& cfg,
                           const Batch& batch,
                           const std::vector<DropoutSpec>& drops);

}  // namespace ade
