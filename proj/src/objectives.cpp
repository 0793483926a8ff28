#include "ade/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "ade/errors.hpp"
#include "ade/kernels.hpp"
#include "ade/rng.hpp"

namespace ade {

namespace {

Mask all_real(std::size_t n) { return Mask(n, 1); }

Tensor stack_vectors(const std::vector<Tensor>& rows) {
  Tensor out(Shape{rows.size(), rows[0].size()}, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) out(i, j) = rows[i][j];
  return out;
}

void check_drops(const std::vector<DropoutSpec>& drops, std::size_t n) {
  if (!drops.empty() && drops.size() != 2 * n)
    throw std::invalid_argument("dropout specs: expected none or " +
                                std::to_string(2 * n) + ", got " +
                                std::to_string(drops.size()));
}

const DropoutSpec* drop_at(const std::vector<DropoutSpec>& drops, std::size_t i) {
  return drops.empty() ? nullptr : &drops[i];
}

}  // namespace

Variant parse_variant(const std::string& name) {
  if (name == "de") return Variant::DE;
  if (name == "ade") return Variant::Ade;
  if (name == "ade_we") return Variant::AdeWe;
  if (name == "ade_reg") return Variant::AdeReg;
  if (name == "ade_we_reg") return Variant::AdeWeReg;
  throw UsageError("unknown variant '" + name +
                   "' (valid: de, ade, ade_we, ade_reg, ade_we_reg)");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::DE: return "de";
    case Variant::Ade: return "ade";
    case Variant::AdeWe: return "ade_we";
    case Variant::AdeReg: return "ade_reg";
    case Variant::AdeWeReg: return "ade_we_reg";
  }
  return "?";
}

bool variant_attentive(Variant v) { return v != Variant::DE; }

bool variant_word_residual(Variant v) {
  return v == Variant::AdeWe || v == Variant::AdeWeReg;
}

bool variant_regularized(Variant v) {
  return v == Variant::AdeReg || v == Variant::AdeWeReg;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (!(gamma > 0.0))
    throw std::invalid_argument("model config: gamma must be > 0");
  if (!(beta >= 0.0))
    throw std::invalid_argument("model config: beta must be >= 0");
}

EncoderConfig ModelConfig::tower_config() const {
  EncoderConfig t = encoder;
  t.word_residual = variant_word_residual(variant);
  return t;
}

void create_model_params(ParameterStore& store, const ModelConfig& cfg,
                         std::size_t vocab, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t d = cfg.encoder.model_dim;
  create_embedding_param(store, vocab, cfg.encoder.word_dim, rng);
  create_tower_params(store, "enc_x", cfg.encoder, rng);
  create_tower_params(store, "enc_y", cfg.encoder, rng);
  for (const char* prefix : {"critic", "critic_y"}) {
    const std::string p(prefix);
    const double s = std::sqrt(6.0 / double(d + d));
    Tensor W(Shape{d, d}, 0.0);
    for (double& w : W) w = uniform_in(rng, -s, s);
    store.create(p + "/W", std::move(W));
    store.create(p + "/quad", Tensor(Shape{d}, 0.0));
    store.create(p + "/lin", Tensor(Shape{d}, 0.0));
    store.create(p + "/b", Tensor(Shape{1}, 0.0));
  }
}

Var retrieval_loss_from_scores(Graph& g, Var scores, double gamma) {
  const Tensor& s = g.value(scores);
  if (s.shape().size() != 2 || s.rows() != s.cols())
    throw std::invalid_argument("retrieval loss: scores must be square");
  if (s.rows() < 2)
    throw std::invalid_argument("retrieval loss: needs at least 2 pairs");
  if (!(gamma > 0.0))
    throw std::invalid_argument("retrieval loss: gamma must be > 0");
  const Mask ones = all_real(s.rows());
  Var scaled = g.scale(scores, 1.0 / gamma);
  Var row_diag = g.diagonal(g.masked_log_softmax_rows(scaled, ones));
  Var col_diag = g.diagonal(g.masked_log_softmax_rows(g.transpose(scaled), ones));
  return g.scale(g.add(g.sum_all(row_diag), g.sum_all(col_diag)), -1.0);
}

Var critic_logits(Graph& g, ParamBinder& bind, const std::string& prefix,
                  Var fy_rows, Var ubar_rows) {
  const Tensor& u = g.value(ubar_rows);
  const std::size_t k = u.rows();
  const std::size_t d = u.cols();
  Var bilinear =
      g.matmul(fy_rows, g.matmul(bind(prefix + "/W"), g.transpose(ubar_rows)));
  Var u2 = g.mul(ubar_rows, ubar_rows);
  Var quad_col = g.reshape(
      g.matmul(u2, g.reshape(bind(prefix + "/quad"), Shape{d, 1})), Shape{k});
  Var lin_col = g.reshape(
      g.matmul(ubar_rows, g.reshape(bind(prefix + "/lin"), Shape{d, 1})),
      Shape{k});
  Var out = g.add_rowvec(g.add_rowvec(bilinear, quad_col), lin_col);
  return g.add_scalar(out, bind(prefix + "/b"));
}

Objective critic_ascent_objective(std::string prefix, Tensor fy_rows,
                                  Tensor ubar_rows) {
  Objective o;
  o.build = [prefix = std::move(prefix), fy = std::move(fy_rows),
             ub = std::move(ubar_rows)](Graph& g, ParamBinder& bind) {
    Var logits = critic_logits(g, bind, prefix, g.constant(fy), g.constant(ub));
    return g.scale(g.mi_bound(logits, MiGrad::Exact), -1.0);
  };
  return o;
}

double critic_bound_value(const ParameterStore& store, const std::string& prefix,
                          const Tensor& fy_rows, const Tensor& ubar_rows) {
  Objective o;
  o.build = [&](Graph& g, ParamBinder& bind) {
    Var logits =
        critic_logits(g, bind, prefix, g.constant(fy_rows), g.constant(ubar_rows));
    return g.mi_bound(logits, MiGrad::Exact);
  };
  return evaluate_value(o, store);
}

double mean_offdiag_log_denominator(const Tensor& logits) {
  if (logits.shape().size() != 2 || logits.rows() != logits.cols() ||
      logits.rows() < 2)
    throw std::invalid_argument("log denominator: logits must be KxK, K >= 2");
  const std::size_t k = logits.rows();
  double top = -1e308;
  for (std::size_t n = 0; n < k; ++n)
    for (std::size_t m = 0; m < k; ++m)
      if (n != m) top = std::max(top, logits(n, m));
  double sum = 0.0;
  for (std::size_t n = 0; n < k; ++n)
    for (std::size_t m = 0; m < k; ++m)
      if (n != m) sum += std::exp(logits(n, m) - top);
  return top + std::log(sum) - std::log(double(k) * double(k - 1));
}

void EmaLog::update(double batch_log) {
  if (!initialized) {
    value = batch_log;
    initialized = true;
    return;
  }
  const double a = std::log(decay) + value;
  const double b = std::log1p(-decay) + batch_log;
  const double top = std::max(a, b);
  value = top + std::log(std::exp(a - top) + std::exp(b - top));
}

BatchGraph build_batch_graph(Graph& g, ParamBinder& bind, const ModelConfig& cfg,
                             const Batch& batch,
                             const std::vector<DropoutSpec>& drops,
                             MiGrad mi_grad, double ema_log, double ema_log_sym) {
  cfg.validate();
  const std::size_t n = batch.size();
  if (n < 2)
    throw std::invalid_argument("batch graph: needs at least 2 pairs, got " +
                                std::to_string(n));
  check_drops(drops, n);

  const EncoderConfig tower = cfg.tower_config();
  std::vector<EncoderOutput> ctx(n), resp(n);
  for (std::size_t i = 0; i < n; ++i) {
    ctx[i] = encode(g, bind, "enc_x", tower, batch.contexts[i],
                    drop_at(drops, 2 * i));
    resp[i] = encode(g, bind, "enc_y", tower, batch.responses[i],
                     drop_at(drops, 2 * i + 1));
  }

  BatchGraph out;
  const bool attentive = variant_attentive(cfg.variant);
  const bool regularized = variant_regularized(cfg.variant);
  std::vector<Var> cells(n * n);
  std::vector<Var> fy(n), ubar(n), fx(n), ubar_y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Mask& mx = batch.contexts[i].mask;
    for (std::size_t j = 0; j < n; ++j) {
      const Mask& my = batch.responses[j].mask;
      if (!attentive) {
        cells[i * n + j] = g.cosine_vec(ctx[i].pooled, resp[j].pooled);
        continue;
      }
      const GraphAttention at =
          attend_graph(g, ctx[i].features, mx, resp[j].features, my);
      cells[i * n + j] = at.score;
      if (i == j && regularized) {
        fy[i] = at.response_feature;
        ubar[i] = unattended_graph(g, ctx[i].features, mx, at.context_weights);
        fx[i] = at.context_feature;
        ubar_y[i] = unattended_graph(g, resp[i].features, my, at.response_weights);
      }
    }
  }
  out.scores = g.stack_scalars(cells, n, n);
  out.retrieval = retrieval_loss_from_scores(g, out.scores, cfg.gamma);
  out.total = out.retrieval;

  if (regularized) {
    out.mi_logits =
        critic_logits(g, bind, "critic", g.stack_rows(fy), g.stack_rows(ubar));
    out.mi = g.mi_bound(out.mi_logits, mi_grad, ema_log);
    Var penalty = out.mi;
    if (cfg.reg_symmetric) {
      out.mi_logits_sym = critic_logits(g, bind, "critic_y", g.stack_rows(fx),
                                        g.stack_rows(ubar_y));
      out.mi_sym = g.mi_bound(out.mi_logits_sym, mi_grad, ema_log_sym);
      penalty = g.scale(g.add(out.mi, out.mi_sym), 0.5);
    }
    out.total = g.add(out.retrieval, g.scale(penalty, cfg.beta));
  }
  return out;
}

Objective encoder_objective(const ModelConfig& cfg, const Batch& batch,
                            std::vector<DropoutSpec> drops, MiGrad mi_grad,
                            double ema_log, double ema_log_sym) {
  Objective o;
  o.build = [cfg, batch, drops = std::move(drops), mi_grad, ema_log,
             ema_log_sym](Graph& g, ParamBinder& bind) {
    return build_batch_graph(g, bind, cfg, batch, drops, mi_grad, ema_log,
                             ema_log_sym)
        .total;
  };
  return o;
}

SeqFeatures encode_plain(const ParameterStore& store, const ModelConfig& cfg,
                         const TokenSequence& seq, bool context_tower,
                         const DropoutSpec* drop) {
  Graph g;
  ParamBinder bind(g, store);
  const EncoderOutput out = encode(g, bind, context_tower ? "enc_x" : "enc_y",
                                   cfg.tower_config(), seq, drop);
  SeqFeatures f;
  f.features = g.value(out.features);
  f.pooled = g.value(out.pooled);
  f.mask = seq.mask;
  return f;
}

double variant_score(const ModelConfig& cfg, const SeqFeatures& ctx,
                     const SeqFeatures& resp) {
  if (!variant_attentive(cfg.variant))
    return kernels::cosine(ctx.pooled.data(), resp.pooled.data(),
                           ctx.pooled.size());
  return pair_score(ctx.features, ctx.mask, resp.features, resp.mask);
}

CriticInputs critic_inputs(const ParameterStore& store, const ModelConfig& cfg,
                           const Batch& batch,
                           const std::vector<DropoutSpec>& drops) {
  if (!variant_attentive(cfg.variant))
    throw std::logic_error("critic inputs need an attentive variant");
  const std::size_t n = batch.size();
  if (n < 2) throw std::invalid_argument("critic inputs: needs at least 2 pairs");
  check_drops(drops, n);
  std::vector<Tensor> fy, ubar, fx, ubar_y;
  for (std::size_t i = 0; i < n; ++i) {
    const SeqFeatures c = encode_plain(store, cfg, batch.contexts[i], true,
                                       drop_at(drops, 2 * i));
    const SeqFeatures r = encode_plain(store, cfg, batch.responses[i], false,
                                       drop_at(drops, 2 * i + 1));
    const PairAttention at = attend(c.features, c.mask, r.features, r.mask);
    auto as_tensor = [](std::vector<double> v) {
      return Tensor::from(Shape{v.size()}, v);
    };
    fy.push_back(as_tensor(at.response_feature));
    ubar.push_back(as_tensor(unattended_feature(c.features, c.mask,
                                                at.weights.context)));
    fx.push_back(as_tensor(at.context_feature));
    ubar_y.push_back(as_tensor(unattended_feature(r.features, r.mask,
                                                  at.weights.response)));
  }
  CriticInputs out;
  out.fy = stack_vectors(fy);
  out.ubar = stack_vectors(ubar);
  out.fx = stack_vectors(fx);
  out.ubar_y = stack_vectors(ubar_y);
  return out;
}

}  // namespace ade
