#include "ade/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "ade/rng.hpp"

namespace ade {

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double s = std::sqrt(6.0 / double(fan_in + fan_out));
  Tensor t(Shape{fan_in, fan_out}, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform_in(rng, -s, s);
  return t;
}

std::string layer_base(const std::string& prefix, std::size_t l) {
  return prefix + "/l" + std::to_string(l);
}

std::string head_base(const std::string& base, std::size_t h) {
  return base + "/h" + std::to_string(h);
}

Tensor dropout_mask(Shape shape, double rate, std::mt19937_64& rng) {
  Tensor m(std::move(shape), 0.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = uniform_unit(rng) >= rate ? keep_scale : 0.0;
  return m;
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers == 0 || model_dim == 0 || heads == 0 || word_dim == 0 || ffn_dim == 0)
    throw std::invalid_argument("encoder config: all dimensions must be >= 1");
  if (model_dim % heads != 0)
    throw std::invalid_argument("encoder config: model_dim " +
                                std::to_string(model_dim) +
                                " is not divisible by heads " +
                                std::to_string(heads));
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw std::invalid_argument("encoder config: dropout must be in [0, 1)");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("encoder config: alpha must be in [0, 1]");
}

void create_embedding_param(ParameterStore& store, std::size_t vocab,
                            std::size_t word_dim, std::mt19937_64& rng) {
  if (vocab == 0) throw std::invalid_argument("embedding: vocab must be >= 1");
  store.create("embedding/table", glorot(vocab, word_dim, rng));
}

void create_tower_params(ParameterStore& store, const std::string& prefix,
                         const EncoderConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t d = cfg.model_dim;
  const std::size_t dk = cfg.head_dim();
  store.create(prefix + "/proj/W", glorot(cfg.word_dim, d, rng));
  store.create(prefix + "/proj/b", Tensor(Shape{d}, 0.0));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string base = layer_base(prefix, l);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const std::string hb = head_base(base, h);
      store.create(hb + "/Wq", glorot(d, dk, rng));
      store.create(hb + "/bq", Tensor(Shape{dk}, 0.0));
      store.create(hb + "/Wk", glorot(d, dk, rng));
      store.create(hb + "/bk", Tensor(Shape{dk}, 0.0));
      store.create(hb + "/Wv", glorot(d, dk, rng));
      store.create(hb + "/bv", Tensor(Shape{dk}, 0.0));
      store.create(hb + "/Wo", glorot(dk, d, rng));
    }
    store.create(base + "/attn/bo", Tensor(Shape{d}, 0.0));
    store.create(base + "/ln1/g", Tensor(Shape{d}, 1.0));
    store.create(base + "/ln1/b", Tensor(Shape{d}, 0.0));
    store.create(base + "/ffn/W1", glorot(d, cfg.ffn_dim, rng));
    store.create(base + "/ffn/b1", Tensor(Shape{cfg.ffn_dim}, 0.0));
    store.create(base + "/ffn/W2", glorot(cfg.ffn_dim, d, rng));
    store.create(base + "/ffn/b2", Tensor(Shape{d}, 0.0));
    store.create(base + "/ln2/g", Tensor(Shape{d}, 1.0));
    store.create(base + "/ln2/b", Tensor(Shape{d}, 0.0));
  }
  store.create(prefix + "/resid/W", glorot(cfg.word_dim, d, rng));
  store.create(prefix + "/resid/b", Tensor(Shape{d}, 0.0));
}

Tensor position_encoding(std::size_t length, std::size_t dim) {
  Tensor pe(Shape{length, dim}, 0.0);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double exponent = double(2 * (i / 2)) / double(dim);
      const double angle = double(pos) / std::pow(10000.0, exponent);
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

EncoderOutput encode(Graph& g, ParamBinder& bind, const std::string& prefix,
                     const EncoderConfig& cfg, const TokenSequence& seq,
                     const DropoutSpec* drop) {
  cfg.validate();
  const std::size_t L = seq.capacity();
  if (L == 0) throw std::invalid_argument("encode: empty sequence");
  if (mask_count(seq.mask) == 0)
    throw std::invalid_argument("encode: sequence has no real positions");

  const bool dropping = drop != nullptr && drop->rate > 0.0;
  std::mt19937_64 drop_rng(dropping ? drop->seed : 0);
  auto maybe_drop = [&](Var x) {
    if (!dropping) return x;
    return g.mul(x, g.constant(dropout_mask(Shape{L, cfg.model_dim},
                                            drop->rate, drop_rng)));
  };

  std::vector<std::size_t> ids(L);
  for (std::size_t i = 0; i < L; ++i) ids[i] = std::size_t(seq.ids[i]);

  EncoderOutput out;
  out.words = g.gather_rows(bind("embedding/table"), ids);

  Var x = g.add_rowvec(g.matmul(out.words, bind(prefix + "/proj/W")),
                       bind(prefix + "/proj/b"));
  x = g.add(x, g.constant(position_encoding(L, cfg.model_dim)));
  x = maybe_drop(x);

  const double inv_sqrt_dk = 1.0 / std::sqrt(double(cfg.head_dim()));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string base = layer_base(prefix, l);
    Var attn{};
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const std::string hb = head_base(base, h);
      Var q = g.add_rowvec(g.matmul(x, bind(hb + "/Wq")), bind(hb + "/bq"));
      Var k = g.add_rowvec(g.matmul(x, bind(hb + "/Wk")), bind(hb + "/bk"));
      Var v = g.add_rowvec(g.matmul(x, bind(hb + "/Wv")), bind(hb + "/bv"));
      Var scores = g.scale(g.matmul(q, g.transpose(k)), inv_sqrt_dk);
      Var probs = g.masked_softmax_rows(scores, seq.mask);  // PAD keys excluded
      Var mixed = g.matmul(g.matmul(probs, v), bind(hb + "/Wo"));
      attn = h == 0 ? mixed : g.add(attn, mixed);
    }
    attn = g.add_rowvec(attn, bind(base + "/attn/bo"));
    x = g.layer_norm_rows(g.add(x, maybe_drop(attn)), bind(base + "/ln1/g"),
                          bind(base + "/ln1/b"));
    Var inner = g.relu(g.add_rowvec(g.matmul(x, bind(base + "/ffn/W1")),
                                    bind(base + "/ffn/b1")));
    Var ffn = g.add_rowvec(g.matmul(inner, bind(base + "/ffn/W2")),
                           bind(base + "/ffn/b2"));
    x = g.layer_norm_rows(g.add(x, maybe_drop(ffn)), bind(base + "/ln2/g"),
                          bind(base + "/ln2/b"));
  }

  if (cfg.word_residual) {
    Var projected = g.add_rowvec(g.matmul(out.words, bind(prefix + "/resid/W")),
                                 bind(prefix + "/resid/b"));
    x = g.add(g.scale(x, cfg.alpha), g.scale(projected, 1.0 - cfg.alpha));
  }

  out.features = x;
  out.pooled = g.masked_mean_rows(x, seq.mask);
  return out;
}

}  // namespace ade
