#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "ade/corpus.hpp"
#include "ade/graph.hpp"
#include "ade/params.hpp"

namespace ade {

// One transformer tower that turns a token sequence into per-position
// features. Two towers (context and response) share one word-embedding table;
// everything else is tower-private under a name prefix such as "enc_x".

struct EncoderConfig {
  std::size_t layers = 3;
  std::size_t model_dim = 128;
  std::size_t heads = 4;
  std::size_t word_dim = 100;
  std::size_t ffn_dim = 512;
  double dropout = 0.1;  // applied only when a DropoutSpec is passed to encode
  // Blend of the top layer with a projected word embedding:
  //   alpha * top + (1 - alpha) * (word @ W + b)
  // Only applied when word_residual is true.
  double alpha = 0.5;
  bool word_residual = false;

  std::size_t head_dim() const { return model_dim / heads; }
  void validate() const;  // throws std::invalid_argument
};

// Deterministic dropout: the graph for one training step must be rebuildable
// bit-for-bit, so masks are a pure function of (rate, seed) rather than of a
// shared sampler's call order. The trainer derives a fresh seed per step and
// per encode call.
struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

struct EncoderOutput {
  Var features;  // L x model_dim; PAD rows are finite but carry no meaning
  Var pooled;    // rank-1 model_dim, mean over real positions of features
  Var words;     // L x word_dim, the gathered word embeddings
};

// Matrix init draws uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out));
// biases start at zero and normalization gains at one. Draw order is the
// documented creation order, so one seed fixes every value.
void create_embedding_param(ParameterStore& store, std::size_t vocab,
                            std::size_t word_dim, std::mt19937_64& rng);
void create_tower_params(ParameterStore& store, const std::string& prefix,
                         const EncoderConfig& cfg, std::mt19937_64& rng);

// Builds the forward pass for one sequence on g. Pass drop=nullptr (or
// rate 0) for the deterministic evaluation path.
EncoderOutput encode(Graph& g, ParamBinder& bind, const std::string& prefix,
                     const EncoderConfig& cfg, const TokenSequence& seq,
                     const DropoutSpec* drop = nullptr);

// Sinusoidal position table (length x dim), even columns sine and odd columns
// cosine of pos / 10000^(2i/dim).
Tensor position_encoding(std::size_t length, std::size_t dim);

}  // namespace ade
