#pragma once

#include <vector>

#include "ade/graph.hpp"
#include "ade/tensor.hpp"

namespace ade {

// Word-level soft alignment between a context feature matrix (Lx x d) and a
// response feature matrix (Ly x d). Two implementations are provided: plain
// functions for inference and visualization, and graph builders for training.
// Both call the same kernels, so on identical inputs they agree bitwise; a
// test asserts this.

struct AttentionWeights {
  std::vector<double> context;   // one weight per context position, 0 at PAD
  std::vector<double> response;  // one weight per response position, 0 at PAD
};

// Cosine similarity for every (context position, response position) pair.
// Rows of hx and hy are position features; both must share the column count.
Tensor similarity_matrix(const Tensor& hx, const Tensor& hy);

// Position weights from a similarity matrix. Each side is computed the same
// way: softmax the similarities along the opposite side (masked), take each
// position's best alignment probability, then softmax those maxima across the
// side's real positions. Masked positions get exactly 0.
AttentionWeights attention_weights(const Tensor& sim, const Mask& ctx_mask,
                                   const Mask& resp_mask);

// sum_i w[i] * h[i,:]
std::vector<double> weighted_feature(const Tensor& h, const std::vector<double>& w);

// sum over real positions of (1 - w[i]) * h[i,:]. Intentionally unnormalized;
// PAD rows contribute nothing. With a single real position this is the zero
// vector.
std::vector<double> unattended_feature(const Tensor& h, const Mask& m,
                                       const std::vector<double>& w);

struct PairAttention {
  Tensor similarity;
  AttentionWeights weights;
  std::vector<double> context_feature;   // attention-weighted sum, length d
  std::vector<double> response_feature;
  double score = 0.0;                    // dot of the two attended features
};

PairAttention attend(const Tensor& hx, const Mask& ctx_mask, const Tensor& hy,
                     const Mask& resp_mask);
double pair_score(const Tensor& hx, const Mask& ctx_mask, const Tensor& hy,
                  const Mask& resp_mask);

// Graph twins of the functions above.
struct GraphAttention {
  Var similarity;        // Lx x Ly
  Var context_weights;   // rank-1 Lx
  Var response_weights;  // rank-1 Ly
  Var context_feature;   // rank-1 d
  Var response_feature;  // rank-1 d
  Var score;             // scalar
};

GraphAttention attend_graph(Graph& g, Var hx, const Mask& ctx_mask, Var hy,
                            const Mask& resp_mask);

// Graph twin of unattended_feature: weights must already be exactly 0 at PAD.
Var unattended_graph(Graph& g, Var h, const Mask& m, Var weights);

}  // namespace ade
