#include "ade/attention.hpp"

#include <stdexcept>

#include "ade/kernels.hpp"

namespace ade {

namespace {

void require_features(const char* fn, const Tensor& h, const Mask& m) {
  if (h.shape().size() != 2)
    throw std::invalid_argument(std::string(fn) + ": features must be rank-2");
  if (m.size() != h.rows())
    throw std::invalid_argument(std::string(fn) + ": mask length " +
                                std::to_string(m.size()) + " != rows " +
                                std::to_string(h.rows()));
  if (mask_count(m) == 0)
    throw std::invalid_argument(std::string(fn) + ": all positions masked");
}

// One side of the alignment: per-row masked softmax of sim, each row's best
// probability, then a masked softmax of those maxima across rows.
std::vector<double> side_weights(const Tensor& sim, const Mask& row_mask,
                                 const Mask& col_mask) {
  const std::size_t rows = sim.rows();
  const std::size_t cols = sim.cols();
  std::vector<double> soft(cols);
  std::vector<double> best(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!row_mask[i]) continue;
    kernels::masked_softmax(sim.data() + i * cols, col_mask.data(), cols,
                            soft.data());
    best[i] = soft[kernels::masked_argmax(soft.data(), col_mask.data(), cols)];
  }
  std::vector<double> out(rows);
  kernels::masked_softmax(best.data(), row_mask.data(), rows, out.data());
  return out;
}

}  // namespace

Tensor similarity_matrix(const Tensor& hx, const Tensor& hy) {
  if (hx.shape().size() != 2 || hy.shape().size() != 2)
    throw std::invalid_argument("similarity_matrix: features must be rank-2");
  if (hx.cols() != hy.cols())
    throw std::invalid_argument("similarity_matrix: feature widths differ: " +
                                shape_str(hx.shape()) + " vs " +
                                shape_str(hy.shape()));
  const std::size_t d = hx.cols();
  Tensor out(Shape{hx.rows(), hy.rows()}, 0.0);
  for (std::size_t i = 0; i < hx.rows(); ++i)
    for (std::size_t j = 0; j < hy.rows(); ++j)
      out(i, j) = kernels::cosine(hx.data() + i * d, hy.data() + j * d, d);
  return out;
}

AttentionWeights attention_weights(const Tensor& sim, const Mask& ctx_mask,
                                   const Mask& resp_mask) {
  if (sim.shape().size() != 2)
    throw std::invalid_argument("attention_weights: similarity must be rank-2");
  if (ctx_mask.size() != sim.rows() || resp_mask.size() != sim.cols())
    throw std::invalid_argument("attention_weights: mask sizes " +
                                std::to_string(ctx_mask.size()) + "," +
                                std::to_string(resp_mask.size()) +
                                " do not match similarity " +
                                shape_str(sim.shape()));
  if (mask_count(ctx_mask) == 0 || mask_count(resp_mask) == 0)
    throw std::invalid_argument("attention_weights: a side has no real positions");

  AttentionWeights w;
  w.context = side_weights(sim, ctx_mask, resp_mask);
  // The response side works on columns; transpose once so the same row
  // machinery (and the same kernels) applies.
  Tensor simT(Shape{sim.cols(), sim.rows()}, 0.0);
  for (std::size_t i = 0; i < sim.rows(); ++i)
    for (std::size_t j = 0; j < sim.cols(); ++j) simT(j, i) = sim(i, j);
  w.response = side_weights(simT, resp_mask, ctx_mask);
  return w;
}

std::vector<double> weighted_feature(const Tensor& h, const std::vector<double>& w) {
  if (h.shape().size() != 2)
    throw std::invalid_argument("weighted_feature: features must be rank-2");
  if (w.size() != h.rows())
    throw std::invalid_argument("weighted_feature: weight count " +
                                std::to_string(w.size()) + " != rows " +
                                std::to_string(h.rows()));
  std::vector<double> out(h.cols());
  kernels::weighted_row_sum(w.data(), h, out.data());
  return out;
}

std::vector<double> unattended_feature(const Tensor& h, const Mask& m,
                                       const std::vector<double>& w) {
  require_features("unattended_feature", h, m);
  if (w.size() != h.rows())
    throw std::invalid_argument("unattended_feature: weight count " +
                                std::to_string(w.size()) + " != rows " +
                                std::to_string(h.rows()));
  std::vector<double> leftover(h.rows());
  for (std::size_t i = 0; i < h.rows(); ++i)
    leftover[i] = m[i] ? 1.0 - w[i] : 0.0;
  std::vector<double> out(h.cols());
  kernels::weighted_row_sum(leftover.data(), h, out.data());
  return out;
}

PairAttention attend(const Tensor& hx, const Mask& ctx_mask, const Tensor& hy,
                     const Mask& resp_mask) {
  require_features("attend", hx, ctx_mask);
  require_features("attend", hy, resp_mask);
  PairAttention r;
  r.similarity = similarity_matrix(hx, hy);
  r.weights = attention_weights(r.similarity, ctx_mask, resp_mask);
  r.context_feature = weighted_feature(hx, r.weights.context);
  r.response_feature = weighted_feature(hy, r.weights.response);
  double acc = 0.0;
  for (std::size_t k = 0; k < r.context_feature.size(); ++k)
    acc += r.context_feature[k] * r.response_feature[k];
  r.score = acc;
  return r;
}

double pair_score(const Tensor& hx, const Mask& ctx_mask, const Tensor& hy,
                  const Mask& resp_mask) {
  return attend(hx, ctx_mask, hy, resp_mask).score;
}

GraphAttention attend_graph(Graph& g, Var hx, const Mask& ctx_mask, Var hy,
                            const Mask& resp_mask) {
  GraphAttention r;
  r.similarity = g.cosine_matrix(hx, hy);

  Var row_soft = g.masked_softmax_rows(r.similarity, resp_mask);
  Var row_best = g.masked_max_rows(row_soft, resp_mask);
  r.context_weights = g.masked_softmax_vec(row_best, ctx_mask);

  Var simT = g.transpose(r.similarity);
  Var col_soft = g.masked_softmax_rows(simT, ctx_mask);
  Var col_best = g.masked_max_rows(col_soft, ctx_mask);
  r.response_weights = g.masked_softmax_vec(col_best, resp_mask);

  r.context_feature = g.weighted_row_sum(r.context_weights, hx);
  r.response_feature = g.weighted_row_sum(r.response_weights, hy);
  r.score = g.dot(r.context_feature, r.response_feature);
  return r;
}

Var unattended_graph(Graph& g, Var h, const Mask& m, Var weights) {
  Tensor real(Shape{m.size()}, 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) real[i] = 1.0;
  Var leftover = g.sub(g.constant(std::move(real)), weights);
  return g.weighted_row_sum(leftover, h);
}

}  // namespace ade
