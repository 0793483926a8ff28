#pragma once

#include <cstddef>
#include <cstdint>

#include "ade/tensor.hpp"

namespace ade::kernels {

// Shared numeric kernels. Both the autodiff graph forward pass and the plain
// (inference-time) attention functions call these, so the two paths agree
// bitwise on identical inputs.

inline constexpr double kNormFloor = 1e-8;    // cosine denominator floor
inline constexpr double kLayerNormEps = 1e-5;

// Cosine of two length-d vectors with the norm product floored at kNormFloor.
double cosine(const double* u, const double* v, std::size_t d);

// Max-subtracted softmax over the masked entries of src[0..n); excluded
// entries get exactly 0. At least one entry must be unmasked.
void masked_softmax(const double* src, const std::uint8_t* mask, std::size_t n,
                    double* dst);

// log softmax over masked entries; excluded entries are written as 0 and must
// not be read downstream.
void masked_log_softmax(const double* src, const std::uint8_t* mask,
                        std::size_t n, double* dst);

// Index of the maximum unmasked entry; first index wins ties.
std::size_t masked_argmax(const double* src, const std::uint8_t* mask,
                          std::size_t n);

// log(sum over unmasked entries of exp(src[i])), max-stabilized.
double masked_logsumexp(const double* src, const std::uint8_t* mask,
                        std::size_t n);

// out[d] = sum_i w[i] * rows(i, d) over all n rows.
void weighted_row_sum(const double* w, const Tensor& rows, double* out);

// Mean over rows with mask 1. At least one row must be unmasked.
void masked_mean_rows(const Tensor& rows, const std::uint8_t* row_mask,
                      double* out);

// c = a @ b for rank-2 tensors, accumulating into c (c must be pre-zeroed by
// the caller when overwrite semantics are wanted).
void matmul_accumulate(const Tensor& a, const Tensor& b, Tensor& c);

}  // namespace ade::kernels
