#pragma once

// Attention between functions carried out on their subspace coordinates.
// Tokens are the C rows of U-hat [C x N]; each of h heads owns a contiguous
// slice of d_h = N/h coordinates with its own W_Q, W_K, W_V [d_h x d_h].

#include <cstddef>
#include <span>
#include <vector>

#include "supra/autodiff.hpp"
#include "supra/basis.hpp"
#include "supra/tensor.hpp"

namespace supra::attn {

struct SupraHeadParams {
  Tensor wq, wk, wv;  // [d_h x d_h]
};

struct HeadVars {
  ad::Var wq, wk, wv;
};

/// Pre-softmax weights of head `head` of `heads`:
/// (1/sqrt(d_h)) * U_h Wq^T Wk U_h^T, with U_h the head's coordinate slice.
Tensor attention_weights(const Tensor& uhat, const SupraHeadParams& p, std::size_t head, std::size_t heads);

/// Per head softmax_rows(W) * (U_h Wv^T); heads concatenated along N.
Tensor supra_attention(const Tensor& uhat, std::span<const SupraHeadParams> heads);
ad::Var supra_attention(ad::Var uhat, std::span<const HeadVars> heads);

/// reconstruct(supra_attention(project(U))).
Tensor function_space_attention(const Tensor& u, const basis::Basis& b, std::span<const SupraHeadParams> heads);

}  // namespace supra::attn
