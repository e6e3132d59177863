#include "supra/supra.hpp"

#include <cmath>
#include <string>

namespace supra::attn {

namespace {

std::size_t head_dim(std::size_t n, std::size_t heads) {
  if (heads == 0 || n % heads != 0)
    throw ShapeError("supra_attention: N = " + std::to_string(n) + " is not divisible by " + std::to_string(heads) +
                     " heads");
  return n / heads;
}

void check_head(const Shape& wq, const Shape& wk, const Shape& wv, std::size_t dh) {
  const Shape want{dh, dh};
  if (wq != want || wk != want || wv != want)
    throw ShapeError("supra_attention: head weights must be " + shape_to_string(want) + ", got " +
                     shape_to_string(wq) + ", " + shape_to_string(wk) + ", " + shape_to_string(wv));
}

ad::Var head_scores(ad::Var uh, const HeadVars& p, std::size_t dh) {
  const ad::Var q = ad::matmul_nt(uh, p.wq);
  const ad::Var k = ad::matmul_nt(uh, p.wk);
  return ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
}

}  // namespace

ad::Var supra_attention(ad::Var uhat, std::span<const HeadVars> heads) {
  require_matrix(uhat.value(), "supra_attention");
  const std::size_t dh = head_dim(uhat.value().cols(), heads.size());
  std::vector<ad::Var> outs;
  outs.reserve(heads.size());
  for (std::size_t h = 0; h < heads.size(); ++h) {
    check_head(heads[h].wq.shape(), heads[h].wk.shape(), heads[h].wv.shape(), dh);
    const ad::Var uh = heads.size() == 1 ? uhat : ad::slice_cols(uhat, h * dh, dh);
    const ad::Var mix = ad::softmax_rows(head_scores(uh, heads[h], dh));
    outs.push_back(ad::matmul(mix, ad::matmul_nt(uh, heads[h].wv)));
  }
  return outs.size() == 1 ? outs[0] : ad::concat_cols(outs);
}

Tensor supra_attention(const Tensor& uhat, std::span<const SupraHeadParams> heads) {
  ad::Tape tape;
  std::vector<HeadVars> hv;
  hv.reserve(heads.size());
  for (const auto& p : heads) hv.push_back({tape.constant(p.wq), tape.constant(p.wk), tape.constant(p.wv)});
  return supra_attention(tape.constant(uhat), hv).value();
}

Tensor attention_weights(const Tensor& uhat, const SupraHeadParams& p, std::size_t head, std::size_t heads) {
  require_matrix(uhat, "attention_weights");
  const std::size_t dh = head_dim(uhat.cols(), heads);
  if (head >= heads) throw ShapeError("attention_weights: head index out of range");
  check_head(p.wq.shape(), p.wk.shape(), p.wv.shape(), dh);
  ad::Tape tape;
  const ad::Var u = tape.constant(uhat);
  const HeadVars hv{tape.constant(p.wq), tape.constant(p.wk), tape.constant(p.wv)};
  return head_scores(ad::slice_cols(u, head * dh, dh), hv, dh).value();
}

Tensor function_space_attention(const Tensor& u, const basis::Basis& b, std::span<const SupraHeadParams> heads) {
  return basis::reconstruct(b, supra_attention(basis::project(b, u), heads));
}

}  // namespace supra::attn
