#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "supra/autodiff.hpp"
#include "supra/basis.hpp"
#include "supra/supra.hpp"
#include "supra/tensor.hpp"

namespace supra::model {

enum class Norm { Layer, Instance, None };

std::string norm_name(Norm n);
Norm parse_norm(const std::string& s);

struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t hidden = 32;  // C
  std::size_t layers = 4;   // L
  std::size_t basis_size = 64;  // N
  std::size_t heads = 4;
  Norm norm = Norm::Layer;
  std::size_t mlp_ratio = 2;
  bool use_coords = true;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
  std::size_t lift_inputs() const { return in_channels + (use_coords ? 2 : 0); }
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Parameter tensors in a fixed order:
///   lift.w [C x (in+coords)], lift.b [C]
///   per layer l: blk{l}.norm1.{gain,bias}, blk{l}.head{h}.{wq,wk,wv},
///                blk{l}.norm2.{gain,bias}, blk{l}.mlp.{w1,b1,w2,b2}
///   head.w [out x C], head.b [out]
/// norm1 has N entries for layer norm (coordinate space) and C for instance
/// norm (function space); norm2 always has C. Norm::None has no norm tensors.
class SupraOperator {
 public:
  SupraOperator(ModelConfig cfg, std::string basis_fingerprint);

  const ModelConfig& config() const noexcept { return cfg_; }
  const std::string& basis_fingerprint() const noexcept { return basis_fp_; }
  std::vector<NamedTensor>& params() noexcept { return params_; }
  const std::vector<NamedTensor>& params() const noexcept { return params_; }
  std::size_t param_count() const;
  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);

  /// Rejects bases whose fingerprint or size differs from the model's.
  void check_basis(const basis::Basis& b) const;

  /// Prediction [out x M] for inputs [in x M]; params are tape variables in
  /// params() order.
  ad::Var forward(ad::Tape& tape, std::span<const ad::Var> params, const Tensor& inputs,
                  const basis::Basis& b) const;
  Tensor predict(const Tensor& inputs, const basis::Basis& b) const;

  void save(const std::filesystem::path& dir) const;
  static SupraOperator load(const std::filesystem::path& dir);

 private:
  ModelConfig cfg_;
  std::string basis_fp_;
  std::vector<NamedTensor> params_;
};

/// Closed-form count of the parameters of a configuration.
std::size_t expected_param_count(const ModelConfig& cfg);

/// Builds the parameter list with uniform(+-1/sqrt(fan_in)) weights and
/// biases, unit norm gains and zero norm biases.
SupraOperator init_params(const ModelConfig& cfg, const basis::Basis& b);

/// Pointwise affine of the concatenated (inputs, coords) rows: W x + b.
ad::Var lift(ad::Var w, ad::Var bias, const Tensor& lift_input);
/// [inputs ; coords^T] when use_coords, otherwise inputs.
Tensor lift_input(const ModelConfig& cfg, const Tensor& inputs, const basis::Basis& b);

}  // namespace supra::model
