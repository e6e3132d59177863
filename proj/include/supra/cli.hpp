#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "supra/basis.hpp"
#include "supra/model.hpp"
#include "supra/pdedata.hpp"
#include "supra/trainer.hpp"

namespace supra::cli {

/// A config validation failure; `field` is the dotted path of the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field(std::move(field)) {}
  std::string field;
};

struct BasisConfig {
  basis::Kind kind = basis::Kind::Chebyshev;
  std::size_t mx = 7, my = 7;  // Fourier modes or Chebyshev degrees per axis
  std::size_t size = 64;       // Laplacian eigenpairs
};

struct BenchConfig {
  std::vector<std::size_t> m = {1024, 4096, 16384};
  std::vector<std::size_t> c = {32, 64};
  std::vector<std::size_t> n = {64, 128};
  std::size_t reps = 5;
};

/// Mirrors the JSON config. Every section and key is optional; unknown keys
/// are rejected.
struct RunConfig {
  pde::DatasetSpec data;
  std::filesystem::path data_dir;
  BasisConfig basis;
  model::ModelConfig model;
  train::TrainConfig train;
  BenchConfig bench;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& file);

/// Basis for a grid task (Fourier or Chebyshev on data.grid) or for a mesh.
basis::Basis build_basis(const BasisConfig& c, const pde::DatasetSpec& data, const mesh::TriMesh* mesh);
std::size_t basis_size(const BasisConfig& c);

/// Function-token softmax attention over the M points of u [C x M] with C x C
/// maps; memory O(MC), time O(M^2 C). Complexity reference only.
Tensor function_token_attention(const Tensor& u, const Tensor& wq, const Tensor& wk, const Tensor& wv);

struct BenchRow {
  std::string impl;
  std::size_t m = 0, c = 0, n = 0;
  double wall_seconds = 0.0;
  std::size_t bytes_peak_estimate = 0;
};
std::vector<BenchRow> run_bench(const BenchConfig& cfg, std::uint64_t seed, std::ostream* progress = nullptr);
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& file);

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t components = 0;
  std::string worst;
};
/// Two-block model, C=8, N=16 (Chebyshev degree 3 x 3), M=64, every parameter.
GradcheckResult run_gradcheck(model::Norm norm, std::uint64_t seed);

/// Entry point of the `supra` executable. Exit codes: 0 success, 1 validation
/// error, 2 runtime failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace supra::cli
