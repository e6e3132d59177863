#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "supra/autodiff.hpp"
#include "supra/basis.hpp"
#include "supra/model.hpp"
#include "supra/pdedata.hpp"

namespace supra::train {

// ---------------------------------------------------------------------------
// Metrics

/// ||u - u*|| / ||u*|| over all entries. Throws std::invalid_argument for a zero target.
double rel_l2(const Tensor& u, const Tensor& target);
ad::Var rel_l2(ad::Var u, const Tensor& target);

/// ||grad e|| for e on an H x W node grid over the unit square, with the
/// gradient of grid_gradient and each node weighted 1/(H*W). Rows are channels.
double h1_seminorm(const Tensor& e, std::size_t h, std::size_t w);
/// Relative seminorm of the error: |u - u*|_H1 / |u*|_H1.
double h1_loss(const Tensor& u, const Tensor& target, std::size_t h, std::size_t w);
ad::Var h1_loss(ad::Var u, const Tensor& target, std::size_t h, std::size_t w);

// ---------------------------------------------------------------------------
// Normalization

/// Per-channel mean and standard deviation over every sample and point.
struct Normalizer {
  static constexpr double kEps = 1e-8;
  std::vector<double> mean, stdev;  // stdev >= kEps

  static Normalizer fit(const std::vector<const Tensor*>& fields);
  std::size_t channels() const { return mean.size(); }
  Tensor apply(const Tensor& x) const;
  Tensor unapply(const Tensor& x) const;
  ad::Var unapply(ad::Var x) const;
};

struct Normalizers {
  Normalizer input, output;

  static Normalizers fit(const std::vector<pde::Sample>& train);
  void save(const std::filesystem::path& file) const;
  static Normalizers load(const std::filesystem::path& file);
};

// ---------------------------------------------------------------------------
// Optimization

class AdamW {
 public:
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 1e-4;

  /// theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta). Returns
  /// false and leaves params and state untouched if any gradient is non-finite.
  bool step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr);
  std::size_t steps() const noexcept { return t_; }

 private:
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

/// Cosine warmup from max_lr/div to max_lr over the first warmup fraction of
/// steps, then cosine decay to max_lr/(div*final_div) at total_steps.
struct OneCycle {
  double max_lr = 1e-3;
  std::size_t total_steps = 1;
  double warmup = 0.3, div = 25.0, final_div = 1e4;

  std::size_t warmup_end() const;
  double lr(std::size_t step) const;
};

// ---------------------------------------------------------------------------
// Training

/// Worker threads from SUPRA_THREADS (unset or invalid: 1).
std::size_t worker_threads();

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t max_steps = 0;  // nonzero: stop after this many optimizer steps
  std::size_t batch_size = 4;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double h1_weight = 0.0;
  bool augment = false;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: worker_threads()

  void validate() const;
};

/// Defaults for a task: L2 + 0.1 H1 with flips for Darcy, pure L2 otherwise.
TrainConfig default_train_config(pde::Task task);

struct EpochLog {
  std::size_t epoch = 0, step = 0;
  double lr = 0.0, train_loss = 0.0, test_rel_l2 = 0.0;
};

struct FitResult {
  std::vector<EpochLog> log;
  std::size_t steps = 0;
  bool diverged = false;
  std::string abort_reason;
  double best_test_rel_l2 = 0.0;
  std::size_t best_epoch = 0;
};

/// Trains in place. Writes out_dir/metrics.csv (one row per epoch, flushed),
/// out_dir/best (model + normalizers.json of the lowest test rel_l2) and
/// out_dir/last (the final finite state). On a non-finite loss or gradient the
/// run stops, keeps the parameters from before that step and sets diverged.
FitResult fit(model::SupraOperator& model, const basis::Basis& b, const std::vector<pde::Sample>& train,
              const std::vector<pde::Sample>& test, const TrainConfig& cfg, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Evaluation

using Predictor = std::function<Tensor(const pde::Sample&)>;

/// Physical-unit prediction of a trained model.
Predictor model_predictor(const model::SupraOperator& model, const Normalizers& norms, const basis::Basis& b);
/// Pointwise mean of the training targets, returned for every input.
Predictor mean_predictor(const std::vector<pde::Sample>& train);

struct EvalReport {
  std::string split;
  std::vector<double> per_sample;
  double mean_rel_l2 = 0.0;
  double baseline_rel_l2 = 0.0;  // mean predictor
};

/// Per-sample rel_l2 of `predict`; baseline_rel_l2 is filled when a baseline is given.
EvalReport evaluate(const Predictor& predict, const std::vector<pde::Sample>& samples,
                    const Predictor* baseline = nullptr);
void write_report(const EvalReport& r, const std::filesystem::path& file);

}  // namespace supra::train
