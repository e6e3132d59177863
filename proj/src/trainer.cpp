#include "supra/trainer.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "supra/rng.hpp"

namespace supra::train {

namespace {

double sum_sq(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return s;
}

double grid_step(std::size_t n) { return 1.0 / static_cast<double>(n - 1); }

void require_same(const Tensor& u, const Tensor& target, const char* what) {
  if (u.shape() != target.shape())
    throw ShapeError(std::string(what) + ": prediction " + shape_to_string(u.shape()) + " vs target " +
                     shape_to_string(target.shape()));
}

double target_norm(const Tensor& target, const char* what) {
  const double n = std::sqrt(sum_sq(target));
  if (!(n > 0.0)) throw std::invalid_argument(std::string(what) + ": target has zero norm");
  return n;
}

void require_grid(std::size_t h, std::size_t w, const char* what) {
  if (h < 2 || w < 2) throw std::invalid_argument(std::string(what) + ": needs a regular grid of at least 2 x 2");
}

}  // namespace

double rel_l2(const Tensor& u, const Tensor& target) {
  require_same(u, target, "rel_l2");
  const double tn = target_norm(target, "rel_l2");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - target[i]) * (u[i] - target[i]);
  return std::sqrt(s) / tn;
}

ad::Var rel_l2(ad::Var u, const Tensor& target) {
  require_same(u.value(), target, "rel_l2");
  const double tn = target_norm(target, "rel_l2");
  return ad::scale(ad::sqrt(ad::sum_squares(ad::sub(u, u.tape->constant(target)))), 1.0 / tn);
}

double h1_seminorm(const Tensor& e, std::size_t h, std::size_t w) {
  require_grid(h, w, "h1_seminorm");
  const Tensor g = ad::grid_gradient(e, h, w, grid_step(h), grid_step(w));
  return std::sqrt(sum_sq(g) / static_cast<double>(h * w));
}

double h1_loss(const Tensor& u, const Tensor& target, std::size_t h, std::size_t w) {
  require_same(u, target, "h1_loss");
  Tensor e = u;
  for (std::size_t i = 0; i < e.size(); ++i) e[i] -= target[i];
  const double tn = h1_seminorm(target, h, w);
  if (!(tn > 0.0)) throw std::invalid_argument("h1_loss: target has zero gradient");
  return h1_seminorm(e, h, w) / tn;
}

ad::Var h1_loss(ad::Var u, const Tensor& target, std::size_t h, std::size_t w) {
  require_same(u.value(), target, "h1_loss");
  require_grid(h, w, "h1_loss");
  const double tn = std::sqrt(sum_sq(ad::grid_gradient(target, h, w, grid_step(h), grid_step(w))));
  if (!(tn > 0.0)) throw std::invalid_argument("h1_loss: target has zero gradient");
  const ad::Var g = ad::grid_gradient(ad::sub(u, u.tape->constant(target)), h, w, grid_step(h), grid_step(w));
  return ad::scale(ad::sqrt(ad::sum_squares(g)), 1.0 / tn);
}

Normalizer Normalizer::fit(const std::vector<const Tensor*>& fields) {
  if (fields.empty()) throw std::invalid_argument("Normalizer::fit: no fields");
  const std::size_t c = fields.front()->rows();
  Normalizer n;
  n.mean.assign(c, 0.0);
  n.stdev.assign(c, 0.0);
  std::vector<double> count(c, 0.0);
  for (const Tensor* f : fields) {
    if (f->rows() != c) throw ShapeError("Normalizer::fit: channel count differs between fields");
    for (std::size_t r = 0; r < c; ++r)
      for (std::size_t i = 0; i < f->cols(); ++i) n.mean[r] += (*f)(r, i);
    for (std::size_t r = 0; r < c; ++r) count[r] += static_cast<double>(f->cols());
  }
  for (std::size_t r = 0; r < c; ++r) n.mean[r] /= count[r];
  for (const Tensor* f : fields)
    for (std::size_t r = 0; r < c; ++r)
      for (std::size_t i = 0; i < f->cols(); ++i) n.stdev[r] += ((*f)(r, i) - n.mean[r]) * ((*f)(r, i) - n.mean[r]);
  for (std::size_t r = 0; r < c; ++r) n.stdev[r] = std::max(std::sqrt(n.stdev[r] / count[r]), kEps);
  return n;
}

Tensor Normalizer::apply(const Tensor& x) const {
  if (x.rows() != channels()) throw ShapeError("Normalizer::apply: channel count mismatch");
  Tensor y = x;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t i = 0; i < y.cols(); ++i) y(r, i) = (y(r, i) - mean[r]) / stdev[r];
  return y;
}

Tensor Normalizer::unapply(const Tensor& x) const {
  if (x.rows() != channels()) throw ShapeError("Normalizer::unapply: channel count mismatch");
  Tensor y = x;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t i = 0; i < y.cols(); ++i) y(r, i) = y(r, i) * stdev[r] + mean[r];
  return y;
}

ad::Var Normalizer::unapply(ad::Var x) const {
  if (x.value().rows() != channels()) throw ShapeError("Normalizer::unapply: channel count mismatch");
  ad::Tape& t = *x.tape;
  return ad::add_row_bias(ad::scale_rows(x, t.constant(Tensor({channels()}, stdev))), t.constant(Tensor({channels()}, mean)));
}

Normalizers Normalizers::fit(const std::vector<pde::Sample>& train) {
  std::vector<const Tensor*> in, out;
  for (const auto& s : train) {
    in.push_back(&s.inputs);
    out.push_back(&s.target);
  }
  return {Normalizer::fit(in), Normalizer::fit(out)};
}

void Normalizers::save(const std::filesystem::path& file) const {
  const nlohmann::json j = {{"eps", Normalizer::kEps},
                            {"input", {{"mean", input.mean}, {"std", input.stdev}}},
                            {"output", {{"mean", output.mean}, {"std", output.stdev}}}};
  std::ofstream out(file);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

Normalizers Normalizers::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("missing " + file.string());
  const auto j = nlohmann::json::parse(in);
  Normalizers n;
  n.input.mean = j.at("input").at("mean").get<std::vector<double>>();
  n.input.stdev = j.at("input").at("std").get<std::vector<double>>();
  n.output.mean = j.at("output").at("mean").get<std::vector<double>>();
  n.output.stdev = j.at("output").at("std").get<std::vector<double>>();
  for (const Normalizer* z : {&n.input, &n.output}) {
    if (z->mean.size() != z->stdev.size()) throw std::runtime_error(file.string() + ": mean and std lengths differ");
    for (double s : z->stdev)
      if (!(s >= Normalizer::kEps)) throw std::runtime_error(file.string() + ": std below eps");
  }
  return n;
}

bool AdamW::step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params.size()) throw std::invalid_argument("AdamW: gradient count differs from parameter count");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].shape() != params[k]->shape()) throw ShapeError("AdamW: gradient shape mismatch");
    if (!grads[k].all_finite()) return false;
  }
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  } else if (m_.size() != params.size()) {
    throw std::invalid_argument("AdamW: parameter list changed between steps");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grads[k][i];
      m_[k][i] = beta1 * m_[k][i] + (1.0 - beta1) * g;
      v_[k][i] = beta2 * v_[k][i] + (1.0 - beta2) * g * g;
      const double mh = m_[k][i] / c1, vh = v_[k][i] / c2;
      p[i] -= lr * (mh / (std::sqrt(vh) + eps) + weight_decay * p[i]);
    }
  }
  return true;
}

std::size_t OneCycle::warmup_end() const {
  return static_cast<std::size_t>(std::llround(warmup * static_cast<double>(total_steps)));
}

double OneCycle::lr(std::size_t step) const {
  const double start = max_lr / div, end = start / final_div;
  const std::size_t w = warmup_end();
  if (step >= total_steps) return end;
  if (step == w) return max_lr;
  if (step == 0) return start;
  auto ramp = [](double from, double to, double frac) {
    return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
  };
  if (step < w) return ramp(start, max_lr, static_cast<double>(step) / static_cast<double>(w));
  return ramp(max_lr, end, static_cast<double>(step - w) / static_cast<double>(total_steps - w));
}

std::size_t worker_threads() {
  const char* env = std::getenv("SUPRA_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<std::size_t>(v);
}

void TrainConfig::validate() const {
  if (epochs == 0 && max_steps == 0) throw std::invalid_argument("train: epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train: lr must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be nonnegative");
  if (!(h1_weight >= 0.0)) throw std::invalid_argument("train: h1_weight must be nonnegative");
}

TrainConfig default_train_config(pde::Task task) {
  TrainConfig c;
  if (task == pde::Task::Darcy) {
    c.h1_weight = 0.1;
    c.augment = true;
  }
  return c;
}

namespace {

struct SampleGrad {
  double loss = 0.0;
  std::vector<Tensor> grads;
};

SampleGrad sample_gradient(const model::SupraOperator& model, const Normalizers& norms, const basis::Basis& b,
                           const pde::Sample& s, double h1_weight) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(model.params().size());
  for (const auto& p : model.params()) vars.push_back(tape.leaf(p.value));
  const ad::Var pred = norms.output.unapply(model.forward(tape, vars, norms.input.apply(s.inputs), b));
  ad::Var loss = rel_l2(pred, s.target);
  if (h1_weight > 0.0) loss = ad::add(loss, ad::scale(h1_loss(pred, s.target, s.grid_h, s.grid_w), h1_weight));
  SampleGrad out;
  out.loss = loss.value().item();
  if (!std::isfinite(out.loss)) return out;
  tape.backward(loss);
  for (const auto& v : vars) out.grads.push_back(v.grad());
  return out;
}

void save_state(const model::SupraOperator& model, const Normalizers& norms, const std::filesystem::path& dir) {
  model.save(dir);
  norms.save(dir / "normalizers.json");
}

}  // namespace

FitResult fit(model::SupraOperator& model, const basis::Basis& b, const std::vector<pde::Sample>& train,
              const std::vector<pde::Sample>& test, const TrainConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (train.empty() || test.empty()) throw std::invalid_argument("train: both splits must be non-empty");
  model.check_basis(b);
  for (const auto* split : {&train, &test})
    for (const auto& s : *split) {
      if (s.inputs.shape() != Shape{model.config().in_channels, b.num_points()} ||
          s.target.shape() != Shape{model.config().out_channels, b.num_points()})
        throw ShapeError("train: sample shapes do not match the model and basis geometry");
      if ((cfg.h1_weight > 0.0 || cfg.augment) && !s.on_grid())
        throw std::invalid_argument("train: h1_weight and augment require grid samples");
    }

  std::filesystem::create_directories(out_dir);
  const Normalizers norms = Normalizers::fit(train);
  const std::size_t per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = cfg.max_steps ? cfg.max_steps : cfg.epochs * per_epoch;
  const std::size_t epochs = (total + per_epoch - 1) / per_epoch;
  const OneCycle sched{cfg.lr, total};
  const std::size_t threads = cfg.threads ? cfg.threads : worker_threads();

  AdamW opt;
  opt.weight_decay = cfg.weight_decay;
  Rng order_rng(derive_seed(cfg.seed, 1)), flip_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::ofstream csv(out_dir / "metrics.csv");
  csv << "epoch,step,lr,train_loss,test_rel_l2\n";
  csv.precision(17);

  FitResult res;
  std::vector<model::NamedTensor> best_params = model.params();
  res.best_test_rel_l2 = std::numeric_limits<double>::infinity();
  std::vector<Tensor*> ptrs;
  for (auto& p : model.params()) ptrs.push_back(&p.value);

  for (std::size_t epoch = 1; epoch <= epochs && !res.diverged && res.steps < total; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    double lr = 0.0;
    for (std::size_t start = 0; start < order.size() && res.steps < total; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, order.size() - start);
      std::vector<pde::Sample> batch;
      for (std::size_t k = 0; k < bs; ++k) {
        const auto& s = train[order[start + k]];
        batch.push_back(cfg.augment ? pde::augment_flip(s, flip_rng) : s);
      }
      std::vector<SampleGrad> sg(bs);
      const std::size_t nt = std::min(threads, bs);
      if (nt <= 1) {
        for (std::size_t k = 0; k < bs; ++k) sg[k] = sample_gradient(model, norms, b, batch[k], cfg.h1_weight);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nt; ++t)
          pool.emplace_back([&, t] {
            for (std::size_t k = t; k < bs; k += nt) sg[k] = sample_gradient(model, norms, b, batch[k], cfg.h1_weight);
          });
        for (auto& th : pool) th.join();
      }

      double batch_loss = 0.0;
      for (const auto& g : sg) batch_loss += g.loss;
      batch_loss /= static_cast<double>(bs);
      if (!std::isfinite(batch_loss)) {
        res.diverged = true;
        res.abort_reason = "non-finite loss at step " + std::to_string(res.steps + 1);
        break;
      }
      std::vector<Tensor> grads = std::move(sg[0].grads);
      for (std::size_t k = 1; k < bs; ++k)
        for (std::size_t p = 0; p < grads.size(); ++p)
          for (std::size_t i = 0; i < grads[p].size(); ++i) grads[p][i] += sg[k].grads[p][i];
      for (auto& g : grads)
        for (double& v : g.values()) v /= static_cast<double>(bs);
      lr = sched.lr(res.steps);
      if (!opt.step(ptrs, grads, lr)) {
        res.diverged = true;
        res.abort_reason = "non-finite gradient at step " + std::to_string(res.steps + 1);
        break;
      }
      ++res.steps;
      loss_sum += batch_loss;
      ++loss_count;
    }
    if (res.diverged) break;

    EpochLog row;
    row.epoch = epoch;
    row.step = res.steps;
    row.lr = lr;
    row.train_loss = loss_sum / static_cast<double>(loss_count);
    row.test_rel_l2 = evaluate(model_predictor(model, norms, b), test).mean_rel_l2;
    if (!std::isfinite(row.test_rel_l2)) {
      res.diverged = true;
      res.abort_reason = "non-finite test prediction after epoch " + std::to_string(epoch);
    }
    res.log.push_back(row);
    csv << row.epoch << ',' << row.step << ',' << row.lr << ',' << row.train_loss << ',' << row.test_rel_l2 << '\n';
    csv.flush();
    if (row.test_rel_l2 < res.best_test_rel_l2) {
      res.best_test_rel_l2 = row.test_rel_l2;
      res.best_epoch = epoch;
      best_params = model.params();
    }
  }
  save_state(model, norms, out_dir / "last");
  if (res.best_epoch > 0) {
    model::SupraOperator best(model.config(), model.basis_fingerprint());
    best.params() = best_params;
    save_state(best, norms, out_dir / "best");
  }
  return res;
}

Predictor model_predictor(const model::SupraOperator& model, const Normalizers& norms, const basis::Basis& b) {
  return [&model, norms, &b](const pde::Sample& s) {
    return norms.output.unapply(model.predict(norms.input.apply(s.inputs), b));
  };
}

Predictor mean_predictor(const std::vector<pde::Sample>& train) {
  if (train.empty()) throw std::invalid_argument("mean_predictor: empty training split");
  Tensor mean(train.front().target.shape());
  for (const auto& s : train) {
    require_same(s.target, mean, "mean_predictor");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s.target[i];
  }
  for (double& v : mean.values()) v /= static_cast<double>(train.size());
  return [mean](const pde::Sample&) { return mean; };
}

EvalReport evaluate(const Predictor& predict, const std::vector<pde::Sample>& samples, const Predictor* baseline) {
  if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
  EvalReport r;
  double base = 0.0;
  for (const auto& s : samples) {
    r.per_sample.push_back(rel_l2(predict(s), s.target));
    r.mean_rel_l2 += r.per_sample.back();
    if (baseline) base += rel_l2((*baseline)(s), s.target);
  }
  r.mean_rel_l2 /= static_cast<double>(samples.size());
  if (baseline) r.baseline_rel_l2 = base / static_cast<double>(samples.size());
  return r;
}

void write_report(const EvalReport& r, const std::filesystem::path& file) {
  const nlohmann::json j = {{"split", r.split},
                            {"samples", r.per_sample.size()},
                            {"mean_rel_l2", r.mean_rel_l2},
                            {"baseline_mean_predictor_rel_l2", r.baseline_rel_l2},
                            {"per_sample_rel_l2", r.per_sample}};
  std::ofstream out(file);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

}  // namespace supra::train
