#include "supra/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "supra/kernels.hpp"
#include "supra/rng.hpp"
#include "supra/supra.hpp"

namespace supra::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "config" : path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
  }
}

std::string join(const std::string& path, const char* key) { return path + "." + key; }

void read(const json& j, const std::string& path, const char* key, std::size_t& dst) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(join(path, key), "expected a nonnegative integer");
  dst = v.get<std::size_t>();
}

void read(const json& j, const std::string& path, const char* key, double& dst) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) throw ConfigError(join(path, key), "expected a finite number");
  dst = v.get<double>();
}

void read(const json& j, const std::string& path, const char* key, bool& dst) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  dst = j.at(key).get<bool>();
}

void read(const json& j, const std::string& path, const char* key, std::string& dst) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_string()) throw ConfigError(join(path, key), "expected a string");
  dst = j.at(key).get<std::string>();
}

void read(const json& j, const std::string& path, const char* key, std::vector<std::size_t>& dst) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(join(path, key), "expected a non-empty array");
  dst.clear();
  for (const auto& e : v) {
    if (!e.is_number_unsigned() || e.get<std::size_t>() == 0)
      throw ConfigError(join(path, key), "expected positive integers");
    dst.push_back(e.get<std::size_t>());
  }
}

template <class F>
void rethrow_as(const std::string& field, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

bool is_grid_kind(basis::Kind k) { return k != basis::Kind::Laplacian; }

void require_empty_or_force(const std::filesystem::path& dir, bool force) {
  if (std::filesystem::exists(dir) && !std::filesystem::is_empty(dir) && !force)
    throw ConfigError("--out", dir.string() + " is not empty (pass --force to overwrite)");
}

void write_json(const json& j, const std::filesystem::path& file) {
  std::ofstream out(file);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class F>
double time_median(std::size_t reps, F&& f) {
  f();  // warmup
  std::vector<double> t;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return median(t);
}

Tensor random_uniform(Shape s, Rng& rng, double bound) {
  Tensor t(std::move(s));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

// Fourier mode counts (mx, my) with 4 mx my = n, mx as close to my as possible.
std::pair<std::size_t, std::size_t> fourier_modes(std::size_t n) {
  if (n % 4 != 0) throw ConfigError("bench.n", "Fourier basis sizes must be multiples of 4");
  const std::size_t q = n / 4;
  std::size_t mx = static_cast<std::size_t>(std::sqrt(static_cast<double>(q)));
  while (q % mx != 0) --mx;
  return {mx, q / mx};
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  check_keys(j, "", {"task", "data", "basis", "model", "train", "bench"});
  RunConfig rc;
  std::string task = "darcy";
  read(j, "config", "task", task);
  rethrow_as("task", [&] { rc.data.task = pde::parse_task(task); });
  const bool grid = rc.data.task == pde::Task::Darcy;
  rc.train = train::default_train_config(rc.data.task);
  if (!grid) {
    rc.basis.kind = basis::Kind::Laplacian;
    rc.basis.size = 64;
  }

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data",
               {"dir", "n_train", "n_test", "seed", "grid", "alpha", "tau", "length_scale", "a_hi", "a_lo", "forcing",
                "radial", "angular", "r_inner", "r_outer"});
    std::string dir;
    read(d, "data", "dir", dir);
    rc.data_dir = dir;
    read(d, "data", "n_train", rc.data.n_train);
    read(d, "data", "n_test", rc.data.n_test);
    read(d, "data", "seed", rc.data.seed);
    read(d, "data", "grid", rc.data.grid);
    read(d, "data", "alpha", rc.data.grf.alpha);
    read(d, "data", "tau", rc.data.grf.tau);
    read(d, "data", "length_scale", rc.data.grf.length_scale);
    read(d, "data", "a_hi", rc.data.a_hi);
    read(d, "data", "a_lo", rc.data.a_lo);
    read(d, "data", "forcing", rc.data.forcing);
    read(d, "data", "radial", rc.data.radial);
    read(d, "data", "angular", rc.data.angular);
    read(d, "data", "r_inner", rc.data.r_inner);
    read(d, "data", "r_outer", rc.data.r_outer);
  }
  if (rc.data.n_train == 0) throw ConfigError("data.n_train", "must be positive");
  if (rc.data.n_test == 0) throw ConfigError("data.n_test", "must be positive");
  if (grid && rc.data.grid < 8) throw ConfigError("data.grid", "must be at least 8");
  if (!(rc.data.a_hi > 0.0)) throw ConfigError("data.a_hi", "must be positive");
  if (!(rc.data.a_lo > 0.0)) throw ConfigError("data.a_lo", "must be positive");
  if (!(rc.data.grf.alpha > 0.0)) throw ConfigError("data.alpha", "must be positive");
  if (!(rc.data.grf.tau > 0.0)) throw ConfigError("data.tau", "must be positive");
  if (!(rc.data.grf.length_scale > 0.0)) throw ConfigError("data.length_scale", "must be positive");
  if (!(rc.data.r_inner > 0.0) || !(rc.data.r_outer > rc.data.r_inner))
    throw ConfigError("data.r_inner", "need 0 < r_inner < r_outer");
  if (rc.data.radial < 3) throw ConfigError("data.radial", "need at least 3 rings");
  if (rc.data.angular < 3) throw ConfigError("data.angular", "need at least 3 angular vertices");

  if (j.contains("basis")) {
    const json& b = j.at("basis");
    check_keys(b, "basis", {"kind", "mx", "my", "size"});
    std::string kind = basis::kind_name(rc.basis.kind);
    read(b, "basis", "kind", kind);
    rethrow_as("basis.kind", [&] { rc.basis.kind = basis::parse_kind(kind); });
    read(b, "basis", "mx", rc.basis.mx);
    read(b, "basis", "my", rc.basis.my);
    read(b, "basis", "size", rc.basis.size);
  }
  if (is_grid_kind(rc.basis.kind) != grid)
    throw ConfigError("basis.kind", basis::kind_name(rc.basis.kind) + " does not fit task " + task);
  if (rc.basis.kind == basis::Kind::Fourier && (rc.basis.mx == 0 || rc.basis.my == 0))
    throw ConfigError("basis.mx", "Fourier mode counts must be positive");
  if (rc.basis.kind == basis::Kind::Fourier && (2 * rc.basis.mx > rc.data.grid - 1 || 2 * rc.basis.my > rc.data.grid - 1))
    throw ConfigError("basis.mx", "Fourier modes need 2*mx <= grid-1 and 2*my <= grid-1");
  if (rc.basis.kind == basis::Kind::Laplacian && rc.basis.size == 0) throw ConfigError("basis.size", "must be positive");

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model", {"hidden", "layers", "heads", "norm", "mlp_ratio", "use_coords", "seed"});
    read(m, "model", "hidden", rc.model.hidden);
    read(m, "model", "layers", rc.model.layers);
    read(m, "model", "heads", rc.model.heads);
    std::string norm = model::norm_name(rc.model.norm);
    read(m, "model", "norm", norm);
    rethrow_as("model.norm", [&] { rc.model.norm = model::parse_norm(norm); });
    read(m, "model", "mlp_ratio", rc.model.mlp_ratio);
    read(m, "model", "use_coords", rc.model.use_coords);
    read(m, "model", "seed", rc.model.seed);
  }
  rc.model.basis_size = basis_size(rc.basis);
  rethrow_as("model", [&] { rc.model.validate(); });

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"epochs", "max_steps", "batch_size", "lr", "weight_decay", "h1_weight", "augment", "seed", "threads"});
    read(t, "train", "epochs", rc.train.epochs);
    read(t, "train", "max_steps", rc.train.max_steps);
    read(t, "train", "batch_size", rc.train.batch_size);
    read(t, "train", "lr", rc.train.lr);
    read(t, "train", "weight_decay", rc.train.weight_decay);
    read(t, "train", "h1_weight", rc.train.h1_weight);
    read(t, "train", "augment", rc.train.augment);
    read(t, "train", "seed", rc.train.seed);
    read(t, "train", "threads", rc.train.threads);
  }
  rethrow_as("train", [&] { rc.train.validate(); });
  if (!grid && rc.train.h1_weight > 0.0) throw ConfigError("train.h1_weight", "the H1 loss needs a grid task");
  if (!grid && rc.train.augment) throw ConfigError("train.augment", "flips need a grid task");

  if (j.contains("bench")) {
    const json& b = j.at("bench");
    check_keys(b, "bench", {"m", "c", "n", "reps"});
    read(b, "bench", "m", rc.bench.m);
    read(b, "bench", "c", rc.bench.c);
    read(b, "bench", "n", rc.bench.n);
    read(b, "bench", "reps", rc.bench.reps);
  }
  if (rc.bench.reps == 0) throw ConfigError("bench.reps", "must be positive");
  for (std::size_t m : rc.bench.m) {
    const auto s = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))));
    if (s * s != m || s < 8) throw ConfigError("bench.m", "sizes must be squares of at least 64");
  }
  for (std::size_t n : rc.bench.n) fourier_modes(n);
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("--config", "cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

std::size_t basis_size(const BasisConfig& c) {
  switch (c.kind) {
    case basis::Kind::Fourier: return 4 * c.mx * c.my;
    case basis::Kind::Chebyshev: return (c.mx + 1) * (c.my + 1);
    case basis::Kind::Laplacian: return c.size;
  }
  return 0;
}

basis::Basis build_basis(const BasisConfig& c, const pde::DatasetSpec& data, const mesh::TriMesh* mesh) {
  switch (c.kind) {
    case basis::Kind::Fourier: return basis::fourier_basis_2d(c.mx, c.my, data.grid, data.grid);
    case basis::Kind::Chebyshev: return basis::chebyshev_basis_2d(c.mx, c.my, data.grid, data.grid);
    case basis::Kind::Laplacian:
      if (!mesh) throw std::invalid_argument("build_basis: the Laplacian basis needs a mesh");
      return basis::laplacian_eigenbasis(*mesh, c.size);
  }
  throw std::invalid_argument("build_basis: unknown kind");
}

Tensor function_token_attention(const Tensor& u, const Tensor& wq, const Tensor& wk, const Tensor& wv) {
  require_matrix(u, "function_token_attention");
  const std::size_t c = u.rows(), m = u.cols();
  for (const Tensor* w : {&wq, &wk, &wv}) require_shape(*w, {c, c}, "function_token_attention");
  // Tokens are the M points; rows of q, k, v are per-point C-vectors.
  const Tensor ut = u.transposed();
  const Tensor q = ad::matmul_nt(ut, wq), k = ad::matmul_nt(ut, wk), v = ad::matmul_nt(ut, wv);
  const double scale = 1.0 / std::sqrt(static_cast<double>(c));
  Tensor out({m, c});
  std::vector<double> s(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(s.begin(), s.end(), 0.0);
    kernels::gemm_nt(1, m, c, q.data() + i * c, k.data(), s.data());
    double mx = -std::numeric_limits<double>::infinity();
    for (double& x : s) mx = std::max(mx, x *= scale);
    double z = 0.0;
    for (double& x : s) z += (x = std::exp(x - mx));
    for (double& x : s) x /= z;
    kernels::gemm_nn(1, c, m, s.data(), v.data(), out.data() + i * c);
  }
  return out.transposed();
}

std::vector<BenchRow> run_bench(const BenchConfig& cfg, std::uint64_t seed, std::ostream* progress) {
  std::vector<BenchRow> rows;
  Rng rng(seed);
  for (std::size_t m : cfg.m) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))));
    for (std::size_t n : cfg.n) {
      const auto [mx, my] = fourier_modes(n);
      const basis::Basis b = basis::fourier_basis_2d(mx, my, side, side);
      const std::size_t heads = 4, dh = n / heads;
      for (std::size_t c : cfg.c) {
        const Tensor u = random_uniform({c, m}, rng, 1.0);
        std::vector<attn::SupraHeadParams> hp;
        for (std::size_t h = 0; h < heads; ++h) {
          const double bound = 1.0 / std::sqrt(static_cast<double>(dh));
          hp.push_back({random_uniform({dh, dh}, rng, bound), random_uniform({dh, dh}, rng, bound),
                        random_uniform({dh, dh}, rng, bound)});
        }
        const double cb = 1.0 / std::sqrt(static_cast<double>(c));
        const Tensor wq = random_uniform({c, c}, rng, cb), wk = random_uniform({c, c}, rng, cb),
                     wv = random_uniform({c, c}, rng, cb);

        BenchRow s{"supra", m, c, n, 0.0, 0};
        s.wall_seconds = time_median(cfg.reps, [&] { (void)attn::function_space_attention(u, b, hp); });
        // u, phi, psi, coordinates and head outputs, scores, reconstruction.
        s.bytes_peak_estimate = 8 * (c * m + 2 * m * n + 5 * c * n + heads * c * c + c * m);
        BenchRow r{"function_token", m, c, n, 0.0, 0};
        r.wall_seconds = time_median(cfg.reps, [&] { (void)function_token_attention(u, wq, wk, wv); });
        // u and its transpose, q, k, v, one score row, output and its transpose.
        r.bytes_peak_estimate = 8 * (6 * c * m + m + c * m);
        for (const auto& row : {s, r}) {
          rows.push_back(row);
          if (progress)
            *progress << row.impl << " M=" << m << " C=" << c << " N=" << n << " " << row.wall_seconds << " s\n";
        }
      }
    }
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& file) {
  std::ofstream out(file);
  out.precision(9);
  out << "impl,M,C,N,wall_seconds,bytes_peak_estimate\n";
  for (const auto& r : rows)
    out << r.impl << ',' << r.m << ',' << r.c << ',' << r.n << ',' << r.wall_seconds << ',' << r.bytes_peak_estimate
        << '\n';
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

GradcheckResult run_gradcheck(model::Norm norm, std::uint64_t seed) {
  const basis::Basis b = basis::chebyshev_basis_2d(3, 3, 8, 8);
  model::ModelConfig mc;
  mc.hidden = 8;
  mc.layers = 2;
  mc.basis_size = 16;
  mc.heads = 2;
  mc.norm = norm;
  mc.seed = seed;
  const auto m = model::init_params(mc, b);
  Rng rng(derive_seed(seed, 7));
  const Tensor x = random_uniform({1, 64}, rng, 1.0), target = random_uniform({1, 64}, rng, 1.0);
  std::vector<Tensor> params;
  for (const auto& p : m.params()) params.push_back(p.value);
  const auto f = [&](ad::Tape& tape, std::span<const ad::Var> v) {
    return ad::sum_squares(ad::sub(m.forward(tape, v, x, b), tape.constant(target)));
  };
  const auto rep = ad::grad_check(f, params, 1e-5);
  GradcheckResult r;
  r.max_rel_error = rep.nonfinite.empty() ? rep.max_rel_error : std::numeric_limits<double>::infinity();
  r.components = rep.components_checked;
  r.worst = m.params()[rep.worst_tensor].name + "[" + std::to_string(rep.worst_index) + "]";
  return r;
}

namespace {

struct Flags {
  std::string config, out, checkpoint, split = "test";
  std::uint64_t seed = 0;
  bool seed_given = false, force = false;
};

RunConfig config_or_default(const Flags& f) {
  return f.config.empty() ? parse_run_config(json::object()) : load_run_config(f.config);
}

int cmd_gen_data(const Flags& f, std::ostream& out) {
  RunConfig rc = load_run_config(f.config);
  if (f.seed_given) rc.data.seed = f.seed;
  const auto m = pde::gen_dataset(rc.data, f.out, f.force);
  out << json{{"dir", f.out}, {"task", pde::task_name(rc.data.task)}, {"train", m.train_files.size()},
              {"test", m.test_files.size()}, {"num_points", m.num_points}}
             .dump()
      << '\n';
  return 0;
}

int cmd_build_basis(const Flags& f, std::ostream& out) {
  const RunConfig rc = config_or_default(f);
  pde::DatasetSpec spec = rc.data;
  mesh::TriMesh mesh;
  const bool have_data = !rc.data_dir.empty() && std::filesystem::exists(rc.data_dir / "manifest.json");
  if (have_data) spec = pde::load_manifest(rc.data_dir).spec;
  if (spec.task == pde::Task::AnnulusPoisson)
    mesh = have_data ? pde::load_mesh(pde::load_manifest(rc.data_dir))
                     : mesh::generate_annulus_mesh(spec.r_inner, spec.r_outer, spec.radial, spec.angular);
  const basis::Basis b = build_basis(rc.basis, spec, spec.task == pde::Task::AnnulusPoisson ? &mesh : nullptr);
  basis::save_basis(b, f.out);
  const json report = {{"kind", basis::kind_name(b.kind)}, {"num_functions", b.size()},
                       {"num_points", b.num_points()},     {"gram_deviation", b.gram_deviation()},
                       {"fingerprint", b.fingerprint()}};
  write_json(report, std::filesystem::path(f.out) / "basis_report.json");
  out << report.dump() << '\n';
  return 0;
}

struct Loaded {
  pde::Manifest manifest;
  mesh::TriMesh mesh;
  basis::Basis basis;
  std::vector<pde::Sample> train, test;
};

Loaded load_data(const RunConfig& rc) {
  if (rc.data_dir.empty()) throw ConfigError("data.dir", "required to train or evaluate");
  Loaded d;
  d.manifest = pde::load_manifest(rc.data_dir);
  if (d.manifest.spec.task != rc.data.task)
    throw ConfigError("task", "config says " + pde::task_name(rc.data.task) + " but the dataset is " +
                                  pde::task_name(d.manifest.spec.task));
  const bool mesh_task = d.manifest.spec.task == pde::Task::AnnulusPoisson;
  if (mesh_task) d.mesh = pde::load_mesh(d.manifest);
  if (rc.basis.kind == basis::Kind::Fourier &&
      (2 * rc.basis.mx > d.manifest.spec.grid - 1 || 2 * rc.basis.my > d.manifest.spec.grid - 1))
    throw ConfigError("basis.mx", "Fourier modes exceed the dataset grid");
  d.basis = build_basis(rc.basis, d.manifest.spec, mesh_task ? &d.mesh : nullptr);
  d.train = pde::load_split(d.manifest, false);
  d.test = pde::load_split(d.manifest, true);
  return d;
}

int cmd_train(const Flags& f, std::ostream& out) {
  RunConfig rc = load_run_config(f.config);
  if (f.seed_given) {
    rc.model.seed = f.seed;
    rc.train.seed = f.seed;
  }
  require_empty_or_force(f.out, f.force);
  const Loaded d = load_data(rc);
  model::ModelConfig mc = rc.model;
  mc.in_channels = d.manifest.in_channels;
  mc.out_channels = d.manifest.out_channels;
  mc.basis_size = d.basis.size();
  auto m = model::init_params(mc, d.basis);
  const std::filesystem::path dir = f.out;
  const auto fr = train::fit(m, d.basis, d.train, d.test, rc.train, dir);

  json summary = {{"steps", fr.steps}, {"epochs_logged", fr.log.size()}, {"diverged", fr.diverged},
                  {"abort_reason", fr.abort_reason}, {"param_count", m.param_count()}};
  if (fr.best_epoch > 0) {
    const auto best = model::SupraOperator::load(dir / "best");
    const auto norms = train::Normalizers::load(dir / "best" / "normalizers.json");
    const auto baseline = train::mean_predictor(d.train);
    train::EvalReport rep = train::evaluate(train::model_predictor(best, norms, d.basis), d.test, &baseline);
    rep.split = "test";
    train::write_report(rep, dir / "metrics.json");
    summary["best_epoch"] = fr.best_epoch;
    summary["test_rel_l2"] = rep.mean_rel_l2;
    summary["baseline_rel_l2"] = rep.baseline_rel_l2;
  }
  write_json(summary, dir / "run.json");
  out << summary.dump() << '\n';
  return fr.diverged ? 2 : 0;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const RunConfig rc = load_run_config(f.config);
  if (f.split != "test" && f.split != "train") throw ConfigError("--split", "expected test or train");
  const Loaded d = load_data(rc);
  const auto m = model::SupraOperator::load(f.checkpoint);
  const auto norms = train::Normalizers::load(std::filesystem::path(f.checkpoint) / "normalizers.json");
  const auto baseline = train::mean_predictor(d.train);
  train::EvalReport rep =
      train::evaluate(train::model_predictor(m, norms, d.basis), f.split == "test" ? d.test : d.train, &baseline);
  rep.split = f.split;
  std::filesystem::create_directories(f.out);
  train::write_report(rep, std::filesystem::path(f.out) / "metrics.json");
  out << json{{"split", rep.split}, {"mean_rel_l2", rep.mean_rel_l2}, {"baseline_rel_l2", rep.baseline_rel_l2}}.dump()
      << '\n';
  return 0;
}

int cmd_gradcheck(const Flags& f, std::ostream& out) {
  const RunConfig rc = config_or_default(f);
  const auto r = run_gradcheck(rc.model.norm, f.seed_given ? f.seed : rc.model.seed);
  const bool ok = r.max_rel_error <= 1e-4;
  const json j = {{"norm", model::norm_name(rc.model.norm)}, {"max_rel_error", r.max_rel_error},
                  {"components", r.components},             {"worst", r.worst},
                  {"threshold", 1e-4},                      {"pass", ok}};
  if (!f.out.empty()) {
    std::filesystem::create_directories(f.out);
    write_json(j, std::filesystem::path(f.out) / "gradcheck.json");
  }
  out << j.dump() << '\n';
  return ok ? 0 : 2;
}

int cmd_bench(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig rc = config_or_default(f);
  const auto rows = run_bench(rc.bench, f.seed, &err);
  std::filesystem::create_directories(f.out);
  write_bench_csv(rows, std::filesystem::path(f.out) / "bench.csv");
  out << json{{"rows", rows.size()}, {"csv", (std::filesystem::path(f.out) / "bench.csv").string()}}.dump() << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"SUPRA neural operator toolkit"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&](CLI::App* sub, bool config_required, bool out_required) {
    auto* c = sub->add_option("--config", f.config, "JSON run config");
    if (config_required) c->required();
    auto* o = sub->add_option("--out", f.out, "output directory");
    if (out_required) o->required();
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { f.seed = s, f.seed_given = true; }, "seed override");
  };
  auto* gen = app.add_subcommand("gen-data", "generate a dataset");
  common(gen, true, true);
  gen->add_flag("--force", f.force, "overwrite a non-empty output directory");
  auto* bb = app.add_subcommand("build-basis", "build and cache a basis");
  common(bb, false, true);
  auto* tr = app.add_subcommand("train", "train a model");
  common(tr, true, true);
  tr->add_flag("--force", f.force, "overwrite a non-empty output directory");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  common(ev, true, true);
  ev->add_option("--checkpoint", f.checkpoint, "checkpoint directory")->required();
  ev->add_option("--split", f.split, "test or train");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full model");
  common(gc, false, false);
  auto* be = app.add_subcommand("bench", "complexity benchmark");
  common(be, false, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(f, out);
    if (bb->parsed()) return cmd_build_basis(f, out);
    if (tr->parsed()) return cmd_train(f, out);
    if (ev->parsed()) return cmd_eval(f, out);
    if (gc->parsed()) return cmd_gradcheck(f, out);
    if (be->parsed()) return cmd_bench(f, out, err);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace supra::cli
