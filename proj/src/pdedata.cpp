#include "supra/pdedata.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "supra/cg.hpp"
#include "supra/fem.hpp"
#include "supra/ndbin.hpp"

namespace supra::pde {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kManifestVersion = 1;

void require_grid_tensor(const Tensor& t, const char* what) {
  if (t.ndim() != 2) throw ShapeError(std::string(what) + ": expected an H x W grid, got " + shape_to_string(t.shape()));
}

std::string split_file(bool test, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu.ndb", test ? "test" : "train", k);
  return buf;
}

mesh::TriMesh annulus_for(const DatasetSpec& s) {
  return mesh::generate_annulus_mesh(s.r_inner, s.r_outer, s.radial, s.angular);
}

}  // namespace

Tensor grf_sample(std::size_t h, std::size_t w, const GrfParams& p, std::uint64_t seed) {
  if (h < 8 || w < 8) throw std::invalid_argument("grf_sample: grid must be at least 8 x 8");
  if (!(p.tau > 0.0) || !(p.alpha > 0.0) || !(p.length_scale > 0.0))
    throw std::invalid_argument("grf_sample: alpha, tau and length scale must be positive");
  const long px = static_cast<long>((h - 1) / 2), py = static_cast<long>((w - 1) / 2);

  // cos/sin of 2 pi k i / n for k = 0..kmax along each axis.
  auto table = [](std::size_t n, long kmax, std::vector<double>& c, std::vector<double>& s) {
    c.resize((kmax + 1) * n);
    s.resize((kmax + 1) * n);
    for (long k = 0; k <= kmax; ++k)
      for (std::size_t i = 0; i < n; ++i) {
        const double th = 2.0 * kPi * static_cast<double>(k) * static_cast<double>(i) / static_cast<double>(n);
        c[k * n + i] = std::cos(th);
        s[k * n + i] = std::sin(th);
      }
  };
  std::vector<double> cx, sx, cy, sy;
  table(h, px, cx, sx);
  table(w, py, cy, sy);

  Rng rng(seed);
  Tensor field({h, w});
  double var = 0.0;
  for (long a = 0; a <= px; ++a)
    for (long b = -py; b <= py; ++b) {
      if (a == 0 && b <= 0) continue;
      const double k2 = 4.0 * kPi * kPi * p.length_scale * p.length_scale * static_cast<double>(a * a + b * b);
      const double amp = std::pow(k2 + p.tau * p.tau, -p.alpha / 2.0);
      const double ca = amp * rng.normal(), sa = amp * rng.normal();
      var += amp * amp;
      const double sign = b < 0 ? -1.0 : 1.0;
      const std::size_t bb = static_cast<std::size_t>(std::labs(b));
      for (std::size_t i = 0; i < h; ++i) {
        const double cxi = cx[a * h + i], sxi = sx[a * h + i];
        double* row = &field(i, 0);
        for (std::size_t j = 0; j < w; ++j) {
          const double cyj = cy[bb * w + j], syj = sign * sy[bb * w + j];
          row[j] += ca * (cxi * cyj - sxi * syj) + sa * (sxi * cyj + cxi * syj);
        }
      }
    }
  const double inv_sd = 1.0 / std::sqrt(var);
  for (double& v : field.values()) v *= inv_sd;
  return field;
}

Tensor darcy_coefficient(const Tensor& field, double a_hi, double a_lo) {
  if (!field.all_finite()) throw std::invalid_argument("darcy_coefficient: field has non-finite values");
  if (!(a_hi > 0.0) || !(a_lo > 0.0)) throw std::invalid_argument("darcy_coefficient: coefficients must be positive");
  Tensor a(field.shape());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = field[i] >= 0.0 ? a_hi : a_lo;
  return a;
}

namespace {

struct DarcyOperator {
  std::size_t h, w;
  double ihx2, ihy2;
  std::vector<double> fx, fy;  // fx(i, j): face (i,j)-(i+1,j); fy(i, j): face (i,j)-(i,j+1)

  DarcyOperator(const Tensor& a, FaceMean mean) : h(a.rows()), w(a.cols()) {
    const double hx = 1.0 / static_cast<double>(h - 1), hy = 1.0 / static_cast<double>(w - 1);
    ihx2 = 1.0 / (hx * hx);
    ihy2 = 1.0 / (hy * hy);
    auto avg = [mean](double p, double q) { return mean == FaceMean::Harmonic ? 2.0 * p * q / (p + q) : 0.5 * (p + q); };
    fx.assign(h * w, 0.0);
    fy.assign(h * w, 0.0);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        if (i + 1 < h) fx[i * w + j] = avg(a(i, j), a(i + 1, j));
        if (j + 1 < w) fy[i * w + j] = avg(a(i, j), a(i, j + 1));
      }
  }

  // Interior unknowns only: index (i-1)*(w-2) + (j-1).
  void apply_interior(const std::vector<double>& u, std::vector<double>& out) const {
    const std::size_t wi = w - 2;
    auto at = [&](std::size_t i, std::size_t j) -> double {
      if (i == 0 || j == 0 || i == h - 1 || j == w - 1) return 0.0;
      return u[(i - 1) * wi + (j - 1)];
    };
    for (std::size_t i = 1; i + 1 < h; ++i)
      for (std::size_t j = 1; j + 1 < w; ++j) {
        const double c = at(i, j);
        const double vx = fx[(i - 1) * w + j] * (c - at(i - 1, j)) + fx[i * w + j] * (c - at(i + 1, j));
        const double vy = fy[i * w + j - 1] * (c - at(i, j - 1)) + fy[i * w + j] * (c - at(i, j + 1));
        out[(i - 1) * wi + (j - 1)] = ihx2 * vx + ihy2 * vy;
      }
  }
};

}  // namespace

Tensor darcy_apply(const Tensor& a, const Tensor& u, FaceMean mean) {
  require_grid_tensor(a, "darcy_apply");
  if (u.shape() != a.shape()) throw ShapeError("darcy_apply: u and a differ in shape");
  const DarcyOperator op(a, mean);
  const std::size_t h = a.rows(), w = a.cols();
  std::vector<double> in((h - 2) * (w - 2)), out(in.size());
  for (std::size_t i = 1; i + 1 < h; ++i)
    for (std::size_t j = 1; j + 1 < w; ++j) in[(i - 1) * (w - 2) + (j - 1)] = u(i, j);
  op.apply_interior(in, out);
  Tensor r = u;
  for (std::size_t i = 1; i + 1 < h; ++i)
    for (std::size_t j = 1; j + 1 < w; ++j) {
      // Boundary values of u enter the interior rows as well.
      double extra = 0.0;
      if (i == 1) extra -= op.ihx2 * op.fx[0 * w + j] * u(0, j);
      if (i == h - 2) extra -= op.ihx2 * op.fx[(h - 2) * w + j] * u(h - 1, j);
      if (j == 1) extra -= op.ihy2 * op.fy[i * w + 0] * u(i, 0);
      if (j == w - 2) extra -= op.ihy2 * op.fy[i * w + w - 2] * u(i, w - 1);
      r(i, j) = out[(i - 1) * (w - 2) + (j - 1)] + extra;
    }
  return r;
}

Tensor darcy_solve_fd(const Tensor& a, const Tensor& f, const DarcyOptions& opt) {
  require_grid_tensor(a, "darcy_solve_fd");
  if (f.shape() != a.shape())
    throw ShapeError("darcy_solve_fd: f " + shape_to_string(f.shape()) + " differs from a " + shape_to_string(a.shape()));
  const std::size_t h = a.rows(), w = a.cols();
  if (h < 3 || w < 3) throw std::invalid_argument("darcy_solve_fd: grid must be at least 3 x 3");
  for (double v : a.values())
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("darcy_solve_fd: coefficient must be positive");
  if (!f.all_finite()) throw std::invalid_argument("darcy_solve_fd: forcing has non-finite values");

  const DarcyOperator op(a, opt.mean);
  std::vector<double> rhs((h - 2) * (w - 2));
  for (std::size_t i = 1; i + 1 < h; ++i)
    for (std::size_t j = 1; j + 1 < w; ++j) rhs[(i - 1) * (w - 2) + (j - 1)] = f(i, j);
  const auto res = conjugate_gradient([&](const std::vector<double>& x, std::vector<double>& y) { op.apply_interior(x, y); },
                                      rhs, opt.tol, 10 * h * w);
  Tensor u({h, w});
  for (std::size_t i = 1; i + 1 < h; ++i)
    for (std::size_t j = 1; j + 1 < w; ++j) u(i, j) = res.x[(i - 1) * (w - 2) + (j - 1)];
  return u;
}

Tensor poisson_fem_solve(const mesh::TriMesh& mesh, const Tensor& f, double tol) {
  const std::size_t nv = mesh.num_vertices();
  if (f.size() != nv) throw ShapeError("poisson_fem_solve: forcing has " + std::to_string(f.size()) + " values for " +
                                       std::to_string(nv) + " vertices");
  const auto k = fem::assemble_stiffness(mesh);
  const Tensor m = fem::assemble_lumped_mass(mesh);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < nv; ++i)
    if (!mesh.boundary[i]) free.push_back(i);
  if (free.empty()) throw std::invalid_argument("poisson_fem_solve: mesh has no interior vertices");

  std::vector<double> rhs(free.size());
  for (std::size_t a = 0; a < free.size(); ++a) rhs[a] = m[free[a]] * f[free[a]];
  std::vector<double> full(nv, 0.0);
  const auto op = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t a = 0; a < free.size(); ++a) full[free[a]] = x[a];
    for (std::size_t a = 0; a < free.size(); ++a) {
      const std::size_t i = free[a];
      double s = 0.0;
      for (std::size_t p = k.row_ptr[i]; p < k.row_ptr[i + 1]; ++p) s += k.vals[p] * full[k.cols[p]];
      y[a] = s;
    }
  };
  const auto res = conjugate_gradient(op, rhs, tol, 10 * nv);
  Tensor u({nv});
  for (std::size_t a = 0; a < free.size(); ++a) u[free[a]] = res.x[a];
  return u;
}

Tensor smooth_forcing(const mesh::TriMesh& mesh, std::uint64_t seed) {
  Rng rng(seed);
  double ca[3][3], sa[3][3];
  for (int kx = 0; kx < 3; ++kx)
    for (int ky = 0; ky < 3; ++ky) {
      const double damp = 1.0 / (1.0 + kx * kx + ky * ky);
      ca[kx][ky] = damp * rng.normal();
      sa[kx][ky] = damp * rng.normal();
    }
  Tensor f({mesh.num_vertices()});
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const double x = mesh.vertices[i][0], y = mesh.vertices[i][1];
    double s = 0.0;
    for (int kx = 0; kx < 3; ++kx)
      for (int ky = 0; ky < 3; ++ky) {
        const double th = kPi * (kx * x + ky * y);
        s += ca[kx][ky] * std::cos(th) + sa[kx][ky] * std::sin(th);
      }
    f[i] = s;
  }
  return f;
}

Tensor flip_grid(const Tensor& channels, std::size_t h, std::size_t w, bool flip_rows, bool flip_cols) {
  require_matrix(channels, "flip_grid");
  if (channels.cols() != h * w) throw ShapeError("flip_grid: channel length does not match the grid");
  Tensor out(channels.shape());
  for (std::size_t c = 0; c < channels.rows(); ++c)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t si = flip_rows ? h - 1 - i : i, sj = flip_cols ? w - 1 - j : j;
        out(c, i * w + j) = channels(c, si * w + sj);
      }
  return out;
}

Sample augment_flip(const Sample& s, Rng& rng) {
  if (!s.on_grid()) throw std::invalid_argument("augment_flip: flips are only defined for grid samples");
  const bool rows = rng.uniform() < 0.5;
  const bool cols = rng.uniform() < 0.5;
  Sample out = s;
  out.inputs = flip_grid(s.inputs, s.grid_h, s.grid_w, rows, cols);
  out.target = flip_grid(s.target, s.grid_h, s.grid_w, rows, cols);
  return out;
}

std::string task_name(Task t) { return t == Task::Darcy ? "darcy" : "annulus_poisson"; }

Task parse_task(const std::string& s) {
  if (s == "darcy") return Task::Darcy;
  if (s == "annulus_poisson") return Task::AnnulusPoisson;
  throw std::invalid_argument("unknown task '" + s + "' (expected darcy or annulus_poisson)");
}

std::uint64_t sample_seed(std::uint64_t seed, bool test, std::size_t k) {
  return derive_seed(seed, (test ? (std::uint64_t{1} << 40) : 0) + k);
}

Sample generate_sample(const DatasetSpec& spec, bool test, std::size_t k, const mesh::TriMesh* annulus) {
  const std::uint64_t s = sample_seed(spec.seed, test, k);
  Sample out;
  if (spec.task == Task::Darcy) {
    const std::size_t g = spec.grid;
    const Tensor a = darcy_coefficient(grf_sample(g, g, spec.grf, s), spec.a_hi, spec.a_lo);
    const Tensor u = darcy_solve_fd(a, Tensor({g, g}, spec.forcing));
    out.inputs = a.reshaped({1, g * g});
    out.target = u.reshaped({1, g * g});
    out.grid_h = out.grid_w = g;
  } else {
    mesh::TriMesh local;
    if (!annulus) {
      local = annulus_for(spec);
      annulus = &local;
    }
    const Tensor f = smooth_forcing(*annulus, s);
    const Tensor u = poisson_fem_solve(*annulus, f);
    out.inputs = f.reshaped({1, f.size()});
    out.target = u.reshaped({1, u.size()});
    out.mesh_hash = annulus->hash();
  }
  return out;
}

namespace {

nlohmann::json spec_json(const DatasetSpec& s) {
  return {{"task", task_name(s.task)},
          {"n_train", s.n_train},
          {"n_test", s.n_test},
          {"seed", s.seed},
          {"grid", s.grid},
          {"grf", {{"alpha", s.grf.alpha}, {"tau", s.grf.tau}, {"length_scale", s.grf.length_scale}}},
          {"a_hi", s.a_hi},
          {"a_lo", s.a_lo},
          {"forcing", s.forcing},
          {"radial", s.radial},
          {"angular", s.angular},
          {"r_inner", s.r_inner},
          {"r_outer", s.r_outer}};
}

DatasetSpec spec_from_json(const nlohmann::json& j) {
  DatasetSpec s;
  s.task = parse_task(j.at("task").get<std::string>());
  s.n_train = j.at("n_train").get<std::size_t>();
  s.n_test = j.at("n_test").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.grid = j.at("grid").get<std::size_t>();
  s.grf.alpha = j.at("grf").at("alpha").get<double>();
  s.grf.tau = j.at("grf").at("tau").get<double>();
  s.grf.length_scale = j.at("grf").at("length_scale").get<double>();
  s.a_hi = j.at("a_hi").get<double>();
  s.a_lo = j.at("a_lo").get<double>();
  s.forcing = j.at("forcing").get<double>();
  s.radial = j.at("radial").get<std::size_t>();
  s.angular = j.at("angular").get<std::size_t>();
  s.r_inner = j.at("r_inner").get<double>();
  s.r_outer = j.at("r_outer").get<double>();
  return s;
}

}  // namespace

Manifest gen_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
    throw std::invalid_argument("gen_dataset: " + out_dir.string() + " is not empty (pass --force to overwrite)");
  if (spec.n_train == 0 || spec.n_test == 0) throw std::invalid_argument("gen_dataset: split sizes must be positive");
  fs::create_directories(out_dir);

  Manifest m;
  m.dir = out_dir;
  m.spec = spec;
  mesh::TriMesh annulus;
  nlohmann::json geometry;
  if (spec.task == Task::AnnulusPoisson) {
    annulus = annulus_for(spec);
    mesh::save_off(annulus, out_dir / "mesh.off");
    m.mesh_file = "mesh.off";
    m.mesh_hash = annulus.hash();
    m.num_points = annulus.num_vertices();
    geometry = {{"kind", "mesh"}, {"file", m.mesh_file}, {"hash", m.mesh_hash}, {"vertices", m.num_points}};
  } else {
    m.num_points = spec.grid * spec.grid;
    geometry = {{"kind", "grid"}, {"h", spec.grid}, {"w", spec.grid}};
  }

  for (bool test : {false, true}) {
    const std::size_t n = test ? spec.n_test : spec.n_train;
    auto& files = test ? m.test_files : m.train_files;
    for (std::size_t k = 0; k < n; ++k) {
      const Sample s = generate_sample(spec, test, k, spec.task == Task::AnnulusPoisson ? &annulus : nullptr);
      Tensor packed({2, m.num_points});
      std::copy(s.inputs.values().begin(), s.inputs.values().end(), packed.values().begin());
      std::copy(s.target.values().begin(), s.target.values().end(), packed.values().begin() + m.num_points);
      files.push_back(split_file(test, k));
      ndbin::save(packed, out_dir / files.back());
    }
  }

  const nlohmann::json j = {{"format", "supra-dataset"},
                            {"version", kManifestVersion},
                            {"task", task_name(spec.task)},
                            {"geometry", geometry},
                            {"counts", {{"train", spec.n_train}, {"test", spec.n_test}}},
                            {"channels", {{"in", m.in_channels}, {"out", m.out_channels}}},
                            {"num_points", m.num_points},
                            {"seed", spec.seed},
                            {"generator", spec_json(spec)},
                            {"files", {{"train", m.train_files}, {"test", m.test_files}}},
                            {"normalization", nullptr}};
  std::ofstream out(out_dir / "manifest.json");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("gen_dataset: cannot write manifest.json");
  return m;
}

Manifest load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("load_manifest: missing " + (dir / "manifest.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_manifest: " + std::string(e.what()));
  }
  if (j.value("format", "") != "supra-dataset" || j.value("version", 0) != kManifestVersion)
    throw std::runtime_error("load_manifest: " + dir.string() + " is not a version 1 dataset");
  Manifest m;
  m.dir = dir;
  m.spec = spec_from_json(j.at("generator"));
  m.train_files = j.at("files").at("train").get<std::vector<std::string>>();
  m.test_files = j.at("files").at("test").get<std::vector<std::string>>();
  m.in_channels = j.at("channels").at("in").get<std::size_t>();
  m.out_channels = j.at("channels").at("out").get<std::size_t>();
  m.num_points = j.at("num_points").get<std::size_t>();
  if (j.at("geometry").at("kind") == "mesh") {
    m.mesh_file = j.at("geometry").at("file").get<std::string>();
    m.mesh_hash = j.at("geometry").at("hash").get<std::string>();
  }
  if (m.train_files.size() != m.spec.n_train || m.test_files.size() != m.spec.n_test)
    throw std::runtime_error("load_manifest: file lists disagree with the recorded counts");
  for (const auto* list : {&m.train_files, &m.test_files})
    for (const auto& f : *list)
      if (!std::filesystem::exists(dir / f)) throw std::runtime_error("load_manifest: missing sample file " + f);
  if (!m.mesh_file.empty()) {
    if (load_mesh(m).hash() != m.mesh_hash) throw std::runtime_error("load_manifest: mesh hash mismatch");
  }
  return m;
}

mesh::TriMesh load_mesh(const Manifest& m) {
  if (m.mesh_file.empty()) throw std::invalid_argument("load_mesh: dataset has grid geometry");
  return mesh::load_off(m.dir / m.mesh_file);
}

std::vector<Sample> load_split(const Manifest& m, bool test) {
  const auto& files = test ? m.test_files : m.train_files;
  std::vector<Sample> out;
  out.reserve(files.size());
  const std::size_t rows = m.in_channels + m.out_channels;
  for (const auto& f : files) {
    const Tensor t = ndbin::load(m.dir / f);
    if (t.shape() != Shape{rows, m.num_points})
      throw std::runtime_error("load_split: " + f + " has shape " + shape_to_string(t.shape()) + ", expected [" +
                               std::to_string(rows) + "x" + std::to_string(m.num_points) + "]");
    Sample s;
    s.inputs = Tensor({m.in_channels, m.num_points},
                      std::vector<double>(t.values().begin(), t.values().begin() + m.in_channels * m.num_points));
    s.target = Tensor({m.out_channels, m.num_points},
                      std::vector<double>(t.values().begin() + m.in_channels * m.num_points, t.values().end()));
    if (m.mesh_file.empty()) {
      s.grid_h = s.grid_w = m.spec.grid;
    } else {
      s.mesh_hash = m.mesh_hash;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace supra::pde
