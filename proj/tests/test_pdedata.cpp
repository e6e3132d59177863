#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "supra/cg.hpp"
#include "supra/fem.hpp"
#include "supra/ndbin.hpp"
#include "supra/pdedata.hpp"
#include "test_util.hpp"

using namespace supra;
using namespace supra::pde;

namespace {

constexpr double kPi = std::numbers::pi;

// Fraction of DFT energy outside the box |k_x|, |k_y| <= cut.
double high_frequency_fraction(const Tensor& f, long cut) {
  const std::size_t h = f.rows(), w = f.cols();
  double hi = 0.0, total = 0.0;
  for (std::size_t kx = 0; kx < h; ++kx)
    for (std::size_t ky = 0; ky < w; ++ky) {
      std::complex<double> s = 0.0;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
          s += f(i, j) * std::polar(1.0, -2.0 * kPi * (double(kx * i) / double(h) + double(ky * j) / double(w)));
      const double e = std::norm(s);
      const long sx = std::min<long>(kx, h - kx), sy = std::min<long>(ky, w - ky);
      total += e;
      if (sx > cut || sy > cut) hi += e;
    }
  return hi / total;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double manufactured_error(std::size_t n) {
  Tensor a({n, n}, 1.0), f({n, n}), exact({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = double(i) / double(n - 1), y = double(j) / double(n - 1);
      exact(i, j) = std::sin(kPi * x) * std::sin(kPi * y);
      f(i, j) = 2.0 * kPi * kPi * exact(i, j);
    }
  return max_abs_diff(darcy_solve_fd(a, f, {FaceMean::Arithmetic, 1e-12}), exact);
}

}  // namespace

TEST_CASE("grf is reproducible and seed dependent") {
  const Tensor a = grf_sample(16, 16, {}, 7);
  CHECK(grf_sample(16, 16, {}, 7) == a);
  CHECK_FALSE(grf_sample(16, 16, {}, 8) == a);
  CHECK(a.all_finite());
  CHECK_THROWS_AS(grf_sample(7, 16, {}, 1), std::invalid_argument);
}

TEST_CASE("grf spatial mean is centred") {
  std::vector<double> means;
  for (std::uint64_t s = 0; s < 64; ++s) {
    const Tensor f = grf_sample(16, 16, {}, 1000 + s);
    double m = 0.0;
    for (double v : f.values()) m += v;
    means.push_back(m / double(f.size()));
  }
  double mu = 0.0, var = 0.0;
  for (double m : means) mu += m;
  mu /= double(means.size());
  for (double m : means) var += (m - mu) * (m - mu);
  const double se = std::sqrt(var / double(means.size() - 1) / double(means.size()));
  CHECK(std::abs(mu) <= 3.0 * se + 1e-12);
}

TEST_CASE("grf high-frequency energy falls with alpha") {
  double prev = 1.0;
  for (double alpha : {2.0, 3.0, 4.0}) {
    double frac = 0.0;
    for (std::uint64_t s = 0; s < 4; ++s) frac += high_frequency_fraction(grf_sample(16, 16, {alpha, 3.0, 1.0}, s), 2);
    INFO("alpha=", alpha, " fraction=", frac / 4.0);
    CHECK(frac / 4.0 < prev);
    prev = frac / 4.0;
  }
}

TEST_CASE("darcy coefficient is two-valued and balanced") {
  const Tensor pos({8, 8}, 0.5);
  const Tensor all_hi = darcy_coefficient(pos);
  for (double v : all_hi.values()) CHECK(v == 12.0);
  double hi = 0.0, total = 0.0;
  for (std::uint64_t s = 0; s < 64; ++s) {
    const Tensor a = darcy_coefficient(grf_sample(16, 16, {}, s), 12.0, 3.0);
    for (double v : a.values()) {
      CHECK((v == 12.0 || v == 3.0));
      hi += v == 12.0;
      total += 1.0;
    }
  }
  CHECK(std::abs(hi / total - 0.5) <= 0.1);
}

TEST_CASE("manufactured solution converges at second order") {
  const double e64 = manufactured_error(64), e128 = manufactured_error(128);
  INFO("e64=", e64, " e128=", e128);
  CHECK(std::abs(e64 / e128 - 4.0) <= 0.6);
}

TEST_CASE("darcy solver basics") {
  const Tensor a = darcy_coefficient(grf_sample(24, 24, {}, 3));
  CHECK(max_abs(darcy_solve_fd(a, Tensor({24, 24}))) == 0.0);

  const Tensor f = testing::random_tensor({24, 24}, 4);
  const Tensor u = darcy_solve_fd(a, f);
  Tensor f2 = f;
  for (double& v : f2.values()) v *= 2.0;
  const Tensor u2 = darcy_solve_fd(a, f2);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(u2[i] - 2.0 * u[i]) <= 1e-9);

  for (std::size_t k = 0; k < 24; ++k) {
    CHECK(u(0, k) == 0.0);
    CHECK(u(23, k) == 0.0);
    CHECK(u(k, 0) == 0.0);
    CHECK(u(k, 23) == 0.0);
  }
  const Tensor r = darcy_apply(a, u);
  double res = 0.0, nf = 0.0;
  for (std::size_t i = 1; i < 23; ++i)
    for (std::size_t j = 1; j < 23; ++j) {
      res += (r(i, j) - f(i, j)) * (r(i, j) - f(i, j));
      nf += f(i, j) * f(i, j);
    }
  CHECK(std::sqrt(res / nf) <= 1e-9);

  const Tensor pos = darcy_solve_fd(a, Tensor({24, 24}, 1.0));
  for (double v : pos.values()) CHECK(v >= 0.0);
}

TEST_CASE("darcy solver rejects bad input") {
  Tensor a({8, 8}, 1.0);
  CHECK_THROWS_AS(darcy_solve_fd(a, Tensor({8, 9})), ShapeError);
  a(3, 3) = 0.0;
  CHECK_THROWS_AS(darcy_solve_fd(a, Tensor({8, 8})), std::invalid_argument);
}

TEST_CASE("cg reports residual history when it runs out of iterations") {
  const Tensor a = darcy_coefficient(grf_sample(16, 16, {}, 2));
  const std::vector<double> b(196, 1.0);
  try {
    const LinearOp op = [&](const std::vector<double>& x, std::vector<double>& y) {
      Tensor u({16, 16});
      for (std::size_t i = 1; i < 15; ++i)
        for (std::size_t j = 1; j < 15; ++j) u(i, j) = x[(i - 1) * 14 + j - 1];
      const Tensor r = darcy_apply(a, u);
      for (std::size_t i = 1; i < 15; ++i)
        for (std::size_t j = 1; j < 15; ++j) y[(i - 1) * 14 + j - 1] = r(i, j);
    };
    (void)conjugate_gradient(op, b, 1e-14, 3);
    FAIL("expected CgError");
  } catch (const CgError& e) {
    CHECK(e.residual_history.size() == 4);  // initial residual plus one per iteration
  }
}

TEST_CASE("flips commute with the darcy solver and are involutions") {
  const std::size_t n = 20;
  const Tensor a = darcy_coefficient(grf_sample(n, n, {}, 11));
  const Tensor f = testing::random_tensor({n, n}, 12, 0.0, 2.0);
  const Tensor u = darcy_solve_fd(a, f);
  for (int mode = 1; mode < 4; ++mode) {
    const bool fr = mode & 1, fc = mode & 2;
    auto flip = [&](const Tensor& t) { return flip_grid(t.reshaped({1, n * n}), n, n, fr, fc).reshaped({n, n}); };
    const Tensor lhs = darcy_solve_fd(flip(a), flip(f));
    CHECK(max_abs_diff(lhs, flip(u)) <= 1e-9);
    CHECK(flip(flip(u)) == u);
    std::vector<double> h0 = u.values(), h1 = flip(u).values();
    std::sort(h0.begin(), h0.end());
    std::sort(h1.begin(), h1.end());
    CHECK(h0 == h1);
  }
}

TEST_CASE("augment flip applies one flip to every channel") {
  Sample s;
  s.grid_h = 4;
  s.grid_w = 5;
  s.inputs = testing::random_tensor({2, 20}, 1);
  s.target = Tensor({1, 20});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 20; ++i) s.target[i] += s.inputs(c, i);
  Rng rng(3);
  int changed = 0;
  for (int t = 0; t < 16; ++t) {
    const Sample o = augment_flip(s, rng);
    for (std::size_t i = 0; i < 20; ++i) CHECK(o.target[i] == o.inputs(0, i) + o.inputs(1, i));
    changed += !(o.inputs == s.inputs);
  }
  CHECK(changed > 0);
  Sample m = s;
  m.grid_h = m.grid_w = 0;
  m.mesh_hash = "abc";
  CHECK_THROWS_AS(augment_flip(m, rng), std::invalid_argument);
}

TEST_CASE("poisson fem solve") {
  const auto mesh = mesh::generate_annulus_mesh(0.25, 1.0, 6, 24);
  CHECK(max_abs(poisson_fem_solve(mesh, Tensor({mesh.num_vertices()}))) == 0.0);
  const Tensor f = smooth_forcing(mesh, 9);
  const Tensor u = poisson_fem_solve(mesh, f);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
    if (mesh.boundary[i]) CHECK(u[i] == 0.0);
  const auto k = fem::assemble_stiffness(mesh);
  const Tensor m = fem::assemble_lumped_mass(mesh);
  double mf = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) mf += u[i] * m[i] * f[i];
  const double ku = k.quadratic_form(u.values());
  CHECK(std::abs(ku - mf) <= 1e-8 * std::abs(ku));
  CHECK_THROWS_AS(poisson_fem_solve(mesh, Tensor({3})), ShapeError);
}

TEST_CASE("annulus refinement changes shrink monotonically") {
  const std::size_t nr[] = {5, 9, 17, 33}, nt[] = {16, 32, 64, 128};
  std::vector<Tensor> sol;
  for (int l = 0; l < 4; ++l) {
    const auto mesh = mesh::generate_annulus_mesh(0.25, 1.0, nr[l], nt[l]);
    sol.push_back(poisson_fem_solve(mesh, smooth_forcing(mesh, 5)));
  }
  std::vector<double> change;
  for (int l = 0; l < 3; ++l) {
    double d = 0.0;
    for (std::size_t i = 0; i < nr[l]; ++i)
      for (std::size_t j = 0; j < nt[l]; ++j)
        d = std::max(d, std::abs(sol[l][i * nt[l] + j] - sol[l + 1][2 * i * nt[l + 1] + 2 * j]));
    change.push_back(d);
  }
  INFO(change[0], " ", change[1], " ", change[2]);
  CHECK(change[1] < change[0]);
  CHECK(change[2] < change[1]);
}

TEST_CASE("sample seeds are disjoint between splits") {
  std::vector<std::uint64_t> train, test;
  for (std::size_t k = 0; k < 500; ++k) {
    train.push_back(sample_seed(42, false, k));
    test.push_back(sample_seed(42, true, k));
  }
  std::sort(train.begin(), train.end());
  for (auto s : test) CHECK_FALSE(std::binary_search(train.begin(), train.end(), s));
  CHECK(task_name(parse_task("annulus_poisson")) == "annulus_poisson");
  CHECK_THROWS_AS(parse_task("navier"), std::invalid_argument);
}

TEST_CASE("gen dataset writes, reloads and reproduces byte for byte") {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "supra_test_pdedata";
  fs::remove_all(root);
  DatasetSpec spec;
  spec.n_train = 6;
  spec.n_test = 3;
  spec.grid = 16;
  spec.seed = 9;
  const Manifest m = gen_dataset(spec, root / "a", false);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) files += e.path().extension() == ".ndb";
  CHECK(files == 9);
  CHECK(fs::exists(root / "a" / "manifest.json"));
  gen_dataset(spec, root / "b", false);
  for (const auto& f : m.train_files) CHECK(read_bytes(root / "a" / f) == read_bytes(root / "b" / f));
  CHECK(read_bytes(root / "a" / "manifest.json") == read_bytes(root / "b" / "manifest.json"));

  CHECK_THROWS_AS(gen_dataset(spec, root / "a", false), std::invalid_argument);
  CHECK_NOTHROW(gen_dataset(spec, root / "a", true));

  const Manifest back = load_manifest(root / "a");
  CHECK(back.train_files == m.train_files);
  const auto train = load_split(back, false);
  REQUIRE(train.size() == 6);
  const Sample direct = generate_sample(spec, false, 4);
  CHECK(train[4].inputs == direct.inputs);
  CHECK(train[4].target == direct.target);
  for (const auto& s : train) {
    CHECK(s.target.all_finite());
    for (double v : s.target.values()) CHECK(v >= 0.0);
  }

  fs::remove(root / "a" / m.test_files[1]);
  CHECK_THROWS_AS(load_manifest(root / "a"), std::runtime_error);

  DatasetSpec ann;
  ann.task = Task::AnnulusPoisson;
  ann.n_train = 2;
  ann.n_test = 1;
  ann.radial = 5;
  ann.angular = 16;
  const Manifest am = gen_dataset(ann, root / "ann", false);
  const Manifest amb = load_manifest(root / "ann");
  CHECK(amb.mesh_hash == load_mesh(amb).hash());
  const auto at = load_split(amb, true);
  CHECK(at[0].inputs.shape() == Shape{1, 80});
  CHECK_FALSE(at[0].on_grid());
  CHECK(am.num_points == 80);
  fs::remove_all(root);
}

TEST_CASE("ndbin round trips every dataset tensor exactly") {
  const Sample s = generate_sample(DatasetSpec{}, true, 0);
  CHECK(ndbin::decode(ndbin::encode(s.inputs)) == s.inputs);
  CHECK(ndbin::decode(ndbin::encode(s.target)) == s.target);
}
