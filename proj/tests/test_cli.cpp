#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "supra/cli.hpp"
#include "test_util.hpp"

using namespace supra;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "supra");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path root() {
  static const fs::path r = [] {
    const auto p = fs::temp_directory_path() / "supra_test_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return r;
}

fs::path write_config(const std::string& name, const json& j) {
  const auto p = root() / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

json small_darcy(const fs::path& data_dir) {
  return {{"task", "darcy"},
          {"data", {{"dir", data_dir.string()}, {"n_train", 8}, {"n_test", 4}, {"grid", 16}, {"seed", 2}}},
          {"basis", {{"kind", "chebyshev"}, {"mx", 3}, {"my", 3}}},
          {"model", {{"hidden", 8}, {"layers", 1}, {"heads", 2}, {"norm", "instance"}}},
          {"train", {{"epochs", 1}}}};
}

std::string field_of(const json& j) {
  try {
    (void)cli::parse_run_config(j);
  } catch (const cli::ConfigError& e) {
    return e.field;
  }
  return "";
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  CHECK(field_of(json::object()).empty());
  CHECK(field_of({{"colour", 1}}) == "colour");
  CHECK(field_of({{"model", {{"hiden", 8}}}}) == "model.hiden");
  CHECK(field_of({{"train", {{"lr", "fast"}}}}) == "train.lr");
  CHECK(field_of({{"data", {{"grid", -4}}}}) == "data.grid");
  CHECK(field_of({{"model", {{"norm", "batch"}}}}) == "model.norm");
  CHECK(field_of({{"task", "annulus_poisson"}, {"basis", {{"kind", "fourier"}}}}) == "basis.kind");
  CHECK(field_of({{"task", "annulus_poisson"}, {"train", {{"h1_weight", 0.1}}}}) == "train.h1_weight");
  CHECK(field_of({{"basis", {{"kind", "fourier"}, {"mx", 16}, {"my", 1}}}}) == "basis.mx");
  CHECK(field_of({{"model", {{"heads", 3}}}}) == "model.heads");
  CHECK(field_of({{"bench", {{"m", {1000}}}}}) == "bench.m");

  const auto rc = cli::parse_run_config({{"task", "annulus_poisson"}});
  CHECK(rc.basis.kind == basis::Kind::Laplacian);
  CHECK(rc.model.basis_size == 64);
  CHECK(cli::parse_run_config(json::object()).train.h1_weight == 0.1);
}

TEST_CASE("shipped configs parse") {
  for (const char* name : {"darcy.json", "annulus.json", "bench.json"}) {
    INFO(name);
    CHECK_NOTHROW((void)cli::load_run_config(fs::path(SUPRA_CONFIG_DIR) / name));
  }
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == 1);
  CHECK(run({"bogus"}).code == 1);
  CHECK(run({"train", "--out", "x"}).code == 1);
  CHECK(run({"gen-data", "--config", (root() / "missing.json").string(), "--out", "x"}).code == 1);
  const auto cfg = write_config("nodata.json", small_darcy(root() / "no_such_dataset"));
  const Result r = run({"train", "--config", cfg.string(), "--out", (root() / "nodata_run").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("failure") != std::string::npos);
}

TEST_CASE("build-basis reports size and Gram deviation") {
  const auto cfg = write_config("fourier.json", {{"data", {{"grid", 64}}}, {"basis", {{"kind", "fourier"}, {"mx", 6}, {"my", 6}}}});
  const Result r = run({"build-basis", "--config", cfg.string(), "--out", (root() / "basis").string()});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j.at("num_functions") == 144);
  CHECK(j.at("gram_deviation").get<double>() <= 1e-12);
  const basis::Basis b = basis::load_basis(root() / "basis");
  CHECK(b.size() == 144);
}

TEST_CASE("gen-data, train and eval end to end") {
  const fs::path data = root() / "darcy";
  const auto cfg = write_config("darcy.json", small_darcy(data));
  REQUIRE(run({"gen-data", "--config", cfg.string(), "--out", data.string()}).code == 0);
  CHECK(fs::exists(data / "manifest.json"));
  const std::string first = slurp(data / "train_0003.ndb");
  CHECK(run({"gen-data", "--config", cfg.string(), "--out", data.string()}).code == 1);
  REQUIRE(run({"gen-data", "--config", cfg.string(), "--out", data.string(), "--force"}).code == 0);
  CHECK(slurp(data / "train_0003.ndb") == first);

  const Result t1 = run({"train", "--config", cfg.string(), "--out", (root() / "run1").string(), "--seed", "5"});
  REQUIRE(t1.code == 0);
  const Result t2 = run({"train", "--config", cfg.string(), "--out", (root() / "run2").string(), "--seed", "5"});
  REQUIRE(t2.code == 0);
  CHECK(slurp(root() / "run1" / "metrics.csv") == slurp(root() / "run2" / "metrics.csv"));
  CHECK(slurp(root() / "run1" / "metrics.json") == slurp(root() / "run2" / "metrics.json"));
  CHECK(run({"train", "--config", cfg.string(), "--out", (root() / "run1").string()}).code == 1);
  const auto summary = json::parse(slurp(root() / "run1" / "run.json"));
  CHECK(summary.at("diverged") == false);
  CHECK(summary.at("baseline_rel_l2").get<double>() > 0.0);

  const std::string ckpt = (root() / "run1" / "best").string();
  const Result e1 = run({"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--out", (root() / "eval").string()});
  REQUIRE(e1.code == 0);
  const Result e2 = run({"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--out", (root() / "eval").string()});
  CHECK(e1.out == e2.out);
  const auto report = json::parse(slurp(root() / "eval" / "metrics.json"));
  CHECK(report.at("mean_rel_l2").get<double>() == doctest::Approx(summary.at("test_rel_l2").get<double>()).epsilon(1e-14));
  CHECK(run({"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--out", (root() / "eval").string(), "--split",
             "valid"})
            .code == 1);
}

TEST_CASE("annulus dataset and Laplacian basis through the CLI") {
  const fs::path data = root() / "annulus";
  const json j = {{"task", "annulus_poisson"},
                  {"data", {{"dir", data.string()}, {"n_train", 4}, {"n_test", 2}, {"radial", 5}, {"angular", 16}}},
                  {"basis", {{"kind", "laplacian"}, {"size", 16}}},
                  {"model", {{"hidden", 8}, {"layers", 1}, {"heads", 2}}},
                  {"train", {{"epochs", 1}}}};
  const auto cfg = write_config("annulus.json", j);
  REQUIRE(run({"gen-data", "--config", cfg.string(), "--out", data.string()}).code == 0);
  const Result b = run({"build-basis", "--config", cfg.string(), "--out", (root() / "lap").string()});
  REQUIRE(b.code == 0);
  CHECK(json::parse(b.out).at("gram_deviation").get<double>() <= 1e-8);
  CHECK(run({"train", "--config", cfg.string(), "--out", (root() / "annulus_run").string()}).code == 0);
}

TEST_CASE("gradcheck subcommand passes on the default config") {
  const Result r = run({"gradcheck", "--out", (root() / "gc").string()});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out).at("max_rel_error").get<double>() < 1e-5);
  CHECK(fs::exists(root() / "gc" / "gradcheck.json"));
}

TEST_CASE("bench writes the documented csv") {
  const auto cfg = write_config("bench.json", {{"bench", {{"m", {64, 256}}, {"c", {8}}, {"n", {16}}, {"reps", 1}}}});
  const Result r = run({"bench", "--config", cfg.string(), "--out", (root() / "bench").string()});
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(root() / "bench" / "bench.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "impl,M,C,N,wall_seconds,bytes_peak_estimate");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("function-token reference matches a dense softmax oracle") {
  const std::size_t c = 3, m = 7;
  const Tensor u = testing::random_tensor({c, m}, 1);
  const Tensor wq = testing::random_tensor({c, c}, 2), wk = testing::random_tensor({c, c}, 3),
               wv = testing::random_tensor({c, c}, 4);
  auto map = [&](const Tensor& w, std::size_t i, std::size_t r) {
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += w(r, k) * u(k, i);
    return s;
  };
  Tensor expect({c, m});
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> w(m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < c; ++r) s += map(wq, i, r) * map(wk, j, r);
      w[j] = std::exp(s / std::sqrt(double(c)));
      z += w[j];
    }
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t r = 0; r < c; ++r) expect(r, i) += w[j] / z * map(wv, j, r);
  }
  CHECK(max_abs_diff(cli::function_token_attention(u, wq, wk, wv), expect) <= 1e-12);
}
