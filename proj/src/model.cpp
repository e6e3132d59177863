#include "supra/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "supra/ndbin.hpp"
#include "supra/rng.hpp"

namespace supra::model {

namespace {

constexpr int kFormatVersion = 1;

std::string blk(std::size_t l, const char* suffix) { return "blk" + std::to_string(l) + "." + suffix; }

std::string head_name(std::size_t l, std::size_t h, const char* w) {
  return "blk" + std::to_string(l) + ".head" + std::to_string(h) + "." + w;
}

// Shapes in params() order; the single source for init, load and counting.
std::vector<std::pair<std::string, Shape>> layout(const ModelConfig& c) {
  const std::size_t dh = c.basis_size / c.heads, rc = c.mlp_ratio * c.hidden;
  std::vector<std::pair<std::string, Shape>> out;
  out.push_back({"lift.w", {c.hidden, c.lift_inputs()}});
  out.push_back({"lift.b", {c.hidden}});
  for (std::size_t l = 0; l < c.layers; ++l) {
    if (c.norm != Norm::None) {
      const std::size_t n1 = c.norm == Norm::Layer ? c.basis_size : c.hidden;
      out.push_back({blk(l, "norm1.gain"), {n1}});
      out.push_back({blk(l, "norm1.bias"), {n1}});
    }
    for (std::size_t h = 0; h < c.heads; ++h)
      for (const char* w : {"wq", "wk", "wv"}) out.push_back({head_name(l, h, w), {dh, dh}});
    if (c.norm != Norm::None) {
      out.push_back({blk(l, "norm2.gain"), {c.hidden}});
      out.push_back({blk(l, "norm2.bias"), {c.hidden}});
    }
    out.push_back({blk(l, "mlp.w1"), {rc, c.hidden}});
    out.push_back({blk(l, "mlp.b1"), {rc}});
    out.push_back({blk(l, "mlp.w2"), {c.hidden, rc}});
    out.push_back({blk(l, "mlp.b2"), {c.hidden}});
  }
  out.push_back({"head.w", {c.out_channels, c.hidden}});
  out.push_back({"head.b", {c.out_channels}});
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

nlohmann::json config_json(const ModelConfig& c) {
  return {{"in_channels", c.in_channels}, {"out_channels", c.out_channels}, {"hidden", c.hidden},
          {"layers", c.layers},           {"basis_size", c.basis_size},     {"heads", c.heads},
          {"norm", norm_name(c.norm)},    {"mlp_ratio", c.mlp_ratio},       {"use_coords", c.use_coords},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.out_channels = j.at("out_channels").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.basis_size = j.at("basis_size").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.norm = parse_norm(j.at("norm").get<std::string>());
  c.mlp_ratio = j.at("mlp_ratio").get<std::size_t>();
  c.use_coords = j.at("use_coords").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string norm_name(Norm n) {
  switch (n) {
    case Norm::Layer: return "layer";
    case Norm::Instance: return "instance";
    case Norm::None: return "none";
  }
  return "?";
}

Norm parse_norm(const std::string& s) {
  if (s == "layer") return Norm::Layer;
  if (s == "instance") return Norm::Instance;
  if (s == "none") return Norm::None;
  throw std::invalid_argument("unknown norm '" + s + "' (expected layer, instance or none)");
}

void ModelConfig::validate() const {
  if (in_channels == 0 || out_channels == 0) throw std::invalid_argument("model: channel counts must be positive");
  if (heads == 0 || hidden < heads) throw std::invalid_argument("model: need hidden >= heads >= 1");
  if (basis_size == 0 || basis_size % heads != 0)
    throw std::invalid_argument("model: basis size " + std::to_string(basis_size) + " is not divisible by " +
                                std::to_string(heads) + " heads");
  if (layers == 0) throw std::invalid_argument("model: need at least one layer");
  if (mlp_ratio == 0) throw std::invalid_argument("model: mlp ratio must be positive");
}

std::size_t expected_param_count(const ModelConfig& c) {
  const std::size_t C = c.hidden, N = c.basis_size, r = c.mlp_ratio, dh = N / c.heads;
  const std::size_t norm1 = c.norm == Norm::Layer ? 2 * N : c.norm == Norm::Instance ? 2 * C : 0;
  const std::size_t norm2 = c.norm == Norm::None ? 0 : 2 * C;
  const std::size_t per_layer = norm1 + 3 * c.heads * dh * dh + norm2 + (r * C * C + r * C) + (C * r * C + C);
  return C * c.lift_inputs() + C + c.layers * per_layer + c.out_channels * C + c.out_channels;
}

SupraOperator::SupraOperator(ModelConfig cfg, std::string basis_fingerprint)
    : cfg_(cfg), basis_fp_(std::move(basis_fingerprint)) {
  cfg_.validate();
  for (auto& [name, shape] : layout(cfg_)) params_.push_back({name, Tensor(shape)});
}

std::size_t SupraOperator::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Tensor& SupraOperator::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw std::out_of_range("model: no parameter named " + name);
}

Tensor& SupraOperator::param(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const SupraOperator&>(*this).param(name));
}

void SupraOperator::check_basis(const basis::Basis& b) const {
  if (b.fingerprint() != basis_fp_)
    throw std::invalid_argument("model was built for basis " + basis_fp_ + " but was given basis " + b.fingerprint());
  if (b.size() != cfg_.basis_size)
    throw std::invalid_argument("model expects " + std::to_string(cfg_.basis_size) + " basis functions, basis has " +
                                std::to_string(b.size()));
}

Tensor lift_input(const ModelConfig& cfg, const Tensor& inputs, const basis::Basis& b) {
  require_matrix(inputs, "lift_input");
  const std::size_t m = b.num_points();
  if (inputs.rows() != cfg.in_channels || inputs.cols() != m)
    throw ShapeError("model: inputs " + shape_to_string(inputs.shape()) + " do not match [" +
                     std::to_string(cfg.in_channels) + "x" + std::to_string(m) + "]");
  if (!cfg.use_coords) return inputs;
  Tensor x({cfg.in_channels + 2, m});
  std::copy(inputs.values().begin(), inputs.values().end(), x.values().begin());
  for (std::size_t i = 0; i < m; ++i) {
    x(cfg.in_channels, i) = b.coords(i, 0);
    x(cfg.in_channels + 1, i) = b.coords(i, 1);
  }
  return x;
}

ad::Var lift(ad::Var w, ad::Var bias, const Tensor& lift_in) {
  return ad::add_row_bias(ad::matmul(w, w.tape->constant(lift_in)), bias);
}

ad::Var SupraOperator::forward(ad::Tape& tape, std::span<const ad::Var> p, const Tensor& inputs,
                               const basis::Basis& b) const {
  check_basis(b);
  if (p.size() != params_.size())
    throw std::invalid_argument("model: expected " + std::to_string(params_.size()) + " parameter variables, got " +
                                std::to_string(p.size()));
  const ad::Var psi = tape.constant(b.psi);
  const ad::Var phi = tape.constant(b.phi);

  std::size_t k = 0;
  ad::Var h = lift(p[0], p[1], lift_input(cfg_, inputs, b));
  k = 2;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    ad::Var coords;
    if (cfg_.norm == Norm::Instance) {
      coords = ad::matmul(ad::instance_norm(h, p[k], p[k + 1]), psi);
      k += 2;
    } else if (cfg_.norm == Norm::Layer) {
      coords = ad::layer_norm(ad::matmul(h, psi), p[k], p[k + 1]);
      k += 2;
    } else {
      coords = ad::matmul(h, psi);
    }
    std::vector<attn::HeadVars> heads;
    for (std::size_t hh = 0; hh < cfg_.heads; ++hh, k += 3) heads.push_back({p[k], p[k + 1], p[k + 2]});
    const ad::Var u1 = ad::add(h, ad::matmul_nt(attn::supra_attention(coords, heads), phi));

    ad::Var n2 = u1;
    if (cfg_.norm == Norm::Instance) {
      n2 = ad::instance_norm(u1, p[k], p[k + 1]);
      k += 2;
    } else if (cfg_.norm == Norm::Layer) {
      n2 = ad::transpose(ad::layer_norm(ad::transpose(u1), p[k], p[k + 1]));
      k += 2;
    }
    const ad::Var a = ad::gelu(ad::add_row_bias(ad::matmul(p[k], n2), p[k + 1]));
    h = ad::add(u1, ad::add_row_bias(ad::matmul(p[k + 2], a), p[k + 3]));
    k += 4;
  }
  return ad::add_row_bias(ad::matmul(p[k], h), p[k + 1]);
}

Tensor SupraOperator::predict(const Tensor& inputs, const basis::Basis& b) const {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) vars.push_back(tape.constant(p.value));
  return forward(tape, vars, inputs, b).value();
}

SupraOperator init_params(const ModelConfig& cfg, const basis::Basis& b) {
  SupraOperator m(cfg, b.fingerprint());
  m.check_basis(b);
  Rng rng(cfg.seed);
  // Biases share the fan-in of the weight that precedes them.
  std::size_t fan_in = 1;
  for (auto& p : m.params()) {
    if (ends_with(p.name, ".gain")) {
      p.value.fill(1.0);
      continue;
    }
    if (p.name.find(".norm") != std::string::npos) continue;  // norm bias stays 0
    if (p.value.ndim() == 2) fan_in = p.value.cols();
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : p.value.values()) v = rng.uniform(-bound, bound);
  }
  return m;
}

void SupraOperator::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir / "params");
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : params_) {
    ndbin::save(p.value, dir / "params" / (p.name + ".ndb"));
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  }
  const nlohmann::json j = {{"format", "supra-model"},
                            {"version", kFormatVersion},
                            {"config", config_json(cfg_)},
                            {"basis_fingerprint", basis_fp_},
                            {"params", params}};
  std::ofstream out(dir / "config.json");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("model: cannot write " + (dir / "config.json").string());
}

SupraOperator SupraOperator::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw std::runtime_error("model: missing " + (dir / "config.json").string());
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "supra-model" || j.value("version", 0) != kFormatVersion)
    throw std::runtime_error("model: " + dir.string() + " is not a version " + std::to_string(kFormatVersion) +
                             " model archive");
  SupraOperator m(config_from_json(j.at("config")), j.at("basis_fingerprint").get<std::string>());
  const auto& listed = j.at("params");
  if (listed.size() != m.params_.size())
    throw std::runtime_error("model: archive lists " + std::to_string(listed.size()) + " tensors, config implies " +
                             std::to_string(m.params_.size()));
  for (std::size_t i = 0; i < m.params_.size(); ++i) {
    auto& p = m.params_[i];
    if (listed[i].at("name").get<std::string>() != p.name)
      throw std::runtime_error("model: archive tensor " + std::to_string(i) + " is " +
                               listed[i].at("name").get<std::string>() + ", expected " + p.name);
    Tensor t = ndbin::load(dir / "params" / (p.name + ".ndb"));
    if (t.shape() != p.value.shape())
      throw std::runtime_error("model: tensor " + p.name + " has shape " + shape_to_string(t.shape()) + ", expected " +
                               shape_to_string(p.value.shape()));
    if (!t.all_finite()) throw std::runtime_error("model: tensor " + p.name + " holds non-finite values");
    p.value = std::move(t);
  }
  return m;
}

}  // namespace supra::model
