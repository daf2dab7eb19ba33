#include "sceneflow/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "binary_io.hpp"
#include "sceneflow/rng.hpp"

namespace sceneflow {

void MLPConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("MLPConfig: dims must be >= 1");
  if (depth < 1 || hidden_width < 1)
    throw std::invalid_argument("MLPConfig: depth and width must be >= 1");
  if (!(gaussian_sigma > 0.0)) throw std::invalid_argument("MLPConfig: gaussian_sigma must be > 0");
}

std::size_t MLPConfig::parameter_count() const {
  std::size_t count = static_cast<std::size_t>(hidden_width) * input_dim + hidden_width;
  count += static_cast<std::size_t>(depth - 1) * (static_cast<std::size_t>(hidden_width) * hidden_width + hidden_width);
  count += static_cast<std::size_t>(output_dim) * hidden_width + output_dim;
  return count;
}

MLPParams init_params(const MLPConfig& config) {
  config.validate();
  MLPParams params;
  params.config = config;
  Rng rng(config.seed);
  for (int l = 0; l < config.layer_count(); ++l) {
    const int in = l == 0 ? config.input_dim : config.hidden_width;
    const int out = l == config.depth ? config.output_dim : config.hidden_width;
    RowMat w(out, in);
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
    params.weights.push_back(std::move(w));
    params.biases.push_back(RowMat::Zero(1, out));
  }
  return params;
}

MLPGrads MLPGrads::zeros_like(const MLPParams& params) {
  MLPGrads g;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.push_back(RowMat::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(RowMat::Zero(1, params.biases[l].cols()));
  }
  return g;
}

void MLPGrads::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

RowMat forward_batch(const MLPParams& params, const Eigen::Ref<const RowMat>& inputs) {
  const MLPConfig& cfg = params.config;
  if (inputs.cols() != cfg.input_dim) throw std::invalid_argument("forward: input dim mismatch");
  RowMat x = inputs;
  RowMat y;
  for (int l = 0; l < cfg.layer_count(); ++l) {
    y.noalias() = x * params.weights[static_cast<std::size_t>(l)].transpose();
    y.rowwise() += params.biases[static_cast<std::size_t>(l)].row(0);
    if (l < cfg.depth) {
      double* d = y.data();
      const std::int64_t count = static_cast<std::int64_t>(y.size());
      switch (cfg.activation) {
        case Activation::ReLU:
          for (std::int64_t i = 0; i < count; ++i) d[i] = d[i] > 0.0 ? d[i] : 0.0;
          break;
        case Activation::SinC:
          for (std::int64_t i = 0; i < count; ++i) d[i] = sinc_value(d[i]);
          break;
        case Activation::Gaussian: {
          const double inv2s2 = -1.0 / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma);
          for (std::int64_t i = 0; i < count; ++i) d[i] = std::exp(d[i] * d[i] * inv2s2);
          break;
        }
      }
    }
    std::swap(x, y);
  }
  return x;
}

Eigen::Vector3d forward(const MLPParams& params, std::span<const double> input) {
  if (static_cast<int>(input.size()) != params.config.input_dim)
    throw std::invalid_argument("forward: input dim mismatch");
  for (double v : input)
    if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");
  RowMat x(1, params.config.input_dim);
  for (int i = 0; i < params.config.input_dim; ++i) x(0, i) = input[static_cast<std::size_t>(i)];
  RowMat out = forward_batch(params, x);
  return {out(0, 0), out(0, 1), out(0, 2)};
}

ParamNodes watch_params(ad::Tape& tape, const MLPParams& params) {
  ParamNodes nodes;
  for (std::size_t l = 0; l < params.weights.size(); ++l)
    nodes.layers.push_back({tape.parameter(params.weights[l]), tape.parameter(params.biases[l])});
  return nodes;
}

ad::NodeRef mlp_apply(ad::Tape& tape, const ParamNodes& nodes, const MLPConfig& config,
                      ad::NodeRef input) {
  ad::NodeRef x = input;
  for (int l = 0; l < config.layer_count(); ++l) {
    const auto& layer = nodes.layers[static_cast<std::size_t>(l)];
    if (l < config.depth && config.activation == Activation::ReLU) {
      x = tape.affine_relu(x, layer.weight, layer.bias);
    } else {
      x = tape.affine(x, layer.weight, layer.bias);
      if (l < config.depth) x = tape.activation(x, config.activation, config.gaussian_sigma);
    }
  }
  return x;
}

ad::NodeRef forward(ad::Tape& tape, const ParamNodes& nodes, const MLPConfig& config,
                    std::span<const double> input) {
  if (static_cast<int>(input.size()) != config.input_dim)
    throw std::invalid_argument("forward: input dim mismatch");
  RowMat x(1, config.input_dim);
  for (int i = 0; i < config.input_dim; ++i) {
    if (!std::isfinite(input[static_cast<std::size_t>(i)]))
      throw std::invalid_argument("forward: non-finite input");
    x(0, i) = input[static_cast<std::size_t>(i)];
  }
  return mlp_apply(tape, nodes, config, tape.constant(x));
}

void accumulate_grads(const ad::Tape& tape, const ParamNodes& nodes, MLPGrads& grads) {
  for (std::size_t l = 0; l < nodes.layers.size(); ++l) {
    grads.weights[l] += tape.grad(nodes.layers[l].weight);
    grads.biases[l] += tape.grad(nodes.layers[l].bias);
  }
}

MLPGrads backward(ad::Tape& tape, ad::NodeRef loss, const ParamNodes& nodes,
                  const MLPParams& params) {
  tape.backward(loss);
  MLPGrads grads = MLPGrads::zeros_like(params);
  accumulate_grads(tape, nodes, grads);
  return grads;
}

AdamState AdamState::create(const MLPParams& params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.m = MLPGrads::zeros_like(params);
  s.v = MLPGrads::zeros_like(params);
  return s;
}

namespace {
void adam_update(Eigen::Ref<RowMat> p, const Eigen::Ref<const RowMat>& g, Eigen::Ref<RowMat> m,
                 Eigen::Ref<RowMat> v, const AdamState& s, double c1, double c2) {
  if (p.rows() != g.rows() || p.cols() != g.cols())
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  p -= (s.learning_rate * (m / c1).array() / ((v / c2).array().sqrt() + s.epsilon)).matrix();
}
}  // namespace

void adam_step(MLPParams& params, const MLPGrads& grads, AdamState& state) {
  if (grads.weights.size() != params.weights.size())
    throw std::invalid_argument("adam_step: layer count mismatch");
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    adam_update(params.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l], state,
                c1, c2);
    adam_update(params.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l], state, c1,
                c2);
  }
}

// ---- checkpoint I/O ---------------------------------------------------------

namespace {
constexpr char kMagic[5] = "NPRM";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const MLPParams& params, const std::filesystem::path& path) {
  auto os = detail::open_output(path);
  detail::write_magic(os, kMagic);
  detail::write_le<std::uint32_t>(os, kVersion);
  const MLPConfig& c = params.config;
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.input_dim));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.hidden_width));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.depth));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.output_dim));
  detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(c.activation));
  detail::write_le<double>(os, c.gaussian_sigma);
  detail::write_le<std::uint64_t>(os, c.seed);
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const RowMat& w = params.weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) detail::write_le<double>(os, w.data()[i]);
    const RowMat& b = params.biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) detail::write_le<double>(os, b.data()[i]);
  }
  if (!os) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

MLPParams load_checkpoint(const std::filesystem::path& path) {
  auto is = detail::open_input(path);
  detail::expect_magic(is, kMagic, path.string());
  const auto version = detail::read_le<std::uint32_t>(is, "version");
  if (version != kVersion)
    throw DataError("unsupported checkpoint version in '" + path.string() + "'");
  MLPConfig c;
  c.input_dim = static_cast<int>(detail::read_le<std::uint32_t>(is, "input_dim"));
  c.hidden_width = static_cast<int>(detail::read_le<std::uint32_t>(is, "hidden_width"));
  c.depth = static_cast<int>(detail::read_le<std::uint32_t>(is, "depth"));
  c.output_dim = static_cast<int>(detail::read_le<std::uint32_t>(is, "output_dim"));
  c.activation = static_cast<Activation>(detail::read_le<std::uint8_t>(is, "activation"));
  c.gaussian_sigma = detail::read_le<double>(is, "gaussian_sigma");
  c.seed = detail::read_le<std::uint64_t>(is, "seed");
  c.validate();

  MLPParams params;
  params.config = c;
  for (int l = 0; l < c.layer_count(); ++l) {
    const int in = l == 0 ? c.input_dim : c.hidden_width;
    const int out = l == c.depth ? c.output_dim : c.hidden_width;
    RowMat w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = detail::read_le<double>(is, "weight");
    RowMat b(1, out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = detail::read_le<double>(is, "bias");
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  return params;
}

}  // namespace sceneflow
