#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sceneflow/activation.hpp"
#include "sceneflow/tape.hpp"

namespace sceneflow {

/// Coordinate network shape. depth counts hidden layers; the affine output
/// layer (no activation) is implied.
struct MLPConfig {
  int input_dim = 5;
  int hidden_width = 128;
  int depth = 8;
  int output_dim = 3;
  Activation activation = Activation::ReLU;
  double gaussian_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t parameter_count() const;
  int layer_count() const { return depth + 1; }
};

struct MLPParams {
  MLPConfig config;
  std::vector<RowMat> weights;  // [l]: out x in
  std::vector<RowMat> biases;   // [l]: 1 x out
};

/// Gradients (or Adam moments) shaped like MLPParams.
struct MLPGrads {
  std::vector<RowMat> weights;
  std::vector<RowMat> biases;

  static MLPGrads zeros_like(const MLPParams& params);
  void set_zero();
};

/// Weights ~ uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) from the seeded
/// generator, biases zero. Identical seeds give bit-identical parameters.
MLPParams init_params(const MLPConfig& config);

/// Pure inference on a batch of inputs (n x input_dim) -> (n x output_dim).
RowMat forward_batch(const MLPParams& params, const Eigen::Ref<const RowMat>& inputs);

/// Single-input convenience; throws on non-finite input.
Eigen::Vector3d forward(const MLPParams& params, std::span<const double> input);

// ---- tape-backed training path --------------------------------------------

struct ParamNodes {
  struct Layer {
    ad::NodeRef weight, bias;
  };
  std::vector<Layer> layers;
};

/// Registers every layer's parameters as tape leaves.
ParamNodes watch_params(ad::Tape& tape, const MLPParams& params);

/// Records the network on the tape: (affine, activation) x depth, affine out.
ad::NodeRef mlp_apply(ad::Tape& tape, const ParamNodes& nodes, const MLPConfig& config,
                      ad::NodeRef input);

/// forward() with all intermediates recorded on the tape.
ad::NodeRef forward(ad::Tape& tape, const ParamNodes& nodes, const MLPConfig& config,
                    std::span<const double> input);

/// Runs the reverse pass from a scalar loss and gathers parameter gradients.
MLPGrads backward(ad::Tape& tape, ad::NodeRef loss, const ParamNodes& nodes,
                  const MLPParams& params);

/// Accumulates parameter gradients from an already-run backward pass.
void accumulate_grads(const ad::Tape& tape, const ParamNodes& nodes, MLPGrads& grads);

// ---- Adam ------------------------------------------------------------------

struct AdamState {
  std::int64_t step = 0;
  double learning_rate = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  MLPGrads m, v;

  static AdamState create(const MLPParams& params, double learning_rate = 8e-5);
};

/// Standard bias-corrected Adam update, in place. Throws on shape mismatch.
void adam_step(MLPParams& params, const MLPGrads& grads, AdamState& state);

// ---- checkpoint format -------------------------------------------------------

/// Flat binary checkpoint: magic "NPRM", version, config, then all weights
/// and biases in layer order as little-endian f64. Round-trips bit-exactly.
void save_checkpoint(const MLPParams& params, const std::filesystem::path& path);
MLPParams load_checkpoint(const std::filesystem::path& path);

}  // namespace sceneflow
