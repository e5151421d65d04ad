#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace speedplan {

struct DenseLayer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;
};

/// Parameters of a fully connected network: ReLU on hidden layers, identity
/// on the output layer.
struct MlpParams {
  std::vector<DenseLayer> layers;

  MlpParams() = default;
  /// All-zero parameters for the given layer sizes (input first).
  explicit MlpParams(std::span<const int> sizes);

  std::vector<int> sizes() const;
  int input_size() const { return static_cast<int>(layers.front().weights.cols()); }
  int output_size() const { return static_cast<int>(layers.back().weights.rows()); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  friend bool operator==(const MlpParams& a, const MlpParams& b);
};

/// Same shape as the parameters it differentiates.
struct Gradients {
  std::vector<DenseLayer> layers;

  static Gradients zeros_like(const MlpParams& params);
  double norm() const;
  void scale(double factor);
  Gradients& operator+=(const Gradients& other);
};

inline const std::vector<int> kDefaultLayerSizes{20, 64, 64, 9};

/// Q-values for one observation. Throws ShapeMismatch on a wrong input size.
Eigen::VectorXd forward(const MlpParams& params, std::span<const double> input);

/// Column-per-sample batch evaluation.
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// Activations of every layer for a batch, kept for backpropagation.
/// activations[0] is the input, activations.back() the network output.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

ForwardTrace trace_batch(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// Gradient of sum over samples of (output . upstream) with respect to every
/// parameter. `upstream` has one column per sample.
Gradients backprop(const MlpParams& params, const ForwardTrace& trace,
                   const Eigen::MatrixXd& upstream);

/// Single-sample gradient of output . upstream.
Gradients backward(const MlpParams& params, std::span<const double> input,
                   std::span<const double> upstream);

struct MomentumState {
  Gradients velocity;
  bool initialized = false;
};

inline constexpr double kMomentum = 0.9;

/// velocity <- momentum * velocity + grads; params <- params - lr * velocity.
void sgd_step(MlpParams& params, const Gradients& grads, double learning_rate,
              MomentumState& state, double momentum = kMomentum);

/// He-uniform weights in +-sqrt(6 / fan_in), zero biases.
MlpParams init_params(std::uint64_t seed,
                      std::span<const int> sizes = kDefaultLayerSizes);

/// Checkpoint layout (little-endian):
///   8 bytes   magic "SPMLP001"
///   uint32    number of layer sizes N
///   N uint32  layer sizes, input first
///   per layer: rows*cols float64 weights in row-major order, then rows
///   float64 biases
std::string serialize_params(const MlpParams& params);
MlpParams deserialize_params(std::string_view bytes);

void save_params(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_params(const std::filesystem::path& path);

}  // namespace speedplan
