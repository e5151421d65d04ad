#include "speedplan/neuralnet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "speedplan/error.hpp"

namespace speedplan {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'P', 'M', 'L', 'P', '0', '0', '1'};

[[noreturn]] void shape_mismatch(const std::string& what) {
  throw Error(ErrorCode::ShapeMismatch, what);
}

void check_input(const MlpParams& params, Eigen::Index rows) {
  if (params.layers.empty()) shape_mismatch("network has no layers");
  if (rows != params.layers.front().weights.cols()) {
    shape_mismatch("input has " + std::to_string(rows) + " components, network expects " +
                   std::to_string(params.layers.front().weights.cols()));
  }
}

}  // namespace

MlpParams::MlpParams(std::span<const int> sizes) {
  if (sizes.size() < 2) shape_mismatch("a network needs at least two layer sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] <= 0 || sizes[i + 1] <= 0) shape_mismatch("layer sizes must be positive");
    layers.push_back({Eigen::MatrixXd::Zero(sizes[i + 1], sizes[i]),
                      Eigen::VectorXd::Zero(sizes[i + 1])});
  }
}

std::vector<int> MlpParams::sizes() const {
  std::vector<int> out;
  if (layers.empty()) return out;
  out.push_back(static_cast<int>(layers.front().weights.cols()));
  for (const DenseLayer& l : layers) out.push_back(static_cast<int>(l.weights.rows()));
  return out;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

bool MlpParams::all_finite() const {
  for (const DenseLayer& l : layers) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const DenseLayer& x = a.layers[i];
    const DenseLayer& y = b.layers[i];
    if (x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols()) {
      return false;
    }
    if (x.weights != y.weights || x.bias != y.bias) return false;
  }
  return true;
}

Gradients Gradients::zeros_like(const MlpParams& params) {
  Gradients g;
  for (const DenseLayer& l : params.layers) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

double Gradients::norm() const {
  double sq = 0.0;
  for (const DenseLayer& l : layers) sq += l.weights.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(sq);
}

void Gradients::scale(double factor) {
  for (DenseLayer& l : layers) {
    l.weights *= factor;
    l.bias *= factor;
  }
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.layers.size() != layers.size()) shape_mismatch("gradient layer count differs");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weights += other.layers[i].weights;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

ForwardTrace trace_batch(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params, inputs.rows());
  ForwardTrace trace;
  trace.activations.reserve(params.layers.size() + 1);
  trace.activations.push_back(inputs);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const DenseLayer& l = params.layers[i];
    Eigen::MatrixXd z = l.weights * trace.activations.back();
    z.colwise() += l.bias;
    if (i + 1 < params.layers.size()) z = z.cwiseMax(0.0);
    trace.activations.push_back(std::move(z));
  }
  return trace;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params, inputs.rows());
  Eigen::MatrixXd a = inputs;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const DenseLayer& l = params.layers[i];
    Eigen::MatrixXd z = l.weights * a;
    z.colwise() += l.bias;
    if (i + 1 < params.layers.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd forward(const MlpParams& params, std::span<const double> input) {
  const Eigen::Map<const Eigen::VectorXd> x(input.data(),
                                            static_cast<Eigen::Index>(input.size()));
  return forward_batch(params, x);
}

Gradients backprop(const MlpParams& params, const ForwardTrace& trace,
                   const Eigen::MatrixXd& upstream) {
  const std::size_t n = params.layers.size();
  if (trace.activations.size() != n + 1) shape_mismatch("trace does not match network");
  if (upstream.rows() != params.layers.back().weights.rows() ||
      upstream.cols() != trace.output().cols()) {
    shape_mismatch("upstream gradient has shape " + std::to_string(upstream.rows()) + "x" +
                   std::to_string(upstream.cols()) + ", expected " +
                   std::to_string(params.layers.back().weights.rows()) + "x" +
                   std::to_string(trace.output().cols()));
  }
  Gradients grads;
  grads.layers.resize(n);
  Eigen::MatrixXd delta = upstream;  // d(objective)/d(pre-activation) of layer i
  for (std::size_t i = n; i-- > 0;) {
    const Eigen::MatrixXd& input = trace.activations[i];
    grads.layers[i].weights = delta * input.transpose();
    grads.layers[i].bias = delta.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd back = params.layers[i].weights.transpose() * delta;
    // ReLU gate: the stored activation is positive exactly where the unit fired.
    delta = back.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
  }
  return grads;
}

Gradients backward(const MlpParams& params, std::span<const double> input,
                   std::span<const double> upstream) {
  const Eigen::Map<const Eigen::VectorXd> x(input.data(),
                                            static_cast<Eigen::Index>(input.size()));
  const Eigen::Map<const Eigen::VectorXd> u(upstream.data(),
                                            static_cast<Eigen::Index>(upstream.size()));
  return backprop(params, trace_batch(params, x), u);
}

void sgd_step(MlpParams& params, const Gradients& grads, double learning_rate,
              MomentumState& state, double momentum) {
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  }
  if (grads.layers.size() != params.layers.size()) {
    shape_mismatch("gradients do not match parameters");
  }
  if (!state.initialized) {
    state.velocity = Gradients::zeros_like(params);
    state.initialized = true;
  }
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    DenseLayer& v = state.velocity.layers[i];
    v.weights = momentum * v.weights + grads.layers[i].weights;
    v.bias = momentum * v.bias + grads.layers[i].bias;
    params.layers[i].weights -= learning_rate * v.weights;
    params.layers[i].bias -= learning_rate * v.bias;
  }
}

MlpParams init_params(std::uint64_t seed, std::span<const int> sizes) {
  MlpParams params(sizes);
  std::mt19937_64 rng(seed);
  for (DenseLayer& l : params.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weights.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = dist(rng);
    }
  }
  return params;
}

namespace {

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view& in) {
  if (in.size() < sizeof(T)) shape_mismatch("checkpoint is truncated");
  T value;
  std::memcpy(&value, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return value;
}

}  // namespace

std::string serialize_params(const MlpParams& params) {
  std::string out(kMagic, sizeof(kMagic));
  const std::vector<int> sizes = params.sizes();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) put<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  for (const DenseLayer& l : params.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put<double>(out, l.weights(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put<double>(out, l.bias(r));
  }
  return out;
}

MlpParams deserialize_params(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    shape_mismatch("not a network checkpoint (bad magic)");
  }
  bytes.remove_prefix(sizeof(kMagic));
  const auto count = take<std::uint32_t>(bytes);
  if (count < 2 || count > 64) shape_mismatch("implausible layer count in checkpoint");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < count; ++i) {
    sizes.push_back(static_cast<int>(take<std::uint32_t>(bytes)));
  }
  MlpParams params(sizes);
  for (DenseLayer& l : params.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = take<double>(bytes);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = take<double>(bytes);
  }
  if (!bytes.empty()) shape_mismatch("checkpoint has trailing bytes");
  return params;
}

void save_params(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const std::string bytes = serialize_params(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path.string());
}

MlpParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_params(buf.str());
}

}  // namespace speedplan
