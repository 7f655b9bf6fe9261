#pragma once

#include "rdlda/types.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace rdlda {

enum class Mode { kTrain, kEval };

/// Channels-first tensor shape; dense layers use channels = features,
/// height = width = 1. Batches are stored as n x flat() row-major matrices.
struct TensorShape {
  int channels = 0;
  int height = 1;
  int width = 1;
  int flat() const { return channels * height * width; }
  bool operator==(const TensorShape&) const = default;
};

/// One trainable tensor with its gradient and optimizer velocity.
struct Param {
  Matrix value;
  Matrix grad;
  Matrix velocity;

  explicit Param(Matrix v)
      : value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())),
        velocity(Matrix::Zero(value.rows(), value.cols())) {}
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual TensorShape output_shape(const TensorShape& in) const = 0;
  /// rng may be null in eval mode; train-mode dropout requires it.
  virtual Matrix forward(const Matrix& x, Mode mode, std::mt19937_64* rng) = 0;
  virtual Matrix backward(const Matrix& grad_out) = 0;
  virtual std::vector<Param*> params() { return {}; }
  /// Non-trainable state that still belongs in a checkpoint
  /// (batch-norm running statistics).
  virtual std::vector<Matrix*> state() { return {}; }
  /// Integer configuration for the checkpoint manifest.
  virtual std::vector<int> manifest_ints() const { return {}; }
  virtual std::vector<double> manifest_doubles() const { return {}; }
};

struct TrainConfig {
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int lr_halving_period = 25;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

/// Feed-forward network with hand-written backprop. Single-writer: one
/// trainer mutates parameters; forward in eval mode on a settled model is
/// side-effect free apart from nothing.
class Model {
 public:
  Model() = default;
  explicit Model(TensorShape input) : input_shape_(input) {}

  Model& add(std::unique_ptr<Layer> layer);

  const TensorShape& input_shape() const { return input_shape_; }
  TensorShape output_shape() const;
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

  Matrix forward(const Matrix& batch, Mode mode, std::mt19937_64* rng = nullptr);
  /// Backward through the cache of the latest train-mode forward; throws on
  /// a stale or missing cache.
  void backward(const Matrix& grad_outputs);
  void zero_grad();

  std::vector<Param*> params();
  std::vector<const Param*> params() const;

 private:
  TensorShape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  bool cache_valid_ = false;
};

/// base_lr * 0.5^floor(epoch / period).
double lr_at(int epoch, const TrainConfig& cfg);

/// One Nesterov step over every parameter of the model:
/// g = grad + weight_decay * w; v = mu v - lr g; w += mu v - lr g.
void sgd_nesterov_step(Model& model, const TrainConfig& cfg, int epoch);

// ---- layer constructors ----
std::unique_ptr<Layer> make_dense(int in, int out, std::mt19937_64& rng);
std::unique_ptr<Layer> make_conv(const TensorShape& in, int out_channels,
                                 int kernel, int pad, std::mt19937_64& rng);
std::unique_ptr<Layer> make_batchnorm(const TensorShape& in);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_tanh();
std::unique_ptr<Layer> make_sigmoid();
std::unique_ptr<Layer> make_dropout(double rate);
std::unique_ptr<Layer> make_maxpool(const TensorShape& in);
std::unique_ptr<Layer> make_global_avg_pool(const TensorShape& in);

// ---- presets ----
/// Dense 256-ReLU x2 followed by a linear layer of width out_dim.
Model build_mlp(int in_dim, int out_dim, std::uint64_t seed);
/// DorferNet block structure with channel counts divided by 8, ending in
/// Conv-out-BN-ReLU and global average pooling.
Model build_dorfernet_mini(const TensorShape& input, int out_dim,
                           std::uint64_t seed);
Model build_preset(const std::string& preset, const TensorShape& input,
                   int out_dim, std::uint64_t seed);

// ---- checkpoint io: magic "RDLDA1", layer manifest, little-endian f32
// tensors, trailing CRC32 of everything after the magic ----
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace rdlda
