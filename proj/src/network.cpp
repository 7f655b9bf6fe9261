#include "rdlda/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rdlda {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index cols, int fan_in,
                      std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

class DenseLayer final : public Layer {
 public:
  DenseLayer(int in, int out, std::mt19937_64& rng)
      : in_(in),
        out_(out),
        weight_(fan_in_uniform(out, in, in, rng)),
        bias_(Matrix::Zero(out, 1)) {}

  std::string kind() const override { return "dense"; }
  TensorShape output_shape(const TensorShape& in) const override {
    if (in.flat() != in_)
      throw std::invalid_argument("dense: input width mismatch");
    return {out_, 1, 1};
  }
  Matrix forward(const Matrix& x, Mode, std::mt19937_64*) override {
    input_ = x;
    return (x * weight_.value.transpose()).rowwise() +
           bias_.value.col(0).transpose();
  }
  Matrix backward(const Matrix& grad_out) override {
    weight_.grad.noalias() += grad_out.transpose() * input_;
    bias_.grad.col(0) += grad_out.colwise().sum().transpose();
    return grad_out * weight_.value;
  }
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::vector<int> manifest_ints() const override { return {in_, out_}; }

 private:
  int in_, out_;
  Param weight_;  // out x in
  Param bias_;    // out x 1
  Matrix input_;
};

class ConvLayer final : public Layer {
 public:
  ConvLayer(const TensorShape& in, int out_channels, int kernel, int pad,
            std::mt19937_64& rng)
      : in_(in),
        out_channels_(out_channels),
        kernel_(kernel),
        pad_(pad),
        weight_(fan_in_uniform(out_channels,
                               in.channels * kernel * kernel,
                               in.channels * kernel * kernel, rng)),
        bias_(Matrix::Zero(out_channels, 1)) {
    out_h_ = in.height + 2 * pad - kernel + 1;
    out_w_ = in.width + 2 * pad - kernel + 1;
    if (out_h_ <= 0 || out_w_ <= 0)
      throw std::invalid_argument("conv: kernel larger than padded input");
  }

  std::string kind() const override { return "conv"; }
  TensorShape output_shape(const TensorShape& in) const override {
    if (!(in == in_)) throw std::invalid_argument("conv: shape mismatch");
    return {out_channels_, out_h_, out_w_};
  }

  Matrix forward(const Matrix& x, Mode, std::mt19937_64*) override {
    input_ = x;
    const auto n = x.rows();
    cols_.resize(n);
    Matrix out(n, out_channels_ * out_h_ * out_w_);
    for (Eigen::Index s = 0; s < n; ++s) {
      im2col(x, s, cols_[s]);
      // (out_ch x K) * (K x P) -> out_ch x P, P = out_h * out_w
      Matrix res = weight_.value * cols_[s];
      res.colwise() += bias_.value.col(0);
      for (int c = 0; c < out_channels_; ++c)
        for (int p = 0; p < out_h_ * out_w_; ++p)
          out(s, c * out_h_ * out_w_ + p) = res(c, p);
    }
    return out;
  }

  Matrix backward(const Matrix& grad_out) override {
    const auto n = input_.rows();
    Matrix grad_in = Matrix::Zero(n, in_.flat());
    const int patch = out_h_ * out_w_;
    for (Eigen::Index s = 0; s < n; ++s) {
      Matrix g(out_channels_, patch);
      for (int c = 0; c < out_channels_; ++c)
        for (int p = 0; p < patch; ++p) g(c, p) = grad_out(s, c * patch + p);
      weight_.grad.noalias() += g * cols_[s].transpose();
      bias_.grad.col(0) += g.rowwise().sum();
      Matrix gcol = weight_.value.transpose() * g;  // K x P
      col2im(gcol, grad_in, s);
    }
    return grad_in;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::vector<int> manifest_ints() const override {
    return {in_.channels, in_.height, in_.width, out_channels_, kernel_, pad_};
  }

 private:
  void im2col(const Matrix& x, Eigen::Index s, Matrix& col) const {
    const int hw = in_.height * in_.width;
    col = Matrix::Zero(in_.channels * kernel_ * kernel_, out_h_ * out_w_);
    for (int oy = 0; oy < out_h_; ++oy) {
      for (int ox = 0; ox < out_w_; ++ox) {
        const int p = oy * out_w_ + ox;
        for (int c = 0; c < in_.channels; ++c) {
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy + ky - pad_;
            if (iy < 0 || iy >= in_.height) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox + kx - pad_;
              if (ix < 0 || ix >= in_.width) continue;
              col((c * kernel_ + ky) * kernel_ + kx, p) =
                  x(s, c * hw + iy * in_.width + ix);
            }
          }
        }
      }
    }
  }

  void col2im(const Matrix& gcol, Matrix& gx, Eigen::Index s) const {
    const int hw = in_.height * in_.width;
    for (int oy = 0; oy < out_h_; ++oy) {
      for (int ox = 0; ox < out_w_; ++ox) {
        const int p = oy * out_w_ + ox;
        for (int c = 0; c < in_.channels; ++c) {
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy + ky - pad_;
            if (iy < 0 || iy >= in_.height) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox + kx - pad_;
              if (ix < 0 || ix >= in_.width) continue;
              gx(s, c * hw + iy * in_.width + ix) +=
                  gcol((c * kernel_ + ky) * kernel_ + kx, p);
            }
          }
        }
      }
    }
  }

  TensorShape in_;
  int out_channels_, kernel_, pad_, out_h_, out_w_;
  Param weight_;  // out_ch x (in_ch * k * k)
  Param bias_;
  Matrix input_;
  std::vector<Matrix> cols_;
};

class BatchNormLayer final : public Layer {
 public:
  explicit BatchNormLayer(const TensorShape& in)
      : in_(in),
        gamma_(Matrix::Ones(in.channels, 1)),
        beta_(Matrix::Zero(in.channels, 1)),
        running_mean_(Matrix::Zero(in.channels, 1)),
        running_var_(Matrix::Ones(in.channels, 1)) {}

  std::string kind() const override { return "batchnorm"; }
  TensorShape output_shape(const TensorShape& in) const override {
    if (!(in == in_)) throw std::invalid_argument("batchnorm: shape mismatch");
    return in;
  }

  Matrix forward(const Matrix& x, Mode mode, std::mt19937_64*) override {
    const auto n = x.rows();
    const int spatial = in_.height * in_.width;
    Matrix out(n, x.cols());
    if (mode == Mode::kTrain) {
      xhat_.resize(n, x.cols());
      std_ = Vector(in_.channels);
      const double count = static_cast<double>(n * spatial);
      for (int c = 0; c < in_.channels; ++c) {
        double mean = 0.0;
        for (Eigen::Index s = 0; s < n; ++s)
          for (int p = 0; p < spatial; ++p) mean += x(s, c * spatial + p);
        mean /= count;
        double var = 0.0;
        for (Eigen::Index s = 0; s < n; ++s)
          for (int p = 0; p < spatial; ++p) {
            const double d = x(s, c * spatial + p) - mean;
            var += d * d;
          }
        var /= count;
        std_(c) = std::sqrt(var + kBnEps);
        for (Eigen::Index s = 0; s < n; ++s)
          for (int p = 0; p < spatial; ++p) {
            const double xh = (x(s, c * spatial + p) - mean) / std_(c);
            xhat_(s, c * spatial + p) = xh;
            out(s, c * spatial + p) = gamma_.value(c, 0) * xh + beta_.value(c, 0);
          }
        running_mean_(c, 0) =
            kBnMomentum * running_mean_(c, 0) + (1.0 - kBnMomentum) * mean;
        running_var_(c, 0) =
            kBnMomentum * running_var_(c, 0) + (1.0 - kBnMomentum) * var;
      }
    } else {
      for (int c = 0; c < in_.channels; ++c) {
        const double inv = 1.0 / std::sqrt(running_var_(c, 0) + kBnEps);
        for (Eigen::Index s = 0; s < n; ++s)
          for (int p = 0; p < spatial; ++p)
            out(s, c * spatial + p) =
                gamma_.value(c, 0) * (x(s, c * spatial + p) -
                                      running_mean_(c, 0)) * inv +
                beta_.value(c, 0);
      }
    }
    return out;
  }

  Matrix backward(const Matrix& grad_out) override {
    const auto n = grad_out.rows();
    const int spatial = in_.height * in_.width;
    const double count = static_cast<double>(n * spatial);
    Matrix grad_in(n, grad_out.cols());
    for (int c = 0; c < in_.channels; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (Eigen::Index s = 0; s < n; ++s)
        for (int p = 0; p < spatial; ++p) {
          const double dy = grad_out(s, c * spatial + p);
          sum_dy += dy;
          sum_dy_xhat += dy * xhat_(s, c * spatial + p);
        }
      gamma_.grad(c, 0) += sum_dy_xhat;
      beta_.grad(c, 0) += sum_dy;
      const double scale = gamma_.value(c, 0) / std_(c);
      for (Eigen::Index s = 0; s < n; ++s)
        for (int p = 0; p < spatial; ++p) {
          const double dy = grad_out(s, c * spatial + p);
          grad_in(s, c * spatial + p) =
              scale * (dy - sum_dy / count -
                       xhat_(s, c * spatial + p) * sum_dy_xhat / count);
        }
    }
    return grad_in;
  }

  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  std::vector<Matrix*> state() override {
    return {&running_mean_, &running_var_};
  }
  std::vector<int> manifest_ints() const override {
    return {in_.channels, in_.height, in_.width};
  }

 private:
  TensorShape in_;
  Param gamma_, beta_;
  Matrix running_mean_, running_var_;
  Matrix xhat_;
  Vector std_;
};

class ActivationLayer final : public Layer {
 public:
  enum class Fn { kRelu, kTanh, kSigmoid };
  explicit ActivationLayer(Fn fn) : fn_(fn) {}

  std::string kind() const override {
    switch (fn_) {
      case Fn::kRelu: return "relu";
      case Fn::kTanh: return "tanh";
      default: return "sigmoid";
    }
  }
  TensorShape output_shape(const TensorShape& in) const override { return in; }

  Matrix forward(const Matrix& x, Mode, std::mt19937_64*) override {
    switch (fn_) {
      case Fn::kRelu:
        out_ = x.cwiseMax(0.0);
        break;
      case Fn::kTanh:
        out_ = x.array().tanh().matrix();
        break;
      case Fn::kSigmoid:
        out_ = (1.0 / (1.0 + (-x.array()).exp())).matrix();
        break;
    }
    return out_;
  }

  Matrix backward(const Matrix& grad_out) override {
    switch (fn_) {
      case Fn::kRelu:
        return (out_.array() > 0.0).cast<double>().matrix().cwiseProduct(
            grad_out);
      case Fn::kTanh:
        return (1.0 - out_.array().square()).matrix().cwiseProduct(grad_out);
      default:
        return (out_.array() * (1.0 - out_.array()))
            .matrix()
            .cwiseProduct(grad_out);
    }
  }

 private:
  Fn fn_;
  Matrix out_;
};

class DropoutLayer final : public Layer {
 public:
  explicit DropoutLayer(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0)
      throw std::invalid_argument("dropout rate must be in [0, 1)");
  }

  std::string kind() const override { return "dropout"; }
  TensorShape output_shape(const TensorShape& in) const override { return in; }

  Matrix forward(const Matrix& x, Mode mode, std::mt19937_64* rng) override {
    if (mode == Mode::kEval || rate_ == 0.0) {
      mask_.resize(0, 0);
      return x;
    }
    if (!rng)
      throw std::invalid_argument("dropout in train mode needs an rng");
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    mask_ = Matrix(x.rows(), x.cols());
    const double keep = 1.0 - rate_;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        mask_(i, j) = dist(*rng) < keep ? 1.0 / keep : 0.0;
    return x.cwiseProduct(mask_);
  }

  Matrix backward(const Matrix& grad_out) override {
    if (mask_.size() == 0) return grad_out;
    return grad_out.cwiseProduct(mask_);
  }

  std::vector<double> manifest_doubles() const override { return {rate_}; }

 private:
  double rate_;
  Matrix mask_;
};

// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
class MaxPoolLayer final : public Layer {
 public:
  explicit MaxPoolLayer(const TensorShape& in)
      : in_(in), out_h_(in.height / 2), out_w_(in.width / 2) {}

  std::string kind() const override { return "maxpool"; }
  TensorShape output_shape(const TensorShape& in) const override {
    if (!(in == in_)) throw std::invalid_argument("maxpool: shape mismatch");
    return {in.channels, out_h_, out_w_};
  }

  Matrix forward(const Matrix& x, Mode, std::mt19937_64*) override {
    const auto n = x.rows();
    const int hw = in_.height * in_.width;
    const int ohw = out_h_ * out_w_;
    Matrix out(n, in_.channels * ohw);
    argmax_.assign(n * in_.channels * ohw, 0);
    for (Eigen::Index s = 0; s < n; ++s) {
      for (int c = 0; c < in_.channels; ++c) {
        for (int oy = 0; oy < out_h_; ++oy) {
          for (int ox = 0; ox < out_w_; ++ox) {
            double best = -std::numeric_limits<double>::infinity();
            int best_idx = 0;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const int idx =
                    c * hw + (2 * oy + dy) * in_.width + (2 * ox + dx);
                if (x(s, idx) > best) {
                  best = x(s, idx);
                  best_idx = idx;
                }
              }
            const int o = c * ohw + oy * out_w_ + ox;
            out(s, o) = best;
            argmax_[s * in_.channels * ohw + o] = best_idx;
          }
        }
      }
    }
    return out;
  }

  Matrix backward(const Matrix& grad_out) override {
    const auto n = grad_out.rows();
    const int ohw = out_h_ * out_w_;
    Matrix grad_in = Matrix::Zero(n, in_.flat());
    for (Eigen::Index s = 0; s < n; ++s)
      for (int o = 0; o < in_.channels * ohw; ++o)
        grad_in(s, argmax_[s * in_.channels * ohw + o]) += grad_out(s, o);
    return grad_in;
  }

  std::vector<int> manifest_ints() const override {
    return {in_.channels, in_.height, in_.width};
  }

 private:
  TensorShape in_;
  int out_h_, out_w_;
  std::vector<int> argmax_;
};

class GlobalAvgPoolLayer final : public Layer {
 public:
  explicit GlobalAvgPoolLayer(const TensorShape& in) : in_(in) {}

  std::string kind() const override { return "gap"; }
  TensorShape output_shape(const TensorShape& in) const override {
    if (!(in == in_)) throw std::invalid_argument("gap: shape mismatch");
    return {in.channels, 1, 1};
  }

  Matrix forward(const Matrix& x, Mode, std::mt19937_64*) override {
    const auto n = x.rows();
    const int spatial = in_.height * in_.width;
    Matrix out(n, in_.channels);
    for (Eigen::Index s = 0; s < n; ++s)
      for (int c = 0; c < in_.channels; ++c)
        out(s, c) =
            x.row(s).segment(c * spatial, spatial).sum() / spatial;
    return out;
  }

  Matrix backward(const Matrix& grad_out) override {
    const auto n = grad_out.rows();
    const int spatial = in_.height * in_.width;
    Matrix grad_in(n, in_.flat());
    for (Eigen::Index s = 0; s < n; ++s)
      for (int c = 0; c < in_.channels; ++c)
        grad_in.row(s).segment(c * spatial, spatial)
            .setConstant(grad_out(s, c) / spatial);
    return grad_in;
  }

  std::vector<int> manifest_ints() const override {
    return {in_.channels, in_.height, in_.width};
  }

 private:
  TensorShape in_;
};

}  // namespace

Model& Model::add(std::unique_ptr<Layer> layer) {
  // Validates the shape chain eagerly.
  TensorShape shape = input_shape_;
  for (const auto& l : layers_) shape = l->output_shape(shape);
  layer->output_shape(shape);
  layers_.push_back(std::move(layer));
  return *this;
}

TensorShape Model::output_shape() const {
  TensorShape shape = input_shape_;
  for (const auto& l : layers_) shape = l->output_shape(shape);
  return shape;
}

Matrix Model::forward(const Matrix& batch, Mode mode, std::mt19937_64* rng) {
  if (batch.cols() != input_shape_.flat())
    throw std::invalid_argument("forward: input width " +
                                std::to_string(batch.cols()) +
                                " does not match model input " +
                                std::to_string(input_shape_.flat()));
  Matrix x = batch;
  for (auto& l : layers_) x = l->forward(x, mode, rng);
  cache_valid_ = (mode == Mode::kTrain);
  return x;
}

void Model::backward(const Matrix& grad_outputs) {
  if (!cache_valid_)
    throw std::runtime_error(
        "backward: no train-mode forward cache (stale or missing)");
  Matrix g = grad_outputs;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    g = (*it)->backward(g);
  cache_valid_ = false;
}

void Model::zero_grad() {
  for (Param* p : params()) p->grad.setZero();
}

std::vector<Param*> Model::params() {
  std::vector<Param*> out;
  for (auto& l : layers_)
    for (Param* p : l->params()) out.push_back(p);
  return out;
}

std::vector<const Param*> Model::params() const {
  std::vector<const Param*> out;
  for (auto& l : const_cast<Model*>(this)->layers_)
    for (Param* p : l->params()) out.push_back(p);
  return out;
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
  return cfg.base_lr * std::pow(0.5, epoch / cfg.lr_halving_period);
}

void sgd_nesterov_step(Model& model, const TrainConfig& cfg, int epoch) {
  const double lr = lr_at(epoch, cfg);
  const double mu = cfg.momentum;
  for (Param* p : model.params()) {
    const Matrix g = p->grad + cfg.weight_decay * p->value;
    p->velocity = mu * p->velocity - lr * g;
    p->value += mu * p->velocity - lr * g;
  }
}

std::unique_ptr<Layer> make_dense(int in, int out, std::mt19937_64& rng) {
  return std::make_unique<DenseLayer>(in, out, rng);
}
std::unique_ptr<Layer> make_conv(const TensorShape& in, int out_channels,
                                 int kernel, int pad, std::mt19937_64& rng) {
  return std::make_unique<ConvLayer>(in, out_channels, kernel, pad, rng);
}
std::unique_ptr<Layer> make_batchnorm(const TensorShape& in) {
  return std::make_unique<BatchNormLayer>(in);
}
std::unique_ptr<Layer> make_relu() {
  return std::make_unique<ActivationLayer>(ActivationLayer::Fn::kRelu);
}
std::unique_ptr<Layer> make_tanh() {
  return std::make_unique<ActivationLayer>(ActivationLayer::Fn::kTanh);
}
std::unique_ptr<Layer> make_sigmoid() {
  return std::make_unique<ActivationLayer>(ActivationLayer::Fn::kSigmoid);
}
std::unique_ptr<Layer> make_dropout(double rate) {
  return std::make_unique<DropoutLayer>(rate);
}
std::unique_ptr<Layer> make_maxpool(const TensorShape& in) {
  return std::make_unique<MaxPoolLayer>(in);
}
std::unique_ptr<Layer> make_global_avg_pool(const TensorShape& in) {
  return std::make_unique<GlobalAvgPoolLayer>(in);
}

Model build_mlp(int in_dim, int out_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Model model({in_dim, 1, 1});
  model.add(make_dense(in_dim, 256, rng))
      .add(make_relu())
      .add(make_dense(256, 256, rng))
      .add(make_relu())
      .add(make_dense(256, out_dim, rng));
  return model;
}

Model build_dorfernet_mini(const TensorShape& input, int out_dim,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Model model(input);
  TensorShape s = input;
  auto conv_bn_relu = [&](int ch, int kernel, int pad) {
    model.add(make_conv(s, ch, kernel, pad, rng));
    s = TensorShape{ch, s.height + 2 * pad - kernel + 1,
                    s.width + 2 * pad - kernel + 1};
    model.add(make_batchnorm(s)).add(make_relu());
  };
  auto pool_dropout = [&](double rate) {
    model.add(make_maxpool(s));
    s = TensorShape{s.channels, s.height / 2, s.width / 2};
    model.add(make_dropout(rate));
  };
  // DorferNet block structure, channel counts / 8.
  conv_bn_relu(8, 3, 1);
  conv_bn_relu(8, 3, 1);
  pool_dropout(0.25);
  conv_bn_relu(16, 3, 1);
  conv_bn_relu(16, 3, 1);
  pool_dropout(0.25);
  conv_bn_relu(32, 3, 1);
  conv_bn_relu(32, 3, 1);
  conv_bn_relu(32, 3, 1);
  conv_bn_relu(32, 3, 1);
  pool_dropout(0.25);
  // Small inputs can shrink below 3x3 after the pooling stages.
  conv_bn_relu(128, std::min(3, std::min(s.height, s.width)), 0);
  model.add(make_dropout(0.5));
  conv_bn_relu(128, 1, 0);
  model.add(make_dropout(0.5));
  conv_bn_relu(out_dim, 1, 0);
  model.add(make_global_avg_pool(s));
  return model;
}

Model build_preset(const std::string& preset, const TensorShape& input,
                   int out_dim, std::uint64_t seed) {
  if (preset == "mlp") return build_mlp(input.flat(), out_dim, seed);
  if (preset == "dorfernet-mini")
    return build_dorfernet_mini(input, out_dim, seed);
  throw std::invalid_argument("unknown network preset: " + preset);
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[6] = {'R', 'D', 'L', 'D', 'A', '1'};

struct ByteSink {
  std::string bytes;
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(char((v >> (8 * i)) & 0xff));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u32(std::uint32_t(bits & 0xffffffffULL));
    u32(std::uint32_t(bits >> 32));
  }
  void matrix(const Matrix& m) {
    u32(std::uint32_t(m.rows()));
    u32(std::uint32_t(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        f32(static_cast<float>(m(i, j)));
  }
};

struct ByteSource {
  const std::string& bytes;
  std::size_t pos = 0;
  std::uint32_t u32() {
    if (pos + 4 > bytes.size())
      throw std::runtime_error("checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::uint32_t(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    std::uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  Matrix matrix() {
    const auto rows = u32();
    const auto cols = u32();
    Matrix m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = f32();
    return m;
  }
};

std::uint32_t layer_kind_id(const std::string& kind) {
  if (kind == "dense") return 0;
  if (kind == "conv") return 1;
  if (kind == "batchnorm") return 2;
  if (kind == "relu") return 3;
  if (kind == "tanh") return 4;
  if (kind == "sigmoid") return 5;
  if (kind == "dropout") return 6;
  if (kind == "maxpool") return 7;
  if (kind == "gap") return 8;
  throw std::runtime_error("unknown layer kind: " + kind);
}

std::unique_ptr<Layer> make_layer_from_manifest(std::uint32_t id,
                                                const std::vector<int>& ints,
                                                const std::vector<double>& dbl) {
  std::mt19937_64 dummy(0);  // values are overwritten by the stored tensors
  switch (id) {
    case 0: return make_dense(ints.at(0), ints.at(1), dummy);
    case 1:
      return make_conv({ints.at(0), ints.at(1), ints.at(2)}, ints.at(3),
                       ints.at(4), ints.at(5), dummy);
    case 2: return make_batchnorm({ints.at(0), ints.at(1), ints.at(2)});
    case 3: return make_relu();
    case 4: return make_tanh();
    case 5: return make_sigmoid();
    case 6: return make_dropout(dbl.at(0));
    case 7: return make_maxpool({ints.at(0), ints.at(1), ints.at(2)});
    case 8: return make_global_avg_pool({ints.at(0), ints.at(1), ints.at(2)});
    default: throw std::runtime_error("checkpoint: unknown layer id");
  }
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  Model& m = const_cast<Model&>(model);
  ByteSink sink;
  sink.u32(std::uint32_t(m.input_shape().channels));
  sink.u32(std::uint32_t(m.input_shape().height));
  sink.u32(std::uint32_t(m.input_shape().width));
  sink.u32(std::uint32_t(m.layer_count()));
  for (std::size_t i = 0; i < m.layer_count(); ++i) {
    Layer& l = m.layer(i);
    sink.u32(layer_kind_id(l.kind()));
    const auto ints = l.manifest_ints();
    sink.u32(std::uint32_t(ints.size()));
    for (int v : ints) sink.u32(std::uint32_t(v));
    const auto dbls = l.manifest_doubles();
    sink.u32(std::uint32_t(dbls.size()));
    for (double v : dbls) sink.f64(v);
    const auto params = l.params();
    sink.u32(std::uint32_t(params.size()));
    for (Param* p : params) sink.matrix(p->value);
    const auto state = l.state();
    sink.u32(std::uint32_t(state.size()));
    for (Matrix* s : state) sink.matrix(*s);
  }
  const std::uint32_t checksum = crc32(sink.bytes.data(), sink.bytes.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for write: " + path);
  out.write(kMagic, sizeof(kMagic));
  out.write(sink.bytes.data(), std::streamsize(sink.bytes.size()));
  char tail[4];
  for (int i = 0; i < 4; ++i) tail[i] = char((checksum >> (8 * i)) & 0xff);
  out.write(tail, 4);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (raw.size() < sizeof(kMagic) + 4 ||
      std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const std::string payload = raw.substr(sizeof(kMagic), raw.size() - 10);
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= std::uint32_t(static_cast<unsigned char>(raw[raw.size() - 4 + i]))
              << (8 * i);
  if (crc32(payload.data(), payload.size()) != stored)
    throw std::runtime_error("checkpoint: checksum mismatch");

  ByteSource src{payload};
  TensorShape input{int(src.u32()), int(src.u32()), int(src.u32())};
  Model model(input);
  const auto layer_count = src.u32();
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const auto id = src.u32();
    std::vector<int> ints(src.u32());
    for (auto& v : ints) v = int(src.u32());
    std::vector<double> dbls(src.u32());
    for (auto& v : dbls) v = src.f64();
    auto layer = make_layer_from_manifest(id, ints, dbls);
    const auto nparams = src.u32();
    auto params = layer->params();
    if (nparams != params.size())
      throw std::runtime_error("checkpoint: parameter count mismatch");
    for (Param* p : params) {
      Matrix m = src.matrix();
      if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
        throw std::runtime_error("checkpoint: tensor shape mismatch");
      p->value = m;
      p->velocity.setZero();
    }
    const auto nstate = src.u32();
    auto state = layer->state();
    if (nstate != state.size())
      throw std::runtime_error("checkpoint: state count mismatch");
    for (Matrix* s : state) *s = src.matrix();
    model.add(std::move(layer));
  }
  return model;
}

}  // namespace rdlda
