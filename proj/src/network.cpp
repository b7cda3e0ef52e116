#include "lesionkit/network.hpp"
#include "lesionkit/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

namespace lesionkit {

ModelParams::ModelParams(NetworkShape shape)
  : shape_(shape)
{
  if (shape.input == 0 || shape.hidden1 == 0 || shape.hidden2 == 0)
    throw InputError("network dimensions must be positive");
  data_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset_br() + 1));
}

std::size_t
ModelParams::offset_b1() const
{
  return shape_.hidden1 * shape_.input;
}
std::size_t
ModelParams::offset_w2() const
{
  return offset_b1() + shape_.hidden1;
}
std::size_t
ModelParams::offset_b2() const
{
  return offset_w2() + shape_.hidden2 * shape_.hidden1;
}
std::size_t
ModelParams::offset_wc() const
{
  return offset_b2() + shape_.hidden2;
}
std::size_t
ModelParams::offset_bc() const
{
  return offset_wc() + shape_.hidden2;
}
std::size_t
ModelParams::offset_wr() const
{
  return offset_bc() + 1;
}
std::size_t
ModelParams::offset_br() const
{
  return offset_wr() + shape_.hidden2;
}

std::vector<ModelParams::Block>
ModelParams::blocks() const
{
  const auto& s = shape_;
  return { { "trunk1.weight", offset_w1(), s.hidden1, s.input },
           { "trunk1.bias", offset_b1(), s.hidden1, 1 },
           { "trunk2.weight", offset_w2(), s.hidden2, s.hidden1 },
           { "trunk2.bias", offset_b2(), s.hidden2, 1 },
           { "cls.weight", offset_wc(), s.hidden2, 1 },
           { "cls.bias", offset_bc(), 1, 1 },
           { "reg.weight", offset_wr(), s.hidden2, 1 },
           { "reg.bias", offset_br(), 1, 1 } };
}

#define LK_MATRIX(off, r, c)                                                   \
  { data_.data() + (off), static_cast<Eigen::Index>(r),                        \
    static_cast<Eigen::Index>(c) }
#define LK_VECTOR(off, n) { data_.data() + (off), static_cast<Eigen::Index>(n) }

ModelParams::MatrixMap
ModelParams::w1()
{
  return LK_MATRIX(offset_w1(), shape_.hidden1, shape_.input);
}
ModelParams::VectorMap
ModelParams::b1()
{
  return LK_VECTOR(offset_b1(), shape_.hidden1);
}
ModelParams::MatrixMap
ModelParams::w2()
{
  return LK_MATRIX(offset_w2(), shape_.hidden2, shape_.hidden1);
}
ModelParams::VectorMap
ModelParams::b2()
{
  return LK_VECTOR(offset_b2(), shape_.hidden2);
}
ModelParams::VectorMap
ModelParams::cls_weights()
{
  return LK_VECTOR(offset_wc(), shape_.hidden2);
}
double&
ModelParams::cls_bias()
{
  return data_[static_cast<Eigen::Index>(offset_bc())];
}
ModelParams::VectorMap
ModelParams::reg_weights()
{
  return LK_VECTOR(offset_wr(), shape_.hidden2);
}
double&
ModelParams::reg_bias()
{
  return data_[static_cast<Eigen::Index>(offset_br())];
}

ModelParams::ConstMatrixMap
ModelParams::w1() const
{
  return LK_MATRIX(offset_w1(), shape_.hidden1, shape_.input);
}
ModelParams::ConstVectorMap
ModelParams::b1() const
{
  return LK_VECTOR(offset_b1(), shape_.hidden1);
}
ModelParams::ConstMatrixMap
ModelParams::w2() const
{
  return LK_MATRIX(offset_w2(), shape_.hidden2, shape_.hidden1);
}
ModelParams::ConstVectorMap
ModelParams::b2() const
{
  return LK_VECTOR(offset_b2(), shape_.hidden2);
}
ModelParams::ConstVectorMap
ModelParams::cls_weights() const
{
  return LK_VECTOR(offset_wc(), shape_.hidden2);
}
double
ModelParams::cls_bias() const
{
  return data_[static_cast<Eigen::Index>(offset_bc())];
}
ModelParams::ConstVectorMap
ModelParams::reg_weights() const
{
  return LK_VECTOR(offset_wr(), shape_.hidden2);
}
double
ModelParams::reg_bias() const
{
  return data_[static_cast<Eigen::Index>(offset_br())];
}

#undef LK_MATRIX
#undef LK_VECTOR

std::pair<std::size_t, std::size_t>
ModelParams::regression_range() const
{
  return { offset_wr(), offset_br() + 1 };
}

ModelParams
ModelParams::random(NetworkShape shape, std::uint64_t seed)
{
  ModelParams p(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](auto&& block, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < block.size(); ++i)
      block.data()[i] = dist(rng);
  };
  const auto d = static_cast<double>(shape.input);
  const auto h1 = static_cast<double>(shape.hidden1);
  const auto h2 = static_cast<double>(shape.hidden2);
  fill(p.w1(), std::sqrt(6.0 / d));
  fill(p.w2(), std::sqrt(6.0 / h1));
  fill(p.cls_weights(), std::sqrt(6.0 / (h2 + 1.0)));
  fill(p.reg_weights(), std::sqrt(6.0 / (h2 + 1.0)));
  return p;
}

namespace {

double
sigmoid(double z)
{
  if (z >= 0)
    return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct ForwardCache
{
  Eigen::MatrixXd z1, h1, z2, h2; // batch x units
  Eigen::VectorXd logit, probability, regression;
};

ForwardCache
forward_cache(const ModelParams& params, const Eigen::MatrixXd& x)
{
  if (static_cast<std::size_t>(x.cols()) != params.shape().input)
    throw InputError("input dimension " + std::to_string(x.cols()) +
                     " does not match model input " +
                     std::to_string(params.shape().input));
  ForwardCache c;
  c.z1 = (x * params.w1().transpose()).rowwise() + params.b1().transpose();
  c.h1 = c.z1.cwiseMax(0.0);
  c.z2 = (c.h1 * params.w2().transpose()).rowwise() + params.b2().transpose();
  c.h2 = c.z2.cwiseMax(0.0);
  c.logit = (c.h2 * params.cls_weights()).array() + params.cls_bias();
  c.probability = c.logit.unaryExpr([](double z) { return sigmoid(z); });
  c.regression = (c.h2 * params.reg_weights()).array() + params.reg_bias();
  return c;
}

void
check_targets(std::size_t n, const BatchTargets& t, bool auxiliary)
{
  if (n == 0)
    throw InputError("empty batch");
  if (t.labels.size() != n)
    throw InputError("batch label count mismatch");
  if (auxiliary && (t.annotation.size() != n || t.available.size() != n))
    throw InputError("batch annotation count mismatch");
}

double
class_weight(const ClassWeights& w, int label)
{
  return label == 1 ? w.positive : w.negative;
}

} // namespace

Prediction
forward(const ModelParams& params, std::span<const double> x)
{
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j)
    row(0, static_cast<Eigen::Index>(j)) = x[j];
  const auto out = forward(params, row);
  return { out.probability[0], out.regression[0] };
}

BatchOutput
forward(const ModelParams& params, const Eigen::MatrixXd& x)
{
  auto c = forward_cache(params, x);
  return { std::move(c.probability), std::move(c.regression) };
}

LossBreakdown
loss(std::span<const double> probability,
     std::span<const double> regression,
     const BatchTargets& targets,
     const LossOptions& options)
{
  const std::size_t n = probability.size();
  check_targets(n, targets, options.auxiliary);
  LossBreakdown out;
  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p =
      std::clamp(probability[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    const int y = targets.labels[i];
    ce -= class_weight(options.class_weights, y) *
          (y == 1 ? std::log(p) : std::log(1.0 - p));
  }
  out.cls = ce / static_cast<double>(n);

  if (options.auxiliary) {
    double se = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!targets.available[i])
        continue;
      const double r = regression[i] - targets.annotation[i];
      se += r * r;
      ++m;
    }
    out.reg = m ? se / static_cast<double>(m) : 0.0;
  }
  out.total = options.weights.cls * out.cls + options.weights.reg * out.reg;
  return out;
}

LossBreakdown
loss(const ModelParams& params,
     const Eigen::MatrixXd& x,
     const BatchTargets& targets,
     const LossOptions& options)
{
  const auto out = forward(params, x);
  return loss(std::span(out.probability.data(), out.probability.size()),
              std::span(out.regression.data(), out.regression.size()), targets,
              options);
}

GradientResult
backward(const ModelParams& params,
         const Eigen::MatrixXd& x,
         const BatchTargets& targets,
         const LossOptions& options)
{
  const auto c = forward_cache(params, x);
  const auto n = static_cast<std::size_t>(x.rows());
  check_targets(n, targets, options.auxiliary);

  GradientResult out;
  out.loss = loss(std::span(c.probability.data(), c.probability.size()),
                  std::span(c.regression.data(), c.regression.size()), targets,
                  options);

  // d total / d logit of the (unclamped) weighted cross-entropy
  Eigen::VectorXd dlogit(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const int y = targets.labels[i];
    dlogit[k] = options.weights.cls * class_weight(options.class_weights, y) *
                (c.probability[k] - static_cast<double>(y)) /
                static_cast<double>(n);
  }

  ModelParams grad(params.shape());
  grad.cls_weights() = c.h2.transpose() * dlogit;
  grad.cls_bias() = dlogit.sum();
  Eigen::MatrixXd dh2 = dlogit * params.cls_weights().transpose();

  if (options.auxiliary) {
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i)
      m += targets.available[i] ? 1 : 0;
    Eigen::VectorXd dreg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (!targets.available[i])
        continue;
      const auto k = static_cast<Eigen::Index>(i);
      dreg[k] = options.weights.reg * 2.0 *
                (c.regression[k] - targets.annotation[i]) /
                static_cast<double>(m);
    }
    if (m > 0) {
      grad.reg_weights() = c.h2.transpose() * dreg;
      grad.reg_bias() = dreg.sum();
      dh2 += dreg * params.reg_weights().transpose();
    }
  }

  const Eigen::MatrixXd dz2 =
    dh2.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
  grad.w2() = dz2.transpose() * c.h1;
  grad.b2() = dz2.colwise().sum().transpose();
  const Eigen::MatrixXd dh1 = dz2 * params.w2();
  const Eigen::MatrixXd dz1 =
    dh1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
  grad.w1() = dz1.transpose() * x;
  grad.b1() = dz1.colwise().sum().transpose();

  out.gradient = std::move(grad.data());
  return out;
}

void
rmsprop_step(ModelParams& params,
             const Eigen::VectorXd& gradient,
             RmspropState& state,
             const RmspropConfig& config)
{
  if (gradient.size() != params.data().size())
    throw InputError("gradient size mismatch");
  if (state.mean_square.size() != gradient.size())
    state.mean_square = Eigen::VectorXd::Zero(gradient.size());
  state.mean_square = config.decay * state.mean_square +
                      (1.0 - config.decay) * gradient.cwiseProduct(gradient);
  params.data().array() -=
    config.learning_rate * gradient.array() /
    (state.mean_square.array().sqrt() + config.epsilon);
}

double
ensemble_predict(std::span<const ModelParams> models, std::span<const double> x)
{
  if (models.empty())
    throw InputError("empty ensemble");
  double sum = 0.0;
  for (const auto& m : models)
    sum += forward(m, x).probability;
  return sum / static_cast<double>(models.size());
}

Eigen::VectorXd
ensemble_predict(std::span<const ModelParams> models, const Eigen::MatrixXd& x)
{
  if (models.empty())
    throw InputError("empty ensemble");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
  for (const auto& m : models)
    sum += forward(m, x).probability;
  return sum / static_cast<double>(models.size());
}

std::string
encode_array(std::span<const double> values)
{
  std::vector<unsigned char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b)
      bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int len = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(len));
  return out;
}

std::vector<double>
decode_array(std::string_view text)
{
  if (text.size() % 4 != 0)
    throw InputError("base64 payload length is not a multiple of 4");
  std::vector<unsigned char> bytes(3 * (text.size() / 4) + 1);
  const int len = EVP_DecodeBlock(
    bytes.data(), reinterpret_cast<const unsigned char*>(text.data()),
    static_cast<int>(text.size()));
  if (len < 0)
    throw InputError("malformed base64 payload");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=')
    padding = text.size() >= 2 && text[text.size() - 2] == '=' ? 2 : 1;
  const std::size_t size = static_cast<std::size_t>(len) - padding;
  if (size % 8 != 0)
    throw InputError("array payload is not a whole number of float64 values");
  std::vector<double> values(size / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    values[i] = std::bit_cast<double>(bits);
  }
  return values;
}

} // namespace lesionkit
