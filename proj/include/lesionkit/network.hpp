#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lesionkit {

struct NetworkShape
{
  std::size_t input = 0;
  std::size_t hidden1 = 32;
  std::size_t hidden2 = 16;

  bool operator==(const NetworkShape&) const = default;
};

//! Weights of the two-headed network: a ReLU trunk d -> h1 -> h2 feeding a
//! sigmoid classification head and a linear regression head. All parameters
//! live in one flat vector so optimizers and gradient checks treat them
//! uniformly; the accessors return views into it.
class ModelParams
{
public:
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  //! Named parameter block, in storage order.
  struct Block
  {
    const char* name;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;
  };

  ModelParams() = default;
  explicit ModelParams(NetworkShape shape); // zero initialized

  //! He-uniform trunk, Glorot-uniform heads, zero biases.
  static ModelParams random(NetworkShape shape, std::uint64_t seed);

  const NetworkShape& shape() const { return shape_; }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
  Eigen::VectorXd& data() { return data_; }
  const Eigen::VectorXd& data() const { return data_; }
  std::vector<Block> blocks() const;

  MatrixMap w1();             // h1 x d
  VectorMap b1();             // h1
  MatrixMap w2();             // h2 x h1
  VectorMap b2();             // h2
  VectorMap cls_weights();    // h2
  double& cls_bias();
  VectorMap reg_weights();    // h2
  double& reg_bias();

  ConstMatrixMap w1() const;
  ConstVectorMap b1() const;
  ConstMatrixMap w2() const;
  ConstVectorMap b2() const;
  ConstVectorMap cls_weights() const;
  double cls_bias() const;
  ConstVectorMap reg_weights() const;
  double reg_bias() const;

  //! Half-open index range of the regression head (weights then bias).
  std::pair<std::size_t, std::size_t> regression_range() const;

  bool operator==(const ModelParams& other) const
  {
    return shape_ == other.shape_ && data_ == other.data_;
  }

private:
  std::size_t offset_w1() const { return 0; }
  std::size_t offset_b1() const;
  std::size_t offset_w2() const;
  std::size_t offset_b2() const;
  std::size_t offset_wc() const;
  std::size_t offset_bc() const;
  std::size_t offset_wr() const;
  std::size_t offset_br() const;

  NetworkShape shape_;
  Eigen::VectorXd data_;
};

struct Prediction
{
  double probability = 0.5;
  double regression = 0.0;
};

//! Single-sample forward pass. Throws InputError on a dimension mismatch.
Prediction forward(const ModelParams& params, std::span<const double> x);

struct BatchOutput
{
  Eigen::VectorXd probability;
  Eigen::VectorXd regression;
};

//! Row-wise forward pass over a batch (rows are samples).
BatchOutput forward(const ModelParams& params, const Eigen::MatrixXd& x);

struct LossWeights
{
  double cls = 1.0;
  double reg = 1.0;
};

struct ClassWeights
{
  double negative = 1.0;
  double positive = 1.0;
};

struct LossBreakdown
{
  double total = 0.0;
  double cls = 0.0; // class-weighted cross-entropy, batch mean
  double reg = 0.0; // masked MSE, mean over available items
};

inline constexpr double kProbabilityClamp = 1e-12;

//! Per-item targets of a batch. `annotation[i]` is ignored unless
//! `available[i]` is set.
struct BatchTargets
{
  std::span<const int> labels;
  std::span<const double> annotation;
  std::span<const std::uint8_t> available;
};

struct LossOptions
{
  LossWeights weights;
  ClassWeights class_weights;
  bool auxiliary = true; // false: regression head off (baseline model)
};

LossBreakdown loss(std::span<const double> probability,
                   std::span<const double> regression,
                   const BatchTargets& targets,
                   const LossOptions& options);

LossBreakdown loss(const ModelParams& params,
                   const Eigen::MatrixXd& x,
                   const BatchTargets& targets,
                   const LossOptions& options);

struct GradientResult
{
  Eigen::VectorXd gradient; // same layout as ModelParams::data()
  LossBreakdown loss;
};

//! Analytic gradient of `loss` over the batch. Items without an available
//! annotation contribute nothing to the regression path.
GradientResult backward(const ModelParams& params,
                        const Eigen::MatrixXd& x,
                        const BatchTargets& targets,
                        const LossOptions& options);

struct RmspropConfig
{
  double learning_rate = 2e-5;
  double decay = 0.9;
  double epsilon = 1e-8;
};

struct RmspropState
{
  Eigen::VectorXd mean_square;
};

//! s <- rho s + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(s) + eps).
void rmsprop_step(ModelParams& params,
                  const Eigen::VectorXd& gradient,
                  RmspropState& state,
                  const RmspropConfig& config);

//! Probability average over members.
double ensemble_predict(std::span<const ModelParams> models,
                        std::span<const double> x);
Eigen::VectorXd ensemble_predict(std::span<const ModelParams> models,
                                 const Eigen::MatrixXd& x);

// Layer arrays as little-endian float64, base64 encoded.
std::string encode_array(std::span<const double> values);
std::vector<double> decode_array(std::string_view text);

} // namespace lesionkit
