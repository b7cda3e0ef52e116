#pragma once

#include "lesionkit/aggregate.hpp"
#include "lesionkit/network.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lesionkit {

struct TrainConfig
{
  std::size_t epochs = 30;
  std::size_t batch_size = 20;
  double learning_rate = 2e-5;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::size_t hidden1 = 32;
  std::size_t hidden2 = 16;
  std::uint64_t seed = 0;
  LossWeights loss_weights;
  std::size_t k_folds = 5;
  std::array<double, 3> split_ratios = { 0.70, 0.175, 0.125 }; // train/val/test
  //! Auxiliary regression targets. Empty: baseline (classification only).
  //! More than one entry requires `ensemble`: one member per target.
  std::vector<ColumnKey> auxiliary;
  bool ensemble = false;
  unsigned threads = 1;

  //! Throws InputError on inconsistent settings.
  void validate() const;

  nlohmann::json to_json() const;
  //! Overlays the keys present in `j` onto `base`.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j);
};

struct FoldSplit
{
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

//! Sizes of the three subsets by largest-remainder rounding of ratio * n.
std::array<std::size_t, 3> split_sizes(std::size_t n,
                                       const std::array<double, 3>& ratios);

//! k stratified train/validation/test partitions. Each class is shuffled
//! once; fold f takes its test window at offset f * n_c / k, validation
//! right after, and the rest for training.
std::vector<FoldSplit> stratified_splits(std::span<const int> labels,
                                         const TrainConfig& config);

//! Balanced weights w_c = n / (2 n_c).
ClassWeights class_weights(std::span<const int> labels);

//! Rank (Mann-Whitney) AUC with ties counted one half.
double auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint
{
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

//! ROC curve from (0, 0) at threshold +inf down to (1, 1).
std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const int> labels);
double trapezoid_area(std::span<const RocPoint> curve);

//! Regression targets for one auxiliary column, aligned to a lesion list.
struct AuxiliaryTargets
{
  ColumnKey key;
  std::vector<double> value;
  std::vector<std::uint8_t> available;
};

AuxiliaryTargets auxiliary_targets(const FeatureMatrix& matrix,
                                   std::span<const std::string> lesion_ids,
                                   ColumnKey key);

struct TrainingData
{
  Eigen::MatrixXd x; // lesions x features
  std::vector<int> labels;
};

struct EpochRecord
{
  LossBreakdown train_loss; // full training subset after the epoch
  double val_auc = 0.0;
};

struct TrainResult
{
  ModelParams model; // snapshot with the best validation AUC
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

//! Mini-batch RMSprop with per-epoch shuffling. `aux` null trains the
//! baseline. `member` decorrelates ensemble members sharing a seed.
TrainResult train(const TrainConfig& config,
                  const TrainingData& data,
                  const AuxiliaryTargets* aux,
                  const FoldSplit& split,
                  std::uint64_t member = 0);

struct FoldReport
{
  double auc = 0.0;                 // ensemble (or single model)
  std::vector<double> member_auc;
  std::vector<std::size_t> best_epoch;
  std::vector<RocPoint> roc;
};

struct EvalReport
{
  std::vector<FoldReport> folds;
  std::vector<double> per_fold_auc;
  double mean = 0.0;
  double std = 0.0; // population std over folds
  std::vector<std::string> members; // auxiliary label or "baseline"
  TrainConfig config;
  std::vector<std::vector<ModelParams>> models; // per fold, per member

  nlohmann::json to_json() const;
};

//! One member per auxiliary target (or the baseline when `aux` is empty).
EvalReport cross_validate(const TrainConfig& config,
                          const TrainingData& data,
                          const std::vector<AuxiliaryTargets>& aux);

//! Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

std::uint64_t derive_seed(std::uint64_t base,
                          std::uint64_t a,
                          std::uint64_t b = 0);

// model.json: versioned layer shapes with base64 float64 arrays.
nlohmann::json model_to_json(const ModelParams& params);
ModelParams model_from_json(const nlohmann::json& j);

} // namespace lesionkit
