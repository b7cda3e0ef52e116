#include "lesionkit/training.hpp"
#include "lesionkit/error.hpp"
#include "lesionkit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace lesionkit {

void
TrainConfig::validate() const
{
  if (epochs == 0 || batch_size == 0 || hidden1 == 0 || hidden2 == 0)
    throw InputError("epochs, batch_size and hidden sizes must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InputError("learning_rate must be finite and non-negative");
  if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0))
    throw InputError("rmsprop_decay must lie in (0, 1)");
  if (!(rmsprop_epsilon > 0.0))
    throw InputError("rmsprop_epsilon must be positive");
  if (!(loss_weights.cls >= 0.0) || !(loss_weights.reg >= 0.0))
    throw InputError("loss weights must be non-negative");
  if (k_folds < 1)
    throw InputError("k_folds must be at least 1");
  double sum = 0.0;
  for (double r : split_ratios) {
    if (!(r > 0.0))
      throw InputError("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InputError("split ratios must sum to 1");
  if (auxiliary.size() > 1 && !ensemble)
    throw InputError("several auxiliary targets require ensemble mode");
}

nlohmann::json
TrainConfig::to_json() const
{
  nlohmann::json aux = nlohmann::json::array();
  for (const auto& key : auxiliary)
    aux.push_back(to_string(key));
  return { { "epochs", epochs },
           { "batch_size", batch_size },
           { "learning_rate", learning_rate },
           { "rmsprop_decay", rmsprop_decay },
           { "rmsprop_epsilon", rmsprop_epsilon },
           { "hidden1", hidden1 },
           { "hidden2", hidden2 },
           { "seed", seed },
           { "loss_weights", { { "cls", loss_weights.cls }, { "reg", loss_weights.reg } } },
           { "k_folds", k_folds },
           { "split_ratios", split_ratios },
           { "auxiliary", aux },
           { "ensemble", ensemble } };
}

TrainConfig
TrainConfig::from_json(const nlohmann::json& j)
{
  return from_json(j, TrainConfig{});
}

TrainConfig
TrainConfig::from_json(const nlohmann::json& j, TrainConfig c)
{
  try {
    if (!j.is_object())
      throw InputError("training config must be a JSON object");
    static const std::set<std::string> known = {
      "epochs",    "batch_size", "learning_rate", "rmsprop_decay",
      "rmsprop_epsilon", "hidden1", "hidden2",   "seed",
      "loss_weights", "k_folds", "split_ratios", "auxiliary",
      "ensemble"
    };
    for (const auto& [key, value] : j.items())
      if (!known.contains(key))
        throw InputError("training config: unknown key '" + key + "'");
    auto get = [&j](const char* key, auto& field) {
      if (j.contains(key))
        j.at(key).get_to(field);
    };
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("learning_rate", c.learning_rate);
    get("rmsprop_decay", c.rmsprop_decay);
    get("rmsprop_epsilon", c.rmsprop_epsilon);
    get("hidden1", c.hidden1);
    get("hidden2", c.hidden2);
    get("seed", c.seed);
    get("k_folds", c.k_folds);
    get("split_ratios", c.split_ratios);
    get("ensemble", c.ensemble);
    if (j.contains("loss_weights")) {
      const auto& w = j.at("loss_weights");
      if (w.contains("cls"))
        w.at("cls").get_to(c.loss_weights.cls);
      if (w.contains("reg"))
        w.at("reg").get_to(c.loss_weights.reg);
    }
    if (j.contains("auxiliary")) {
      c.auxiliary.clear();
      for (const auto& token : j.at("auxiliary"))
        c.auxiliary.push_back(parse_column_key(token.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("training config: ") + e.what());
  }
  return c;
}

std::uint64_t
derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b)
{
  std::seed_seq seq{ static_cast<std::uint32_t>(base),
                     static_cast<std::uint32_t>(base >> 32),
                     static_cast<std::uint32_t>(a),
                     static_cast<std::uint32_t>(a >> 32),
                     static_cast<std::uint32_t>(b),
                     static_cast<std::uint32_t>(b >> 32) };
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

// Largest-remainder apportionment of `total` by real-valued shares; ties
// go to the earlier entry.
template<std::size_t N>
std::array<std::size_t, N>
apportion(std::size_t total, const std::array<double, N>& ideal)
{
  std::array<std::size_t, N> out{};
  std::size_t assigned = 0;
  std::array<std::pair<double, std::size_t>, N> rema;
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = static_cast<std::size_t>(std::floor(ideal[i] + 1e-9));
    assigned += out[i];
    rema[i] = { ideal[i] - static_cast<double>(out[i]), i };
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < N; ++k, ++assigned)
    ++out[rema[k].second];
  return out;
}

void
require_binary(std::span<const int> labels)
{
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1)
      throw InputError("labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  if (pos == 0 || pos == labels.size())
    throw InputError("both classes must be present");
}

} // namespace

std::array<std::size_t, 3>
split_sizes(std::size_t n, const std::array<double, 3>& ratios)
{
  std::array<double, 3> ideal;
  for (std::size_t i = 0; i < 3; ++i)
    ideal[i] = ratios[i] * static_cast<double>(n);
  return apportion(n, ideal);
}

std::vector<FoldSplit>
stratified_splits(std::span<const int> labels, const TrainConfig& config)
{
  config.validate();
  require_binary(labels);
  const std::size_t n = labels.size();
  if (n < config.k_folds)
    throw InputError("fewer samples than folds");

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i)
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  std::mt19937_64 rng(derive_seed(config.seed, 0x5EED5));
  for (auto& idx : by_class)
    std::shuffle(idx.begin(), idx.end(), rng);

  // Per-class counts: positives take floor/ceil of their ideal share in
  // every subset, negatives fill the remainder, so both classes stay within
  // one item of the global prevalence.
  const auto sizes = split_sizes(n, config.split_ratios);
  const std::size_t n_pos = by_class[1].size();
  std::array<double, 3> ideal_pos;
  for (std::size_t s = 0; s < 3; ++s)
    ideal_pos[s] = static_cast<double>(sizes[s]) * static_cast<double>(n_pos) /
                   static_cast<double>(n);
  const auto pos_counts = apportion(n_pos, ideal_pos);
  std::array<std::array<std::size_t, 3>, 2> counts;
  for (std::size_t s = 0; s < 3; ++s) {
    counts[1][s] = pos_counts[s];
    counts[0][s] = sizes[s] - pos_counts[s];
  }

  std::vector<FoldSplit> folds(config.k_folds);
  for (std::size_t f = 0; f < config.k_folds; ++f) {
    auto& fold = folds[f];
    for (std::size_t c = 0; c < 2; ++c) {
      const auto& idx = by_class[c];
      const std::size_t nc = idx.size();
      const std::size_t offset = f * nc / config.k_folds;
      const std::size_t n_test = counts[c][2];
      const std::size_t n_val = counts[c][1];
      for (std::size_t k = 0; k < nc; ++k) {
        const std::size_t item = idx[(offset + k) % nc];
        if (k < n_test)
          fold.test.push_back(item);
        else if (k < n_test + n_val)
          fold.validation.push_back(item);
        else
          fold.train.push_back(item);
      }
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.validation.begin(), fold.validation.end());
    std::sort(fold.test.begin(), fold.test.end());
  }
  return folds;
}

ClassWeights
class_weights(std::span<const int> labels)
{
  require_binary(labels);
  std::size_t pos = 0;
  for (int y : labels)
    pos += static_cast<std::size_t>(y);
  const double n = static_cast<double>(labels.size());
  return { n / (2.0 * static_cast<double>(labels.size() - pos)),
           n / (2.0 * static_cast<double>(pos)) };
}

double
auc(std::span<const double> scores, std::span<const int> labels)
{
  if (scores.size() != labels.size())
    throw InputError("auc: length mismatch");
  require_binary(labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // midranks, 1-based
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]])
      ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n - n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

std::vector<RocPoint>
roc_curve(std::span<const double> scores, std::span<const int> labels)
{
  if (scores.size() != labels.size())
    throw InputError("roc: length mismatch");
  require_binary(labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t total_pos = 0;
  for (int y : labels)
    total_pos += static_cast<std::size_t>(y);
  const double np = static_cast<double>(total_pos);
  const double nn = static_cast<double>(n - total_pos);

  std::vector<RocPoint> curve;
  curve.push_back({ 0.0, 0.0, std::numeric_limits<double>::infinity() });
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    const double threshold = scores[order[i]];
    while (i < n && scores[order[i]] == threshold) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    curve.push_back(
      { static_cast<double>(fp) / nn, static_cast<double>(tp) / np, threshold });
  }
  return curve;
}

double
trapezoid_area(std::span<const RocPoint> curve)
{
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) *
            (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  return area;
}

AuxiliaryTargets
auxiliary_targets(const FeatureMatrix& matrix,
                  std::span<const std::string> lesion_ids,
                  ColumnKey key)
{
  AuxiliaryTargets t;
  t.key = key;
  t.value.assign(lesion_ids.size(), 0.0);
  t.available.assign(lesion_ids.size(), 0);
  const auto* col = matrix.column(key);
  if (!col)
    throw InputError("feature matrix has no column " + to_string(key));
  for (std::size_t i = 0; i < lesion_ids.size(); ++i) {
    const auto li = matrix.index_of(lesion_ids[i]);
    if (li && (*col)[*li]) {
      t.value[i] = *(*col)[*li];
      t.available[i] = 1;
    }
  }
  return t;
}

std::pair<double, double>
mean_std(std::span<const double> values)
{
  if (values.empty())
    return { 0.0, 0.0 };
  double sum = 0.0;
  for (double v : values)
    sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values)
    ss += (v - mean) * (v - mean);
  return { mean, std::sqrt(ss / static_cast<double>(values.size())) };
}

namespace {

std::vector<int>
gather_labels(const TrainingData& data, std::span<const std::size_t> idx)
{
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx)
    out.push_back(data.labels[i]);
  return out;
}

Eigen::MatrixXd
gather_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> idx)
{
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) =
      x.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

bool
has_both_classes(std::span<const int> labels)
{
  bool neg = false, pos = false;
  for (int y : labels)
    (y ? pos : neg) = true;
  return neg && pos;
}

// Batch targets backed by owned storage.
struct TargetBuffer
{
  std::vector<int> labels;
  std::vector<double> annotation;
  std::vector<std::uint8_t> available;

  TargetBuffer(const TrainingData& data,
               const AuxiliaryTargets* aux,
               std::span<const std::size_t> idx)
    : labels(gather_labels(data, idx))
  {
    if (!aux)
      return;
    for (std::size_t i : idx) {
      annotation.push_back(aux->value[i]);
      available.push_back(aux->available[i]);
    }
  }

  BatchTargets view() const { return { labels, annotation, available }; }
};

} // namespace

TrainResult
train(const TrainConfig& config,
      const TrainingData& data,
      const AuxiliaryTargets* aux,
      const FoldSplit& split,
      std::uint64_t member)
{
  config.validate();
  const auto n = static_cast<std::size_t>(data.x.rows());
  if (data.labels.size() != n)
    throw InputError("one label per feature row required");
  if (aux && (aux->value.size() != n || aux->available.size() != n))
    throw InputError("auxiliary targets must align with the feature rows");
  if (split.train.empty())
    throw InputError("empty training subset");
  if (!data.x.allFinite())
    throw InputError("feature matrix contains non-finite entries");

  const auto train_labels = gather_labels(data, split.train);
  LossOptions options;
  options.weights = config.loss_weights;
  options.class_weights = class_weights(train_labels);
  options.auxiliary = aux != nullptr;
  const RmspropConfig opt{ config.learning_rate, config.rmsprop_decay,
                           config.rmsprop_epsilon };

  const NetworkShape shape{ static_cast<std::size_t>(data.x.cols()),
                            config.hidden1, config.hidden2 };
  TrainResult result;
  ModelParams params =
    ModelParams::random(shape, derive_seed(config.seed, member, 1));
  RmspropState state;
  std::mt19937_64 rng(derive_seed(config.seed, member, 2));

  const Eigen::MatrixXd x_train = gather_rows(data.x, split.train);
  const TargetBuffer train_targets(data, aux, split.train);
  const Eigen::MatrixXd x_val = gather_rows(data.x, split.validation);
  const auto val_labels = gather_labels(data, split.validation);
  const bool can_select = has_both_classes(val_labels);

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  double best_auc = -1.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<std::size_t> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k)
        batch.push_back(split.train[order[k]]);
      const Eigen::MatrixXd xb = gather_rows(data.x, batch);
      const TargetBuffer tb(data, aux, batch);
      const auto g = backward(params, xb, tb.view(), options);
      rmsprop_step(params, g.gradient, state, opt);
    }
    if (!params.data().allFinite())
      throw Error("training diverged: non-finite parameters");

    EpochRecord rec;
    rec.train_loss = loss(params, x_train, train_targets.view(), options);
    if (can_select) {
      const auto out = forward(params, x_val);
      rec.val_auc = auc(std::span(out.probability.data(),
                                  static_cast<std::size_t>(out.probability.size())),
                        val_labels);
    }
    result.history.push_back(rec);
    // Without a two-class validation subset the last epoch is kept.
    if (!can_select || rec.val_auc > best_auc) {
      best_auc = rec.val_auc;
      result.model = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

EvalReport
cross_validate(const TrainConfig& config,
               const TrainingData& data,
               const std::vector<AuxiliaryTargets>& aux)
{
  config.validate();
  const auto splits = stratified_splits(data.labels, config);
  const std::size_t n_members = aux.empty() ? 1 : aux.size();

  struct Job
  {
    std::size_t fold, member;
  };
  std::vector<Job> jobs;
  for (std::size_t f = 0; f < splits.size(); ++f)
    for (std::size_t m = 0; m < n_members; ++m)
      jobs.push_back({ f, m });

  auto trained = parallel_map<TrainResult>(
    jobs.size(), config.threads, [&](std::size_t j) {
      const auto [f, m] = jobs[j];
      return train(config, data, aux.empty() ? nullptr : &aux[m], splits[f],
                   f * 64 + m);
    });

  EvalReport report;
  report.config = config;
  for (std::size_t m = 0; m < n_members; ++m)
    report.members.push_back(aux.empty() ? "baseline" : to_string(aux[m].key));
  for (std::size_t f = 0; f < splits.size(); ++f) {
    const auto& test = splits[f].test;
    const Eigen::MatrixXd x_test = gather_rows(data.x, test);
    const auto y_test = gather_labels(data, test);
    FoldReport fold;
    std::vector<ModelParams> members;
    for (std::size_t m = 0; m < n_members; ++m) {
      const auto& r = trained[f * n_members + m];
      members.push_back(r.model);
      fold.best_epoch.push_back(r.best_epoch);
      const auto out = forward(r.model, x_test);
      fold.member_auc.push_back(
        auc(std::span(out.probability.data(),
                      static_cast<std::size_t>(out.probability.size())),
            y_test));
    }
    const Eigen::VectorXd p = ensemble_predict(members, x_test);
    const std::span scores(p.data(), static_cast<std::size_t>(p.size()));
    fold.auc = auc(scores, y_test);
    fold.roc = roc_curve(scores, y_test);
    report.per_fold_auc.push_back(fold.auc);
    report.folds.push_back(std::move(fold));
    report.models.push_back(std::move(members));
  }
  std::tie(report.mean, report.std) = mean_std(report.per_fold_auc);
  return report;
}

nlohmann::json
EvalReport::to_json() const
{
  nlohmann::json members_json = nlohmann::json::array();
  for (std::size_t m = 0; m < members.size(); ++m) {
    std::vector<double> aucs;
    std::vector<std::size_t> epochs;
    for (const auto& f : folds) {
      aucs.push_back(f.member_auc[m]);
      epochs.push_back(f.best_epoch[m]);
    }
    const auto [mu, sd] = mean_std(aucs);
    members_json.push_back({ { "auxiliary", members[m] },
                             { "per_fold_auc", aucs },
                             { "mean", mu },
                             { "std", sd },
                             { "best_epoch", epochs } });
  }
  return { { "per_fold_auc", per_fold_auc },
           { "mean", mean },
           { "std", std },
           { "members", members_json },
           { "config", config.to_json() } };
}

nlohmann::json
model_to_json(const ModelParams& params)
{
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& b : params.blocks()) {
    const std::span<const double> values(params.data().data() + b.offset,
                                         b.rows * b.cols);
    layers.push_back({ { "name", b.name },
                       { "rows", b.rows },
                       { "cols", b.cols },
                       { "data", encode_array(values) } });
  }
  const auto& s = params.shape();
  return { { "format", "lesionkit-model" },
           { "version", 1 },
           { "shape",
             { { "input", s.input },
               { "hidden1", s.hidden1 },
               { "hidden2", s.hidden2 } } },
           { "layers", layers } };
}

ModelParams
model_from_json(const nlohmann::json& j)
{
  try {
    if (j.at("format") != "lesionkit-model" || j.at("version") != 1)
      throw InputError("unsupported model format");
    NetworkShape shape;
    const auto& s = j.at("shape");
    s.at("input").get_to(shape.input);
    s.at("hidden1").get_to(shape.hidden1);
    s.at("hidden2").get_to(shape.hidden2);
    ModelParams params(shape);
    const auto blocks = params.blocks();
    const auto& layers = j.at("layers");
    if (layers.size() != blocks.size())
      throw InputError("model layer count mismatch");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& layer = layers[i];
      const auto& b = blocks[i];
      if (layer.at("name") != b.name || layer.at("rows") != b.rows ||
          layer.at("cols") != b.cols)
        throw InputError(std::string("model layer mismatch at ") + b.name);
      const auto values = decode_array(layer.at("data").get<std::string>());
      if (values.size() != b.rows * b.cols)
        throw InputError(std::string("model layer size mismatch at ") + b.name);
      std::copy(values.begin(), values.end(), params.data().data() + b.offset);
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

} // namespace lesionkit
