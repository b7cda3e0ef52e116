// lesionkit command-line front end: a file-based pipeline
//   synth -> annotate -> aggregate -> analyze -> train / evaluate
// Exit codes: 0 success, 1 internal error, 2 usage or input error.

#include "lesionkit/aggregate.hpp"
#include "lesionkit/autoann.hpp"
#include "lesionkit/csv.hpp"
#include "lesionkit/dataset.hpp"
#include "lesionkit/error.hpp"
#include "lesionkit/features.hpp"
#include "lesionkit/report.hpp"
#include "lesionkit/stats.hpp"
#include "lesionkit/synthetic.hpp"
#include "lesionkit/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lesionkit;

namespace {

struct GlobalOptions
{
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out = ".";
  std::string config_path;
  bool randomize = false;
  std::string auxiliary;
  bool ensemble = false;
  std::size_t k_folds = 0; // 0: keep config value
  unsigned threads = 1;
};

void
require_file(const fs::path& path)
{
  std::error_code ec;
  if (!fs::is_regular_file(path, ec))
    throw InputError("input file not found: " + path.string());
}

json
load_run_config(const GlobalOptions& g)
{
  if (g.config_path.empty())
    return json::object();
  require_file(g.config_path);
  try {
    auto j = json::parse(csv::read_text(g.config_path));
    if (!j.is_object())
      throw InputError(g.config_path + ": config must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw InputError(g.config_path + ": " + e.what());
  }
}

std::uint64_t
effective_seed(const GlobalOptions& g, const json& run)
{
  if (g.seed_given)
    return g.seed;
  if (run.contains("seed"))
    return run.at("seed").get<std::uint64_t>();
  return g.seed;
}

fs::path
prepare_out(const GlobalOptions& g, const json& run)
{
  fs::path out = g.out;
  if (g.out == "." && run.contains("out"))
    out = run.at("out").get<std::string>();
  fs::create_directories(out);
  return out;
}

void
write_report(const fs::path& path, const json& j)
{
  csv::write_text(path, dump_json(j));
}

json
diagnostics_json(const std::vector<Diagnostic>& items)
{
  json out = json::array();
  for (const auto& d : items)
    out.push_back({ { "lesion_id", d.lesion_id }, { "message", d.message } });
  return out;
}

// --- annotate -------------------------------------------------------------

int
cmd_annotate(const GlobalOptions& g,
             const std::string& manifest_path,
             const std::string& palette_arg)
{
  const json run = load_run_config(g);
  require_file(manifest_path);
  std::string palette_path = palette_arg;
  if (palette_path.empty() && run.contains("palette"))
    palette_path = run.at("palette").get<std::string>();
  if (!palette_path.empty())
    require_file(palette_path);
  const auto seed = effective_seed(g, run);
  const auto out = prepare_out(g, run);

  const auto manifest = load_manifest(manifest_path);
  const auto palette = palette_path.empty() ? ReferencePalette::standard()
                                            : ReferencePalette::load(palette_path);
  const auto batch = annotate_batch(manifest, palette, g.threads);
  save_annotations(batch.table, out / "annotations.csv");

  for (const auto& w : batch.warnings)
    std::cerr << "warning: " << w.lesion_id << ": " << w.message << "\n";
  for (const auto& e : batch.errors)
    std::cerr << "error: " << e.lesion_id << ": " << e.message << "\n";

  std::vector<fs::path> inputs = { manifest_path };
  if (!palette_path.empty())
    inputs.emplace_back(palette_path);
  json report = { { "provenance", provenance(seed, inputs) },
                  { "rows", batch.table.size() },
                  { "warnings", diagnostics_json(batch.warnings) },
                  { "errors", diagnostics_json(batch.errors) } };
  write_report(out / "annotate_report.json", report);
  return 0;
}

// --- aggregate ------------------------------------------------------------

int
cmd_aggregate(const GlobalOptions& g,
              const std::vector<std::string>& annotation_paths,
              bool per_annotator)
{
  const json run = load_run_config(g);
  for (const auto& p : annotation_paths)
    require_file(p);
  const auto seed = effective_seed(g, run);

  AnnotationTable table;
  for (const auto& p : annotation_paths) {
    auto part = load_annotations(p);
    table.rows.insert(table.rows.end(), part.rows.begin(), part.rows.end());
  }
  if (table.empty())
    throw InputError("no annotation rows in input");
  const auto out = prepare_out(g, run);

  std::vector<std::string> warnings;
  const auto matrix =
    aggregate(table,
              per_annotator ? StandardizationScope::annotator
                            : StandardizationScope::pool,
              &warnings);
  export_matrix(matrix, out / "features.csv");
  for (const auto& w : warnings)
    std::cerr << "warning: " << w << "\n";

  std::vector<fs::path> inputs(annotation_paths.begin(), annotation_paths.end());
  json stats = json::object();
  for (const auto& [key, s] : matrix.stats)
    stats[to_string(key)] = { { "mean", s.mean },
                              { "std", s.std },
                              { "count", s.count },
                              { "available", matrix.available_count(key) } };
  json report = { { "provenance", provenance(seed, inputs) },
                  { "scope", per_annotator ? "annotator" : "pool" },
                  { "lesions", matrix.size() },
                  { "columns", stats },
                  { "warnings", warnings } };
  write_report(out / "aggregate_report.json", report);
  return 0;
}

// --- shared: labels aligned to the feature matrix -------------------------

std::vector<int>
labels_for(const FeatureMatrix& matrix, const DatasetManifest& manifest)
{
  std::map<std::string, int> diag;
  for (const auto& r : manifest.records)
    diag[r.lesion_id] = r.diagnosis;
  std::vector<int> labels;
  labels.reserve(matrix.size());
  for (const auto& id : matrix.lesion_ids) {
    auto it = diag.find(id);
    if (it == diag.end())
      throw InputError("no diagnosis label for lesion " + id +
                       " (absent from manifest)");
    labels.push_back(it->second);
  }
  return labels;
}

// --- analyze --------------------------------------------------------------

int
cmd_analyze(const GlobalOptions& g,
            const std::string& features_path,
            const std::string& manifest_path)
{
  const json run = load_run_config(g);
  require_file(features_path);
  require_file(manifest_path);
  const auto seed = effective_seed(g, run);

  const auto matrix = import_matrix(features_path);
  const auto manifest = load_manifest(manifest_path);
  const auto labels = labels_for(matrix, manifest);
  const auto out = prepare_out(g, run);

  json corr = json::object();
  for (const auto& [key, cell] : correlation_with_label(matrix, labels)) {
    json entry;
    if (cell.result)
      entry = { { "r", cell.result->r },
                { "n", cell.result->n },
                { "band", to_string(cell.result->band) } };
    else
      entry = { { "r", nullptr }, { "error", cell.reason } };
    corr[std::string(to_string(key.source))][std::string(to_string(key.feature))] =
      entry;
  }

  json emitted = json::array();
  for (Feature f : kAllFeatures) {
    std::size_t sources = 0;
    for (const auto& [key, col] : matrix.columns)
      sources += key.feature == f ? 1 : 0;
    if (sources < 2)
      continue;
    const auto agreement = agreement_matrix(matrix, f);
    std::string text = "source";
    for (Source s : agreement.sources)
      text += "," + std::string(to_string(s));
    text += "\n";
    for (std::size_t i = 0; i < agreement.sources.size(); ++i) {
      text += std::string(to_string(agreement.sources[i]));
      for (const auto& cell : agreement.cells[i])
        text += "," + (cell.result ? csv::format_double(cell.result->r) : "");
      text += "\n";
    }
    const std::string name = "agreement_" + std::string(to_string(f)) + ".csv";
    csv::write_text(out / name, text);
    emitted.push_back(name);
  }

  json skipped = json::array();
  for (const auto& [key, col] : matrix.columns) {
    const std::string name = "raincloud_" + std::string(to_string(key.source)) +
                             "_" + std::string(to_string(key.feature)) + ".csv";
    try {
      csv::write_text(out / name,
                      raincloud_to_csv(raincloud_export(matrix, key, labels)));
      emitted.push_back(name);
    } catch (const InputError& e) {
      std::cerr << "warning: " << name << ": " << e.what() << "\n";
      skipped.push_back({ { "file", name }, { "reason", e.what() } });
    }
  }

  json report = { { "provenance", provenance(seed, { features_path, manifest_path }) },
                  { "correlations", corr },
                  { "files", emitted },
                  { "skipped", skipped } };
  write_report(out / "correlations.json", report);
  return 0;
}

// --- train / evaluate -----------------------------------------------------

struct TrainingInputs
{
  TrainingData data;
  std::vector<std::string> lesion_ids;
  std::optional<FeatureScaler> scaler;
};

TrainingInputs
training_inputs(const DatasetManifest& manifest, const std::string& vectors_path)
{
  TrainingInputs in;
  for (const auto& r : manifest.records) {
    in.lesion_ids.push_back(r.lesion_id);
    in.data.labels.push_back(r.diagnosis);
  }
  std::vector<std::vector<double>> rows;
  if (!vectors_path.empty()) {
    const auto vectors =
      vectors_from_csv(csv::read_text(vectors_path), vectors_path);
    std::map<std::string, const FeatureVector*> by_id;
    for (const auto& v : vectors)
      by_id[v.lesion_id] = &v;
    for (const auto& id : in.lesion_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw InputError(vectors_path + ": no feature vector for lesion " + id);
      rows.push_back(it->second->x);
    }
  } else {
    std::vector<RasterImage> images;
    std::vector<std::optional<BinaryMask>> masks;
    for (const auto& r : manifest.records) {
      images.push_back(decode_image(csv::read_bytes(r.image_path)));
      if (r.mask_path)
        masks.emplace_back(decode_mask(csv::read_bytes(*r.mask_path)));
      else
        masks.emplace_back(std::nullopt);
    }
    FeatureScaler scaler;
    rows = build_features(images, masks, &scaler);
    in.scaler = scaler;
  }
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  in.data.x.resize(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d)
      throw InputError("inconsistent feature vector dimension");
    for (std::size_t j = 0; j < d; ++j)
      in.data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        rows[i][j];
  }
  return in;
}

TrainConfig
train_config(const GlobalOptions& g, const json& run, std::uint64_t seed)
{
  TrainConfig config;
  // CLI default suited to the dense network; the library keeps 2e-5.
  config.learning_rate = 3e-4;
  if (run.contains("train"))
    config = TrainConfig::from_json(run.at("train"), config);
  for (const char* key : { "k_folds", "ensemble", "auxiliary" })
    if (run.contains(key))
      config = TrainConfig::from_json({ { key, run.at(key) } }, config);
  config.seed = seed;
  if (!g.auxiliary.empty()) {
    config.auxiliary.clear();
    std::string_view rest = g.auxiliary;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      config.auxiliary.push_back(parse_column_key(rest.substr(0, comma)));
      rest = comma == std::string_view::npos ? "" : rest.substr(comma + 1);
    }
  }
  if (g.ensemble)
    config.ensemble = true;
  if (g.k_folds)
    config.k_folds = g.k_folds;
  config.threads = g.threads;
  config.validate();
  return config;
}

std::string
roc_csv(const std::vector<RocPoint>& roc)
{
  std::string out = "fpr,tpr,threshold\n";
  for (const auto& p : roc)
    out += csv::format_double(p.fpr) + "," + csv::format_double(p.tpr) + "," +
           csv::format_double(p.threshold) + "\n";
  return out;
}

int
cmd_fit(const GlobalOptions& g,
        const std::string& features_path,
        const std::string& manifest_path,
        const std::string& vectors_path,
        bool evaluate)
{
  const json run = load_run_config(g);
  require_file(features_path);
  require_file(manifest_path);
  if (!vectors_path.empty())
    require_file(vectors_path);
  const auto seed = effective_seed(g, run);
  TrainConfig config = train_config(g, run, seed);
  if (!evaluate)
    config.k_folds = 1;
  const bool randomize = g.randomize || run.value("randomize_annotations", false);

  auto matrix = import_matrix(features_path);
  const auto manifest = load_manifest(manifest_path);
  labels_for(matrix, manifest); // every annotated lesion needs a label
  if (randomize)
    matrix = permute_annotations(matrix, seed);
  const auto out = prepare_out(g, run);

  const auto inputs = training_inputs(manifest, vectors_path);
  std::vector<AuxiliaryTargets> aux;
  for (const auto& key : config.auxiliary)
    aux.push_back(auxiliary_targets(matrix, inputs.lesion_ids, key));

  const EvalReport report = cross_validate(config, inputs.data, aux);

  std::vector<fs::path> input_files = { features_path, manifest_path };
  if (!vectors_path.empty())
    input_files.emplace_back(vectors_path);
  if (!g.config_path.empty())
    input_files.emplace_back(g.config_path);

  json eval = report.to_json();
  eval["provenance"] = provenance(seed, input_files);
  eval["randomized_annotations"] = randomize;
  eval["mode"] = evaluate ? "cross_validation" : "single_split";
  eval["summary"] = csv::format_double(report.mean) + " +/- " +
                    csv::format_double(report.std);
  write_report(out / "eval.json", eval);
  for (std::size_t f = 0; f < report.folds.size(); ++f)
    csv::write_text(out / ("roc_" + std::to_string(f) + ".csv"),
                    roc_csv(report.folds[f].roc));

  if (!evaluate) {
    json members = json::array();
    for (std::size_t m = 0; m < report.members.size(); ++m)
      members.push_back({ { "auxiliary", report.members[m] },
                          { "params", model_to_json(report.models[0][m]) } });
    json model = { { "format", "lesionkit-ensemble" },
                   { "version", 1 },
                   { "combination", "mean_probability" },
                   { "members", members },
                   { "provenance", provenance(seed, input_files) } };
    if (inputs.scaler)
      model["input_scaling"] = inputs.scaler->to_json();
    write_report(out / "model.json", model);
  }
  std::cout << (evaluate ? "cross-validated AUC " : "test AUC ")
            << eval["summary"].get<std::string>() << "\n";
  return 0;
}

// --- synth ----------------------------------------------------------------

int
cmd_synth(const GlobalOptions& g, SyntheticParams params, const json& flags)
{
  const json run = load_run_config(g);
  if (run.contains("synth")) {
    const auto& s = run.at("synth");
    auto get = [&](const char* key, auto& field) {
      if (s.contains(key) && !flags.contains(key))
        s.at(key).get_to(field);
    };
    get("n", params.n);
    get("d", params.d);
    get("noise_cls", params.noise_cls);
    get("noise_ann", params.noise_ann);
    get("latent_dim", params.latent_dim);
    get("feature_noise", params.feature_noise);
    get("label_loading", params.label_loading);
    get("student_coverage", params.student_coverage);
    get("crowd_coverage", params.crowd_coverage);
  }
  params.seed = effective_seed(g, run);
  params.validate();
  const auto out = prepare_out(g, run);

  const auto ds = generate_synthetic(params);
  fs::create_directories(out / "images");
  DatasetManifest manifest;
  manifest.name = "synthetic";
  for (std::size_t i = 0; i < ds.lesion_ids.size(); ++i) {
    const auto& id = ds.lesion_ids[i];
    const auto row = ds.latent.row(static_cast<Eigen::Index>(i));
    const double z[3] = { row[0], row[1], row[2] };
    const auto [image, mask] = render_synthetic_lesion(z);
    const auto image_png = encode_png(image);
    const auto mask_png = encode_png(mask);
    const fs::path image_path = out / "images" / (id + ".png");
    const fs::path mask_path = out / "images" / (id + "_mask.png");
    csv::write_text(image_path, std::string_view(reinterpret_cast<const char*>(image_png.data()), image_png.size()));
    csv::write_text(mask_path, std::string_view(reinterpret_cast<const char*>(mask_png.data()), mask_png.size()));
    manifest.records.push_back({ id, image_path, mask_path, ds.labels[i] });
  }
  save_manifest(manifest, out / "manifest.csv");
  save_annotations(ds.annotations, out / "annotations.csv");
  export_matrix(ds.matrix, out / "features.csv");
  const auto vectors = ds.feature_vectors();
  csv::write_text(out / "vectors.csv", vectors_to_csv(vectors));

  std::size_t positives = 0;
  for (int y : ds.labels)
    positives += static_cast<std::size_t>(y);
  json report = { { "provenance", provenance(params.seed, {}) },
                  { "params",
                    { { "n", params.n },
                      { "d", params.d },
                      { "noise_cls", params.noise_cls },
                      { "noise_ann", params.noise_ann },
                      { "latent_dim", params.latent_dim },
                      { "feature_noise", params.feature_noise },
                      { "label_loading", params.label_loading },
                      { "student_coverage", params.student_coverage },
                      { "crowd_coverage", params.crowd_coverage } } },
                  { "positives", positives },
                  { "annotation_rows", ds.annotations.size() },
                  { "outputs",
                    { { "manifest.csv", sha256_file(out / "manifest.csv") },
                      { "annotations.csv", sha256_file(out / "annotations.csv") },
                      { "features.csv", sha256_file(out / "features.csv") },
                      { "vectors.csv", sha256_file(out / "vectors.csv") } } } };
  write_report(out / "synth_report.json", report);
  return 0;
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{ "lesionkit: automated ABC scoring, annotation analysis and "
                "multi-task training for skin-lesion datasets" };
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed (recorded in every report)")
    ->each([&g](const std::string&) { g.seed_given = true; });
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_flag("--randomize-annotations", g.randomize,
               "Permute auxiliary annotations across lesions before training");
  app.add_option("--auxiliary", g.auxiliary,
                 "Auxiliary targets <source:feature[,...]>");
  app.add_flag("--ensemble", g.ensemble, "One member per auxiliary target");
  app.add_option("--k-folds", g.k_folds, "Cross-validation folds");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");

  std::string manifest, palette, features, vectors;
  std::vector<std::string> annotations;
  bool per_annotator = false;
  SyntheticParams synth;
  json synth_flags = json::object();

  auto* annotate = app.add_subcommand("annotate", "Score A/B/C from images and masks");
  annotate->add_option("--manifest", manifest, "manifest.csv")->required();
  annotate->add_option("--palette", palette, "Palette JSON");

  auto* aggregate_cmd =
    app.add_subcommand("aggregate", "Standardize and average annotations per lesion");
  aggregate_cmd->add_option("--annotations", annotations, "annotations.csv (repeatable)")
    ->required();
  aggregate_cmd->add_flag("--per-annotator", per_annotator,
                          "Standardize each annotator separately");

  auto* analyze = app.add_subcommand("analyze", "Correlation, agreement and raincloud data");
  analyze->add_option("--features", features, "features.csv")->required();
  analyze->add_option("--manifest", manifest, "manifest.csv")->required();

  auto* train_cmd = app.add_subcommand("train", "Train on one stratified split");
  auto* evaluate = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
  for (auto* sub : { train_cmd, evaluate }) {
    sub->add_option("--features", features, "features.csv")->required();
    sub->add_option("--manifest", manifest, "manifest.csv")->required();
    sub->add_option("--vectors", vectors,
                    "vectors.csv (default: descriptors computed from the images)");
  }

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto track = [&synth_flags](const char* key) {
    return [&synth_flags, key](const std::string&) { synth_flags[key] = true; };
  };
  synth_cmd->add_option("--n", synth.n, "Lesions")->each(track("n"));
  synth_cmd->add_option("--d", synth.d, "Feature dimension")->each(track("d"));
  synth_cmd->add_option("--noise-cls", synth.noise_cls, "Label noise")->each(track("noise_cls"));
  synth_cmd->add_option("--noise-ann", synth.noise_ann, "Annotation noise")
    ->each(track("noise_ann"));
  synth_cmd->add_option("--latent-dim", synth.latent_dim, "Latent dimension")
    ->each(track("latent_dim"));
  synth_cmd->add_option("--feature-noise", synth.feature_noise, "Feature noise")
    ->each(track("feature_noise"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*annotate)
      return cmd_annotate(g, manifest, palette);
    if (*aggregate_cmd)
      return cmd_aggregate(g, annotations, per_annotator);
    if (*analyze)
      return cmd_analyze(g, features, manifest);
    if (*train_cmd)
      return cmd_fit(g, features, manifest, vectors, false);
    if (*evaluate)
      return cmd_fit(g, features, manifest, vectors, true);
    if (*synth_cmd)
      return cmd_synth(g, synth, synth_flags);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
