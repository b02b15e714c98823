#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsvr/error.hpp"
#include "qsvr/feature_store.hpp"
#include "qsvr/mccv.hpp"
#include "qsvr/metrics.hpp"
#include "qsvr/model_io.hpp"
#include "qsvr/random.hpp"
#include "qsvr/selection.hpp"
#include "qsvr/svr.hpp"

namespace qsvr {

struct PipelineOptions {
  Method method = Method::Baseline;
  HyperGrid grid;  // empty: default grid for `method`
  TrainOptions train;
  MccvOptions mccv;
  std::size_t features = 6;
  double model_frac = 0.8;
  std::uint64_t seed = 0;
};

struct DataSplit {
  std::vector<std::size_t> model;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Seeded shuffle, first round(frac * n) indices form the model split.
inline DataSplit split_model_test(std::size_t n, double model_frac, std::uint64_t seed) {
  if (!(model_frac > 0.0 && model_frac < 1.0)) throw InvalidInput("split: model fraction must be in (0, 1)");
  const auto m = static_cast<std::size_t>(std::llround(model_frac * static_cast<double>(n)));
  if (m < 1 || m >= n) throw InvalidInput("split: " + std::to_string(n) + " samples cannot be split " +
                                          std::to_string(m) + "/" + std::to_string(n - m));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, {0x5b1f}));
  shuffle(idx, rng);
  DataSplit s{{idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m)},
              {idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end()}};
  std::sort(s.model.begin(), s.model.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

/// Tag identifying the exact sample set a selection was computed from.
inline std::string provenance_tag(const FeatureStore& store) {
  std::uint64_t h = fnv1a("selection");
  for (const auto& r : store.rows) h = fnv1a(r.image + '\n', h);
  return hex64(h);
}

struct FeatureChoice {
  std::vector<std::size_t> indices;
  std::string tag;
  bool fallback = false;  // constant targets: first `count` columns
};

inline FeatureChoice choose_features(const FeatureStore& store, std::size_t ell, std::size_t count) {
  FeatureChoice c;
  c.tag = provenance_tag(store);
  try {
    c.indices = pearson_select(store.feature_matrix(), store.target_column(ell), count).indices;
  } catch (const DegenerateData&) {
    if (count < 1 || count > std::min(kMaxSelected, store.feature_count))
      throw InvalidInput("feature count out of range");
    c.fallback = true;
    for (std::size_t i = 0; i < count; ++i) c.indices.push_back(i);
  }
  return c;
}

/// Model and selection metadata for one coordinate sub-task.
struct SubTaskModel {
  std::size_t ell = 0;
  FeatureChoice features;
  HyperTuple tuple;
  Vector cv_scores;
  double cv_score = 0.0;
  bool cv_converged = true;
  std::optional<SvrModel> model;
};

struct LandmarkModels {
  std::size_t landmarks = 0;
  Method method = Method::Baseline;
  std::uint64_t seed = 0;
  std::vector<std::string> model_images;
  std::vector<std::string> test_images;
  std::vector<SubTaskModel> tasks;

  bool converged() const {
    for (const auto& t : tasks)
      if (!t.cv_converged || (t.model && !t.model->metadata.converged)) return false;
    return true;
  }
};

/// Per sub-task: feature selection on the model split, MCCV over the grid,
/// then (when `final_fit`) training on the whole model split with the winner.
inline LandmarkModels train_landmark_models(const FeatureStore& store, const PipelineOptions& opts,
                                            bool final_fit = true) {
  if (store.landmarks == 0 || store.rows.empty()) throw InvalidInput("train: empty feature store");
  const HyperGrid grid = opts.grid.tuples.empty() ? HyperGrid::default_for(opts.method) : opts.grid;
  const DataSplit split = split_model_test(store.rows.size(), opts.model_frac, opts.seed);
  const FeatureStore model_rows = store.subset(split.model);

  LandmarkModels out;
  out.landmarks = store.landmarks;
  out.method = opts.method;
  out.seed = opts.seed;
  for (std::size_t i : split.model) out.model_images.push_back(store.rows[i].image);
  for (std::size_t i : split.test) out.test_images.push_back(store.rows[i].image);

  TrainOptions train_opts = opts.train;
  train_opts.method = opts.method;
  for (std::size_t ell = 0; ell < store.subtasks(); ++ell) {
    SubTaskModel task;
    task.ell = ell;
    task.features = choose_features(model_rows, ell, opts.features);
    const TrainingSet data(select_columns(model_rows.feature_matrix(), task.features.indices),
                           model_rows.target_column(ell));
    MccvOptions mo = opts.mccv;
    mo.seed = derive_seed(opts.seed, {ell, 1});
    const MccvResult cv = mccv(data, grid, train_opts, mo);
    task.tuple = cv.tuple;
    task.cv_scores = cv.scores;
    task.cv_score = cv.scores[cv.best];
    task.cv_converged = cv.converged;
    if (final_fit) {
      TrainOptions fo = train_opts;
      fo.sa.seed = derive_seed(opts.seed, {ell, 2});
      task.model = train(data, task.tuple.params(), fo);
    }
    out.tasks.push_back(std::move(task));
  }
  return out;
}

inline FeatureStore test_rows(const FeatureStore& store, const LandmarkModels& models) {
  FeatureStore s{store.landmarks, store.feature_count, {}};
  for (const auto& name : models.test_images) {
    const auto it = std::find_if(store.rows.begin(), store.rows.end(), [&](const FeatureRow& r) { return r.image == name; });
    if (it == store.rows.end()) throw InvalidInput("evaluate: test image " + name + " missing from the feature store");
    s.rows.push_back(*it);
  }
  return s;
}

/// Predicted raw-frame shape for one row.
inline Vector predict_shape(const LandmarkModels& models, const FeatureRow& row) {
  Vector s(models.tasks.size());
  for (const auto& t : models.tasks) {
    if (!t.model) throw InvalidInput("predict: sub-task " + std::to_string(t.ell) + " has no trained model");
    const Vector x = select_columns({row.features}, t.features.indices).front();
    s[t.ell] = predict(*t.model, x);
  }
  return rescale_shape(s, row.box);
}

enum class DMode { Box, InterOcular };

inline std::string_view to_string(DMode m) { return m == DMode::Box ? "box" : "iod"; }

inline DMode parse_d_mode(std::string_view s) {
  if (s == "box") return DMode::Box;
  if (s == "iod") return DMode::InterOcular;
  throw InvalidInput("unknown d-mode '" + std::string(s) + "' (expected box or iod)");
}

/// Error normaliser: face-box width, or distance between the first two true
/// landmarks (the eye centres in the five-point layout).
inline double normaliser(const FeatureRow& row, DMode mode) {
  if (mode == DMode::Box) return row.box[2] - row.box[0];
  if (row.shape.size() < 4) throw InvalidInput("iod normaliser needs at least two landmarks");
  return std::hypot(row.shape[0] - row.shape[2], row.shape[1] - row.shape[3]);
}

struct LandmarkStats {
  std::string label;
  Vector errors;
  double mnde = 0.0;
  double variance = 0.0;
  double stddev = 0.0;
  double fr = 0.0;
};

inline LandmarkStats landmark_stats(std::string label, Vector errors, double e_th) {
  LandmarkStats s;
  s.label = std::move(label);
  s.mnde = mnde(errors);
  s.variance = variance(errors);
  s.stddev = std::sqrt(s.variance);
  s.fr = failure_rate(errors, e_th);
  s.errors = std::move(errors);
  return s;
}

struct EvaluationReport {
  double e_th = kDefaultFailThreshold;
  DMode d_mode = DMode::Box;
  std::vector<std::string> images;
  std::vector<LandmarkStats> landmarks;
  LandmarkStats aggregate;  // over the union of all landmark errors
};

struct EvalOptions {
  double e_th = kDefaultFailThreshold;
  DMode d_mode = DMode::Box;
};

inline EvaluationReport evaluate(const LandmarkModels& models, const FeatureStore& test, const EvalOptions& opts = {}) {
  if (test.rows.empty()) throw InvalidInput("evaluate: empty test set");
  if (models.tasks.size() != 2 * models.landmarks) throw InvalidInput("evaluate: models do not cover all coordinates");
  EvaluationReport rep;
  rep.e_th = opts.e_th;
  rep.d_mode = opts.d_mode;
  std::vector<Vector> errs(models.landmarks);
  for (const auto& row : test.rows) {
    if (row.shape.size() != 2 * models.landmarks) throw InvalidInput("evaluate: missing annotations for " + row.image);
    const Vector pred = predict_shape(models, row);
    const double d = normaliser(row, opts.d_mode);
    for (std::size_t k = 0; k < models.landmarks; ++k)
      errs[k].push_back(
          detection_error({row.shape[2 * k], row.shape[2 * k + 1]}, {pred[2 * k], pred[2 * k + 1]}, d));
    rep.images.push_back(row.image);
  }
  Vector all;
  for (std::size_t k = 0; k < models.landmarks; ++k) {
    all.insert(all.end(), errs[k].begin(), errs[k].end());
    rep.landmarks.push_back(landmark_stats(std::to_string(k + 1), std::move(errs[k]), opts.e_th));
  }
  rep.aggregate = landmark_stats("1-" + std::to_string(models.landmarks), std::move(all), opts.e_th);
  return rep;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

/// Columns landmark, mnde_pct, stddev, fr_pct, n; the last row aggregates.
inline std::string report_csv(const EvaluationReport& r) {
  std::string out = "landmark,mnde_pct,stddev,fr_pct,n\n";
  auto row = [&](const LandmarkStats& s) {
    out += s.label + ',' + detail::fixed(100.0 * s.mnde, 4) + ',' + detail::fixed(s.stddev, 6) + ',' +
           detail::fixed(100.0 * s.fr, 4) + ',' + std::to_string(s.errors.size()) + '\n';
  };
  for (const auto& s : r.landmarks) row(s);
  row(r.aggregate);
  return out;
}

/// Long form: landmark, image, e.
inline std::string errors_csv(const EvaluationReport& r) {
  std::string out = "landmark,image,e\n";
  for (const auto& s : r.landmarks)
    for (std::size_t i = 0; i < s.errors.size(); ++i) out += s.label + ',' + r.images[i] + ',' + format_number(s.errors[i]) + '\n';
  return out;
}

inline std::string report_table(const EvaluationReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %18s %8s %6s\n", "landmark", "MNDE % (stddev)", "FR %", "n");
  out += buf;
  auto row = [&](const LandmarkStats& s) {
    const std::string m = detail::fixed(100.0 * s.mnde, 2) + " (" + detail::fixed(s.stddev, 2) + ")";
    std::snprintf(buf, sizeof buf, "%-10s %18s %8s %6zu\n", s.label.c_str(), m.c_str(),
                  detail::fixed(100.0 * s.fr, 2).c_str(), s.errors.size());
    out += buf;
  };
  for (const auto& s : r.landmarks) row(s);
  row(r.aggregate);
  out += "e_th = " + detail::fixed(r.e_th, 3) + ", d = " + std::string(r.d_mode == DMode::Box ? "face-box width" : "inter-ocular distance") + '\n';
  return out;
}

inline std::string tuple_row(const HyperTuple& t) {
  return format_number(t.eta) + ',' + (t.gamma ? format_number(*t.gamma) : "") + ',' +
         (t.encoding ? std::to_string(t.encoding->bits) : "") + ',' +
         (t.encoding ? std::to_string(t.encoding->frac_bits) : "") + ',' + format_number(t.lambda) + ',' +
         format_number(t.epsilon);
}

/// Selected tuple and features per coordinate, x then y for each landmark.
inline std::string selection_csv(const LandmarkModels& m) {
  std::string out = "ell,landmark,axis,eta,gamma,bits,frac_bits,lambda,epsilon,cv_score,features,selection_tag\n";
  for (const auto& t : m.tasks) {
    std::string feats;
    for (std::size_t i = 0; i < t.features.indices.size(); ++i) feats += (i ? " " : "") + std::to_string(t.features.indices[i]);
    out += std::to_string(t.ell) + ',' + std::to_string(t.ell / 2 + 1) + ',' + (t.ell % 2 == 0 ? "x" : "y") + ',' +
           tuple_row(t.tuple) + ',' + format_number(t.cv_score) + ',' + feats + ',' + t.features.tag + '\n';
  }
  return out;
}

inline nlohmann::json tuple_to_json(const HyperTuple& t) {
  nlohmann::json j = {{"eta", t.eta}, {"lambda", t.lambda}, {"epsilon", t.epsilon}};
  j["gamma"] = t.gamma ? nlohmann::json(*t.gamma) : nlohmann::json(nullptr);
  j["encoding"] = t.encoding ? nlohmann::json{{"bits", t.encoding->bits}, {"frac_bits", t.encoding->frac_bits}}
                             : nlohmann::json(nullptr);
  return j;
}

inline HyperTuple tuple_from_json(const nlohmann::json& j) {
  HyperTuple t;
  t.eta = j.at("eta").get<double>();
  t.lambda = j.at("lambda").get<double>();
  t.epsilon = j.at("epsilon").get<double>();
  if (!j.at("gamma").is_null()) t.gamma = j["gamma"].get<double>();
  if (!j.at("encoding").is_null())
    t.encoding = Encoding{j["encoding"].at("bits").get<int>(), j["encoding"].at("frac_bits").get<int>()};
  return t;
}

inline std::string model_file_name(std::size_t ell) { return "model_" + std::to_string(ell) + ".json"; }

/// Writes landmarks.json (split and selection metadata) and one model file per sub-task.
inline void save_landmark_models(const std::filesystem::path& dir, const LandmarkModels& m) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = {{"format_version", kModelFormatVersion},
                             {"landmarks", m.landmarks},
                             {"method", std::string(to_string(m.method))},
                             {"seed", m.seed},
                             {"model_images", m.model_images},
                             {"test_images", m.test_images}};
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : m.tasks) {
    tasks.push_back({{"ell", t.ell},
                     {"features", t.features.indices},
                     {"selection_tag", t.features.tag},
                     {"selection_fallback", t.features.fallback},
                     {"tuple", tuple_to_json(t.tuple)},
                     {"cv_score", t.cv_score},
                     {"cv_scores", t.cv_scores},
                     {"cv_converged", t.cv_converged},
                     {"model", t.model ? nlohmann::json(model_file_name(t.ell)) : nlohmann::json(nullptr)}});
    if (t.model) save_model((dir / model_file_name(t.ell)).string(), *t.model);
  }
  manifest["tasks"] = std::move(tasks);
  std::ofstream os(dir / "landmarks.json");
  if (!os) throw InvalidInput("cannot write " + (dir / "landmarks.json").string());
  os << manifest.dump(1) << '\n';
}

inline LandmarkModels load_landmark_models(const std::filesystem::path& dir) {
  const std::string path = (dir / "landmarks.json").string();
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot read " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, e.byte, e.what());
  }
  if (!j.is_object() || !j.contains("format_version") || j["format_version"] != kModelFormatVersion)
    throw CompatibilityError(path + ": unsupported format_version");
  try {
    LandmarkModels m;
    m.landmarks = j.at("landmarks").get<std::size_t>();
    m.method = parse_method(j.at("method").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.model_images = j.at("model_images").get<std::vector<std::string>>();
    m.test_images = j.at("test_images").get<std::vector<std::string>>();
    for (const auto& t : j.at("tasks")) {
      SubTaskModel s;
      s.ell = t.at("ell").get<std::size_t>();
      s.features.indices = t.at("features").get<std::vector<std::size_t>>();
      s.features.tag = t.at("selection_tag").get<std::string>();
      s.features.fallback = t.at("selection_fallback").get<bool>();
      s.tuple = tuple_from_json(t.at("tuple"));
      s.cv_score = t.at("cv_score").get<double>();
      s.cv_scores = t.at("cv_scores").get<Vector>();
      s.cv_converged = t.at("cv_converged").get<bool>();
      if (!t.at("model").is_null()) s.model = load_model((dir / t["model"].get<std::string>()).string());
      m.tasks.push_back(std::move(s));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path + ": malformed manifest: " + e.what());
  }
}

}  // namespace qsvr
