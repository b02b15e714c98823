#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qsvr/annotations.hpp"
#include "qsvr/error.hpp"
#include "qsvr/feature_store.hpp"
#include "qsvr/landmark.hpp"
#include "qsvr/parallel.hpp"
#include "qsvr/qubo.hpp"
#include "qsvr/synthetic.hpp"

namespace qsvr {

namespace fs = std::filesystem;

enum class Command { Synth, Preprocess, Train, Cv, Eval, QuboDump };

inline constexpr const char* kOutDirEnv = "QSVR_OUT_DIR";

/// Everything a command needs; all randomness derives from `seed`.
struct RunConfig {
  Command command = Command::Train;
  std::string images;       // preprocess: image directory
  std::string annotations;  // preprocess: CSV (default <images>/annotations.csv)
  std::string features;     // train/cv/eval/qubo-dump: feature store
  std::string models;       // eval: model directory (default <out>)
  std::string out = "out";

  Method method = Method::Baseline;
  std::uint64_t seed = 0;
  SaConfig sa;
  std::size_t ensemble = 20;
  std::size_t feature_count = 6;
  double epsilon = 0.1;
  double e_th = kDefaultFailThreshold;
  DMode d_mode = DMode::Box;
  MneMode mne_mode = MneMode::Abs;
  std::size_t repeats = 50;
  double train_frac = 0.10;
  double model_frac = 0.8;
  std::size_t threads = 1;
  std::size_t max_iter = 100000;
  bool strict = false;

  std::vector<double> grid_gamma, grid_eta, grid_lambda;
  std::vector<int> grid_bits, grid_frac_bits;

  // synth
  std::size_t count = 12;
  bool synth_features = false;

  // qubo-dump
  std::size_t ell = 0;
  int bits = 4;
  int frac_bits = 0;
  double eta = 4.0;
  double lambda = 1.0;

  fs::path out_dir() const {
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return out;
  }

  HyperGrid grid() const {
    if (method == Method::Baseline) {
      return HyperGrid::baseline(grid_gamma.empty() ? std::vector<double>{15, 31, 63} : grid_gamma,
                                 grid_eta.empty() ? std::vector<double>{4, 16, 64, 256} : grid_eta, epsilon);
    }
    return HyperGrid::encoded(grid_bits.empty() ? std::vector<int>{4, 5, 6} : grid_bits,
                              grid_frac_bits.empty() ? std::vector<int>{0} : grid_frac_bits,
                              grid_eta.empty() ? std::vector<double>{4, 16, 64, 256} : grid_eta,
                              grid_lambda.empty() ? std::vector<double>{1, 5, 10} : grid_lambda, epsilon);
  }

  PipelineOptions pipeline() const {
    PipelineOptions p;
    p.method = method;
    p.grid = grid();
    p.train.method = method;
    p.train.sa = sa;
    p.train.ensemble = ensemble;
    p.train.baseline_max_iter = max_iter;
    p.mccv.repeats = repeats;
    p.mccv.train_frac = train_frac;
    p.mccv.mode = mne_mode;
    p.mccv.threads = threads;
    p.features = feature_count;
    p.model_frac = model_frac;
    p.seed = seed;
    return p;
  }
};

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + path.string());
  os << text;
}

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw InvalidInput(std::string("missing ") + what + " path");
  if (!fs::exists(path)) throw InvalidInput(std::string(what) + " not found: " + path);
}

inline int finish(const RunConfig& cfg, bool converged, std::ostream& log) {
  if (converged) return 0;
  log << "warning: baseline solver hit the iteration limit before converging\n";
  return cfg.strict ? 4 : 0;
}

}  // namespace detail

/// Synthetic faces (images + annotations.csv) or a synthetic feature store.
inline int cmd_synth(const RunConfig& cfg, std::ostream& log = std::cout) {
  const fs::path out = cfg.out_dir();
  if (cfg.synth_features) {
    fs::create_directories(out);
    write_feature_store((out / "features.csv").string(), synthetic_feature_store(cfg.count, cfg.seed));
    log << "wrote " << cfg.count << " synthetic feature rows to " << (out / "features.csv").string() << '\n';
  } else {
    write_synthetic_faces(out, cfg.count, cfg.seed);
    log << "wrote " << cfg.count << " synthetic faces to " << out.string() << '\n';
  }
  return 0;
}

/// Images + annotations -> features.csv (531 LBP features and scaled targets per image).
inline int cmd_preprocess(const RunConfig& cfg, std::ostream& log = std::cout) {
  detail::require_file(cfg.images, "image directory");
  const std::string csv = cfg.annotations.empty() ? (fs::path(cfg.images) / "annotations.csv").string() : cfg.annotations;
  detail::require_file(csv, "annotation file");
  const auto rows = read_annotations(csv);

  std::set<std::string> annotated;
  for (const auto& a : rows) annotated.insert(a.image);
  std::vector<std::string> on_disk;
  for (const auto& e : fs::directory_iterator(cfg.images)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) on_disk.push_back(e.path().filename().string());
  }
  std::sort(on_disk.begin(), on_disk.end());
  for (const auto& name : on_disk)
    if (!annotated.count(name)) throw ParseError(csv, fs::file_size(csv), "no annotation row for image " + name);

  FeatureStore store{rows.front().landmarks(), kFeatureCount, std::vector<FeatureRow>(rows.size())};
  parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
    const auto path = (fs::path(cfg.images) / rows[i].image).string();
    if (!fs::exists(path)) throw InvalidInput("annotated image not found: " + path);
    store.rows[i] = preprocess_image(read_pnm(path), rows[i]);
  });
  for (const auto& a : rows)
    if (a.landmarks() != store.landmarks) throw InvalidInput("inconsistent landmark counts");

  const fs::path out = cfg.out_dir();
  fs::create_directories(out);
  write_feature_store((out / "features.csv").string(), store);
  log << "wrote " << store.rows.size() << " feature rows to " << (out / "features.csv").string() << '\n';
  return 0;
}

/// Selection, MCCV and final training for all 2L sub-tasks.
inline int cmd_train(const RunConfig& cfg, std::ostream& log = std::cout) {
  detail::require_file(cfg.features, "feature store");
  const FeatureStore store = read_feature_store(cfg.features);
  const LandmarkModels models = train_landmark_models(store, cfg.pipeline(), true);
  const fs::path out = cfg.out_dir();
  save_landmark_models(out, models);
  detail::write_text(out / "selection.csv", selection_csv(models));
  log << "trained " << models.tasks.size() << " models (" << to_string(cfg.method) << ") into " << out.string() << '\n';
  return detail::finish(cfg, models.converged(), log);
}

/// Selection and MCCV only; writes the selected-tuple table.
inline int cmd_cv(const RunConfig& cfg, std::ostream& log = std::cout) {
  detail::require_file(cfg.features, "feature store");
  const FeatureStore store = read_feature_store(cfg.features);
  const LandmarkModels models = train_landmark_models(store, cfg.pipeline(), false);
  const fs::path out = cfg.out_dir();
  fs::create_directories(out);
  detail::write_text(out / "cv_selection.csv", selection_csv(models));
  log << selection_csv(models);
  return detail::finish(cfg, models.converged(), log);
}

/// Scores trained models on their held-out split.
inline int cmd_eval(const RunConfig& cfg, std::ostream& log = std::cout) {
  detail::require_file(cfg.features, "feature store");
  const fs::path out = cfg.out_dir();
  const fs::path model_dir = cfg.models.empty() ? out : fs::path(cfg.models);
  const FeatureStore store = read_feature_store(cfg.features);
  const LandmarkModels models = load_landmark_models(model_dir);
  if (models.landmarks != store.landmarks) throw InvalidInput("eval: landmark count differs between models and features");
  const EvaluationReport rep = evaluate(models, test_rows(store, models), {cfg.e_th, cfg.d_mode});
  fs::create_directories(out);
  detail::write_text(out / "report.csv", report_csv(rep));
  detail::write_text(out / "errors.csv", errors_csv(rep));
  detail::write_text(out / "report.txt", report_table(rep));
  log << report_table(rep);
  return 0;
}

/// Text QUBO for one sub-task and tuple, built on the model split.
inline int cmd_qubo_dump(const RunConfig& cfg, std::ostream& log = std::cout) {
  detail::require_file(cfg.features, "feature store");
  const FeatureStore store = read_feature_store(cfg.features);
  if (cfg.ell >= store.subtasks()) throw InvalidInput("qubo-dump: sub-task index out of range");
  const FeatureStore model_rows = store.subset(split_model_test(store.rows.size(), cfg.model_frac, cfg.seed).model);
  const FeatureChoice choice = choose_features(model_rows, cfg.ell, cfg.feature_count);
  const TrainingSet data(select_columns(model_rows.feature_matrix(), choice.indices), model_rows.target_column(cfg.ell));
  const Encoding enc{cfg.bits, cfg.frac_bits};
  const QuboProblem q = build_qubo(build_dual(data, KernelSpec::gaussian(cfg.eta), cfg.epsilon), enc, cfg.lambda);

  const fs::path out = cfg.out_dir();
  fs::create_directories(out);
  const fs::path path = out / ("qubo_" + std::to_string(cfg.ell) + ".txt");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + path.string());
  write_qubo_text(os, q);
  log << "wrote " << q.dimension() << "-variable QUBO to " << path.string() << '\n';
  return 0;
}

inline int run_command(const RunConfig& cfg, std::ostream& log = std::cout) {
  switch (cfg.command) {
    case Command::Synth: return cmd_synth(cfg, log);
    case Command::Preprocess: return cmd_preprocess(cfg, log);
    case Command::Train: return cmd_train(cfg, log);
    case Command::Cv: return cmd_cv(cfg, log);
    case Command::Eval: return cmd_eval(cfg, log);
    case Command::QuboDump: return cmd_qubo_dump(cfg, log);
  }
  return 2;
}

/// Maps library errors onto exit codes: 2 invalid input, 3 capacity.
inline int run_guarded(const RunConfig& cfg, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  try {
    return run_command(cfg, log);
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const DegenerateData& e) {
    err << "degenerate data: " << e.what() << '\n';
    return 2;
  } catch (const CompatibilityError& e) {
    err << "incompatible artifact: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "filesystem error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace qsvr
