#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "qsvr/landmark.hpp"
#include "qsvr/synthetic.hpp"

using namespace qsvr;

namespace {

PipelineOptions quick_baseline(std::uint64_t seed = 3) {
  PipelineOptions p;
  p.method = Method::Baseline;
  p.grid = HyperGrid::baseline({15, 63}, {4, 64});
  p.mccv.repeats = 4;
  p.mccv.train_frac = 0.5;
  p.features = 3;
  p.seed = seed;
  return p;
}

// Models predicting a constant scaled shape regardless of the input.
LandmarkModels constant_models(const Vector& scaled) {
  LandmarkModels m;
  m.landmarks = scaled.size() / 2;
  for (std::size_t ell = 0; ell < scaled.size(); ++ell) {
    SubTaskModel t;
    t.ell = ell;
    t.features.indices = {0};
    SvrModel s;
    s.kernel = KernelSpec::gaussian(1.0);
    s.support_xs = {{0.0}};
    s.alphas = {0.0, 0.0};
    s.offset = scaled[ell];
    t.model = s;
    m.tasks.push_back(t);
  }
  return m;
}

FeatureStore constant_shape_store(std::size_t n, const Vector& shape, const Box& box) {
  FeatureStore s{shape.size() / 2, 2, {}};
  for (std::size_t i = 0; i < n; ++i) {
    FeatureRow r;
    r.image = "img" + std::to_string(i);
    r.box = box;
    r.shape = shape;
    r.targets = scale_shape(shape, box);
    r.features = {static_cast<double>(i), 1.0};
    s.rows.push_back(r);
  }
  return s;
}

}  // namespace

TEST(Metrics, DetectionErrorExample) {
  EXPECT_DOUBLE_EQ(detection_error({0, 0}, {3, 4}, 10.0), 0.5);
  EXPECT_EQ(detection_error({1, 1}, {1, 1}, 10.0), 0.0);
  EXPECT_THROW(detection_error({0, 0}, {3, 4}, 0.0), InvalidInput);
}

TEST(Metrics, DetectionErrorIsScaleInvariant) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const Point a{uniform01(rng), uniform01(rng)}, b{uniform01(rng), uniform01(rng)};
    const double d = 0.1 + uniform01(rng), k = 0.5 + 10.0 * uniform01(rng);
    EXPECT_NEAR(detection_error({k * a.x, k * a.y}, {k * b.x, k * b.y}, k * d), detection_error(a, b, d), 1e-12);
  }
}

TEST(Metrics, MndeAndFailureRateExample) {
  const Vector e{0.05, 0.15};
  EXPECT_DOUBLE_EQ(mnde(e), 0.10);
  EXPECT_DOUBLE_EQ(failure_rate(e), 0.5);
  EXPECT_DOUBLE_EQ(variance(e), 0.0025);
  EXPECT_EQ(kDefaultFailThreshold, 0.1);
  EXPECT_EQ(failure_rate(Vector{0.1}), 0.0);
  EXPECT_EQ(failure_rate(Vector{0.0, 0.0}), 0.0);
  EXPECT_EQ(mnde(Vector{0.0, 0.0}), 0.0);
  EXPECT_THROW(mnde(Vector{}), InvalidInput);
}

TEST(Metrics, FailureRateMonotoneInThreshold) {
  Rng rng(2);
  Vector e(50);
  for (double& v : e) v = 0.3 * uniform01(rng);
  double prev = 1.0;
  for (double th = 0.01; th < 0.35; th += 0.01) {
    const double fr = failure_rate(e, th);
    EXPECT_LE(fr, prev);
    prev = fr;
  }
}

TEST(Metrics, MneExamples) {
  EXPECT_EQ(mne(Vector{45.0}, Vector{45.0}), 0.0);
  EXPECT_DOUBLE_EQ(mne(Vector{9.0, -9.0}, Vector{0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(mne(Vector{9.0, 9.0}, Vector{0.0, 0.0}), 0.1);
  EXPECT_DOUBLE_EQ(mne(Vector{9.0, -9.0}, Vector{0.0, 0.0}, 90.0, MneMode::Abs), 0.1);
  EXPECT_THROW(mne(Vector{1.0}, Vector{1.0, 2.0}), InvalidInput);
  EXPECT_EQ(parse_mne_mode("abs"), MneMode::Abs);
  EXPECT_THROW(parse_mne_mode("rms"), InvalidInput);
}

TEST(Grid, DefaultSizes) {
  EXPECT_EQ(HyperGrid::default_baseline().size(), 12u);
  EXPECT_EQ(HyperGrid::default_encoded().size(), 36u);
  for (const auto& t : HyperGrid::default_encoded().tuples) {
    ASSERT_TRUE(t.encoding.has_value());
    EXPECT_EQ(t.encoding->frac_bits, 0);
    EXPECT_EQ(t.epsilon, 0.1);
  }
  for (const auto& t : HyperGrid::default_baseline().tuples) EXPECT_TRUE(t.gamma.has_value());
}

TEST(Grid, FingerprintDependsOnContentOnly) {
  const auto g = HyperGrid::default_encoded();
  std::set<std::uint64_t> seen;
  for (const auto& t : g.tuples) seen.insert(t.fingerprint());
  EXPECT_EQ(seen.size(), g.size());
  EXPECT_EQ(g.tuples[3].fingerprint(), HyperGrid::default_encoded().tuples[3].fingerprint());
}

TEST(Mccv, SingleTupleWins) {
  const FeatureStore s = synthetic_feature_store(12, 1, 1, 10);
  const TrainingSet data(select_columns(s.feature_matrix(), std::vector<std::size_t>{0}), s.target_column(0));
  const HyperGrid g = HyperGrid::baseline({15}, {4});
  MccvOptions o;
  o.repeats = 3;
  o.train_frac = 0.5;
  const MccvResult r = mccv(data, g, {}, o);
  EXPECT_EQ(r.best, 0u);
  EXPECT_EQ(r.scores.size(), 1u);
}

TEST(Mccv, InvariantUnderGridPermutation) {
  const FeatureStore s = synthetic_feature_store(14, 2, 1, 10);
  const TrainingSet data(select_columns(s.feature_matrix(), std::vector<std::size_t>{0, 3}), s.target_column(0));
  HyperGrid g = HyperGrid::encoded({4, 5}, {0}, {4, 64}, {1, 5});
  TrainOptions to;
  to.method = Method::Annealing;
  to.sa.sweeps = 100;
  to.sa.reads = 10;
  to.sa.keep_best = 3;
  to.ensemble = 2;
  MccvOptions o;
  o.repeats = 3;
  o.train_frac = 0.5;
  o.seed = 11;
  const MccvResult a = mccv(data, g, to, o);
  HyperGrid rev = g;
  std::reverse(rev.tuples.begin(), rev.tuples.end());
  const MccvResult b = mccv(data, rev, to, o);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(a.scores[i], b.scores[g.size() - 1 - i]);
  EXPECT_EQ(a.tuple.fingerprint(), b.tuple.fingerprint());
}

TEST(Mccv, DeterministicAndThreadIndependent) {
  const FeatureStore s = synthetic_feature_store(12, 3, 1, 10);
  const TrainingSet data(select_columns(s.feature_matrix(), std::vector<std::size_t>{0}), s.target_column(0));
  MccvOptions o;
  o.repeats = 4;
  o.train_frac = 0.5;
  const MccvResult a = mccv(data, HyperGrid::default_baseline(), {}, o);
  o.threads = 3;
  const MccvResult b = mccv(data, HyperGrid::default_baseline(), {}, o);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.best, b.best);
}

TEST(Mccv, RejectsDegenerateSplits) {
  const FeatureStore s = synthetic_feature_store(10, 4, 1, 10);
  const TrainingSet data(select_columns(s.feature_matrix(), std::vector<std::size_t>{0}), s.target_column(0));
  MccvOptions o;
  o.train_frac = 0.1;  // one training sample
  EXPECT_THROW(mccv(data, HyperGrid::default_baseline(), {}, o), InvalidInput);
  o.train_frac = 0.5;
  o.repeats = 0;
  EXPECT_THROW(mccv(data, HyperGrid::default_baseline(), {}, o), InvalidInput);
  o.repeats = 1;
  EXPECT_THROW(mccv(data, HyperGrid{}, {}, o), InvalidInput);
}

TEST(Split, EightyTwenty) {
  const DataSplit s = split_model_test(125, 0.8, 7);
  EXPECT_EQ(s.model.size(), 100u);
  EXPECT_EQ(s.test.size(), 25u);
  std::vector<std::size_t> all = s.model;
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 125; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(split_model_test(125, 0.8, 7).model, s.model);
  EXPECT_NE(split_model_test(125, 0.8, 8).model, s.model);
  EXPECT_THROW(split_model_test(1, 0.8, 7), InvalidInput);
}

TEST(Landmarks, TwoModelsPerLandmark) {
  const FeatureStore s = synthetic_feature_store(12, 5);
  const LandmarkModels m = train_landmark_models(s, quick_baseline());
  ASSERT_EQ(m.tasks.size(), 10u);
  for (std::size_t ell = 0; ell < 10; ++ell) {
    EXPECT_EQ(m.tasks[ell].ell, ell);
    ASSERT_TRUE(m.tasks[ell].model.has_value());
    EXPECT_EQ(m.tasks[ell].features.indices.size(), 3u);
  }
  EXPECT_EQ(m.model_images.size(), 10u);
  EXPECT_EQ(m.test_images.size(), 2u);
  EXPECT_TRUE(m.converged());
}

TEST(Landmarks, SelectionFindsDriverColumns) {
  const FeatureStore s = synthetic_feature_store(20, 6);
  const LandmarkModels m = train_landmark_models(s, quick_baseline(), false);
  const std::size_t stride = kFeatureCount / 10;
  for (const auto& t : m.tasks) {
    EXPECT_FALSE(t.model.has_value());
    EXPECT_NE(std::find(t.features.indices.begin(), t.features.indices.end(), t.ell * stride),
              t.features.indices.end());
  }
}

TEST(Landmarks, SelectionIgnoresTestRows) {
  FeatureStore s = synthetic_feature_store(15, 7);
  const PipelineOptions p = quick_baseline();
  const LandmarkModels a = train_landmark_models(s, p, false);
  const DataSplit split = split_model_test(s.rows.size(), p.model_frac, p.seed);
  // Make column 1 a perfect predictor on the test rows only.
  for (std::size_t i : split.test) s.rows[i].features[1] = s.rows[i].targets[0];
  const LandmarkModels b = train_landmark_models(s, p, false);
  for (std::size_t ell = 0; ell < a.tasks.size(); ++ell)
    EXPECT_EQ(a.tasks[ell].features.indices, b.tasks[ell].features.indices);
  const std::string model_tag = provenance_tag(s.subset(split.model));
  EXPECT_EQ(a.tasks[0].features.tag, model_tag);
  EXPECT_NE(model_tag, provenance_tag(s));
}

TEST(Landmarks, ConstantTargetsPredictConstant) {
  const FeatureStore s = constant_shape_store(10, {30.0, 40.0}, {0, 0, 90, 90});
  PipelineOptions p = quick_baseline();
  p.features = 1;
  const LandmarkModels m = train_landmark_models(s, p);
  EXPECT_TRUE(m.tasks[0].features.fallback);
  const Vector pred = predict_shape(m, s.rows[0]);
  EXPECT_NEAR(pred[0], 30.0, 1e-9);
  EXPECT_NEAR(pred[1], 40.0, 1e-9);
}

TEST(Evaluate, PerfectModelsGiveZeroReport) {
  const Box box{10, 20, 100, 110};
  const Vector shape{30, 40, 70, 40, 50, 80};
  const FeatureStore s = constant_shape_store(4, shape, box);
  const EvaluationReport r = evaluate(constant_models(scale_shape(shape, box)), s);
  ASSERT_EQ(r.landmarks.size(), 3u);
  for (const auto& l : r.landmarks) {
    EXPECT_EQ(l.mnde, 0.0);
    EXPECT_EQ(l.fr, 0.0);
  }
  EXPECT_EQ(r.aggregate.label, "1-3");
  EXPECT_EQ(r.aggregate.mnde, 0.0);
  EXPECT_EQ(r.aggregate.errors.size(), 12u);
}

TEST(Evaluate, HalfBoxWidthOffset) {
  const Box box{0, 0, 90, 90};
  const Vector shape{30, 40, 70, 40};
  const FeatureStore s = constant_shape_store(1, shape, box);
  Vector pred = scale_shape(shape, box);
  pred[0] += 45.0;
  const EvaluationReport r = evaluate(constant_models(pred), s);
  EXPECT_DOUBLE_EQ(r.landmarks[0].mnde, 0.5);
  EXPECT_DOUBLE_EQ(r.landmarks[0].fr, 1.0);
  EXPECT_EQ(r.landmarks[1].mnde, 0.0);
  EXPECT_DOUBLE_EQ(r.aggregate.mnde, 0.25);
}

TEST(Evaluate, AggregateIsMeanOverAllErrors) {
  const FeatureStore s = synthetic_feature_store(12, 8);
  const LandmarkModels m = train_landmark_models(s, quick_baseline());
  FeatureStore all = s;
  const EvaluationReport r = evaluate(m, all);
  Vector flat;
  for (const auto& l : r.landmarks) flat.insert(flat.end(), l.errors.begin(), l.errors.end());
  EXPECT_NEAR(r.aggregate.mnde, mean_of(flat), 1e-15);
  EXPECT_NEAR(r.aggregate.variance, variance(flat), 1e-15);
}

TEST(Evaluate, InterOcularNormaliser) {
  FeatureRow row;
  row.box = {0, 0, 90, 90};
  row.shape = {30, 40, 70, 40};
  EXPECT_EQ(normaliser(row, DMode::Box), 90.0);
  EXPECT_EQ(normaliser(row, DMode::InterOcular), 40.0);
  EXPECT_EQ(parse_d_mode("iod"), DMode::InterOcular);
  EXPECT_THROW(parse_d_mode("width"), InvalidInput);
}

TEST(Report, CsvLayout) {
  const FeatureStore s = constant_shape_store(3, {30, 40, 70, 40}, {0, 0, 90, 90});
  const EvaluationReport r = evaluate(constant_models(scale_shape({30, 40, 70, 40}, {0, 0, 90, 90})), s);
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv,
            "landmark,mnde_pct,stddev,fr_pct,n\n"
            "1,0.0000,0.000000,0.0000,3\n"
            "2,0.0000,0.000000,0.0000,3\n"
            "1-2,0.0000,0.000000,0.0000,6\n");
  const std::string errs = errors_csv(r);
  EXPECT_EQ(std::count(errs.begin(), errs.end(), '\n'), 7);
  EXPECT_NE(report_table(r).find("1-2"), std::string::npos);
}

TEST(ModelDir, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "qsvr_test_pipeline_models";
  std::filesystem::remove_all(dir);
  const FeatureStore s = synthetic_feature_store(12, 9);
  const LandmarkModels m = train_landmark_models(s, quick_baseline());
  save_landmark_models(dir, m);
  for (std::size_t ell = 0; ell < 10; ++ell) EXPECT_TRUE(std::filesystem::exists(dir / model_file_name(ell)));
  const LandmarkModels back = load_landmark_models(dir);
  EXPECT_EQ(back.test_images, m.test_images);
  for (const auto& row : s.rows) EXPECT_EQ(predict_shape(back, row), predict_shape(m, row));
  EXPECT_EQ(selection_csv(back), selection_csv(m));

  std::ifstream is(dir / "landmarks.json");
  auto j = nlohmann::json::parse(is);
  j["format_version"] = 99;
  std::ofstream(dir / "landmarks.json") << j.dump();
  EXPECT_THROW(load_landmark_models(dir), CompatibilityError);
}
