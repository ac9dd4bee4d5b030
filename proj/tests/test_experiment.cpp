#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "skp/experiment.hpp"
#include "test_util.hpp"

using namespace skp;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST(GenerateGaussian, DeterministicAndShaped) {
  const DenseMat a = generate_gaussian(2, 2, 7);
  const DenseMat b = generate_gaussian(2, 2, 7);
  EXPECT_EQ((a - b).norm(), 0.0);
  EXPECT_NE(generate_gaussian(2, 2, 8)(0, 0), a(0, 0));

  const DenseMat single = generate_gaussian(1, 1, 3);
  EXPECT_TRUE(std::isfinite(single(0, 0)));
  EXPECT_THROW(generate_gaussian(0, 2, 1), invalid_input);
}

TEST(GenerateGaussian, ColumnNormConcentration) {
  const DenseMat a = generate_gaussian(1000, 100, 17);
  const double mean_norm = a.colwise().norm().mean();
  EXPECT_NEAR(mean_norm, std::sqrt(1000.0), 0.05 * std::sqrt(1000.0));
}

TEST(GenerateSolution, UnitBNormAndConsistency) {
  const Mat a(generate_gaussian(12, 5, 9));
  {
    auto [xs, b] = generate_solution(a, InnerProduct::identity(), 4);
    EXPECT_NEAR(xs.norm(), 1.0, 1e-10);
    EXPECT_LT((a * xs - b).norm(), 1e-12);
  }
  {
    const InnerProduct gram = InnerProduct::gram_of_a();
    auto [xs, b] = generate_solution(a, gram, 4);
    EXPECT_NEAR(std::sqrt(b_norm_sq(xs, gram, &a)), 1.0, 1e-10);
    EXPECT_LT((a * xs - b).norm(), 1e-12);
  }
  // A = I: x* is just a normalized gaussian vector
  const Mat eye(DenseMat(DenseMat::Identity(3, 3)));
  auto [xs, b] = generate_solution(eye, InnerProduct::identity(), 11);
  EXPECT_NEAR(xs.norm(), 1.0, 1e-12);
  EXPECT_EQ((xs - b).norm(), 0.0);
}

TEST(RunExperiment, MaxDistanceOnIdentitySolvesInNSteps) {
  ExperimentSpec spec;
  const std::string path = (std::filesystem::temp_directory_path() / "skp_eye4.mtx").string();
  write_matrix_market(path, Mat(DenseMat(DenseMat::Identity(4, 4))));
  spec.source = path;
  spec.method = Method::kKaczmarz;
  spec.rules = {"maxdist"};
  spec.trials = 3;
  spec.iterations = 10;
  spec.base_seed = 5;

  const ExperimentResult result = run_experiment(spec);
  ASSERT_EQ(result.rules.size(), 1u);
  const auto& curve = result.rules[0].curve;
  ASSERT_EQ(curve.size(), 11u);
  EXPECT_DOUBLE_EQ(curve[0].median_err, 1.0);  // ||x*||^2 = 1 from a zero start
  EXPECT_LT(curve[4].median_err, 1e-25);       // orthonormal rows solve in n steps
  EXPECT_LT(curve[10].p975, 1e-25);
  for (std::size_t k = 1; k < curve.size(); ++k)
    EXPECT_LE(curve[k].median_err, curve[k - 1].median_err);
}

TEST(RunExperiment, SingleTrialPercentilesCollapse) {
  const std::string path = (std::filesystem::temp_directory_path() / "skp_g86.mtx").string();
  write_matrix_market(path, Mat(generate_gaussian(8, 6, 2)));
  ExperimentSpec spec;
  spec.source = path;
  spec.method = Method::kKaczmarz;
  spec.rules = {"uniform"};
  spec.trials = 1;
  spec.iterations = 20;
  spec.base_seed = 9;
  const ExperimentResult result = run_experiment(spec);
  for (const CurvePoint& pt : result.rules[0].curve) {
    EXPECT_DOUBLE_EQ(pt.p025, pt.median_err);
    EXPECT_DOUBLE_EQ(pt.p975, pt.median_err);
  }
}

TEST(RunExperiment, FlopAxisUsesModelCosts) {
  const std::string path = (std::filesystem::temp_directory_path() / "skp_g105.mtx").string();
  write_matrix_market(path, Mat(generate_gaussian(10, 5, 3)));
  ExperimentSpec spec;
  spec.source = path;
  spec.method = Method::kKaczmarz;
  spec.rules = {"maxdist"};
  spec.trials = 2;
  spec.iterations = 6;
  spec.base_seed = 1;
  const ExperimentResult result = run_experiment(spec);
  const std::uint64_t per = 3 * 10 + 2 * 5;
  for (std::size_t k = 0; k < result.rules[0].curve.size(); ++k)
    EXPECT_EQ(result.rules[0].curve[k].flops, k * per);
}

TEST(EmitCsv, FilesAndRoundTrip) {
  ExperimentResult result;
  result.trials = 1;
  result.iterations = 2;
  for (const char* name : {"uniform", "maxdist"}) {
    RuleResult rr;
    rr.rule = name;
    for (Index k = 0; k <= 10; ++k)
      rr.curve.push_back(CurvePoint{k, static_cast<std::uint64_t>(40 * k),
                                    std::pow(0.5, k) / 3.0, std::pow(0.5, k) / 7.0,
                                    std::pow(0.5, k), std::pow(0.5, k) / 2.0});
    rr.min_step_factor = 0.123456789012345678;
    result.rules.push_back(std::move(rr));
  }
  const std::string dir =
      (std::filesystem::temp_directory_path() / "skp_emit_test").string();
  const auto files = emit_csv(result, dir);
  ASSERT_EQ(files.size(), 3u);  // two curves + step factors

  std::ifstream in(files[0]);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "k,flops,median_err,p025,p975");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lines;
    Index k;
    std::uint64_t flops;
    double med, lo, hi;
    ASSERT_EQ(std::sscanf(line.c_str(), "%ld,%lu,%lg,%lg,%lg", &k, &flops, &med, &lo, &hi), 5);
    EXPECT_DOUBLE_EQ(med, result.rules[0].curve[static_cast<std::size_t>(k)].median_err);
    EXPECT_DOUBLE_EQ(hi, result.rules[0].curve[static_cast<std::size_t>(k)].p975);
  }
  EXPECT_EQ(lines, 11);

  std::ifstream sf(files[2]);
  std::getline(sf, header);
  EXPECT_EQ(header, "rule,min_step_factor");
}

TEST(EmitCsv, IdenticalSeedsGiveIdenticalBytes) {
  const std::string path = (std::filesystem::temp_directory_path() / "skp_det.mtx").string();
  write_matrix_market(path, Mat(generate_gaussian(20, 6, 11)));
  ExperimentSpec spec;
  spec.source = path;
  spec.method = Method::kKaczmarz;
  spec.rules = {"uniform", "proportional", "capped:0.5"};
  spec.trials = 4;
  spec.iterations = 30;
  spec.base_seed = 123;

  namespace fs = std::filesystem;
  const std::string d1 = (fs::temp_directory_path() / "skp_det_a").string();
  const std::string d2 = (fs::temp_directory_path() / "skp_det_b").string();
  const auto f1 = emit_csv(run_experiment(spec), d1);
  const auto f2 = emit_csv(run_experiment(spec), d2);
  ASSERT_EQ(f1.size(), f2.size());
  for (std::size_t i = 0; i < f1.size(); ++i) EXPECT_EQ(slurp(f1[i]), slurp(f2[i]));
}

TEST(ParseConfig, GoodAndBad) {
  std::istringstream good(
      "# demo config\n"
      "gaussian_rows = 30\n"
      "gaussian_cols = 10\n"
      "gaussian_seed = 5\n"
      "method = block:2\n"
      "rules = uniform, maxdist, capped:0.7\n"
      "trials = 3\n"
      "iterations = 40\n"
      "base_seed = 99\n"
      "outputs = /tmp/out\n");
  const ExperimentSpec spec = parse_experiment_config(good, "good.cfg");
  EXPECT_EQ(spec.method, Method::kGeneral);
  EXPECT_EQ(spec.block_tau, 2);
  ASSERT_EQ(spec.rules.size(), 3u);
  EXPECT_EQ(spec.rules[2], "capped:0.7");
  EXPECT_EQ(std::get<GaussianSpec>(spec.source).rows, 30);

  std::istringstream missing_source("trials = 3\nrules = uniform\niterations = 4\n");
  EXPECT_THROW(parse_experiment_config(missing_source, "bad.cfg"), parse_error);

  std::istringstream unknown_key(
      "gaussian_rows = 3\ngaussian_cols = 3\nrules = uniform\nbogus = 1\n");
  EXPECT_THROW(parse_experiment_config(unknown_key, "bad2.cfg"), parse_error);
}

TEST(ParseRule, StringsAndErrors) {
  EXPECT_EQ(parse_rule("uniform").kind, RuleKind::kUniform);
  EXPECT_EQ(parse_rule("rownorm").kind, RuleKind::kNormProportional);
  EXPECT_EQ(parse_rule("maxdist").kind, RuleKind::kMaxDistance);
  EXPECT_EQ(parse_rule("proportional").kind, RuleKind::kProportionalToLoss);
  EXPECT_EQ(parse_rule("capped:0.25").theta, 0.25);
  EXPECT_EQ(parse_rule("capped").theta, 0.5);  // documented default
  EXPECT_THROW(parse_rule("capped:x"), invalid_input);
  EXPECT_THROW(parse_rule("capped:1.5"), invalid_input);
  EXPECT_THROW(parse_rule("nope"), invalid_input);
  EXPECT_THROW(parse_rule("fixed:/nonexistent/path"), invalid_input);
}
