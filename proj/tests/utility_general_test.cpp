#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "synthmetric/rng.hpp"
#include "synthmetric/synth.hpp"
#include "synthmetric/utility_general.hpp"

namespace sm = synthmetric;

namespace {

sm::Dataset mvn_data(int dim, double rho, std::size_t n, std::uint64_t seed) {
  sm::Rng rng(seed);
  sm::MvnSpec spec;
  spec.mean = Eigen::VectorXd::Zero(dim);
  spec.covariance = sm::equicorrelation(dim, rho);
  return sm::mvn_sample(spec, n, rng);
}

}  // namespace

TEST(ComputePmse, HandValues) {
  EXPECT_DOUBLE_EQ(sm::compute_pmse(std::vector<double>{0.5, 0.5, 0.5}, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(sm::compute_pmse(std::vector<double>{0.0, 1.0}, 0.5), 0.25);
  EXPECT_DOUBLE_EQ(sm::compute_pmse(std::vector<double>{0.2, 0.6}, 0.4), 0.04);
  EXPECT_THROW(sm::compute_pmse(std::vector<double>{}, 0.5), std::invalid_argument);
  EXPECT_THROW(sm::compute_pmse(std::vector<double>{0.5}, 0.0), std::invalid_argument);
  EXPECT_THROW(sm::compute_pmse(std::vector<double>{0.5}, 1.0), std::invalid_argument);
  EXPECT_THROW(sm::compute_pmse(std::vector<double>{1.5}, 0.5), std::invalid_argument);
}

TEST(AnalyticNull, ClosedFormMomentsAndScale) {
  const auto est = sm::analytic_null(55, 5000, 5000);
  const double scale = 0.25 * 0.5 / 10000.0;
  EXPECT_DOUBLE_EQ(est.mean, 55.0 * scale);
  EXPECT_DOUBLE_EQ(est.sd, std::sqrt(110.0) * scale);
  EXPECT_EQ(est.effective_df, 55);
  EXPECT_EQ(est.method, sm::NullMethod::analytic);
  EXPECT_DOUBLE_EQ(sm::analytic_null_scale(5000, 5000), scale);

  // Unequal halves: c = 2/3.
  const auto uneq = sm::analytic_null(10, 100, 200);
  const double c = 200.0 / 300.0;
  EXPECT_DOUBLE_EQ(uneq.mean, 10.0 * (1 - c) * (1 - c) * c / 300.0);

  EXPECT_THROW(sm::analytic_null(-1, 10, 10), std::invalid_argument);
  EXPECT_THROW(sm::analytic_null(5, 0, 10), std::invalid_argument);
  EXPECT_THROW(sm::analytic_null(5, 10, 0), std::invalid_argument);
}

TEST(GeneralUtility, CopySynthesisScoresZeroUnderBothModels) {
  const sm::Dataset original = mvn_data(3, 0.4, 400, 31);
  sm::Dataset copy = original;
  copy.set_role(sm::DatasetRole::synthetic);

  sm::PropensityModelSpec logit;
  sm::UtilityOptions opt;
  const auto rep = sm::general_utility(original, {copy}, logit, opt);
  EXPECT_LT(rep.pmse, 1e-10);
  EXPECT_EQ(rep.k, 7);             // intercept + 3 mains + 3 pairwise products
  EXPECT_EQ(rep.effective_df, 6);  // complete synthesis: k - 1
  EXPECT_DOUBLE_EQ(rep.c, 0.5);

  sm::PropensityModelSpec cart;
  cart.model = sm::PropensityModel::cart;
  sm::UtilityOptions copt;
  copt.null_method = sm::NullMethod::permutation;
  copt.seed = 1;
  copt.n_perms = 20;
  const auto crep = sm::general_utility(original, {copy}, cart, copt);
  EXPECT_LT(crep.pmse, 1e-10);
  EXPECT_TRUE(crep.root_only_tree);
  bool mentioned = false;
  for (const auto& w : crep.warnings) mentioned = mentioned || w.find("no splits") != std::string::npos;
  EXPECT_TRUE(mentioned);
}

TEST(GeneralUtility, PmseIsBoundedByOneQuarterEvenWhenOverfit) {
  const sm::Dataset a = mvn_data(2, 0.0, 150, 32);
  sm::Dataset b = mvn_data(2, 0.0, 150, 33);  // unrelated data, same schema
  b.set_role(sm::DatasetRole::synthetic);

  sm::PropensityModelSpec cart;
  cart.model = sm::PropensityModel::cart;
  cart.tree_config.min_leaf = 1;
  cart.tree_config.complexity = 0.0;
  sm::UtilityOptions opt;
  opt.null_method = sm::NullMethod::permutation;
  opt.n_perms = 20;
  opt.seed = 2;
  const auto rep = sm::general_utility(a, {b}, cart, opt);
  EXPECT_GT(rep.pmse, 0.2);  // min_leaf 1 memorizes the indicator
  EXPECT_LE(rep.pmse, 0.25 + 1e-12);
  EXPECT_TRUE(rep.overfit_warning);
  EXPECT_GT(rep.score_diagnostics, 0.25);
}

TEST(GeneralUtility, EffectiveDfFollowsTheMask) {
  const sm::Dataset original = mvn_data(3, 0.3, 500, 34);
  sm::SynthesisPlan plan;
  plan.method = sm::SynthMethod::parametric_normal;
  plan.mask = sm::SynthesisMask{{"x1"}, 1};
  plan.seed = 35;
  const auto syn = sm::synthesize(original, plan);

  sm::PropensityModelSpec spec;
  sm::UtilityOptions opt;
  opt.mask = plan.mask;
  const auto rep = sm::general_utility(original, syn, spec, opt);
  EXPECT_EQ(rep.k, 7);
  EXPECT_EQ(rep.effective_df, 3);  // x1, x1:x2, x1:x3
  EXPECT_DOUBLE_EQ(rep.null_estimate.mean, sm::analytic_null(3, 500, 500).mean);
}

TEST(GeneralUtility, PermutationNullTracksTheAnalyticNull) {
  const sm::Dataset original = mvn_data(2, 0.5, 400, 36);
  sm::Rng srng(37);
  const sm::Dataset syn = sm::mvn_correct_synthesis(original, srng);

  sm::PropensityModelSpec spec;
  sm::UtilityOptions opt;
  opt.null_method = sm::NullMethod::permutation;
  opt.n_perms = 200;
  opt.seed = 5;
  const auto rep = sm::general_utility(original, {syn}, spec, opt);
  const auto analytic = sm::analytic_null(rep.effective_df, rep.n1, rep.n2);

  EXPECT_EQ(rep.null_estimate.method, sm::NullMethod::permutation);
  EXPECT_EQ(rep.null_estimate.replicates, 200);
  EXPECT_NEAR(rep.null_estimate.mean, analytic.mean, 0.25 * analytic.mean);

  // Deterministic in the options seed.
  const auto rep2 = sm::general_utility(original, {syn}, spec, opt);
  EXPECT_DOUBLE_EQ(rep2.null_estimate.mean, rep.null_estimate.mean);
  EXPECT_DOUBLE_EQ(rep2.null_estimate.sd, rep.null_estimate.sd);
}

TEST(GeneralUtility, PermutedTreesStillOverfitNoise) {
  const sm::Dataset original = mvn_data(2, 0.0, 200, 38);
  sm::Rng srng(39);
  const sm::Dataset syn = sm::mvn_correct_synthesis(original, srng);

  sm::PropensityModelSpec cart;
  cart.model = sm::PropensityModel::cart;
  cart.tree_config.min_leaf = 5;
  cart.tree_config.complexity = 0.0;
  sm::UtilityOptions opt;
  opt.null_method = sm::NullMethod::permutation;
  opt.n_perms = 30;
  opt.seed = 6;
  const auto rep = sm::general_utility(original, {syn}, cart, opt);
  EXPECT_GT(rep.null_estimate.mean, 0.0);
}

TEST(GeneralUtility, PairwiseNullUsesAllPairs) {
  const sm::Dataset original = mvn_data(2, 0.4, 300, 40);
  sm::SynthesisPlan plan;
  plan.method = sm::SynthMethod::parametric_normal;
  plan.mask = sm::complete_mask(original);
  plan.m = 5;
  plan.seed = 41;
  const auto syn = sm::synthesize(original, plan);

  sm::PropensityModelSpec spec;
  sm::UtilityOptions opt;
  opt.null_method = sm::NullMethod::pairwise;
  const auto rep = sm::general_utility(original, syn, spec, opt);
  EXPECT_EQ(rep.null_estimate.replicates, 10);  // C(5,2)
  EXPECT_EQ(rep.pmse_per_dataset.size(), 5u);
  EXPECT_DOUBLE_EQ(rep.pmse,
                   (rep.pmse_per_dataset[0] + rep.pmse_per_dataset[1] + rep.pmse_per_dataset[2] +
                    rep.pmse_per_dataset[3] + rep.pmse_per_dataset[4]) /
                       5.0);
  EXPECT_GT(rep.null_estimate.mean, 0.0);
}

TEST(GeneralUtility, ErrorPathsForInvalidNullCombinations) {
  const sm::Dataset original = mvn_data(2, 0.3, 200, 42);
  sm::Rng srng(43);
  const sm::Dataset syn = sm::mvn_correct_synthesis(original, srng);

  // Analytic null is undefined for CART propensity models.
  sm::PropensityModelSpec cart;
  cart.model = sm::PropensityModel::cart;
  sm::UtilityOptions opt;
  try {
    sm::general_utility(original, {syn}, cart, opt);
    FAIL() << "expected the analytic+cart combination to be rejected";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("analytic"), std::string::npos);
  }

  // Permutation null demands complete synthesis.
  sm::PropensityModelSpec logit;
  sm::UtilityOptions perm;
  perm.null_method = sm::NullMethod::permutation;
  perm.mask = sm::SynthesisMask{{"x1"}, 1};
  perm.seed = 1;
  try {
    sm::general_utility(original, {syn}, logit, perm);
    FAIL() << "expected the incomplete permutation null to be rejected";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("complete"), std::string::npos);
  }

  // Permutation null needs enough shuffles to average over.
  sm::UtilityOptions few;
  few.null_method = sm::NullMethod::permutation;
  few.n_perms = 10;
  few.seed = 1;
  EXPECT_THROW(sm::general_utility(original, {syn}, logit, few), std::invalid_argument);

  // Pairwise null needs at least two replicates.
  sm::UtilityOptions pair;
  pair.null_method = sm::NullMethod::pairwise;
  EXPECT_THROW(sm::general_utility(original, {syn}, logit, pair), std::invalid_argument);
  EXPECT_THROW(sm::pairwise_null({syn}, logit, original.n_rows(), sm::complete_mask(original)),
               std::invalid_argument);

  // No synthetic datasets at all.
  EXPECT_THROW(sm::general_utility(original, {}, logit, opt), std::invalid_argument);

  // Replicates must agree on the row count.
  const sm::Dataset shorter = mvn_data(2, 0.3, 150, 44);
  EXPECT_THROW(sm::general_utility(original, {syn, shorter}, logit, opt), std::invalid_argument);
}

TEST(GeneralUtility, MultiReplicatePmseIsTheMean) {
  const sm::Dataset original = mvn_data(2, 0.5, 250, 45);
  sm::SynthesisPlan plan;
  plan.method = sm::SynthMethod::parametric_normal;
  plan.mask = sm::complete_mask(original);
  plan.m = 3;
  plan.seed = 46;
  const auto syn = sm::synthesize(original, plan);

  sm::PropensityModelSpec spec;
  sm::UtilityOptions opt;
  const auto rep = sm::general_utility(original, syn, spec, opt);
  ASSERT_EQ(rep.pmse_per_dataset.size(), 3u);
  EXPECT_DOUBLE_EQ(
      rep.pmse,
      (rep.pmse_per_dataset[0] + rep.pmse_per_dataset[1] + rep.pmse_per_dataset[2]) / 3.0);
  EXPECT_GT(rep.ratio, 0.0);
  EXPECT_TRUE(std::isfinite(rep.standardized));
}

TEST(GeneralUtility, SerializationCarriesTheReportShape) {
  const sm::Dataset original = mvn_data(2, 0.4, 200, 47);
  sm::Rng srng(48);
  const sm::Dataset syn = sm::mvn_correct_synthesis(original, srng);
  sm::PropensityModelSpec spec;
  sm::UtilityOptions opt;
  const auto rep = sm::general_utility(original, {syn}, spec, opt);

  const nlohmann::json j = sm::to_json(rep);
  EXPECT_EQ(j["n1"], 200);
  EXPECT_EQ(j["n2"], 200);
  EXPECT_EQ(j["null"]["method"], "analytic");
  EXPECT_EQ(j["null"]["effective_df"], rep.effective_df);
  EXPECT_EQ(j["pmse_per_dataset"].size(), 1u);
  EXPECT_TRUE(j.contains("ratio"));
  EXPECT_TRUE(j.contains("standardized"));
  EXPECT_TRUE(j["warnings"].is_array());

  const std::string md = sm::render_markdown(rep);
  EXPECT_NE(md.find("| quantity | value |"), std::string::npos);
  EXPECT_NE(md.find("pMSE ratio"), std::string::npos);
  EXPECT_NE(md.find("null method | analytic"), std::string::npos);
  EXPECT_NE(md.find("effective df | " + std::to_string(rep.effective_df)), std::string::npos);
}
