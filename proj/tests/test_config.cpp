#include <gtest/gtest.h>

#include "mvreprobit/config.hpp"

using namespace mvreprobit;

TEST(Config, MinimalFitConfigUsesDefaults) {
  const auto cfg = parse_config_text("[sampler]\nn_iterations = 2000\nburn_in = 1000\n");
  EXPECT_EQ(cfg.spec.prior_beta_variance, 100.0);
  EXPECT_EQ(cfg.spec.iw_prior_dof, 4.0);
  EXPECT_EQ(cfg.spec.target_rejection_low, 0.7);
  EXPECT_EQ(cfg.spec.target_rejection_high, 0.8);
  EXPECT_EQ(cfg.spec.n_iterations, 2000);
  EXPECT_EQ(cfg.spec.levels, Levels::two_level());
  EXPECT_EQ(cfg.threads, 1u);
}

TEST(Config, OverrideBeatsFile) {
  const auto cfg = parse_config_text("[sampler]\nn_iterations = 2000\nburn_in = 100\n", {{"sampler.n_iterations", "300"}});
  EXPECT_EQ(cfg.spec.n_iterations, 300);
}

TEST(Config, BurnInMustBeSmaller) {
  try {
    parse_config_text("[sampler]\nn_iterations = 100\nburn_in = 100\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("sampler.burn_in"), std::string::npos);
  }
}

TEST(Config, UnknownKeyAndTypeMismatchNameTheKey) {
  try {
    parse_config_text("[sampler]\nn_iteration = 100\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("sampler.n_iteration"), std::string::npos);
  }
  try {
    parse_config_text("[model]\nprior_beta_variance = lots\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("model.prior_beta_variance"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text("[simulate]\nunits = -3\n"), ValidationError);
  EXPECT_THROW(parse_config_text("[run]\nthreads = 0\n"), ValidationError);
}

TEST(Config, TruthMatrices) {
  const auto cfg = parse_config_text(
      "[model]\nlevels = three\n"
      "[simulate]\nunits = 50\nwaves = 3\np_partnered = 0.6\n"
      "[truth]\nB = 0.5, -0.2; 0.1, 0.3\n"
      "sigma_u = 0.786, 0.1; 0.1, 0.9\nsigma_v = 1.364, 0; 0, 1\nsigma_w = 1.373, 0; 0, 1\nrho_e = 0.3\n");
  const auto& t = cfg.scenario.truth;
  EXPECT_EQ(t.B.rows(), 2);
  EXPECT_EQ(t.B(0, 1), -0.2);
  EXPECT_EQ(t.sigma_u(1, 0), 0.1);
  EXPECT_EQ(t.rho_e[0], 0.3);
  EXPECT_EQ(cfg.scenario.units, 50u);
  EXPECT_NO_THROW(cfg.scenario.validate());
}

TEST(Config, TruthMustMatchLevels) {
  EXPECT_THROW(parse_config_text("[truth]\nB = 1; 2\nrho_e = 0.1\n"), ValidationError);  // sigma_u missing
  EXPECT_THROW(parse_config_text("[truth]\nB = 1; 2\nsigma_u = 1, 0; 0, 1\nsigma_v = 1, 0; 0, 1\nrho_e = 0.1\n"),
               ValidationError);
  EXPECT_THROW(parse_config_text("[truth]\nB = 1, 2; 3\n"), ValidationError);
  EXPECT_THROW(parse_config_text("[truth]\nsigma_u = 1\n"), ValidationError);
}

TEST(Config, KeysOutsideSectionsRejected) {
  EXPECT_THROW(parse_config_text("seed = 3\n"), ValidationError);
}
