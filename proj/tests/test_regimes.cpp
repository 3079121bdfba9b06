#include "poroscale/regimes.hpp"

#include <gtest/gtest.h>

using namespace poroscale;

namespace {

ConnectivityReport connected_report() {
  ConnectivityReport r;
  r.fluid_connected = r.solid_connected = true;
  r.fluid_axis = r.solid_axis = {true, true, true};
  return r;
}

ConnectivityReport isolated_report() {
  ConnectivityReport r;
  r.solid_connected = true;
  r.isolated_pores = true;
  r.solid_axis = {true, true, true};
  return r;
}

// Baseline admissible laws: Theorem 2(I) territory.
AlphaLaws thm2_one_velocity_laws() {
  AlphaLaws a;
  a.alpha_mu = {1, 1};       // mu0 = 0, mu1 = inf
  a.alpha_kappa_f = {1, 1};  // kappa1f = 1
  a.alpha_tau = {1, 0};
  a.alpha_lambda = {1, 0};
  a.alpha_eta = {1, 0};
  a.alpha_p = {1, 0};
  a.alpha_kappa_s = {1, 0};
  a.alpha_theta_s = {0.5, 0};
  a.alpha_theta_f = {0.5, 0};
  a.alpha_nu = {0, 0};
  return a;
}

}  // namespace

TEST(Limits, PowerLawExamples) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_mu = {1, 2};
  a.alpha_lambda = {1, 0};
  a.alpha_tau = {1, 0};
  a.alpha_kappa_f = {1, 2};
  RegimeLimits l = limits_from_power_laws(a);
  EXPECT_TRUE(l.mu0.is_zero());
  EXPECT_EQ(l.mu1, ExtReal::of(1.0));
  EXPECT_EQ(l.lambda0, ExtReal::of(1.0));
  EXPECT_EQ(l.tau0, ExtReal::of(1.0));
  EXPECT_FALSE(l.estimated);
}

TEST(Limits, ConstantAlphaMuGivesInfiniteMu1) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_mu = {1, 0};
  a.alpha_kappa_f = {1, 0};
  RegimeLimits l = limits_from_power_laws(a);
  EXPECT_EQ(l.mu0, ExtReal::of(1.0));
  EXPECT_FALSE(l.mu1.finite());
}

TEST(Limits, ExponentArithmeticForLambda1) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_lambda = {1, -1};
  a.alpha_mu = {1, 2};
  a.alpha_kappa_f = {1, 2};
  RegimeLimits l = limits_from_power_laws(a);
  EXPECT_FALSE(l.lambda0.finite());
  EXPECT_FALSE(l.lambda1.finite());  // eps^-1 * eps^2 / eps^2 -> inf
}

TEST(Limits, NumericSamplesRecoverPowerLaws) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_mu = {2, 2};
  a.alpha_kappa_f = {2, 2};
  std::vector<DimensionlessParams> seq;
  for (double eps : {0.1, 0.05, 0.025, 0.0125}) seq.push_back(a.at(eps));
  RegimeLimits l = limits_from_samples(seq);
  EXPECT_TRUE(l.estimated);
  EXPECT_TRUE(l.mu0.is_zero());
  EXPECT_NEAR(l.mu1.value(), 2.0, 1e-12);
  EXPECT_NEAR(l.lambda1.value(), 0.5, 1e-12);
  EXPECT_NEAR(l.lambda0.value(), 1.0, 1e-12);
}

TEST(Limits, NonMonotoneEpsilonRejected) {
  AlphaLaws a = thm2_one_velocity_laws();
  std::vector<DimensionlessParams> seq = {a.at(0.1), a.at(0.2), a.at(0.05)};
  EXPECT_THROW(limits_from_samples(seq), ParameterError);
}

TEST(Limits, AmbiguousDriftRejected) {
  AlphaLaws a = thm2_one_velocity_laws();
  std::vector<DimensionlessParams> seq;
  // slope ~ -0.05 (within +-0.1 of 0) but values drift by ~26%
  for (double eps : {0.1, 0.01, 0.001, 0.0001}) {
    auto p = a.at(eps);
    p.alpha_lambda = std::pow(eps, -0.05);
    seq.push_back(p);
  }
  EXPECT_THROW(
      {
        try {
          limits_from_samples(seq);
        } catch (const ParameterError& e) {
          EXPECT_NE(std::string(e.what()).find("indeterminate limit"),
                    std::string::npos);
          throw;
        }
      },
      ParameterError);
}

TEST(Classify, Theorem2OneVelocity) {
  RegimeLimits l = limits_from_power_laws(thm2_one_velocity_laws());
  auto sel = classify(l, connected_report());
  EXPECT_EQ(sel.model, Model::ThermoPoroElastic_OneVelocity);
  EXPECT_EQ(sel.darcy_variant, DarcyVariant::NotApplicable);
  EXPECT_TRUE(sel.renormalization_trail.empty());
}

TEST(Classify, Theorem3FiltrationF1WithKernelDarcy) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_lambda = {1, -1};  // lambda0 = inf
  a.alpha_mu = {1, 2};       // mu1 = 1
  a.alpha_kappa_f = {1, 2};
  RegimeLimits l = limits_from_power_laws(a);
  auto sel = classify(l, connected_report());
  EXPECT_EQ(sel.model, Model::Filtration_F1);
  EXPECT_EQ(sel.darcy_variant, DarcyVariant::KernelB1);
}

TEST(Classify, Theorem4IsolatedPoresNotesDegenerateA2) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_mu = {1, 0};
  a.alpha_kappa_f = {1, 0};
  a.alpha_nu = {0, 0};
  RegimeLimits l = limits_from_power_laws(a);
  auto sel = classify(l, isolated_report());
  EXPECT_EQ(sel.model, Model::ThermoViscoElastic);
  ASSERT_FALSE(sel.notes.empty());
  EXPECT_NE(sel.notes[0].find("A2 = 0"), std::string::npos);
}

TEST(Classify, Assumption2ViolationNamesBound) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_tau = {1, 1};  // tau0 = 0
  a.alpha_mu = {1, 3};   // mu1 = 0 -> tau0 + mu1 = 0
  a.alpha_kappa_f = {1, 3};
  RegimeLimits l = limits_from_power_laws(a);
  EXPECT_THROW(
      {
        try {
          classify(l, connected_report());
        } catch (const ParameterError& e) {
          EXPECT_NE(std::string(e.what()).find("tau0 + mu1"), std::string::npos);
          throw;
        }
      },
      ParameterError);
}

TEST(Renormalize, Theorem3IIIExample) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_mu = {1, 1};        // mu1 = inf
  a.alpha_lambda = {2, -1};   // lambda1 = 2
  a.alpha_p = {2, -1};        // p2 = 1
  a.alpha_eta = {2, -1};      // eta2 = 1
  a.alpha_kappa_s = {2, -1};  // kappa2s = 1
  a.alpha_theta_s = {0, 0};
  a.alpha_theta_f = {0, 0};
  a.alpha_kappa_f = {1, 1};
  RegimeLimits l = limits_from_power_laws(a);
  ASSERT_EQ(l.lambda1, ExtReal::of(2.0));
  RegimeLimits t = renormalize(l, RenormMap::Thm3_III);
  EXPECT_EQ(t.mu1, ExtReal::of(0.5));
  EXPECT_TRUE(t.tau0.is_zero());
  EXPECT_EQ(t.lambda0, ExtReal::of(1.0));
  EXPECT_EQ(t.p_star, ExtReal::of(1.0));
  EXPECT_EQ(t.eta0, ExtReal::of(1.0));
  EXPECT_EQ(t.kappa0s, ExtReal::of(1.0));
  EXPECT_TRUE(t.beta0s.is_zero());
  EXPECT_TRUE(t.beta0f.is_zero());
  ASSERT_EQ(t.trail.size(), 1u);
  EXPECT_EQ(t.trail[0].field_scale, "alpha_lambda");
}

TEST(Renormalize, Theorem3IVExample) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_mu = {1, 1};        // mu1 = inf
  a.alpha_lambda = {1, -1};   // lambda1 = 1
  a.alpha_p = {1, -1};        // p1 = 1
  a.alpha_eta = {1, -1};      // eta1 = 1
  a.alpha_kappa_s = {1, -1};  // kappa1s = 1
  a.alpha_kappa_f = {1, 1};
  RegimeLimits l = limits_from_power_laws(a);
  RegimeLimits t = renormalize(l, RenormMap::Thm3_IV);
  EXPECT_TRUE(t.tau0.is_zero());
  EXPECT_EQ(t.mu1, ExtReal::of(1.0));
  EXPECT_EQ(t.lambda0, ExtReal::of(1.0));
}

TEST(Renormalize, AppliedTwiceIsGuarded) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_mu = {1, 1};
  a.alpha_lambda = {1, -1};
  a.alpha_kappa_s = {1, -1};
  a.alpha_p = {1, -1};
  a.alpha_eta = {1, -1};
  a.alpha_kappa_f = {1, 1};
  RegimeLimits l = limits_from_power_laws(a);
  RegimeLimits t = renormalize(l, RenormMap::Thm1_II);
  EXPECT_THROW(
      {
        try {
          renormalize(t, RenormMap::Thm1_II);
        } catch (const ParameterError& e) {
          EXPECT_NE(std::string(e.what()).find("renormalization already applied"),
                    std::string::npos);
          throw;
        }
      },
      ParameterError);
}

TEST(Renormalize, FailedFinitenessIsNamed) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_mu = {1, 1};
  a.alpha_lambda = {1, -2};  // lambda1 = inf
  a.alpha_kappa_s = {1, -2};
  RegimeLimits l = limits_from_power_laws(a);
  EXPECT_THROW(
      {
        try {
          renormalize(l, RenormMap::Thm3_III);
        } catch (const ParameterError& e) {
          EXPECT_NE(std::string(e.what()).find("lambda1"), std::string::npos);
          throw;
        }
      },
      ParameterError);
}

TEST(Renormalize, Thm3IIIThenClassifyLandsInTheorem2Family) {
  AlphaLaws a = thm2_one_velocity_laws();
  a.alpha_mu = {1, 1};
  a.alpha_lambda = {2, -1};
  a.alpha_p = {1, -1};
  a.alpha_eta = {1, -1};
  a.alpha_kappa_s = {2, -1};
  a.alpha_theta_s = {0, 0};
  a.alpha_theta_f = {0, 0};
  a.alpha_kappa_f = {1, 1};
  RegimeLimits l = limits_from_power_laws(a);
  HypothesisAssertions hyp;
  hyp.asserts_2_9 = true;
  hyp.assumption3 = true;
  auto sel = classify(l, connected_report(), hyp);
  EXPECT_TRUE(sel.model == Model::ThermoPoroElastic_TwoVelocity ||
              sel.model == Model::ThermoPoroElastic_OneVelocity ||
              sel.model == Model::ThermoPoroElastic_IsolatedPores);
  ASSERT_EQ(sel.renormalization_trail.size(), 1u);
  EXPECT_EQ(sel.renormalization_trail[0].map, RenormMap::Thm3_III);
  EXPECT_TRUE(sel.effective_limits.tau0.is_zero());
}

TEST(Classify, DeterministicAndPure) {
  RegimeLimits l = limits_from_power_laws(thm2_one_velocity_laws());
  auto a = classify(l, connected_report());
  auto b = classify(l, connected_report());
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.darcy_variant, b.darcy_variant);
}

TEST(Classify, ExhaustiveOverCaseGrid) {
  // every combination of {mu0 = 0 / > 0} x {lambda0 finite / inf} x
  // {mu1 = 0 / finite / inf} x {connected / isolated} either classifies or
  // raises a named admissibility error, never anything else
  for (int mu0case = 0; mu0case < 2; ++mu0case)
    for (int lamcase = 0; lamcase < 2; ++lamcase)
      for (int mu1case = 0; mu1case < 3; ++mu1case)
        for (int conncase = 0; conncase < 2; ++conncase) {
          AlphaLaws a = thm2_one_velocity_laws();
          a.alpha_mu = mu0case == 0
                           ? (mu1case == 0 ? PowerLaw{1, 3}
                              : mu1case == 1 ? PowerLaw{1, 2}
                                             : PowerLaw{1, 1})
                           : PowerLaw{1, 0};
          a.alpha_kappa_f = a.alpha_mu;  // keep kappa1f = 1
          a.alpha_lambda = lamcase == 0 ? PowerLaw{1, 0} : PowerLaw{1, -1};
          auto conn = conncase == 0 ? connected_report() : isolated_report();
          if (mu0case == 1 && mu1case != 2) continue;  // mu0>0 forces mu1=inf
          RegimeLimits l = limits_from_power_laws(a);
          try {
            auto sel = classify(l, conn);
            SUCCEED() << model_name(sel.model);
          } catch (const ParameterError& e) {
            EXPECT_GT(std::string(e.what()).size(), 10u) << e.what();
          }
        }
}

TEST(PhysicalMap, AlphaMuUnit) {
  PhysicalConstants c;
  c.tau = 2;
  c.g = 3;
  c.rho0 = 5;
  c.L = 7;
  c.mu = c.tau * c.g * c.rho0 * c.L / 2.0;
  c.nu = 2.0 / 3.0 * c.mu;  // keeps alpha_nu nonnegative
  auto p = params_from_physical(c);
  EXPECT_NEAR(p.alpha_mu, 1.0, 1e-15);
}

TEST(PhysicalMap, ZeroLambdaGivesZeroAlphaLambda) {
  PhysicalConstants c;
  c.lambda = 0;
  auto p = params_from_physical(c);
  EXPECT_DOUBLE_EQ(p.alpha_lambda, 0.0);
}

TEST(PhysicalMap, AlphaTauLinearInL) {
  PhysicalConstants c;
  c.L = 1;
  auto p1 = params_from_physical(c);
  c.L = 2;
  auto p2 = params_from_physical(c);
  EXPECT_NEAR(p2.alpha_tau, 2.0 * p1.alpha_tau, 1e-15);
}

TEST(PhysicalMap, NonpositiveBaseQuantitiesRejected) {
  PhysicalConstants c;
  c.L = 0;
  EXPECT_THROW(params_from_physical(c), ParameterError);
  c.L = 1;
  c.rho0 = -1;
  EXPECT_THROW(params_from_physical(c), ParameterError);
}

TEST(Params, CellCountRequiresIntegerInverseEpsilon) {
  DimensionlessParams p;
  p.epsilon = 0.125;
  EXPECT_EQ(p.cell_count(), 8);
  p.epsilon = 0.3;
  EXPECT_THROW(p.cell_count(), ParameterError);
}
