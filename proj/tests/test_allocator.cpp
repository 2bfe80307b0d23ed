#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "tiltrotor/allocator.hpp"

using namespace tiltrotor;

namespace {

// Hover plus a perturbation small enough to stay inside the actuator box.
VirtualControl random_feasible_wrench(std::mt19937& rng, const VehicleParams& p) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector6 v = hover_wrench(p).v;
  for (int i = 0; i < 3; ++i) v(i) += 1.5 * u(rng);
  for (int i = 3; i < 5; ++i) v(i) += 0.15 * u(rng);
  v(5) += 0.05 * u(rng);
  return VirtualControl(v);
}

}  // namespace

TEST(Allocator, EffectivenessHasFullRank) {
  const EffectivenessMatrix e = build_effectiveness(VehicleParams{});
  EXPECT_EQ(e.rank, 6);
  EXPECT_LE((e.b * e.b_pinv - Eigen::Matrix<double, 6, 6>::Identity()).norm(), 1e-12);
}

TEST(Allocator, ZeroArmIsRankDeficient) {
  VehicleParams p;
  p.arm_length = 1e-300;
  EXPECT_THROW(build_effectiveness(p), RankDeficiencyError);
}

TEST(Allocator, HoverCommand) {
  const VehicleParams p;
  const ActuatorCommand c = Allocator(p)(hover_wrench(p));
  const double expected = kRadPerSecToRpm * std::sqrt(p.weight() / 4.0 / p.thrust_coeff);
  EXPECT_NEAR(expected, 2928.997, 1e-3);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(c.u(i), ActuatorCommand::spin_sign(i) * expected, 1e-6);
    EXPECT_NEAR(c.u(4 + i), 0.0, 1e-12);
  }
}

TEST(Allocator, ExtractInvertsTiltedRotor) {
  const VehicleParams p;
  const double lift = p.weight() / 4.0;
  Vector8 comps = Vector8::Zero();
  comps(0) = lateral_sign(0) * lift * std::tan(0.2);
  comps(1) = -lift;
  const ActuatorCommand c = extract_commands(comps, p);
  EXPECT_NEAR(c.u(4), 0.2, 1e-12);
  EXPECT_NEAR(c.u(0), kRadPerSecToRpm * std::sqrt(std::hypot(comps(0), lift) / p.thrust_coeff), 1e-9);
  EXPECT_EQ(c.u(1), 0.0);
}

TEST(Allocator, RoundTripRandomWrenches) {
  const VehicleParams p;
  const Allocator alloc(p);
  const EffectivenessMatrix& e = alloc.effectiveness();
  std::mt19937 rng(42);
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < 1000; ++k) {
    const VirtualControl w = random_feasible_wrench(rng, p);
    const Vector8 comps = allocate(w, e);
    EXPECT_LE((e.b * comps - w.v).norm(), 1e-9 * (1.0 + w.v.norm()));
    const VirtualControl back = propulsive_wrench(alloc(w), p);
    EXPECT_LE((back.v - w.v).norm(), 1e-9 * std::max(1.0, w.v.norm()));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 1.0);
}

TEST(Allocator, MinimumNormSolution) {
  // Any null-space perturbation of the allocation increases its norm.
  const VehicleParams p;
  const EffectivenessMatrix e = build_effectiveness(p);
  Eigen::FullPivLU<Matrix6x8> lu(e.b);
  const Eigen::MatrixXd null = lu.kernel();
  ASSERT_EQ(null.cols(), 2);
  const Vector8 base = allocate(hover_wrench(p), e);
  EXPECT_LE((null.transpose() * base).norm(), 1e-12);
}
