// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <gtest/gtest.h>

using namespace pfield;

namespace {

ParticleCloud<double>
cloudAt(std::vector<Vec3<double>> positions) {
    ParticleCloud<double> cloud;
    cloud.featureDim = 1;
    cloud.searchRadius = 0.06;
    cloud.velocities.assign(positions.size(), Vec3<double>::Zero());
    cloud.features.assign(positions.size(), 0.0);
    cloud.positions = std::move(positions);
    return cloud;
}

void
step(ParticleCloud<double> &cloud, const std::vector<Vec3<double>> &grads, const PhysicsConfig &config) {
    SpatialIndex<double> index(cloud.positions, cloud.searchRadius);
    pbdStep<double>(cloud, grads, config, index);
}

PhysicsConfig
unbounded() {
    PhysicsConfig c;
    c.bounds.reset();
    return c;
}

} // namespace

TEST(PhysicsConfig, PaperDefaults) {
    const PhysicsConfig c;
    EXPECT_EQ(c.damping, 0.96);
    EXPECT_EQ(c.timestep, 0.01);
    EXPECT_EQ(c.minDistance, 0.01);
    EXPECT_EQ(c.gradientScale, 2.0);
}

TEST(PbdStep, ZeroGradientZeroVelocityIsAFixedPoint) {
    auto cloud = cloudAt({Vec3<double>(0.2, 0.3, 0.4), Vec3<double>(0.6, 0.6, 0.6)});
    const auto before = cloud.positions;
    step(cloud, std::vector<Vec3<double>>(2, Vec3<double>::Zero()), PhysicsConfig{});
    EXPECT_EQ(cloud.positions, before);
    for (const auto &v : cloud.velocities)
        EXPECT_TRUE(v.isZero(0.0));
}

TEST(PbdStep, GradientBecomesVelocityAndDisplacement) {
    auto cloud = cloudAt({Vec3<double>(0.5, 0.5, 0.5)});
    step(cloud, {Vec3<double>(1, 0, 0)}, PhysicsConfig{});
    EXPECT_NEAR(cloud.velocities[0].x(), -2.0, 1e-12);
    EXPECT_NEAR(cloud.positions[0].x() - 0.5, -0.02, 1e-15);
    EXPECT_EQ(cloud.positions[0].y(), 0.5);
}

TEST(PbdStep, IsolatedPairWorkedExample) {
    auto cloud = cloudAt({Vec3<double>(0, 0, 0), Vec3<double>(0.005, 0, 0)});
    step(cloud, std::vector<Vec3<double>>(2, Vec3<double>::Zero()), unbounded());
    EXPECT_NEAR(cloud.positions[0].x(), -0.0025, 1e-12);
    EXPECT_NEAR(cloud.positions[1].x(), 0.0075, 1e-12);
    EXPECT_NEAR((cloud.positions[1] - cloud.positions[0]).norm(), 0.01, 1e-12);
    EXPECT_EQ(cloud.positions[0].y(), 0.0);
}

TEST(PbdStep, IsolatedPairInsideCubeEndsAtMinimumDistance) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3<double> a = pfield::testing::randomPoint<double>(rng, 0.2, 0.8);
        const Vec3<double> b = a + rng.uniform(0.0001, 0.0099) * pfield::testing::randomUnit(rng);
        auto cloud = cloudAt({a, b});
        step(cloud, std::vector<Vec3<double>>(2, Vec3<double>::Zero()), PhysicsConfig{});
        EXPECT_NEAR((cloud.positions[1] - cloud.positions[0]).norm(), 0.01, 1e-9);
        // Equal and opposite displacements.
        EXPECT_LE(((cloud.positions[0] - a) + (cloud.positions[1] - b)).norm(), 1e-15);
    }
}

TEST(PbdStep, VelocityIsDisplacementOverTimestep) {
    Rng rng(2);
    auto cloud = pfield::testing::randomCloud<double>(rng, 200, 1, 0.06, 0.3, 0.5);
    std::vector<Vec3<double>> grads(cloud.size());
    for (auto &g : grads)
        g = pfield::testing::randomPoint<double>(rng, -0.05, 0.05);
    const auto before = cloud.positions;
    step(cloud, grads, PhysicsConfig{});
    for (std::size_t i = 0; i < cloud.size(); ++i)
        EXPECT_EQ(cloud.velocities[i], ((cloud.positions[i] - before[i]) / 0.01).eval());
}

TEST(PbdStep, DampingDecaysSpeedGeometrically) {
    auto cloud = cloudAt({Vec3<double>(0.5, 0.5, 0.5)});
    cloud.velocities[0] = Vec3<double>(0.3, -0.4, 0.0);
    const double v0 = cloud.velocities[0].norm();
    for (int k = 0; k < 10; ++k)
        step(cloud, {Vec3<double>::Zero()}, PhysicsConfig{});
    EXPECT_NEAR(cloud.velocities[0].norm(), std::pow(0.96, 10) * v0, 1e-9);
}

TEST(PbdStep, CoincidentPairSeparatesAlongX) {
    auto cloud = cloudAt({Vec3<double>(0.5, 0.5, 0.5), Vec3<double>(0.5, 0.5, 0.5)});
    step(cloud, std::vector<Vec3<double>>(2, Vec3<double>::Zero()), PhysicsConfig{});
    EXPECT_NEAR(cloud.positions[0].x(), 0.495, 1e-15);
    EXPECT_NEAR(cloud.positions[1].x(), 0.505, 1e-15);
    for (const auto &p : cloud.positions)
        EXPECT_TRUE(p.allFinite());
}

TEST(PbdStep, ClampsToUnitCube) {
    auto cloud = cloudAt({Vec3<double>(0.001, 0.5, 0.999)});
    step(cloud, {Vec3<double>(0.5, 0.0, -0.5)}, PhysicsConfig{});
    EXPECT_EQ(cloud.positions[0].x(), 0.0);
    EXPECT_EQ(cloud.positions[0].z(), 1.0);
}

TEST(PbdStep, Errors) {
    auto cloud = cloudAt({Vec3<double>(0.5, 0.5, 0.5)});
    SpatialIndex<double> index(cloud.positions, cloud.searchRadius);
    try {
        pbdStep<double>(cloud, std::vector<Vec3<double>>{Vec3<double>(std::nan(""), 0, 0)}, PhysicsConfig{}, index);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidGradient);
    }
    try {
        pbdStep<double>(cloud, std::vector<Vec3<double>>(2, Vec3<double>::Zero()), PhysicsConfig{}, index);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidShape);
    }
    PhysicsConfig bad;
    bad.damping = 1.5;
    EXPECT_THROW(pbdStep<double>(cloud, std::vector<Vec3<double>>(1, Vec3<double>::Zero()), bad, index), Error);
}

TEST(PbdStep, DenseClusterLeavesNoNaNAndReducesOverlap) {
    Rng rng(3);
    auto cloud = pfield::testing::randomCloud<double>(rng, 100, 1, 0.06, 0.49, 0.51);
    const auto countClose = [](const ParticleCloud<double> &c) {
        int n = 0;
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = i + 1; j < c.size(); ++j)
                n += (c.positions[i] - c.positions[j]).norm() < 0.01;
        return n;
    };
    const int before = countClose(cloud);
    for (int k = 0; k < 20; ++k)
        step(cloud, std::vector<Vec3<double>>(cloud.size(), Vec3<double>::Zero()), PhysicsConfig{});
    for (const auto &p : cloud.positions)
        EXPECT_TRUE(p.allFinite());
    EXPECT_LT(countClose(cloud), before);
}
