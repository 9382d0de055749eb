// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file physics.hpp
/// Position-based dynamics step that turns loss gradients into particle motion.

#pragma once

#include "common.hpp"
#include "neighbor_index.hpp"
#include "particle_encoding.hpp"

#include <optional>
#include <span>

namespace pfield {

struct PhysicsConfig {
    double damping = 0.96;     // gamma
    double timestep = 0.01;    // dt
    double minDistance = 0.01; // delta
    double gradientScale = 2.0; // alpha
    /// Positions are clamped to this box after collision resolution; nullopt disables clamping.
    std::optional<std::pair<double, double>> bounds = std::make_pair(0.0, 1.0);

    void validate() const {
        if (!(damping > 0.0 && damping <= 1.0))
            throw Error(ErrorCode::InvalidConfig, "damping must lie in (0, 1]");
        if (!(timestep > 0.0))
            throw Error(ErrorCode::InvalidConfig, "timestep must be positive");
        if (!(minDistance >= 0.0))
            throw Error(ErrorCode::InvalidConfig, "minimum distance must be non-negative");
        if (!(gradientScale >= 0.0))
            throw Error(ErrorCode::InvalidConfig, "gradient scale must be non-negative");
    }
};

/// One physics step, in order:
///   v <- gamma v - alpha g;  p <- x;  x <- x + dt v;
///   for each pair closer than delta, push both ends apart by half the overlap;
///   clamp to bounds;  v <- (x - p) / dt.
///
/// `index` is rebuilt over the integrated positions (keeping its radius, which
/// must be >= delta) and is left describing them. Pairs are resolved
/// sequentially in (i, j) order; a pair already separated by an earlier
/// correction is skipped. Coincident particles separate along +x.
template <class Real>
void
pbdStep(ParticleCloud<Real> &cloud, std::span<const Vec3<Real>> positionGrads, const PhysicsConfig &config,
        SpatialIndex<Real> &index) {
    config.validate();
    const std::size_t n = cloud.size();
    if (positionGrads.size() != n || cloud.velocities.size() != n)
        throw Error(ErrorCode::InvalidShape, "gradient count does not match the particle count");
    for (const auto &g : positionGrads)
        if (!g.allFinite())
            throw Error(ErrorCode::InvalidGradient, "position gradient is not finite");

    const Real gamma = static_cast<Real>(config.damping);
    const Real alpha = static_cast<Real>(config.gradientScale);
    const Real dt = static_cast<Real>(config.timestep);
    const Real delta = static_cast<Real>(config.minDistance);

    std::vector<Vec3<Real>> previous = cloud.positions;
    for (std::size_t i = 0; i < n; ++i) {
        cloud.velocities[i] = gamma * cloud.velocities[i] - alpha * positionGrads[i];
        cloud.positions[i] += dt * cloud.velocities[i];
    }

    if (delta > Real(0) && n > 1) {
        index.build(cloud.positions, index.radius());
        const auto pairs = collisionPairs<Real>(index, cloud.positions, delta);
        for (const auto &[i, j] : pairs) {
            Vec3<Real> &xi = cloud.positions[i];
            Vec3<Real> &xj = cloud.positions[j];
            const Vec3<Real> d = xj - xi;
            const Real l = d.norm();
            if (!(l < delta))
                continue;
            const Vec3<Real> axis = l > Real(0) ? (d / l).eval() : Vec3<Real>::UnitX().eval();
            const Vec3<Real> correction = Real(0.5) * (l - delta) * axis;
            xi += correction;
            xj -= correction;
        }
    }

    if (config.bounds) {
        const Real lo = static_cast<Real>(config.bounds->first);
        const Real hi = static_cast<Real>(config.bounds->second);
        for (auto &x : cloud.positions)
            x = x.cwiseMax(lo).cwiseMin(hi);
    }

    for (std::size_t i = 0; i < n; ++i)
        cloud.velocities[i] = (cloud.positions[i] - previous[i]) / dt;
}

} // namespace pfield
