// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file particle_encoding.hpp
/// Particle-based parametric encoding. Each particle carries a position, a
/// velocity and a learned feature vector; the feature at a query point is the
/// unnormalized sum of neighbor features weighted by the compact bump kernel
///
///     w(r) = exp(-s^2 / (s^2 - r^2))   for 0 <= r < s,   0 otherwise,
///
/// where s is the search radius. A query with no neighbors gets the zero vector.

#pragma once

#include "common.hpp"
#include "neighbor_index.hpp"

#include <limits>
#include <span>

namespace pfield {

template <class Real> struct ParticleCloud {
    std::vector<Vec3<Real>> positions;
    std::vector<Vec3<Real>> velocities;
    std::vector<Real> features; // size() * featureDim, particle-major
    int featureDim = 4;
    Real searchRadius = Real(0.06);

    std::size_t size() const { return positions.size(); }

    std::span<Real> feature(std::size_t i) {
        return {features.data() + i * featureDim, static_cast<std::size_t>(featureDim)};
    }
    std::span<const Real> feature(std::size_t i) const {
        return {features.data() + i * featureDim, static_cast<std::size_t>(featureDim)};
    }

    void validate() const {
        if (velocities.size() != positions.size() ||
            features.size() != positions.size() * static_cast<std::size_t>(featureDim))
            throw Error(ErrorCode::InvalidShape, "particle arrays disagree in length");
        if (featureDim < 1)
            throw Error(ErrorCode::InvalidShape, "feature dimension must be at least 1");
        if (!(searchRadius > Real(0)))
            throw Error(ErrorCode::InvalidRadius, "search radius must be positive");
    }

    template <class Other> ParticleCloud<Other> cast() const {
        ParticleCloud<Other> out;
        out.featureDim = featureDim;
        out.searchRadius = static_cast<Other>(searchRadius);
        for (const auto &p : positions)
            out.positions.push_back(p.template cast<Other>());
        for (const auto &v : velocities)
            out.velocities.push_back(v.template cast<Other>());
        out.features.assign(features.begin(), features.end());
        return out;
    }
};

/// dL/df_i and dL/dx_i, laid out like the cloud.
template <class Real> struct EncodingGradients {
    std::vector<Real> features;
    std::vector<Vec3<Real>> positions;

    EncodingGradients() = default;
    EncodingGradients(std::size_t count, int featureDim)
        : features(count * featureDim, Real(0)), positions(count, Vec3<Real>::Zero()) {}

    void setZero() {
        std::fill(features.begin(), features.end(), Real(0));
        std::fill(positions.begin(), positions.end(), Vec3<Real>::Zero());
    }

    EncodingGradients &operator+=(const EncodingGradients &other) {
        for (std::size_t i = 0; i < features.size(); ++i)
            features[i] += other.features[i];
        for (std::size_t i = 0; i < positions.size(); ++i)
            positions[i] += other.positions[i];
        return *this;
    }
};

/// Cell-centered lattice of ceil(count^(1/3))^3 slots truncated to `count`,
/// zero velocities, features uniform on (-0.01, 0.01).
template <class Real>
ParticleCloud<Real>
initParticles(std::size_t count, int featureDim, std::uint64_t seed, Real searchRadius = Real(0.06)) {
    if (count < 1 || featureDim < 1)
        throw Error(ErrorCode::InvalidShape, "particle count and feature dimension must be positive");
    std::size_t n = 1;
    while (n * n * n < count)
        ++n;
    ParticleCloud<Real> cloud;
    cloud.featureDim = featureDim;
    cloud.searchRadius = searchRadius;
    cloud.positions.reserve(count);
    for (std::size_t k = 0; k < n && cloud.positions.size() < count; ++k)
        for (std::size_t j = 0; j < n && cloud.positions.size() < count; ++j)
            for (std::size_t i = 0; i < n && cloud.positions.size() < count; ++i)
                cloud.positions.emplace_back(Real((i + 0.5) / n), Real((j + 0.5) / n), Real((k + 0.5) / n));
    cloud.velocities.assign(count, Vec3<Real>::Zero());
    cloud.features.resize(count * featureDim);
    Rng rng(mixSeed(seed, 0x46454154));
    for (auto &f : cloud.features) {
        Real v;
        do {
            v = static_cast<Real>(rng.uniform(-0.01, 0.01));
        } while (!(v > Real(-0.01) && v < Real(0.01)));
        f = v;
    }
    return cloud;
}

template <class Real> struct KernelValue {
    Real weight;
    Real dWeightDr;
};

template <class Real>
KernelValue<Real>
bumpKernel(Real r, Real s) {
    const Real s2 = s * s;
    const Real r2 = r * r;
    if (!(r < s))
        return {Real(0), Real(0)};
    const Real denom = s2 - r2;
    const Real w = std::exp(-s2 / denom);
    return {w, w * (Real(-2) * s2 * r / (denom * denom))};
}

/// One neighbor's contribution to a query: offset = x_i - query and
/// dWeightDr / r, so the position gradient needs no extra sqrt or division.
template <class Real> struct NeighborTerm {
    std::uint32_t index;
    Real weight;
    Real dWeightOverR;
    Vec3<Real> offset;
};

/// Kernel weights for every neighbor of `query`, appended to `out` in index
/// scan order. Works from squared distances: w = exp(-s^2/(s^2-r^2)) and
/// dw/dr / r = -2 s^2 w / (s^2-r^2)^2 are both functions of r^2.
template <class Real>
void
gatherNeighbors(const ParticleCloud<Real> &cloud, const SpatialIndex<Real> &index, const Vec3<Real> &query,
                std::vector<NeighborTerm<Real>> &out) {
    const Real s2 = cloud.searchRadius * cloud.searchRadius;
    index.forEachNeighbor(query, [&](std::uint32_t i, Real d2) {
        const Real denom = s2 - d2;
        if (!(denom > Real(0)))
            return;
        const Real w = std::exp(-s2 / denom);
        out.push_back({i, w, Real(-2) * s2 * w / (denom * denom), cloud.positions[i] - query});
    });
}

template <class Real>
void
accumulateFeature(const ParticleCloud<Real> &cloud, std::span<const NeighborTerm<Real>> terms, std::span<Real> out) {
    std::fill(out.begin(), out.end(), Real(0));
    for (const auto &t : terms) {
        const Real *f = cloud.features.data() + static_cast<std::size_t>(t.index) * cloud.featureDim;
        for (int c = 0; c < cloud.featureDim; ++c)
            out[c] += t.weight * f[c];
    }
}

/// Reverse pass for one query given dL/dF(query).
template <class Real>
void
scatterGradients(const ParticleCloud<Real> &cloud, std::span<const NeighborTerm<Real>> terms,
                 std::span<const Real> upstream, EncodingGradients<Real> &grads) {
    const int m = cloud.featureDim;
    for (const auto &t : terms) {
        const Real *f = cloud.features.data() + static_cast<std::size_t>(t.index) * m;
        Real *df = grads.features.data() + static_cast<std::size_t>(t.index) * m;
        Real dot = 0;
        for (int c = 0; c < m; ++c) {
            df[c] += t.weight * upstream[c];
            dot += upstream[c] * f[c];
        }
        // d r / d x_i = (x_i - q) / r, and dWeightOverR already carries the 1/r.
        grads.positions[t.index] += (dot * t.dWeightOverR) * t.offset;
    }
}

template <class Real>
VecX<Real>
interpolateFeature(const ParticleCloud<Real> &cloud, const SpatialIndex<Real> &index, const Vec3<Real> &query) {
    std::vector<NeighborTerm<Real>> terms;
    gatherNeighbors(cloud, index, query, terms);
    VecX<Real> feature(cloud.featureDim);
    accumulateFeature<Real>(cloud, terms, {feature.data(), static_cast<std::size_t>(feature.size())});
    return feature;
}

/// Accumulates dL/df_i += w_i * upstream and dL/dx_i += (upstream . f_i) w'(r_i) (x_i - q)/r_i.
template <class Real>
void
backpropagateToParticles(const ParticleCloud<Real> &cloud, const SpatialIndex<Real> &index,
                         const Vec3<Real> &query, std::span<const Real> upstream,
                         EncodingGradients<Real> &grads) {
    if (upstream.size() != static_cast<std::size_t>(cloud.featureDim) ||
        grads.features.size() != cloud.features.size() || grads.positions.size() != cloud.size())
        throw Error(ErrorCode::InvalidShape, "gradient shapes do not match the particle cloud");
    std::vector<NeighborTerm<Real>> terms;
    gatherNeighbors(cloud, index, query, terms);
    scatterGradients<Real>(cloud, terms, upstream, grads);
}

/// Rescales each position-gradient row to norm at most `maxNorm`.
template <class Real>
void
clipPositionGradients(EncodingGradients<Real> &grads, Real maxNorm) {
    for (auto &g : grads.positions) {
        const Real n = g.norm();
        if (n > maxNorm) {
            g *= maxNorm / n;
            // Rounding can leave the norm an ulp above the bound.
            while (g.norm() > maxNorm)
                g *= Real(1) - std::numeric_limits<Real>::epsilon();
        }
    }
}

/// T o P: positions take the full rigid transform, velocities only the
/// rotation, features are untouched.
template <class Real>
ParticleCloud<Real>
applyRigidTransform(const ParticleCloud<Real> &cloud, const Mat4<Real> &transform) {
    if (orthonormalityError(transform) > 1e-6 ||
        transform.row(3).template cast<double>() != Eigen::RowVector4d(0, 0, 0, 1))
        throw Error(ErrorCode::InvalidTransform, "transform is not rigid");
    const Mat3<Real> r = transform.template topLeftCorner<3, 3>();
    const Vec3<Real> t = transform.template topRightCorner<3, 1>();
    ParticleCloud<Real> out = cloud;
    for (auto &p : out.positions)
        p = r * p + t;
    for (auto &v : out.velocities)
        v = r * v;
    return out;
}

} // namespace pfield
