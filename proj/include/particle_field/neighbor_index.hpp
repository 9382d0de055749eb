// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file neighbor_index.hpp
/// Fixed-radius neighbor search over particle positions using sorted cell lists.
///
/// The unit cube is split into floor(1/r)^3 cells, so every cell edge is at
/// least r and a query only has to visit the 3x3x3 block around its own cell.
/// Coordinates outside the cube are clamped into the boundary cells; clamping is
/// 1-Lipschitz per axis, so completeness still holds for out-of-cube points.
/// Particles are ordered by cell id with a counting sort.

#pragma once

#include "common.hpp"

#include <span>
#include <utility>

namespace pfield {

template <class Real> struct NeighborHit {
    std::uint32_t index;
    Real distance;
};

template <class Real> class SpatialIndex {
  public:
    SpatialIndex() = default;

    SpatialIndex(std::span<const Vec3<Real>> positions, Real radius) { build(positions, radius); }

    void build(std::span<const Vec3<Real>> positions, Real radius) {
        if (!(radius > Real(0)))
            throw Error(ErrorCode::InvalidRadius, "search radius must be positive");
        mRadius = radius;
        mRadius2 = radius * radius;
        mDim = std::max(1, static_cast<int>(std::floor(Real(1) / radius)));

        const std::size_t cellCount = static_cast<std::size_t>(mDim) * mDim * mDim;
        mCellStart.assign(cellCount + 1, 0);
        mCellOf.resize(positions.size());
        for (std::size_t i = 0; i < positions.size(); ++i) {
            if (!positions[i].allFinite())
                throw Error(ErrorCode::InvalidInput, "particle position is not finite");
            mCellOf[i] = cellId(cellCoords(positions[i]));
            ++mCellStart[mCellOf[i] + 1];
        }
        for (std::size_t c = 0; c < cellCount; ++c)
            mCellStart[c + 1] += mCellStart[c];
        mOrder.resize(positions.size());
        std::vector<std::uint32_t> cursor(mCellStart.begin(), mCellStart.end() - 1);
        for (std::size_t i = 0; i < positions.size(); ++i)
            mOrder[cursor[mCellOf[i]]++] = static_cast<std::uint32_t>(i);

        mSorted.resize(positions.size());
        for (std::size_t k = 0; k < mOrder.size(); ++k)
            mSorted[k] = positions[mOrder[k]];
    }

    Real radius() const { return mRadius; }
    int cellsPerAxis() const { return mDim; }
    std::size_t size() const { return mOrder.size(); }

    /// Permutation of particle indices sorted by cell id.
    std::span<const std::uint32_t> order() const { return mOrder; }

    /// [start, end) of `order()` for a cell.
    std::pair<std::uint32_t, std::uint32_t> cellRange(std::size_t cell) const {
        return {mCellStart[cell], mCellStart[cell + 1]};
    }

    std::size_t occupiedCells() const {
        std::size_t n = 0;
        for (std::size_t c = 0; c + 1 < mCellStart.size(); ++c)
            n += mCellStart[c + 1] > mCellStart[c];
        return n;
    }

    std::size_t cellOf(std::size_t particle) const { return mCellOf[particle]; }

    std::size_t cellOfPoint(const Vec3<Real> &p) const { return cellId(cellCoords(p)); }

    /// Calls fn(index, squaredDistance) for every particle strictly within the
    /// search radius of `point`.
    template <class Fn> void forEachNeighbor(const Vec3<Real> &point, Fn &&fn) const {
        forEachWithin(point, mRadius2, std::forward<Fn>(fn));
    }

    /// Same as forEachNeighbor with a smaller radius (r2 must not exceed radius^2).
    template <class Fn> void forEachWithin(const Vec3<Real> &point, Real r2, Fn &&fn) const {
        if (mOrder.empty())
            return;
        const Eigen::Vector3i c = cellCoords(point);
        const int x0 = std::max(c.x() - 1, 0), x1 = std::min(c.x() + 1, mDim - 1);
        const int y0 = std::max(c.y() - 1, 0), y1 = std::min(c.y() + 1, mDim - 1);
        const int z0 = std::max(c.z() - 1, 0), z1 = std::min(c.z() + 1, mDim - 1);
        for (int z = z0; z <= z1; ++z) {
            for (int y = y0; y <= y1; ++y) {
                // Cells along x are contiguous in the sorted order.
                const std::size_t first = cellId({x0, y, z});
                const std::size_t last = cellId({x1, y, z});
                const std::uint32_t begin = mCellStart[first];
                const std::uint32_t end = mCellStart[last + 1];
                for (std::uint32_t k = begin; k < end; ++k) {
                    const Real d2 = squaredDistance(point, mSorted[k]);
                    if (d2 < r2)
                        fn(mOrder[k], d2);
                }
            }
        }
    }

    static Real squaredDistance(const Vec3<Real> &a, const Vec3<Real> &b) {
        const Real dx = a.x() - b.x();
        const Real dy = a.y() - b.y();
        const Real dz = a.z() - b.z();
        return dx * dx + dy * dy + dz * dz;
    }

  private:
    Eigen::Vector3i cellCoords(const Vec3<Real> &p) const {
        Eigen::Vector3i c;
        for (int a = 0; a < 3; ++a) {
            const Real clamped = std::clamp(p[a], Real(0), Real(1));
            c[a] = std::min(mDim - 1, static_cast<int>(clamped * mDim));
        }
        return c;
    }

    std::size_t cellId(const Eigen::Vector3i &c) const {
        return (static_cast<std::size_t>(c.z()) * mDim + c.y()) * mDim + c.x();
    }

    Real mRadius = Real(1);
    Real mRadius2 = Real(1);
    int mDim = 1;
    std::vector<std::uint32_t> mCellStart{0, 0};
    std::vector<std::uint32_t> mCellOf;
    std::vector<std::uint32_t> mOrder;
    std::vector<Vec3<Real>> mSorted;
};

template <class Real>
SpatialIndex<Real>
buildIndex(std::span<const Vec3<Real>> positions, Real radius) {
    return SpatialIndex<Real>(positions, radius);
}

template <class Real>
std::vector<NeighborHit<Real>>
queryRadius(const SpatialIndex<Real> &index, const Vec3<Real> &point) {
    std::vector<NeighborHit<Real>> hits;
    index.forEachNeighbor(point, [&](std::uint32_t i, Real d2) { hits.push_back({i, std::sqrt(d2)}); });
    return hits;
}

/// O(M) scan with the same metric and strict inequality as queryRadius.
template <class Real>
std::vector<NeighborHit<Real>>
bruteForceQuery(std::span<const Vec3<Real>> positions, const Vec3<Real> &point, Real radius) {
    std::vector<NeighborHit<Real>> hits;
    const Real r2 = radius * radius;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const Real d2 = SpatialIndex<Real>::squaredDistance(point, positions[i]);
        if (d2 < r2)
            hits.push_back({static_cast<std::uint32_t>(i), std::sqrt(d2)});
    }
    return hits;
}

/// All unordered pairs (i < j) closer than minDist, sorted lexicographically.
/// `positions` must be the array the index was built over.
template <class Real>
std::vector<std::pair<std::uint32_t, std::uint32_t>>
collisionPairs(const SpatialIndex<Real> &index, std::span<const Vec3<Real>> positions, Real minDist) {
    if (minDist > index.radius())
        throw Error(ErrorCode::IndexTooCoarse, "collision distance exceeds the index cell radius");
    if (positions.size() != index.size())
        throw Error(ErrorCode::InvalidShape, "positions do not match the index");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    const Real r2 = minDist * minDist;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const auto self = static_cast<std::uint32_t>(i);
        index.forEachWithin(positions[i], r2, [&](std::uint32_t j, Real) {
            if (j > self)
                pairs.emplace_back(self, j);
        });
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

} // namespace pfield
