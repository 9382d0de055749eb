// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file pipeline.hpp
/// Batched ray tracing through the full field: sample -> neighbor features ->
/// MLP -> composite, plus the reverse pass back into MLP parameters and
/// particle features/positions. Also whole-view rendering and density queries
/// for the occupancy grid.

#pragma once

#include "field_network.hpp"
#include "neighbor_index.hpp"
#include "particle_encoding.hpp"
#include "renderer.hpp"
#include "scene_io.hpp"

#include <span>

namespace pfield {

struct RenderConfig {
    /// Stratified samples spread over a span of length `far`; shorter segments
    /// get proportionally fewer so spacing stays at far / samplesPerRay.
    int samplesPerRay = 128;
    double near = 0.05;
    double far = 1.7320508075688772; // unit-cube diagonal
    Eigen::Vector3d background = Eigen::Vector3d::Ones();
};

/// Sampling interval for a ray: the unit-cube segment, starting no closer than
/// `near` and no longer than `far`. Returns nullopt when the ray misses the cube.
template <class Real>
std::optional<std::tuple<Real, Real, int>>
sampleInterval(const Ray<Real> &ray, const RenderConfig &config) {
    auto hit = intersectUnitCube(ray);
    if (!hit)
        return std::nullopt;
    const Real t0 = std::max(hit->first, static_cast<Real>(config.near));
    const Real t1 = std::min(hit->second, t0 + static_cast<Real>(config.far));
    if (!(t1 > t0))
        return std::nullopt;
    const int n = std::max(1, static_cast<int>(std::ceil(config.samplesPerRay * static_cast<double>(t1 - t0) / config.far)));
    return std::make_tuple(t0, t1, n);
}

/// Forward/backward state for one batch of rays. Samples with no particle
/// inside the search radius are dropped: the field is empty there.
template <class Real> class RayBatch {
  public:
    struct Sample {
        std::uint32_t ray;
        Real delta;
        std::uint32_t termBegin;
        std::uint32_t termEnd;
    };

    /// Traces `rays`; `keepCaches` retains what backward() needs.
    void trace(const ParticleCloud<Real> &cloud, const SpatialIndex<Real> &index, const FieldParams<Real> &params,
               const OccupancyGrid &grid, std::span<const Ray<Real>> rays, const RenderConfig &config, Rng &rng,
               bool keepCaches = true) {
        const int m = cloud.featureDim;
        if (params.featureDim() != m)
            throw Error(ErrorCode::InvalidShape, "MLP and particle features disagree in width");
        const int inDim = params.inputDim();
        mSamples.clear();
        mTerms.clear();
        mRayBegin.assign(rays.size() + 1, 0);
        std::vector<Real> inputs;

        for (std::size_t r = 0; r < rays.size(); ++r) {
            mRayBegin[r] = static_cast<std::uint32_t>(mSamples.size());
            const auto interval = sampleInterval(rays[r], config);
            if (!interval)
                continue;
            const auto [t0, t1, n] = *interval;
            const RaySamples<Real> samples = sampleAlongRay(rays[r], t0, t1, n, grid, rng);
            if (samples.size() == 0)
                continue;
            const auto sh = encodeDirection<Real>(samples.direction);
            for (std::size_t k = 0; k < samples.size(); ++k) {
                const auto begin = static_cast<std::uint32_t>(mTerms.size());
                gatherNeighbors(cloud, index, samples.points[k], mTerms);
                const auto end = static_cast<std::uint32_t>(mTerms.size());
                if (begin == end)
                    continue;
                mSamples.push_back({static_cast<std::uint32_t>(r), samples.deltas[k], begin, end});
                const std::size_t base = inputs.size();
                inputs.resize(base + inDim);
                accumulateFeature<Real>(cloud, std::span<const NeighborTerm<Real>>(mTerms).subspan(begin, end - begin),
                                        std::span<Real>(inputs.data() + base, m));
                std::copy(sh.begin(), sh.end(), inputs.begin() + base + m);
            }
        }
        mRayBegin[rays.size()] = static_cast<std::uint32_t>(mSamples.size());

        MatX<Real> input = Eigen::Map<MatX<Real>>(inputs.data(), inDim, static_cast<Eigen::Index>(mSamples.size()));
        fieldForwardBatch(params, std::move(input), mField);

        const Vec3<Real> background = config.background.template cast<Real>();
        mColors.resize(rays.size());
        mComposites.resize(keepCaches ? rays.size() : 0);
        std::vector<Vec3<Real>> colors;
        std::vector<Real> densities, deltas;
        for (std::size_t r = 0; r < rays.size(); ++r) {
            colors.clear();
            densities.clear();
            deltas.clear();
            for (std::uint32_t s = mRayBegin[r]; s < mRayBegin[r + 1]; ++s) {
                colors.push_back(mField.color[s]);
                densities.push_back(mField.density[s]);
                deltas.push_back(mSamples[s].delta);
            }
            mColors[r] = compositeRay<Real>(colors, densities, deltas, background,
                                            keepCaches ? &mComposites[r] : nullptr)
                             .color;
        }
        mHasCaches = keepCaches;
    }

    std::span<const Vec3<Real>> colors() const { return mColors; }
    std::size_t sampleCount() const { return mSamples.size(); }

    /// Accumulates parameter and particle gradients given dL/dC per ray.
    void backward(const ParticleCloud<Real> &cloud, const FieldParams<Real> &params,
                  std::span<const Vec3<Real>> dColors, FieldGrads<Real> &paramGrads,
                  EncodingGradients<Real> &encodingGrads) const {
        if (!mHasCaches || dColors.size() != mColors.size())
            throw Error(ErrorCode::InvalidCache, "backward needs a traced batch with caches");
        const std::size_t s = mSamples.size();
        std::vector<Real> dDensity(s);
        std::vector<Vec3<Real>> dColor(s);
        for (std::size_t r = 0; r < mColors.size(); ++r) {
            const std::uint32_t b = mRayBegin[r], e = mRayBegin[r + 1];
            if (b == e)
                continue;
            const CompositeGradients<Real> g = compositeBackward(mComposites[r], dColors[r]);
            for (std::uint32_t k = b; k < e; ++k) {
                dDensity[k] = g.densities[k - b];
                dColor[k] = g.colors[k - b];
            }
        }
        if (s == 0)
            return;
        const MatX<Real> dInput = fieldBackwardBatch<Real>(params, mField, dDensity, dColor, paramGrads);
        const std::span<const NeighborTerm<Real>> terms(mTerms);
        for (std::size_t k = 0; k < s; ++k) {
            const Sample &smp = mSamples[k];
            scatterGradients<Real>(cloud, terms.subspan(smp.termBegin, smp.termEnd - smp.termBegin),
                                   std::span<const Real>(dInput.col(static_cast<Eigen::Index>(k)).data(),
                                                         static_cast<std::size_t>(cloud.featureDim)),
                                   encodingGrads);
        }
    }

  private:
    std::vector<Sample> mSamples;
    std::vector<NeighborTerm<Real>> mTerms;
    std::vector<std::uint32_t> mRayBegin;
    FieldBatchCache<Real> mField;
    std::vector<CompositeCache<Real>> mComposites;
    std::vector<Vec3<Real>> mColors;
    bool mHasCaches = false;
};

/// Density at each point for a fixed viewing direction; zero where no
/// particle is within the search radius.
template <class Real>
std::vector<Real>
evaluateDensity(const ParticleCloud<Real> &cloud, const SpatialIndex<Real> &index, const FieldParams<Real> &params,
                std::span<const Vec3<Real>> points, const Vec3<Real> &direction = Vec3<Real>::UnitZ()) {
    constexpr std::size_t kChunk = 8192;
    std::vector<Real> out(points.size(), Real(0));
    const auto sh = encodeDirection<Real>(direction);
    const int m = cloud.featureDim;
    const int inDim = params.inputDim();
    const std::size_t chunks = (points.size() + kChunk - 1) / kChunk;
    parallelFor(chunks, [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(points.size(), begin + kChunk);
        std::vector<NeighborTerm<Real>> terms;
        std::vector<std::size_t> live;
        std::vector<Real> inputs;
        for (std::size_t i = begin; i < end; ++i) {
            terms.clear();
            gatherNeighbors(cloud, index, points[i], terms);
            if (terms.empty())
                continue;
            live.push_back(i);
            const std::size_t base = inputs.size();
            inputs.resize(base + inDim);
            accumulateFeature<Real>(cloud, terms, std::span<Real>(inputs.data() + base, m));
            std::copy(sh.begin(), sh.end(), inputs.begin() + base + m);
        }
        if (live.empty())
            return;
        FieldBatchCache<Real> cache;
        fieldForwardBatch(params, MatX<Real>(Eigen::Map<MatX<Real>>(inputs.data(), inDim, static_cast<Eigen::Index>(live.size()))), cache);
        for (std::size_t k = 0; k < live.size(); ++k)
            out[live[k]] = cache.density[k];
    });
    return out;
}

template <class Real>
void
refreshOccupancy(OccupancyGrid &grid, const ParticleCloud<Real> &cloud, const SpatialIndex<Real> &index,
                 const FieldParams<Real> &params) {
    updateOccupancyBatch<Real>(grid, [&](std::span<const Vec3<Real>> pts) {
        return evaluateDensity(cloud, index, params, pts);
    });
}

/// Renders a full view through pixel centers. Each image row draws its sample
/// jitter from Rng(mix(seed, row)), so output is independent of thread count.
template <class Real>
Image
renderView(const ParticleCloud<Real> &cloud, const SpatialIndex<Real> &index, const FieldParams<Real> &params,
           const Camera &camera, const OccupancyGrid &grid, const RenderConfig &config, std::uint64_t seed) {
    Image image(camera.width, camera.height);
    parallelFor(static_cast<std::size_t>(camera.height), [&](std::size_t y) {
        std::vector<Ray<Real>> rays(camera.width);
        for (int x = 0; x < camera.width; ++x) {
            const Ray<double> r = generateRay(camera, x + 0.5, y + 0.5);
            rays[x].origin = r.origin.template cast<Real>();
            rays[x].direction = r.direction.template cast<Real>();
        }
        Rng rng(mixSeed(seed, y));
        RayBatch<Real> batch;
        batch.trace(cloud, index, params, grid, rays, config, rng, false);
        const auto colors = batch.colors();
        for (int x = 0; x < camera.width; ++x)
            for (int c = 0; c < 3; ++c)
                image.at(x, static_cast<int>(y), c) = static_cast<float>(colors[x][c]);
    });
    return image;
}

} // namespace pfield
