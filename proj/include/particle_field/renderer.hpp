// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file renderer.hpp
/// Volume-rendering primitives: stratified ray sampling with occupancy culling,
/// alpha compositing and its reverse pass, the photometric loss, occupancy-grid
/// refresh, and PSNR/SSIM.

#pragma once

#include "common.hpp"
#include "image.hpp"

#include <span>

namespace pfield {

template <class Real> struct RaySamples {
    std::vector<Real> t;
    std::vector<Vec3<Real>> points;
    std::vector<Real> deltas;
    Vec3<Real> direction = Vec3<Real>(0, 0, -1);

    std::size_t size() const { return t.size(); }
};

/// Boolean grid over the unit cube. Points outside the cube are never occupied.
/// Fixed: occupied when density > threshold. ClampToMean: occupied when
/// density > min(threshold, mean cell density), so a field whose densities all
/// sink below the threshold keeps its densest cells.
enum class ThresholdRule { Fixed, ClampToMean };

class OccupancyGrid {
  public:
    explicit OccupancyGrid(int resolution = 32, double threshold = 0.32, ThresholdRule rule = ThresholdRule::ClampToMean)
        : mResolution(resolution), mThreshold(threshold), mRule(rule) {
        if (resolution < 1)
            throw Error(ErrorCode::InvalidConfig, "occupancy resolution must be at least 1");
        if (threshold < 0.0)
            throw Error(ErrorCode::InvalidConfig, "occupancy threshold must be non-negative");
        mBits.assign(static_cast<std::size_t>(resolution) * resolution * resolution, 1);
    }

    int resolution() const { return mResolution; }
    double threshold() const { return mThreshold; }
    ThresholdRule rule() const { return mRule; }
    std::size_t cellCount() const { return mBits.size(); }

    void fill(bool occupied) { std::fill(mBits.begin(), mBits.end(), occupied ? 1 : 0); }

    bool cell(std::size_t i) const { return mBits[i] != 0; }
    void setCell(std::size_t i, bool occupied) { mBits[i] = occupied ? 1 : 0; }

    std::size_t occupiedCount() const {
        return static_cast<std::size_t>(std::count(mBits.begin(), mBits.end(), std::uint8_t(1)));
    }

    template <class Real> Vec3<Real> cellCenter(std::size_t i) const {
        const std::size_t r = mResolution;
        const std::size_t x = i % r, y = (i / r) % r, z = i / (r * r);
        return Vec3<Real>(Real((x + 0.5) / r), Real((y + 0.5) / r), Real((z + 0.5) / r));
    }

    template <class Real> bool occupied(const Vec3<Real> &p) const {
        if ((p.array() < Real(0)).any() || (p.array() > Real(1)).any())
            return false;
        std::size_t idx[3];
        for (int a = 0; a < 3; ++a)
            idx[a] = std::min<std::size_t>(mResolution - 1, static_cast<std::size_t>(p[a] * mResolution));
        return mBits[(idx[2] * mResolution + idx[1]) * mResolution + idx[0]] != 0;
    }

  private:
    int mResolution;
    double mThreshold;
    ThresholdRule mRule;
    std::vector<std::uint8_t> mBits;
};

/// Entry/exit distances of a ray through the unit cube, if it hits.
template <class Real>
std::optional<std::pair<Real, Real>>
intersectUnitCube(const Ray<Real> &ray) {
    Real t0 = -std::numeric_limits<Real>::infinity();
    Real t1 = std::numeric_limits<Real>::infinity();
    for (int a = 0; a < 3; ++a) {
        const Real o = ray.origin[a];
        const Real d = ray.direction[a];
        if (d == Real(0)) {
            if (o < Real(0) || o > Real(1))
                return std::nullopt;
            continue;
        }
        Real lo = (Real(0) - o) / d;
        Real hi = (Real(1) - o) / d;
        if (lo > hi)
            std::swap(lo, hi);
        t0 = std::max(t0, lo);
        t1 = std::min(t1, hi);
    }
    if (t1 <= std::max(t0, Real(0)))
        return std::nullopt;
    return std::make_pair(std::max(t0, Real(0)), t1);
}

/// n stratified, jittered samples on [near, far]; each sample keeps the length
/// of its own stratum segment (t_{k+1} - t_k, last one runs to `far`), then
/// samples in unoccupied cells are dropped. Deltas are measured before culling
/// so skipped free space never inflates a neighbor's opacity.
template <class Real>
RaySamples<Real>
sampleAlongRay(const Ray<Real> &ray, Real near, Real far, int n, const OccupancyGrid &grid, Rng &rng) {
    const Real dirNorm = ray.direction.norm();
    if (!(dirNorm > Real(0)) || !ray.direction.allFinite())
        throw Error(ErrorCode::InvalidRay, "ray direction is degenerate");
    if (!(near >= Real(0) && near < far) || n < 1)
        throw Error(ErrorCode::InvalidInput, "sampling needs 0 <= near < far and n >= 1");
    RaySamples<Real> out;
    out.direction = ray.direction / dirNorm;
    const Real stratum = (far - near) / Real(n);
    std::vector<Real> t(n);
    for (int k = 0; k < n; ++k)
        t[k] = near + (Real(k) + static_cast<Real>(rng.uniform())) * stratum;
    for (int k = 0; k < n; ++k) {
        const Real next = (k + 1 < n) ? t[k + 1] : far;
        const Vec3<Real> p = ray.origin + t[k] * ray.direction;
        if (!grid.occupied(p))
            continue;
        out.t.push_back(t[k]);
        out.points.push_back(p);
        out.deltas.push_back((next - t[k]) * dirNorm);
    }
    return out;
}

template <class Real> struct CompositeCache {
    std::vector<Vec3<Real>> colors;
    std::vector<Real> densities;
    std::vector<Real> deltas;
    std::vector<Real> transmittance; // T_1..T_{N+1}
    std::vector<Real> weights;
    Vec3<Real> background = Vec3<Real>::Ones();
};

template <class Real> struct RenderOutput {
    Vec3<Real> color = Vec3<Real>::Zero();
    std::vector<Real> weights;
    Real transmittanceTail = Real(1);
};

/// C = sum_i T_i (1 - exp(-sigma_i delta_i)) c_i + T_{N+1} * background,
/// T_i = exp(-sum_{j<i} sigma_j delta_j).
template <class Real>
RenderOutput<Real>
compositeRay(std::span<const Vec3<Real>> colors, std::span<const Real> densities, std::span<const Real> deltas,
             const Vec3<Real> &background, CompositeCache<Real> *cache = nullptr) {
    const std::size_t n = densities.size();
    if (colors.size() != n || deltas.size() != n)
        throw Error(ErrorCode::InvalidShape, "colors, densities and deltas must agree in length");
    RenderOutput<Real> out;
    out.weights.resize(n);
    std::vector<Real> trans(n + 1);
    Real optical = 0;
    trans[0] = Real(1);
    for (std::size_t i = 0; i < n; ++i) {
        if (densities[i] < Real(0))
            throw Error(ErrorCode::InvalidDensity, "density must be non-negative");
        const Real tau = densities[i] * deltas[i];
        optical += tau;
        trans[i + 1] = std::exp(-optical);
        out.weights[i] = trans[i] * (Real(1) - std::exp(-tau));
        out.color += out.weights[i] * colors[i];
    }
    out.transmittanceTail = trans[n];
    out.color += out.transmittanceTail * background;
    if (cache) {
        cache->colors.assign(colors.begin(), colors.end());
        cache->densities.assign(densities.begin(), densities.end());
        cache->deltas.assign(deltas.begin(), deltas.end());
        cache->transmittance = std::move(trans);
        cache->weights = out.weights;
        cache->background = background;
    }
    return out;
}

template <class Real> struct CompositeGradients {
    std::vector<Vec3<Real>> colors;
    std::vector<Real> densities;
};

/// dC/dc_k = w_k and dC/dsigma_k = delta_k (T_{k+1} c_k - sum_{i>k} w_i c_i - T_{N+1} bg).
template <class Real>
CompositeGradients<Real>
compositeBackward(const CompositeCache<Real> &cache, const Vec3<Real> &dColor) {
    const std::size_t n = cache.densities.size();
    if (cache.colors.size() != n || cache.deltas.size() != n || cache.weights.size() != n ||
        cache.transmittance.size() != n + 1)
        throw Error(ErrorCode::InvalidCache, "composite cache is incomplete");
    CompositeGradients<Real> g;
    g.colors.resize(n);
    g.densities.resize(n);
    Vec3<Real> behind = cache.transmittance[n] * cache.background;
    for (std::size_t k = n; k-- > 0;) {
        g.colors[k] = cache.weights[k] * dColor;
        g.densities[k] = cache.deltas[k] * dColor.dot(cache.transmittance[k + 1] * cache.colors[k] - behind);
        behind += cache.weights[k] * cache.colors[k];
    }
    return g;
}

enum class LossMode { Squared, Unsquared };

template <class Real> struct LossResult {
    Real loss = 0;
    std::vector<Vec3<Real>> grad;
};

/// Squared: mean over rays of |C - c|^2. Unsquared: sum over rays of |C - c|.
template <class Real>
LossResult<Real>
photometricLoss(std::span<const Vec3<Real>> pred, std::span<const Vec3<Real>> gt, LossMode mode = LossMode::Squared) {
    if (pred.size() != gt.size())
        throw Error(ErrorCode::InvalidShape, "prediction and target batches differ in size");
    LossResult<Real> out;
    out.grad.resize(pred.size());
    const Real batch = static_cast<Real>(std::max<std::size_t>(1, pred.size()));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Vec3<Real> diff = pred[i] - gt[i];
        if (mode == LossMode::Squared) {
            out.loss += diff.squaredNorm() / batch;
            out.grad[i] = Real(2) * diff / batch;
        } else {
            const Real n = diff.norm();
            out.loss += n;
            out.grad[i] = n > Real(0) ? (diff / n).eval() : Vec3<Real>::Zero();
        }
    }
    return out;
}

namespace detail {

inline void
applyOccupancy(OccupancyGrid &grid, const std::vector<double> &density) {
    double threshold = grid.threshold();
    if (grid.rule() == ThresholdRule::ClampToMean && !density.empty()) {
        double mean = 0;
        for (double d : density)
            mean += d;
        threshold = std::min(threshold, mean / static_cast<double>(density.size()));
    }
    for (std::size_t i = 0; i < density.size(); ++i)
        grid.setCell(i, density[i] > threshold);
}

} // namespace detail

/// Full refresh from densities at cell centers under the grid's threshold rule.
template <class Real>
void
updateOccupancy(OccupancyGrid &grid, const std::function<Real(const Vec3<Real> &)> &density) {
    std::vector<double> d(grid.cellCount());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = static_cast<double>(density(grid.cellCenter<Real>(i)));
    detail::applyOccupancy(grid, d);
}

/// Batch variant: the evaluator receives all cell centers at once.
template <class Real>
void
updateOccupancyBatch(OccupancyGrid &grid,
                     const std::function<std::vector<Real>(std::span<const Vec3<Real>>)> &density) {
    std::vector<Vec3<Real>> centers(grid.cellCount());
    for (std::size_t i = 0; i < centers.size(); ++i)
        centers[i] = grid.cellCenter<Real>(i);
    const std::vector<Real> d = density(centers);
    if (d.size() != centers.size())
        throw Error(ErrorCode::InvalidShape, "density evaluator returned the wrong count");
    detail::applyOccupancy(grid, std::vector<double>(d.begin(), d.end()));
}

// --- metrics ----------------------------------------------------------------

inline constexpr double kPsnrCap = 99.0;

inline double
meanSquaredError(const Image &a, const Image &b) {
    if (a.width != b.width || a.height != b.height)
        throw Error(ErrorCode::InvalidShape, "images differ in size");
    double sum = 0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
        sum += d * d;
    }
    return a.rgb.empty() ? 0.0 : sum / static_cast<double>(a.rgb.size());
}

inline double
psnr(const Image &a, const Image &b) {
    const double mse = meanSquaredError(a, b);
    return mse < 1e-10 ? kPsnrCap : 10.0 * std::log10(1.0 / mse);
}

namespace detail {

/// Separable Gaussian blur with 'valid' borders.
inline std::vector<double>
gaussianValid(const std::vector<double> &src, int w, int h, const std::vector<double> &kernel, int &outW, int &outH) {
    const int k = static_cast<int>(kernel.size());
    outW = w - k + 1;
    outH = h - k + 1;
    std::vector<double> tmp(static_cast<std::size_t>(outW) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < outW; ++x) {
            double s = 0;
            for (int i = 0; i < k; ++i)
                s += kernel[i] * src[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * outW + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(outW) * outH);
    for (int y = 0; y < outH; ++y)
        for (int x = 0; x < outW; ++x) {
            double s = 0;
            for (int i = 0; i < k; ++i)
                s += kernel[i] * tmp[static_cast<std::size_t>(y + i) * outW + x];
            out[static_cast<std::size_t>(y) * outW + x] = s;
        }
    return out;
}

} // namespace detail

/// Mean SSIM over channels: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, data range 1, valid region only. Images smaller than the window
/// shrink it to the smaller image side.
inline double
ssim(const Image &a, const Image &b) {
    if (a.width != b.width || a.height != b.height)
        throw Error(ErrorCode::InvalidShape, "images differ in size");
    const int w = a.width, h = a.height;
    if (w == 0 || h == 0)
        return 1.0;
    const int size = std::min({11, w, h});
    std::vector<double> kernel(size);
    double norm = 0;
    for (int i = 0; i < size; ++i) {
        const double x = i - (size - 1) / 2.0;
        kernel[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
        norm += kernel[i];
    }
    for (auto &v : kernel)
        v /= norm;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    double total = 0;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a.rgb[i * 3 + c];
            y[i] = b.rgb[i * 3 + c];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        int ow = 0, oh = 0;
        const auto mx = detail::gaussianValid(x, w, h, kernel, ow, oh);
        const auto my = detail::gaussianValid(y, w, h, kernel, ow, oh);
        const auto mxx = detail::gaussianValid(xx, w, h, kernel, ow, oh);
        const auto myy = detail::gaussianValid(yy, w, h, kernel, ow, oh);
        const auto mxy = detail::gaussianValid(xy, w, h, kernel, ow, oh);
        double sum = 0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = mxx[i] - mx[i] * mx[i];
            const double vy = myy[i] - my[i] * my[i];
            const double cxy = mxy[i] - mx[i] * my[i];
            sum += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += sum / static_cast<double>(mx.size());
    }
    return total / 3.0;
}

struct ImageMetrics {
    double psnr;
    double ssim;
};

inline ImageMetrics
imageMetrics(const Image &a, const Image &b) {
    return {psnr(a, b), ssim(a, b)};
}

} // namespace pfield
