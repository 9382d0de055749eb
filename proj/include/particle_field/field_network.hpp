// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file field_network.hpp
/// The radiance-field MLP: [feature ++ SH(direction)] -> 64 -> 64 -> 4 with ReLU
/// between layers, density = exp(raw0) and color = sigmoid(raw1..3). Reverse-mode
/// gradients are written by hand; Adam lives here as well.

#pragma once

#include "common.hpp"

#include <array>
#include <span>

namespace pfield {

inline constexpr int kDirectionEncodingSize = 16;
inline constexpr int kHiddenWidth = 64;
inline constexpr int kOutputSize = 4;

/// exp() is truncated at this raw value; the gradient uses the same truncated
/// exponential so large activations keep a usable slope.
inline constexpr double kMaxDensityLogit = 15.0;

/// Real spherical harmonics, bands 0..3, evaluated at a unit direction.
template <class Real>
std::array<Real, kDirectionEncodingSize>
encodeDirection(const Vec3<Real> &d) {
    if (std::abs(static_cast<double>(d.norm()) - 1.0) > 1e-6)
        throw Error(ErrorCode::InvalidDirection, "direction must be unit length");
    const Real x = d.x(), y = d.y(), z = d.z();
    const Real xx = x * x, yy = y * y, zz = z * z;
    return {Real(0.28209479177387814),
            Real(-0.48860251190291987) * y,
            Real(0.48860251190291987) * z,
            Real(-0.48860251190291987) * x,
            Real(1.0925484305920792) * x * y,
            Real(-1.0925484305920792) * y * z,
            Real(0.94617469575755997) * zz - Real(0.31539156525251999),
            Real(-1.0925484305920792) * x * z,
            Real(0.54627421529603959) * (xx - yy),
            Real(0.59004358992664352) * y * (Real(-3) * xx + yy),
            Real(2.8906114426405538) * x * y * z,
            Real(0.45704579946446572) * y * (Real(1) - Real(5) * zz),
            Real(0.3731763325901154) * z * (Real(5) * zz - Real(3)),
            Real(0.45704579946446572) * x * (Real(1) - Real(5) * zz),
            Real(1.4453057213202769) * z * (xx - yy),
            Real(0.59004358992664352) * x * (-xx + Real(3) * yy)};
}

/// Flat parameter vector with matrix views. Layout: W1, b1, W2, b2, W3, b3,
/// each W column-major.
template <class Real> class FieldParams {
  public:
    using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    using MatrixMap = Eigen::Map<Matrix>;
    using ConstMatrixMap = Eigen::Map<const Matrix>;
    using VectorMap = Eigen::Map<VecX<Real>>;
    using ConstVectorMap = Eigen::Map<const VecX<Real>>;

    FieldParams() : FieldParams(4) {}

    explicit FieldParams(int featureDim)
        : mFeatureDim(featureDim), mInputDim(featureDim + kDirectionEncodingSize) {
        if (featureDim < 1)
            throw Error(ErrorCode::InvalidShape, "feature dimension must be at least 1");
        mData.assign(parameterCount(featureDim), Real(0));
    }

    static std::size_t parameterCount(int featureDim) {
        const std::size_t in = featureDim + kDirectionEncodingSize;
        return kHiddenWidth * in + kHiddenWidth + kHiddenWidth * kHiddenWidth + kHiddenWidth +
               kOutputSize * kHiddenWidth + kOutputSize;
    }

    /// He-uniform weights, zero biases.
    static FieldParams heUniform(int featureDim, std::uint64_t seed) {
        FieldParams p(featureDim);
        Rng rng(mixSeed(seed, 0x4d4c50));
        auto fill = [&](MatrixMap w) {
            const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                for (Eigen::Index r = 0; r < w.rows(); ++r)
                    w(r, c) = static_cast<Real>(rng.uniform(-bound, bound));
        };
        fill(p.w1());
        fill(p.w2());
        fill(p.w3());
        return p;
    }

    int featureDim() const { return mFeatureDim; }
    int inputDim() const { return mInputDim; }

    std::span<Real> data() { return mData; }
    std::span<const Real> data() const { return mData; }
    std::size_t size() const { return mData.size(); }

    /// Bumped whenever parameters change; forward caches remember it.
    std::uint64_t version() const { return mVersion; }
    void touch() { ++mVersion; }

    MatrixMap w1() { return {mData.data() + offW1(), kHiddenWidth, mInputDim}; }
    VectorMap b1() { return {mData.data() + offB1(), kHiddenWidth}; }
    MatrixMap w2() { return {mData.data() + offW2(), kHiddenWidth, kHiddenWidth}; }
    VectorMap b2() { return {mData.data() + offB2(), kHiddenWidth}; }
    MatrixMap w3() { return {mData.data() + offW3(), kOutputSize, kHiddenWidth}; }
    VectorMap b3() { return {mData.data() + offB3(), kOutputSize}; }
    ConstMatrixMap w1() const { return {mData.data() + offW1(), kHiddenWidth, mInputDim}; }
    ConstVectorMap b1() const { return {mData.data() + offB1(), kHiddenWidth}; }
    ConstMatrixMap w2() const { return {mData.data() + offW2(), kHiddenWidth, kHiddenWidth}; }
    ConstVectorMap b2() const { return {mData.data() + offB2(), kHiddenWidth}; }
    ConstMatrixMap w3() const { return {mData.data() + offW3(), kOutputSize, kHiddenWidth}; }
    ConstVectorMap b3() const { return {mData.data() + offB3(), kOutputSize}; }

    std::size_t offW1() const { return 0; }
    std::size_t offB1() const { return offW1() + static_cast<std::size_t>(kHiddenWidth) * mInputDim; }
    std::size_t offW2() const { return offB1() + kHiddenWidth; }
    std::size_t offB2() const { return offW2() + kHiddenWidth * kHiddenWidth; }
    std::size_t offW3() const { return offB2() + kHiddenWidth; }
    std::size_t offB3() const { return offW3() + kOutputSize * kHiddenWidth; }

    template <class Other> FieldParams<Other> cast() const {
        FieldParams<Other> out(mFeatureDim);
        std::copy(mData.begin(), mData.end(), out.data().begin());
        return out;
    }

  private:
    int mFeatureDim;
    int mInputDim;
    AlignedVector<Real> mData;
    std::uint64_t mVersion = 0;
};

/// Same layout as FieldParams::data().
template <class Real> using FieldGrads = AlignedVector<Real>;

/// Activations of a batch of samples (one column per sample).
template <class Real> struct FieldBatchCache {
    MatX<Real> input;   // inputDim x N
    MatX<Real> hidden1; // post-ReLU
    MatX<Real> hidden2;
    MatX<Real> raw;     // 4 x N
    std::vector<Real> density;
    std::vector<Vec3<Real>> color;
    std::uint64_t paramsVersion = 0;
    const void *paramsId = nullptr;
};

template <class Real>
void
fieldForwardBatch(const FieldParams<Real> &params, MatX<Real> input, FieldBatchCache<Real> &cache) {
    if (input.rows() != params.inputDim())
        throw Error(ErrorCode::InvalidShape, "MLP input has the wrong width");
    cache.input = std::move(input);
    cache.hidden1.noalias() = params.w1() * cache.input;
    cache.hidden1.colwise() += params.b1();
    cache.hidden1 = cache.hidden1.cwiseMax(Real(0));
    cache.hidden2.noalias() = params.w2() * cache.hidden1;
    cache.hidden2.colwise() += params.b2();
    cache.hidden2 = cache.hidden2.cwiseMax(Real(0));
    cache.raw.noalias() = params.w3() * cache.hidden2;
    cache.raw.colwise() += params.b3();

    const Eigen::Index n = cache.input.cols();
    cache.density.resize(n);
    cache.color.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        cache.density[i] = std::exp(std::min(cache.raw(0, i), Real(kMaxDensityLogit)));
        for (int c = 0; c < 3; ++c)
            cache.color[i][c] = Real(1) / (Real(1) + std::exp(-cache.raw(1 + c, i)));
    }
    cache.paramsVersion = params.version();
    cache.paramsId = &params;
}

/// Reverse pass. Accumulates parameter gradients into `paramGrads` and returns
/// dL/d(input) (inputDim x N); only the first featureDim rows are meaningful to
/// callers; directions are fixed inputs.
template <class Real>
MatX<Real>
fieldBackwardBatch(const FieldParams<Real> &params, const FieldBatchCache<Real> &cache,
                   std::span<const Real> dDensity, std::span<const Vec3<Real>> dColor,
                   FieldGrads<Real> &paramGrads) {
    if (cache.paramsId != &params || cache.paramsVersion != params.version())
        throw Error(ErrorCode::InvalidCache, "forward cache does not match current parameters");
    const Eigen::Index n = cache.input.cols();
    if (static_cast<Eigen::Index>(dDensity.size()) != n || static_cast<Eigen::Index>(dColor.size()) != n)
        throw Error(ErrorCode::InvalidShape, "upstream gradient size does not match the batch");
    if (paramGrads.size() != params.size())
        throw Error(ErrorCode::InvalidShape, "parameter gradient buffer has the wrong size");

    MatX<Real> dRaw(kOutputSize, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dRaw(0, i) = dDensity[i] * cache.density[i];
        for (int c = 0; c < 3; ++c) {
            const Real s = cache.color[i][c];
            dRaw(1 + c, i) = dColor[i][c] * s * (Real(1) - s);
        }
    }

    using Map = Eigen::Map<MatX<Real>>;
    using VMap = Eigen::Map<VecX<Real>>;
    Real *g = paramGrads.data();
    const int inDim = params.inputDim();
    Map(g + params.offW3(), kOutputSize, kHiddenWidth).noalias() += dRaw * cache.hidden2.transpose();
    VMap(g + params.offB3(), kOutputSize) += dRaw.rowwise().sum();

    MatX<Real> dH2 = params.w3().transpose() * dRaw;
    dH2 = dH2.cwiseProduct((cache.hidden2.array() > Real(0)).template cast<Real>().matrix());
    Map(g + params.offW2(), kHiddenWidth, kHiddenWidth).noalias() += dH2 * cache.hidden1.transpose();
    VMap(g + params.offB2(), kHiddenWidth) += dH2.rowwise().sum();

    MatX<Real> dH1 = params.w2().transpose() * dH2;
    dH1 = dH1.cwiseProduct((cache.hidden1.array() > Real(0)).template cast<Real>().matrix());
    Map(g + params.offW1(), kHiddenWidth, inDim).noalias() += dH1 * cache.input.transpose();
    VMap(g + params.offB1(), kHiddenWidth) += dH1.rowwise().sum();

    return params.w1().transpose() * dH1;
}

template <class Real> struct FieldOutput {
    Real density;
    Vec3<Real> color;
};

/// Single-sample convenience over the batch path.
template <class Real>
FieldOutput<Real>
fieldForward(const FieldParams<Real> &params, std::span<const Real> feature,
             std::span<const Real> dirEncoding, FieldBatchCache<Real> &cache) {
    if (static_cast<int>(feature.size()) != params.featureDim() ||
        dirEncoding.size() != static_cast<std::size_t>(kDirectionEncodingSize))
        throw Error(ErrorCode::InvalidShape, "feature or direction encoding has the wrong size");
    MatX<Real> input(params.inputDim(), 1);
    for (std::size_t i = 0; i < feature.size(); ++i)
        input(static_cast<Eigen::Index>(i), 0) = feature[i];
    for (std::size_t i = 0; i < dirEncoding.size(); ++i)
        input(static_cast<Eigen::Index>(feature.size() + i), 0) = dirEncoding[i];
    fieldForwardBatch(params, std::move(input), cache);
    return {cache.density[0], cache.color[0]};
}

/// Returns dL/dfeature; parameter gradients are accumulated into `paramGrads`.
template <class Real>
VecX<Real>
fieldBackward(const FieldParams<Real> &params, const FieldBatchCache<Real> &cache, Real dDensity,
              const Vec3<Real> &dColor, FieldGrads<Real> &paramGrads) {
    if (cache.input.cols() != 1)
        throw Error(ErrorCode::InvalidCache, "single-sample backward needs a single-sample cache");
    const Real dd[1] = {dDensity};
    const Vec3<Real> dc[1] = {dColor};
    const MatX<Real> dInput = fieldBackwardBatch<Real>(params, cache, dd, dc, paramGrads);
    return dInput.col(0).head(params.featureDim());
}

struct AdamHyper {
    double learningRate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double epsilon = 1e-10;
};

template <class Real> struct AdamState {
    std::vector<Real> m;
    std::vector<Real> v;
    std::uint64_t step = 0;
    AdamHyper hyper;

    AdamState() = default;
    AdamState(std::size_t size, AdamHyper h) : m(size, Real(0)), v(size, Real(0)), hyper(h) {}
};

/// Bias-corrected Adam, in place.
template <class Real>
void
adamStep(AdamState<Real> &state, std::span<Real> params, std::span<const Real> grads) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw Error(ErrorCode::InvalidShape, "Adam state, parameters and gradients must agree in size");
    ++state.step;
    const Real b1 = static_cast<Real>(state.hyper.beta1);
    const Real b2 = static_cast<Real>(state.hyper.beta2);
    const Real eps = static_cast<Real>(state.hyper.epsilon);
    const double t = static_cast<double>(state.step);
    const Real c1 = static_cast<Real>(1.0 - std::pow(state.hyper.beta1, t));
    const Real c2 = static_cast<Real>(1.0 - std::pow(state.hyper.beta2, t));
    const Real lr = static_cast<Real>(state.hyper.learningRate);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Real g = grads[i];
        state.m[i] = b1 * state.m[i] + (Real(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (Real(1) - b2) * g * g;
        const Real mHat = state.m[i] / c1;
        const Real vHat = state.v[i] / c2;
        params[i] -= lr * mHat / (std::sqrt(vHat) + eps);
    }
}

template <class Real>
void
adamStep(AdamState<Real> &state, FieldParams<Real> &params, std::span<const Real> grads) {
    adamStep(state, params.data(), grads);
    params.touch();
}

} // namespace pfield
