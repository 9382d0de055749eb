// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file common.hpp
/// Shared vocabulary: error type, small vector aliases, deterministic RNG and
/// a minimal fork/join helper used by every other module.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pfield {

enum class ErrorCode {
    NotFound,
    InvalidPose,
    DecodeError,
    OutOfBounds,
    WriteError,
    InvalidRadius,
    InvalidInput,
    IndexTooCoarse,
    InvalidShape,
    InvalidTransform,
    InvalidDirection,
    InvalidCache,
    InvalidRay,
    InvalidDensity,
    InvalidGradient,
    InvalidConfig,
    IncompatibleCheckpoint,
    CorruptCheckpoint,
};

inline const char *
errorCodeName(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::WriteError: return "WriteError";
    case ErrorCode::InvalidRadius: return "InvalidRadius";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::IndexTooCoarse: return "IndexTooCoarse";
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::InvalidTransform: return "InvalidTransform";
    case ErrorCode::InvalidDirection: return "InvalidDirection";
    case ErrorCode::InvalidCache: return "InvalidCache";
    case ErrorCode::InvalidRay: return "InvalidRay";
    case ErrorCode::InvalidDensity: return "InvalidDensity";
    case ErrorCode::InvalidGradient: return "InvalidGradient";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(errorCodeName(code)) + ": " + what), mCode(code) {}

    ErrorCode code() const noexcept { return mCode; }

  private:
    ErrorCode mCode;
};

template <class Real> using Vec3 = Eigen::Matrix<Real, 3, 1>;
template <class Real> using Mat3 = Eigen::Matrix<Real, 3, 3>;
template <class Real> using Mat4 = Eigen::Matrix<Real, 4, 4>;
template <class Real> using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
template <class Real> using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
/// Eigen-aligned storage so vectorized kernels see the same alignment every run.
template <class Real> using AlignedVector = std::vector<Real, Eigen::aligned_allocator<Real>>;

template <class Real> struct Ray {
    Vec3<Real> origin = Vec3<Real>::Zero();
    Vec3<Real> direction = Vec3<Real>(0, 0, -1);
};

/// Max-abs deviation of the rotation block from orthonormality, ‖RᵀR − I‖∞.
template <class Derived>
double
orthonormalityError(const Eigen::MatrixBase<Derived> &transform) {
    const Eigen::Matrix3d r = transform.template topLeftCorner<3, 3>().template cast<double>();
    return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

/// splitmix64 finalizer, used to derive independent stream seeds from (seed, step, chunk).
inline std::uint64_t
mixSeed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t
mixSeed(std::uint64_t a, std::uint64_t b) {
    return mixSeed(mixSeed(a) ^ (b + 0x632be59bd9b4e019ULL));
}

/// mt19937_64 is bit-specified by the standard; the distributions are not, so
/// uniform draws are done by hand to keep runs reproducible across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : mEngine(seed) {}

    double uniform() { return static_cast<double>(mEngine() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : mEngine() % n; }

    std::uint64_t next() { return mEngine(); }

  private:
    std::mt19937_64 mEngine;
};

/// Worker count, capped by PARTICLE_FIELD_THREADS when set.
inline unsigned
workerCount() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char *env = std::getenv("PARTICLE_FIELD_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1)
            n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Runs fn(i) for i in [0, count). Work items are claimed in index order; the
/// caller owns any per-item output so results never depend on the thread count.
inline void
parallelFor(std::size_t count, const std::function<void(std::size_t)> &fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(workerCount(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers)
                    fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : pool)
        t.join();
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace pfield
