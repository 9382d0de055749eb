// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <particle_field/particle_field.hpp>

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>

namespace pfield::testing {

/// Scratch directory removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("pfield_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline double
relativeError(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Sixth-order central difference of f at 0 with step h; `f(x)` evaluates the
/// scalar at offset x. The bump kernel's steep edge makes the three-point
/// stencil's h^2 error visible at h = 1e-4.
template <class F>
double
centralDifference(F &&f, double h) {
    const auto d = [&](double k) { return f(k * h) - f(-k * h); };
    return (45.0 * d(1) - 9.0 * d(2) + d(3)) / (60.0 * h);
}

template <class Real>
Vec3<Real>
randomPoint(Rng &rng, double lo = 0.0, double hi = 1.0) {
    return Vec3<Real>(Real(rng.uniform(lo, hi)), Real(rng.uniform(lo, hi)), Real(rng.uniform(lo, hi)));
}

inline Eigen::Vector3d
randomUnit(Rng &rng) {
    for (;;) {
        Eigen::Vector3d v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double n = v.norm();
        if (n > 0.1 && n <= 1.0)
            return v / n;
    }
}

inline Eigen::Matrix4d
randomRigid(Rng &rng, double translation = 1.0) {
    const Eigen::Vector3d axis = randomUnit(rng);
    const double angle = rng.uniform(-EIGEN_PI, EIGEN_PI);
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    t.topLeftCorner<3, 3>() = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    t.topRightCorner<3, 1>() =
        Eigen::Vector3d(rng.uniform(-translation, translation), rng.uniform(-translation, translation),
                        rng.uniform(-translation, translation));
    return t;
}

/// Random cloud of `count` particles inside [lo, hi]^3 with features of magnitude ~`scale`.
template <class Real>
ParticleCloud<Real>
randomCloud(Rng &rng, std::size_t count, int featureDim, Real radius, double lo, double hi, double scale = 1.0) {
    ParticleCloud<Real> cloud;
    cloud.featureDim = featureDim;
    cloud.searchRadius = radius;
    for (std::size_t i = 0; i < count; ++i) {
        cloud.positions.push_back(randomPoint<Real>(rng, lo, hi));
        cloud.velocities.push_back(Vec3<Real>::Zero());
    }
    for (std::size_t i = 0; i < count * featureDim; ++i)
        cloud.features.push_back(Real(rng.uniform(-scale, scale)));
    return cloud;
}

/// Small single-object scene spec for end-to-end tests.
inline SceneSpec
smallSphereSpec(int frames, int width, int trainCameras, int evalCameras) {
    SceneSpec spec;
    SceneObject sphere;
    sphere.kind = ShapeKind::Sphere;
    sphere.center = Eigen::Vector3d(0.5, 0.5, 0.5);
    sphere.size = 0.25;
    spec.objects = {sphere};
    spec.frames = frames;
    spec.width = width;
    spec.height = width;
    spec.trainCameras = trainCameras;
    spec.evalCameras = evalCameras;
    return spec;
}

} // namespace pfield::testing
