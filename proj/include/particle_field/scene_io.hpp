// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file scene_io.hpp
/// Camera/image ingestion in the NeRF-synthetic `transforms.json` layout, pinhole
/// ray generation, and an analytic reference tracer that writes dynamic
/// sphere/box sequences to disk.
///
/// Conventions: scenes live in the unit cube [0,1]^3, world +z is up, cameras
/// look down their local -z axis with +y up (OpenGL/Blender), and image row v
/// grows downward.

#pragma once

#include "common.hpp"
#include "image.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace pfield {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Camera {
    int width = 1;
    int height = 1;
    double focalX = 1.0;
    double focalY = 1.0;
    Eigen::Vector2d principalPoint = Eigen::Vector2d::Zero();
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity(); // camera-to-world

    Eigen::Vector3d center() const { return pose.block<3, 1>(0, 3); }

    /// Pinhole camera with principal point at the image center and square pixels.
    static Camera fromAngleX(int width, int height, double cameraAngleX, const Eigen::Matrix4d &pose) {
        Camera cam;
        cam.width = width;
        cam.height = height;
        cam.focalX = 0.5 * width / std::tan(0.5 * cameraAngleX);
        cam.focalY = cam.focalX;
        cam.principalPoint = Eigen::Vector2d(0.5 * width, 0.5 * height);
        cam.pose = pose;
        return cam;
    }

    double angleX() const { return 2.0 * std::atan(0.5 * width / focalX); }

    void validate(double tolerance = 1e-6) const {
        if (width < 1 || height < 1)
            throw Error(ErrorCode::InvalidInput, "camera resolution must be at least 1x1");
        if (!(focalX > 0) || !(focalY > 0))
            throw Error(ErrorCode::InvalidInput, "focal lengths must be positive");
        if (orthonormalityError(pose) > tolerance)
            throw Error(ErrorCode::InvalidPose, "camera rotation is not orthonormal");
        if (pose.row(3) != Eigen::RowVector4d(0, 0, 0, 1))
            throw Error(ErrorCode::InvalidPose, "camera pose bottom row must be [0,0,0,1]");
    }
};

/// Ray through continuous pixel coordinates (u, v); pixel centers sit at +0.5.
inline Ray<double>
generateRay(const Camera &camera, double u, double v) {
    if (!(u >= 0.0 && u < camera.width && v >= 0.0 && v < camera.height))
        throw Error(ErrorCode::OutOfBounds, "pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                                                ") outside the image");
    const Eigen::Vector3d local((u - camera.principalPoint.x()) / camera.focalX,
                                -(v - camera.principalPoint.y()) / camera.focalY, -1.0);
    Ray<double> ray;
    ray.origin = camera.center();
    ray.direction = (camera.pose.topLeftCorner<3, 3>() * local).normalized();
    return ray;
}

struct Frame {
    int index = 0;
    double time = 0.0;
    std::vector<Camera> cameras;
    std::vector<fs::path> imagePaths;
    std::vector<Camera> evalCameras;
    std::vector<fs::path> evalImagePaths;
};

// --- transforms.json -------------------------------------------------------

inline json
readJsonFile(const fs::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::NotFound, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::DecodeError, path.string() + ": " + e.what());
    }
}

inline void
writeJsonFile(const fs::path &path, const json &doc) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::WriteError, "cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out)
        throw Error(ErrorCode::WriteError, "write failed: " + path.string());
}

inline json
poseToJson(const Eigen::Matrix4d &pose) {
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c)
            row.push_back(pose(r, c));
        rows.push_back(row);
    }
    return rows;
}

inline Eigen::Matrix4d
poseFromJson(const json &rows) {
    if (!rows.is_array() || rows.size() != 4)
        throw Error(ErrorCode::InvalidPose, "transform_matrix must be 4x4");
    Eigen::Matrix4d pose;
    for (int r = 0; r < 4; ++r) {
        if (!rows[r].is_array() || rows[r].size() != 4)
            throw Error(ErrorCode::InvalidPose, "transform_matrix must be 4x4");
        for (int c = 0; c < 4; ++c)
            pose(r, c) = rows[r][c].get<double>();
    }
    return pose;
}

inline fs::path
resolveImagePath(const fs::path &dir, const std::string &filePath) {
    fs::path p = dir / fs::path(filePath).lexically_normal();
    if (!p.has_extension())
        p += ".png";
    return p;
}

struct TransformsData {
    std::vector<Camera> cameras;
    std::vector<fs::path> imagePaths;
    double time = 0.0;
};

/// Loads `<dir>/transforms.json`. Image sizes come from the optional "w"/"h"
/// keys, otherwise from each PNG header.
inline TransformsData
loadTransforms(const fs::path &dir) {
    const fs::path file = dir / "transforms.json";
    if (!fs::exists(file))
        throw Error(ErrorCode::NotFound, file.string() + " does not exist");
    const json doc = readJsonFile(file);
    if (!doc.contains("camera_angle_x") || !doc.contains("frames"))
        throw Error(ErrorCode::DecodeError, file.string() + ": missing camera_angle_x or frames");

    const double angleX = doc["camera_angle_x"].get<double>();
    std::optional<std::pair<int, int>> fixedSize;
    if (doc.contains("w") && doc.contains("h"))
        fixedSize = std::pair<int, int>(doc["w"].get<int>(), doc["h"].get<int>());

    TransformsData out;
    out.time = doc.value("time", 0.0);
    for (const auto &entry : doc["frames"]) {
        const fs::path image = resolveImagePath(dir, entry.at("file_path").get<std::string>());
        const Eigen::Matrix4d pose = poseFromJson(entry.at("transform_matrix"));
        if (orthonormalityError(pose) > 1e-3)
            throw Error(ErrorCode::InvalidPose, file.string() + ": rotation is not orthonormal");
        const auto [w, h] = fixedSize ? *fixedSize : readPngSize(image);
        out.cameras.push_back(Camera::fromAngleX(w, h, angleX, pose));
        out.imagePaths.push_back(image);
    }
    return out;
}

/// Writes a transforms.json for cameras sharing one horizontal field of view.
inline void
writeTransforms(const fs::path &dir, const std::vector<Camera> &cameras,
                const std::vector<std::string> &fileNames, double time = 0.0) {
    if (cameras.size() != fileNames.size())
        throw Error(ErrorCode::InvalidShape, "one file name per camera required");
    json doc;
    doc["camera_angle_x"] = cameras.empty() ? 0.0 : cameras.front().angleX();
    doc["time"] = time;
    doc["frames"] = json::array();
    for (std::size_t i = 0; i < cameras.size(); ++i)
        doc["frames"].push_back({{"file_path", fileNames[i]}, {"transform_matrix", poseToJson(cameras[i].pose)}});
    writeJsonFile(dir / "transforms.json", doc);
}

inline std::string
frameDirName(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d", index);
    return buf;
}

/// A dynamic capture on disk: `<root>/frame_%04d/{transforms.json, r_*.png, eval/}`.
/// Frames are loaded on demand so a consumer only touches the frame it is on.
class FrameSequence {
  public:
    FrameSequence() = default;

    static FrameSequence open(const fs::path &root) {
        if (!fs::is_directory(root))
            throw Error(ErrorCode::NotFound, "scene directory " + root.string() + " does not exist");
        FrameSequence seq;
        seq.mRoot = root;
        while (fs::exists(root / frameDirName(seq.mFrameCount) / "transforms.json"))
            ++seq.mFrameCount;
        if (seq.mFrameCount == 0)
            throw Error(ErrorCode::NotFound, "no frame_0000/transforms.json under " + root.string());
        return seq;
    }

    const fs::path &root() const { return mRoot; }
    int frameCount() const { return mFrameCount; }

    Frame loadFrame(int index) const {
        if (index < 0 || index >= mFrameCount)
            throw Error(ErrorCode::NotFound, "frame " + std::to_string(index) + " not in sequence");
        const fs::path dir = mRoot / frameDirName(index);
        Frame frame;
        frame.index = index;
        TransformsData train = loadTransforms(dir);
        frame.time = train.time;
        frame.cameras = std::move(train.cameras);
        frame.imagePaths = std::move(train.imagePaths);
        if (fs::exists(dir / "eval" / "transforms.json")) {
            TransformsData eval = loadTransforms(dir / "eval");
            frame.evalCameras = std::move(eval.cameras);
            frame.evalImagePaths = std::move(eval.imagePaths);
        }
        return frame;
    }

  private:
    fs::path mRoot;
    int mFrameCount = 0;
};

// --- synthetic scenes -------------------------------------------------------

enum class ShapeKind { Sphere, Box };
enum class MotionKind { Static, Translate, Rotate };

struct SceneObject {
    ShapeKind kind = ShapeKind::Sphere;
    Eigen::Vector3d center = Eigen::Vector3d::Constant(0.5);
    double size = 0.2; // sphere radius or box half-edge
    Eigen::Vector3d albedo = Eigen::Vector3d(0.8, 0.3, 0.2);
};

struct Motion {
    MotionKind kind = MotionKind::Static;
    Eigen::Vector3d cmPerFrame = Eigen::Vector3d::Zero();
    double degPerFrame = 0.0;
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
};

struct SceneSpec {
    std::vector<SceneObject> objects;
    Motion motion;
    int frames = 1;
    int trainCameras = 20;
    int evalCameras = 10;
    int width = 200;
    int height = 200;
    Eigen::Vector3d background = Eigen::Vector3d::Ones();
    double cameraDistance = 2.0;
    double cameraAngleX = 0.6981317007977318; // 40 degrees
    double ambient = 0.15;

    /// Largest distance of any object point from its center under the motion.
    static double extent(const SceneObject &obj, MotionKind motion) {
        if (obj.kind == ShapeKind::Sphere)
            return obj.size;
        return motion == MotionKind::Rotate ? obj.size * std::sqrt(3.0) : obj.size;
    }

    void validate() const {
        if (objects.empty())
            throw Error(ErrorCode::InvalidConfig, "scene needs at least one object");
        if (frames < 1 || trainCameras < 1 || evalCameras < 0 || width < 1 || height < 1)
            throw Error(ErrorCode::InvalidConfig, "frames, camera counts and resolution must be positive");
        if (!motion.cmPerFrame.allFinite() || !std::isfinite(motion.degPerFrame))
            throw Error(ErrorCode::InvalidConfig, "motion speeds must be finite");
        if (motion.kind == MotionKind::Rotate && motion.axis.norm() == 0.0)
            throw Error(ErrorCode::InvalidConfig, "rotation axis must be non-zero");
        for (const auto &obj : objects) {
            const double e = extent(obj, motion.kind);
            if (!(obj.size > 0.0) || 2.0 * e > 1.0)
                throw Error(ErrorCode::InvalidConfig, "object size does not fit the unit cube");
            if (((obj.center.array() - e) < 0.0).any() || ((obj.center.array() + e) > 1.0).any())
                throw Error(ErrorCode::InvalidConfig, "object does not fit inside the unit cube");
            if (motion.kind == MotionKind::Rotate) {
                const Eigen::Vector3d c(0.5, 0.5, 0.5);
                if ((obj.center - c).norm() + e > 0.5)
                    throw Error(ErrorCode::InvalidConfig, "rotating object would leave the unit cube");
            }
        }
    }
};

inline json
vecToJson(const Eigen::Vector3d &v) {
    return json::array({v.x(), v.y(), v.z()});
}

inline Eigen::Vector3d
vecFromJson(const json &j) {
    if (!j.is_array() || j.size() != 3)
        throw Error(ErrorCode::InvalidConfig, "expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json
sceneSpecToJson(const SceneSpec &spec) {
    json objects = json::array();
    for (const auto &o : spec.objects)
        objects.push_back({{"type", o.kind == ShapeKind::Sphere ? "sphere" : "box"},
                           {"center", vecToJson(o.center)},
                           {"size", o.size},
                           {"albedo", vecToJson(o.albedo)}});
    json motion;
    switch (spec.motion.kind) {
    case MotionKind::Static: motion = {{"type", "static"}}; break;
    case MotionKind::Translate:
        motion = {{"type", "translate"}, {"cm_per_frame", vecToJson(spec.motion.cmPerFrame)}};
        break;
    case MotionKind::Rotate:
        motion = {{"type", "rotate"}, {"deg_per_frame", spec.motion.degPerFrame}, {"axis", vecToJson(spec.motion.axis)}};
        break;
    }
    return {{"objects", objects},
            {"motion", motion},
            {"frames", spec.frames},
            {"train_cameras", spec.trainCameras},
            {"eval_cameras", spec.evalCameras},
            {"width", spec.width},
            {"height", spec.height},
            {"background", vecToJson(spec.background)},
            {"camera_distance", spec.cameraDistance},
            {"camera_angle_x", spec.cameraAngleX},
            {"ambient", spec.ambient}};
}

inline SceneSpec
sceneSpecFromJson(const json &doc) {
    try {
        SceneSpec spec;
        for (const auto &o : doc.at("objects")) {
            SceneObject obj;
            const std::string type = o.at("type").get<std::string>();
            if (type == "sphere")
                obj.kind = ShapeKind::Sphere;
            else if (type == "box")
                obj.kind = ShapeKind::Box;
            else
                throw Error(ErrorCode::InvalidConfig, "unknown object type '" + type + "'");
            obj.center = vecFromJson(o.at("center"));
            obj.size = o.at("size").get<double>();
            if (o.contains("albedo"))
                obj.albedo = vecFromJson(o["albedo"]);
            spec.objects.push_back(obj);
        }
        if (doc.contains("motion")) {
            const json &m = doc["motion"];
            const std::string type = m.at("type").get<std::string>();
            if (type == "static") {
                spec.motion.kind = MotionKind::Static;
            } else if (type == "translate") {
                spec.motion.kind = MotionKind::Translate;
                spec.motion.cmPerFrame = vecFromJson(m.at("cm_per_frame"));
            } else if (type == "rotate") {
                spec.motion.kind = MotionKind::Rotate;
                spec.motion.degPerFrame = m.at("deg_per_frame").get<double>();
                spec.motion.axis = vecFromJson(m.value("axis", json::array({0.0, 0.0, 1.0})));
            } else {
                throw Error(ErrorCode::InvalidConfig, "unknown motion type '" + type + "'");
            }
        }
        spec.frames = doc.value("frames", spec.frames);
        spec.trainCameras = doc.value("train_cameras", spec.trainCameras);
        spec.evalCameras = doc.value("eval_cameras", spec.evalCameras);
        spec.width = doc.value("width", spec.width);
        spec.height = doc.value("height", spec.height);
        if (doc.contains("background"))
            spec.background = vecFromJson(doc["background"]);
        spec.cameraDistance = doc.value("camera_distance", spec.cameraDistance);
        spec.cameraAngleX = doc.value("camera_angle_x", spec.cameraAngleX);
        spec.ambient = doc.value("ambient", spec.ambient);
        spec.validate();
        return spec;
    } catch (const json::exception &e) {
        throw Error(ErrorCode::InvalidConfig, std::string("scene spec: ") + e.what());
    }
}

/// Reflects x into [lo, hi] (triangle wave), so translating objects bounce off
/// the cube walls instead of leaving it.
inline double
foldIntoRange(double x, double lo, double hi) {
    const double span = hi - lo;
    if (span <= 0.0)
        return lo;
    double u = std::fmod(x - lo, 2.0 * span);
    if (u < 0.0)
        u += 2.0 * span;
    return u <= span ? lo + u : hi - (u - span);
}

/// World-space object state at a given frame.
struct PlacedObject {
    ShapeKind kind;
    Eigen::Vector3d center;
    Eigen::Matrix3d rotation; // object-to-world
    double size;
    Eigen::Vector3d albedo;
};

inline PlacedObject
placeObject(const SceneObject &obj, const Motion &motion, int frame) {
    PlacedObject placed{obj.kind, obj.center, Eigen::Matrix3d::Identity(), obj.size, obj.albedo};
    switch (motion.kind) {
    case MotionKind::Static: break;
    case MotionKind::Translate: {
        const double e = SceneSpec::extent(obj, motion.kind);
        const Eigen::Vector3d moved = obj.center + 0.01 * frame * motion.cmPerFrame;
        for (int a = 0; a < 3; ++a)
            placed.center[a] = foldIntoRange(moved[a], e, 1.0 - e);
        break;
    }
    case MotionKind::Rotate: {
        const double angle = motion.degPerFrame * frame * EIGEN_PI / 180.0;
        const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, motion.axis.normalized()).toRotationMatrix();
        const Eigen::Vector3d pivot(0.5, 0.5, 0.5);
        placed.center = pivot + r * (obj.center - pivot);
        placed.rotation = r;
        break;
    }
    }
    return placed;
}

/// Nearest positive hit distance and outward normal, if any.
inline std::optional<std::pair<double, Eigen::Vector3d>>
intersect(const PlacedObject &obj, const Ray<double> &ray) {
    if (obj.kind == ShapeKind::Sphere) {
        const Eigen::Vector3d oc = ray.origin - obj.center;
        const double b = oc.dot(ray.direction);
        const double c = oc.squaredNorm() - obj.size * obj.size;
        const double disc = b * b - c;
        if (disc < 0.0)
            return std::nullopt;
        const double sq = std::sqrt(disc);
        double t = -b - sq;
        if (t <= 0.0)
            t = -b + sq;
        if (t <= 0.0)
            return std::nullopt;
        return std::make_pair(t, ((ray.origin + t * ray.direction - obj.center) / obj.size).eval());
    }
    // Oriented box: slab test in the object frame.
    const Eigen::Vector3d o = obj.rotation.transpose() * (ray.origin - obj.center);
    const Eigen::Vector3d d = obj.rotation.transpose() * ray.direction;
    double tNear = -std::numeric_limits<double>::infinity();
    double tFar = std::numeric_limits<double>::infinity();
    int axis = 0;
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
            if (std::abs(o[a]) > obj.size)
                return std::nullopt;
            continue;
        }
        double t0 = (-obj.size - o[a]) / d[a];
        double t1 = (obj.size - o[a]) / d[a];
        if (t0 > t1)
            std::swap(t0, t1);
        if (t0 > tNear) {
            tNear = t0;
            axis = a;
        }
        tFar = std::min(tFar, t1);
    }
    if (tNear > tFar || tFar <= 0.0 || tNear <= 0.0)
        return std::nullopt;
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    n[axis] = (o[axis] + tNear * d[axis]) > 0.0 ? 1.0 : -1.0;
    return std::make_pair(tNear, (obj.rotation * n).eval());
}

/// Analytic reference render: nearest hit, Lambertian shading from a headlight
/// at the camera, background elsewhere.
inline Image
renderReference(const std::vector<PlacedObject> &objects, const Camera &camera,
                const Eigen::Vector3d &background, double ambient) {
    Image image(camera.width, camera.height);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const Ray<double> ray = generateRay(camera, x + 0.5, y + 0.5);
            double best = std::numeric_limits<double>::infinity();
            Eigen::Vector3d color = background;
            for (const auto &obj : objects) {
                if (auto hit = intersect(obj, ray); hit && hit->first < best) {
                    best = hit->first;
                    const double lambert = std::max(0.0, hit->second.dot(-ray.direction));
                    color = obj.albedo * (ambient + (1.0 - ambient) * lambert);
                }
            }
            for (int c = 0; c < 3; ++c)
                image.at(x, y, c) = static_cast<float>(color[c]);
        }
    }
    return image;
}

/// Camera-to-world pose at `eye` looking at `target`, world +z up.
inline Eigen::Matrix4d
lookAt(const Eigen::Vector3d &eye, const Eigen::Vector3d &target) {
    const Eigen::Vector3d forward = (target - eye).normalized();
    Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
    if (std::abs(forward.dot(up)) > 0.999)
        up = Eigen::Vector3d::UnitY();
    const Eigen::Vector3d right = forward.cross(up).normalized();
    const Eigen::Vector3d camUp = right.cross(forward);
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
    pose.block<3, 1>(0, 0) = right;
    pose.block<3, 1>(0, 1) = camUp;
    pose.block<3, 1>(0, 2) = -forward;
    pose.block<3, 1>(0, 3) = eye;
    return pose;
}

struct CameraRig {
    std::vector<Camera> train;
    std::vector<Camera> eval;
};

/// Train cameras on a Fibonacci spiral over the upper hemisphere; eval cameras on
/// a 45-degree ring, offset half a slot from evenly spaced azimuths.
inline CameraRig
makeCameraRig(const SceneSpec &spec, std::uint64_t seed) {
    Rng rng(mixSeed(seed, 0x43414d));
    const double azimuthOffset = rng.uniform(0.0, 2.0 * EIGEN_PI);
    const double golden = EIGEN_PI * (3.0 - std::sqrt(5.0));
    const Eigen::Vector3d target(0.5, 0.5, 0.5);
    CameraRig rig;
    for (int k = 0; k < spec.trainCameras; ++k) {
        const double z = 1.0 - (k + 0.5) / spec.trainCameras;
        const double ring = std::sqrt(1.0 - z * z);
        const double phi = azimuthOffset + golden * k;
        const Eigen::Vector3d dir(ring * std::cos(phi), ring * std::sin(phi), z);
        rig.train.push_back(Camera::fromAngleX(spec.width, spec.height, spec.cameraAngleX,
                                               lookAt(target + spec.cameraDistance * dir, target)));
    }
    const double elevation = EIGEN_PI / 4.0;
    for (int k = 0; k < spec.evalCameras; ++k) {
        const double phi = azimuthOffset + 2.0 * EIGEN_PI * (k + 0.5) / spec.evalCameras + 0.1;
        const Eigen::Vector3d dir(std::cos(elevation) * std::cos(phi),
                                  std::cos(elevation) * std::sin(phi), std::sin(elevation));
        rig.eval.push_back(Camera::fromAngleX(spec.width, spec.height, spec.cameraAngleX,
                                              lookAt(target + spec.cameraDistance * dir, target)));
    }
    return rig;
}

inline std::vector<PlacedObject>
placeScene(const SceneSpec &spec, int frame) {
    std::vector<PlacedObject> placed;
    for (const auto &obj : spec.objects)
        placed.push_back(placeObject(obj, spec.motion, frame));
    return placed;
}

/// Renders every frame of `spec` into `out` and returns the opened sequence.
inline FrameSequence
generateSyntheticSequence(const SceneSpec &spec, const fs::path &out, std::uint64_t seed) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec)
        throw Error(ErrorCode::WriteError, "cannot create " + out.string() + ": " + ec.message());
    const CameraRig rig = makeCameraRig(spec, seed);

    json echo = sceneSpecToJson(spec);
    echo["seed"] = seed;
    writeJsonFile(out / "scene.json", echo);

    for (int f = 0; f < spec.frames; ++f) {
        const fs::path dir = out / frameDirName(f);
        fs::create_directories(dir / "eval", ec);
        if (ec)
            throw Error(ErrorCode::WriteError, "cannot create " + dir.string() + ": " + ec.message());
        const auto placed = placeScene(spec, f);

        auto renderSet = [&](const std::vector<Camera> &cams, const fs::path &target) {
            std::vector<std::string> names;
            std::vector<Image> images(cams.size());
            parallelFor(cams.size(), [&](std::size_t i) {
                images[i] = renderReference(placed, cams[i], spec.background, spec.ambient);
            });
            for (std::size_t i = 0; i < cams.size(); ++i) {
                names.push_back("r_" + std::to_string(i) + ".png");
                writePng(target / names.back(), images[i]);
            }
            writeTransforms(target, cams, names, static_cast<double>(f));
        };
        renderSet(rig.train, dir);
        renderSet(rig.eval, dir / "eval");
    }
    return FrameSequence::open(out);
}

} // namespace pfield
