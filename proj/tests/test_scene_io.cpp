// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace pfield;
using pfield::testing::TempDir;

namespace {

void
writeText(const fs::path &path, const std::string &text) {
    std::ofstream out(path);
    out << text;
}

json
identityFrame(const std::string &name) {
    return {{"file_path", name}, {"transform_matrix", poseToJson(Eigen::Matrix4d::Identity())}};
}

Image
solidImage(int w, int h, float value) {
    Image img(w, h);
    std::fill(img.rgb.begin(), img.rgb.end(), value);
    return img;
}

std::vector<char>
fileBytes(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST(LoadTransforms, IdentityFrameGivesCameraAtOriginLookingDownNegativeZ) {
    TempDir dir("lt1");
    writePng(dir / "r_0.png", solidImage(8, 6, 0.5f));
    writeJsonFile(dir / "transforms.json", {{"camera_angle_x", 0.7}, {"frames", {identityFrame("./r_0")}}});
    const TransformsData data = loadTransforms(dir.path());
    ASSERT_EQ(data.cameras.size(), 1u);
    const Camera &cam = data.cameras[0];
    EXPECT_EQ(cam.width, 8);
    EXPECT_EQ(cam.height, 6);
    EXPECT_TRUE(cam.center().isZero(0.0));
    const Ray<double> ray = generateRay(cam, cam.principalPoint.x(), cam.principalPoint.y());
    EXPECT_NEAR((ray.direction - Eigen::Vector3d(0, 0, -1)).norm(), 0.0, 1e-12);
    EXPECT_EQ(data.imagePaths[0], dir / "r_0.png");
}

TEST(LoadTransforms, PreservesFrameOrder) {
    TempDir dir("lt2");
    writePng(dir / "a.png", solidImage(4, 4, 0.1f));
    writePng(dir / "b.png", solidImage(4, 4, 0.2f));
    Eigen::Matrix4d shifted = Eigen::Matrix4d::Identity();
    shifted(0, 3) = 3.0;
    json frames = {identityFrame("a.png"), {{"file_path", "b.png"}, {"transform_matrix", poseToJson(shifted)}}};
    writeJsonFile(dir / "transforms.json", {{"camera_angle_x", 0.7}, {"frames", frames}});
    const TransformsData data = loadTransforms(dir.path());
    ASSERT_EQ(data.cameras.size(), 2u);
    EXPECT_EQ(data.imagePaths[0].filename(), "a.png");
    EXPECT_EQ(data.imagePaths[1].filename(), "b.png");
    EXPECT_DOUBLE_EQ(data.cameras[1].center().x(), 3.0);
}

TEST(LoadTransforms, FocalLengthFromHorizontalFieldOfView) {
    TempDir dir("lt3");
    writeJsonFile(dir / "transforms.json",
                  {{"camera_angle_x", EIGEN_PI / 2}, {"w", 800}, {"h", 800}, {"frames", {identityFrame("r_0")}}});
    const TransformsData data = loadTransforms(dir.path());
    EXPECT_NEAR(data.cameras[0].focalX, 400.0, 1e-9);
    EXPECT_NEAR(data.cameras[0].focalY, 400.0, 1e-9);
}

TEST(LoadTransforms, Errors) {
    TempDir dir("lt4");
    try {
        loadTransforms(dir.path());
        FAIL() << "expected NotFound";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
    }

    Eigen::Matrix4d skew = Eigen::Matrix4d::Identity();
    skew(0, 1) = 0.1;
    writeJsonFile(dir / "transforms.json",
                  {{"camera_angle_x", 0.7}, {"w", 4}, {"h", 4},
                   {"frames", {{{"file_path", "r_0"}, {"transform_matrix", poseToJson(skew)}}}}});
    try {
        loadTransforms(dir.path());
        FAIL() << "expected InvalidPose";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidPose);
    }

    writeText(dir / "r_0.png", "not a png");
    writeJsonFile(dir / "transforms.json", {{"camera_angle_x", 0.7}, {"frames", {identityFrame("r_0")}}});
    try {
        loadTransforms(dir.path());
        FAIL() << "expected DecodeError";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::DecodeError);
    }

    writeText(dir / "transforms.json", "{ not json");
    try {
        loadTransforms(dir.path());
        FAIL() << "expected DecodeError";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::DecodeError);
    }
}

TEST(LoadTransforms, WriteThenLoadRoundTripsCameras) {
    TempDir dir("lt5");
    Rng rng(7);
    std::vector<Camera> cams;
    std::vector<std::string> names;
    for (int i = 0; i < 4; ++i) {
        const Eigen::Matrix4d pose = pfield::testing::randomRigid(rng, 3.0);
        cams.push_back(Camera::fromAngleX(12, 9, 0.9, pose));
        names.push_back("r_" + std::to_string(i) + ".png");
        writePng(dir / names.back(), solidImage(12, 9, 0.3f));
    }
    writeTransforms(dir.path(), cams, names);
    const TransformsData data = loadTransforms(dir.path());
    ASSERT_EQ(data.cameras.size(), cams.size());
    for (std::size_t i = 0; i < cams.size(); ++i) {
        EXPECT_EQ(data.cameras[i].width, 12);
        EXPECT_EQ(data.cameras[i].height, 9);
        EXPECT_NEAR(data.cameras[i].focalX, cams[i].focalX, 1e-9);
        EXPECT_NEAR(data.cameras[i].principalPoint.x(), cams[i].principalPoint.x(), 1e-9);
        EXPECT_LE((data.cameras[i].pose - cams[i].pose).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(GenerateRay, OpticalAxisAndUnitNorm) {
    const Camera cam = Camera::fromAngleX(40, 30, 0.8, Eigen::Matrix4d::Identity());
    const Ray<double> axis = generateRay(cam, 20.0, 15.0);
    EXPECT_NEAR((axis.direction - Eigen::Vector3d(0, 0, -1)).norm(), 0.0, 1e-15);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x)
            EXPECT_NEAR(generateRay(cam, x + 0.5, y + 0.5).direction.norm(), 1.0, 1e-9);
}

TEST(GenerateRay, ImageAxesFollowBlenderConvention) {
    const Camera cam = Camera::fromAngleX(40, 30, 0.8, Eigen::Matrix4d::Identity());
    // Right of center looks toward +x, top of image toward +y.
    EXPECT_GT(generateRay(cam, 39.0, 15.0).direction.x(), 0.0);
    EXPECT_GT(generateRay(cam, 20.0, 0.5).direction.y(), 0.0);
}

TEST(GenerateRay, RotatedPoseRotatesBaseRay) {
    Rng rng(3);
    const Camera base = Camera::fromAngleX(32, 24, 1.0, Eigen::Matrix4d::Identity());
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Matrix4d pose = pfield::testing::randomRigid(rng, 2.0);
        Camera cam = base;
        cam.pose = pose;
        const double u = rng.uniform(0, 32), v = rng.uniform(0, 24);
        const Ray<double> a = generateRay(base, u, v);
        const Ray<double> b = generateRay(cam, u, v);
        EXPECT_LE((b.direction - pose.topLeftCorner<3, 3>() * a.direction).norm(), 1e-12);
        EXPECT_LE((b.origin - pose.topRightCorner<3, 1>()).norm(), 0.0);
    }
}

TEST(GenerateRay, OutOfBounds) {
    const Camera cam = Camera::fromAngleX(10, 10, 0.8, Eigen::Matrix4d::Identity());
    for (auto [u, v] : {std::pair{-0.1, 1.0}, {10.0, 1.0}, {1.0, 10.0}, {1.0, -1e-9}}) {
        try {
            generateRay(cam, u, v);
            FAIL() << "expected OutOfBounds";
        } catch (const Error &e) {
            EXPECT_EQ(e.code(), ErrorCode::OutOfBounds);
        }
    }
}

TEST(CameraValidate, RejectsBadPose) {
    Camera cam = Camera::fromAngleX(10, 10, 0.8, Eigen::Matrix4d::Identity());
    EXPECT_NO_THROW(cam.validate());
    cam.pose(3, 0) = 1.0;
    EXPECT_THROW(cam.validate(), Error);
    cam.pose = Eigen::Matrix4d::Identity();
    cam.pose(0, 0) = 1.1;
    EXPECT_THROW(cam.validate(), Error);
}

TEST(SceneSpecJson, RoundTrip) {
    SceneSpec spec = pfield::testing::smallSphereSpec(4, 16, 3, 2);
    SceneObject box;
    box.kind = ShapeKind::Box;
    box.center = Eigen::Vector3d(0.3, 0.6, 0.4);
    box.size = 0.1;
    box.albedo = Eigen::Vector3d(0.1, 0.9, 0.2);
    spec.objects.push_back(box);
    spec.motion.kind = MotionKind::Rotate;
    spec.motion.degPerFrame = 3.0;
    spec.objects[0].size = 0.1;
    spec.objects[1].center = Eigen::Vector3d(0.4, 0.5, 0.5);
    const SceneSpec back = sceneSpecFromJson(sceneSpecToJson(spec));
    EXPECT_EQ(sceneSpecToJson(back), sceneSpecToJson(spec));
    EXPECT_EQ(back.objects.size(), 2u);
    EXPECT_EQ(back.objects[1].kind, ShapeKind::Box);
    EXPECT_EQ(back.motion.kind, MotionKind::Rotate);
}

TEST(SceneSpecJson, RejectsObjectsOutsideUnitCube) {
    SceneSpec spec = pfield::testing::smallSphereSpec(1, 8, 1, 1);
    spec.objects[0].center = Eigen::Vector3d(0.9, 0.5, 0.5);
    EXPECT_THROW(spec.validate(), Error);
    json doc = sceneSpecToJson(pfield::testing::smallSphereSpec(1, 8, 1, 1));
    doc["motion"] = {{"type", "wobble"}};
    EXPECT_THROW(sceneSpecFromJson(doc), Error);
}

TEST(SyntheticSequence, StaticFramesAreByteIdentical) {
    TempDir dir("seq1");
    const SceneSpec spec = pfield::testing::smallSphereSpec(3, 24, 3, 2);
    const FrameSequence seq = generateSyntheticSequence(spec, dir.path(), 11);
    ASSERT_EQ(seq.frameCount(), 3);
    for (int cam = 0; cam < 3; ++cam) {
        const std::string name = "r_" + std::to_string(cam) + ".png";
        const auto first = fileBytes(dir.path() / frameDirName(0) / name);
        for (int f = 1; f < 3; ++f)
            EXPECT_EQ(fileBytes(dir.path() / frameDirName(f) / name), first);
    }
}

TEST(SyntheticSequence, CameraCountsMatchSpec) {
    TempDir dir("seq2");
    const SceneSpec spec = pfield::testing::smallSphereSpec(1, 8, 20, 10);
    const FrameSequence seq = generateSyntheticSequence(spec, dir.path(), 1);
    const Frame f = seq.loadFrame(0);
    EXPECT_EQ(f.cameras.size(), 20u);
    EXPECT_EQ(f.imagePaths.size(), 20u);
    EXPECT_EQ(f.evalCameras.size(), 10u);
    EXPECT_EQ(f.evalImagePaths.size(), 10u);
    for (const auto &cam : f.cameras) {
        EXPECT_GE(cam.center().z(), 0.5) << "train cameras sit on the upper hemisphere";
        const Ray<double> axis = generateRay(cam, cam.principalPoint.x(), cam.principalPoint.y());
        const Eigen::Vector3d toCenter = (Eigen::Vector3d::Constant(0.5) - axis.origin).normalized();
        EXPECT_NEAR(axis.direction.dot(toCenter), 1.0, 1e-9);
    }
    // Eval views are held out: none coincides with a train view.
    for (const auto &ev : f.evalCameras)
        for (const auto &tr : f.cameras)
            EXPECT_GT((ev.center() - tr.center()).norm(), 1e-3);
}

TEST(SyntheticSequence, DeterministicUnderSeed) {
    TempDir a("seq3a"), b("seq3b");
    const SceneSpec spec = pfield::testing::smallSphereSpec(2, 16, 2, 1);
    generateSyntheticSequence(spec, a.path(), 5);
    generateSyntheticSequence(spec, b.path(), 5);
    for (const char *rel : {"frame_0001/r_1.png", "frame_0001/eval/r_0.png", "frame_0000/transforms.json"})
        EXPECT_EQ(fileBytes(a.path() / rel), fileBytes(b.path() / rel)) << rel;
}

TEST(SyntheticSequence, TranslationMovesSphereByOneCentimeterPerFrame) {
    SceneSpec spec = pfield::testing::smallSphereSpec(10, 64, 1, 0);
    spec.objects[0].size = 0.1;
    spec.objects[0].center = Eigen::Vector3d(0.3, 0.5, 0.5);
    spec.motion.kind = MotionKind::Translate;
    spec.motion.cmPerFrame = Eigen::Vector3d(1, 0, 0);
    for (int t = 0; t < 10; ++t) {
        const PlacedObject p = placeObject(spec.objects[0], spec.motion, t);
        EXPECT_NEAR((p.center - Eigen::Vector3d(0.3 + 0.01 * t, 0.5, 0.5)).norm(), 0.0, 1e-12);
    }

    // Ray-traced check: a ray through the predicted center hits at exactly the predicted depth.
    const Camera cam = Camera::fromAngleX(64, 64, 0.7, lookAt(Eigen::Vector3d(0.5, 0.5, 3.0), Eigen::Vector3d(0.5, 0.5, 0.5)));
    for (int t : {0, 4, 9}) {
        const auto placed = placeScene(spec, t);
        const Eigen::Vector3d c = placed[0].center;
        Ray<double> ray{cam.center(), (c - cam.center()).normalized()};
        const auto hit = intersect(placed[0], ray);
        ASSERT_TRUE(hit.has_value());
        EXPECT_NEAR(hit->first, (c - cam.center()).norm() - 0.1, 1e-12);
    }
}

TEST(SyntheticSequence, TranslationReflectsAtCubeWalls) {
    SceneObject obj;
    obj.center = Eigen::Vector3d(0.7, 0.5, 0.5);
    obj.size = 0.2;
    Motion motion;
    motion.kind = MotionKind::Translate;
    motion.cmPerFrame = Eigen::Vector3d(1, 0, 0);
    for (int t = 0; t < 300; ++t) {
        const PlacedObject p = placeObject(obj, motion, t);
        EXPECT_GE(p.center.x(), 0.2 - 1e-12);
        EXPECT_LE(p.center.x(), 0.8 + 1e-12);
    }
    EXPECT_NEAR(placeObject(obj, motion, 15).center.x(), 0.75, 1e-12);
}

TEST(SyntheticSequence, ReferenceRendererShading) {
    SceneSpec spec = pfield::testing::smallSphereSpec(1, 33, 1, 0);
    const Camera cam =
        Camera::fromAngleX(33, 33, 0.6, lookAt(Eigen::Vector3d(0.5, 0.5, 2.5), Eigen::Vector3d(0.5, 0.5, 0.5)));
    const Image img = renderReference(placeScene(spec, 0), cam, spec.background, spec.ambient);
    // Center pixel faces the headlight: full albedo. Corners miss: background.
    for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(img.at(16, 16, c), spec.objects[0].albedo[c], 1e-6);
        EXPECT_EQ(img.at(0, 0, c), 1.0f);
    }
}

TEST(SyntheticSequence, BoxIntersection) {
    PlacedObject box{ShapeKind::Box, Eigen::Vector3d(0.5, 0.5, 0.5), Eigen::Matrix3d::Identity(), 0.1, Eigen::Vector3d::Ones()};
    const Ray<double> ray{Eigen::Vector3d(0.5, 0.5, 2.0), Eigen::Vector3d(0, 0, -1)};
    const auto hit = intersect(box, ray);
    ASSERT_TRUE(hit);
    EXPECT_NEAR(hit->first, 1.4, 1e-12);
    EXPECT_NEAR((hit->second - Eigen::Vector3d(0, 0, 1)).norm(), 0.0, 1e-12);
    const Ray<double> miss{Eigen::Vector3d(0.8, 0.5, 2.0), Eigen::Vector3d(0, 0, -1)};
    EXPECT_FALSE(intersect(box, miss));
}

TEST(FrameSequence, MissingFramesAreNotFound) {
    TempDir dir("seq4");
    try {
        FrameSequence::open(dir.path());
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
    }
    const SceneSpec spec = pfield::testing::smallSphereSpec(2, 8, 1, 1);
    const FrameSequence seq = generateSyntheticSequence(spec, dir.path(), 0);
    EXPECT_THROW(seq.loadFrame(2), Error);
    EXPECT_THROW(seq.loadFrame(-1), Error);
}

TEST(Png, RoundTripsEightBitValues) {
    TempDir dir("png");
    Image img(5, 3);
    for (std::size_t i = 0; i < img.rgb.size(); ++i)
        img.rgb[i] = static_cast<float>(i % 256) / 255.0f;
    writePng(dir / "x.png", img);
    const Image back = readPng(dir / "x.png");
    ASSERT_EQ(back.width, 5);
    ASSERT_EQ(back.height, 3);
    for (std::size_t i = 0; i < img.rgb.size(); ++i)
        EXPECT_EQ(back.rgb[i], img.rgb[i]);
    EXPECT_EQ(readPngSize(dir / "x.png"), std::make_pair(5, 3));
}
