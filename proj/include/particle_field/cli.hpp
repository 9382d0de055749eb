// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file cli.hpp
/// Command-line front end: make-scene, train, render, eval.
/// Exit codes: 0 success, 1 runtime error, 2 usage error.

#pragma once

#include "trainer.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace pfield {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Camera file: {"camera_angle_x", "w", "h", "transform_matrix"}.
inline Camera
cameraFromJson(const json &doc) {
    try {
        const Camera cam = Camera::fromAngleX(doc.at("w").get<int>(), doc.at("h").get<int>(),
                                              doc.at("camera_angle_x").get<double>(), poseFromJson(doc.at("transform_matrix")));
        cam.validate(1e-3);
        return cam;
    } catch (const json::exception &e) {
        throw Error(ErrorCode::DecodeError, std::string("camera file: ") + e.what());
    }
}

inline json
cameraToJson(const Camera &cam) {
    return {{"camera_angle_x", cam.angleX()}, {"w", cam.width}, {"h", cam.height}, {"transform_matrix", poseToJson(cam.pose)}};
}

struct TrainCommand {
    fs::path scene;
    fs::path out;
    fs::path config;
    std::optional<int> particles;
    std::optional<double> searchRadius;
    std::optional<int> stepsPerFrame;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    int checkpointEvery = 0;
    bool quiet = false;
};

/// Config file first, then explicit flags on top.
inline TrainConfig
resolveTrainConfig(const TrainCommand &cmd) {
    TrainConfig config;
    if (!cmd.config.empty())
        config = trainConfigFromJson(readJsonFile(cmd.config));
    if (cmd.particles)
        config.particles = *cmd.particles;
    if (cmd.searchRadius)
        config.searchRadius = *cmd.searchRadius;
    if (cmd.stepsPerFrame)
        config.stepsPerFrame = *cmd.stepsPerFrame;
    if (cmd.mode)
        config.mode = parseMode(*cmd.mode);
    if (cmd.seed)
        config.seed = *cmd.seed;
    config.validate();
    return config;
}

inline void
runTrain(const TrainCommand &cmd) {
    const TrainConfig config = resolveTrainConfig(cmd);
    fs::create_directories(cmd.out);
    writeJsonFile(cmd.out / "config.json", trainConfigToJson(config));

    DiskFrameSource source(FrameSequence::open(cmd.scene));
    TrainState state = TrainState::create(config);
    OnlineOptions options;
    options.onFrame = [&](int frame, const MetricsLog &log) {
        if (!cmd.quiet) {
            double psnr = 0;
            int n = 0;
            for (const auto &r : log.evals)
                if (r.frame == frame) {
                    psnr += r.psnr;
                    ++n;
                }
            std::cerr << "frame " << frame << " step " << state.step << " loss " << log.losses.back().loss;
            if (n)
                std::cerr << " eval psnr " << psnr / n;
            std::cerr << '\n';
        }
        if (cmd.checkpointEvery > 0 && (frame + 1) % cmd.checkpointEvery == 0)
            saveCheckpoint(state, cmd.out / (frameDirName(frame) + ".pnrf"));
    };
    const MetricsLog log = runOnlineSequence(state, source, options);
    writeLossCsv(cmd.out / "loss.csv", log.losses);
    writeEvalCsv(cmd.out / "eval.csv", log.evals);
    saveCheckpoint(state, cmd.out / "checkpoint.pnrf");
}

inline int
runCli(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    CLI::App app{"Dynamic radiance fields on a physically driven particle set", "particle_field"};
    app.require_subcommand(1);

    fs::path specPath, sceneOut;
    std::uint64_t sceneSeed = 0;
    auto *makeScene = app.add_subcommand("make-scene", "Render a synthetic multi-view sequence from a scene spec");
    makeScene->add_option("--spec", specPath, "Scene spec JSON")->required();
    makeScene->add_option("--out", sceneOut, "Output directory")->required();
    makeScene->add_option("--seed", sceneSeed, "Camera placement seed");

    TrainCommand train;
    auto *trainCmd = app.add_subcommand("train", "Train online over a frame sequence");
    trainCmd->add_option("--scene", train.scene, "Scene directory")->required();
    trainCmd->add_option("--out", train.out, "Output directory")->required();
    trainCmd->add_option("--config", train.config, "Training config JSON");
    trainCmd->add_option("--particles", train.particles, "Particle count");
    trainCmd->add_option("--search-radius", train.searchRadius, "Kernel support radius");
    trainCmd->add_option("--steps-per-frame", train.stepsPerFrame, "Training steps per frame");
    trainCmd->add_option("--mode", train.mode, "both | features_only | positions_only")
        ->check(CLI::IsMember({"both", "features_only", "positions_only"}));
    trainCmd->add_option("--seed", train.seed, "Random seed");
    trainCmd->add_option("--checkpoint-every", train.checkpointEvery, "Also checkpoint every N frames");
    trainCmd->add_flag("--quiet", train.quiet, "No progress output");

    fs::path renderCheckpoint, cameraPath, renderOut;
    std::uint64_t renderSeed = 0;
    auto *render = app.add_subcommand("render", "Render one view from a checkpoint");
    render->add_option("--checkpoint", renderCheckpoint, "Checkpoint file")->required();
    render->add_option("--camera", cameraPath, "Camera JSON")->required();
    render->add_option("--out", renderOut, "Output PNG")->required();
    render->add_option("--seed", renderSeed, "Sample jitter seed");

    fs::path evalCheckpoint, evalScene, evalOut;
    int evalFrame = 0;
    auto *eval = app.add_subcommand("eval", "Score a checkpoint on one frame's eval views");
    eval->add_option("--checkpoint", evalCheckpoint, "Checkpoint file")->required();
    eval->add_option("--scene", evalScene, "Scene directory")->required();
    eval->add_option("--frame", evalFrame, "Frame index")->required();
    eval->add_option("--out", evalOut, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*makeScene) {
            const SceneSpec spec = sceneSpecFromJson(readJsonFile(specPath));
            const FrameSequence seq = generateSyntheticSequence(spec, sceneOut, sceneSeed);
            out << "wrote " << seq.frameCount() << " frames to " << sceneOut.string() << '\n';
        } else if (*trainCmd) {
            runTrain(train);
        } else if (*render) {
            TrainState state = loadCheckpoint(renderCheckpoint);
            const Camera cam = cameraFromJson(readJsonFile(cameraPath));
            writePng(renderOut, renderState(state, cam, renderSeed));
        } else if (*eval) {
            TrainState state = loadCheckpoint(evalCheckpoint);
            DiskFrameSource source(FrameSequence::open(evalScene));
            const Frame frame = source.loadFrame(evalFrame);
            if (frame.evalCameras.empty())
                throw Error(ErrorCode::NotFound, "frame " + std::to_string(evalFrame) + " has no eval views");
            writeEvalCsv(evalOut, evaluateFrame(state, source, frame));
        }
    } catch (const Error &e) {
        err << "error [" << errorCodeName(e.code()) << "]: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace pfield
