// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <particle_field/cli.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace pfield;
using pfield::testing::TempDir;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult
run(std::vector<std::string> args) {
    args.insert(args.begin(), "particle_field");
    std::vector<const char *> argv;
    for (const auto &a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = runCli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

} // namespace

TEST(Cli, HelpExitsZero) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("make-scene"), std::string::npos);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"fly"}).code, 2);
    const auto missing = run({"train", "--out", "x"});
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("--scene"), std::string::npos);
    EXPECT_EQ(run({"train", "--scene", "s", "--out", "o", "--bogus", "1"}).code, 2);
    EXPECT_EQ(run({"train", "--scene", "s", "--out", "o", "--mode", "sideways"}).code, 2);
}

TEST(Cli, RuntimeErrorsExitOne) {
    TempDir dir("cli_err");
    EXPECT_EQ(run({"train", "--scene", (dir / "missing").string(), "--out", (dir / "o").string()}).code, 1);
    EXPECT_EQ(run({"make-scene", "--spec", (dir / "none.json").string(), "--out", (dir / "s").string()}).code, 1);
}

TEST(Cli, EndToEnd) {
    TempDir dir("cli");
    writeJsonFile(dir / "spec.json", sceneSpecToJson(pfield::testing::smallSphereSpec(2, 16, 3, 2)));
    ASSERT_EQ(run({"make-scene", "--spec", (dir / "spec.json").string(), "--out", (dir / "scene").string(), "--seed", "4"}).code, 0);

    TrainConfig base;
    base.warmupSteps = 2;
    base.raysPerBatch = 128;
    base.particles = 2000;
    writeJsonFile(dir / "cfg.json", trainConfigToJson(base));
    const auto trained = run({"train", "--scene", (dir / "scene").string(), "--out", (dir / "run").string(), "--config",
                              (dir / "cfg.json").string(), "--steps-per-frame", "5", "--particles", "1000",
                              "--search-radius", "0.1", "--mode", "features_only", "--seed", "9", "--quiet"});
    ASSERT_EQ(trained.code, 0) << trained.err;
    const json echo = readJsonFile(dir / "run" / "config.json");
    EXPECT_EQ(echo["steps_per_frame"], 5);
    EXPECT_EQ(echo["particles"], 1000);
    EXPECT_EQ(echo["search_radius"], 0.1);
    EXPECT_EQ(echo["mode"], "features_only");
    EXPECT_EQ(echo["seed"], 9);
    EXPECT_EQ(echo["warmup_steps"], 2);
    EXPECT_EQ(echo["rays_per_batch"], 128);
    for (const char *f : {"loss.csv", "eval.csv", "checkpoint.pnrf"})
        EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;

    const Frame frame = FrameSequence::open(dir / "scene").loadFrame(1);
    writeJsonFile(dir / "cam.json", cameraToJson(frame.evalCameras[0]));
    const auto rendered = run({"render", "--checkpoint", (dir / "run" / "checkpoint.pnrf").string(), "--camera",
                               (dir / "cam.json").string(), "--out", (dir / "view.png").string()});
    ASSERT_EQ(rendered.code, 0) << rendered.err;
    EXPECT_EQ(readPngSize(dir / "view.png"), std::make_pair(16, 16));

    const auto evaluated = run({"eval", "--checkpoint", (dir / "run" / "checkpoint.pnrf").string(), "--scene",
                                (dir / "scene").string(), "--frame", "1", "--out", (dir / "eval.csv").string()});
    ASSERT_EQ(evaluated.code, 0) << evaluated.err;
    std::ifstream csv(dir / "eval.csv");
    std::string line;
    int rows = 0;
    while (std::getline(csv, line))
        ++rows;
    EXPECT_EQ(rows, 3);

    EXPECT_EQ(run({"eval", "--checkpoint", (dir / "run" / "checkpoint.pnrf").string(), "--scene",
                   (dir / "scene").string(), "--frame", "7", "--out", (dir / "e.csv").string()})
                  .code,
              1);
}
