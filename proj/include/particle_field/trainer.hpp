// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file trainer.hpp
/// Online training: one Adam for the MLP, one for particle features, PBD for
/// particle positions; per-frame step budget after a static warmup; metric
/// logging and bit-exact checkpoints.

#pragma once

#include "field_network.hpp"
#include "neighbor_index.hpp"
#include "particle_encoding.hpp"
#include "physics.hpp"
#include "pipeline.hpp"
#include "renderer.hpp"
#include "scene_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>

namespace pfield {

enum class AblationMode { Both, FeaturesOnly, PositionsOnly };

inline const char *
modeName(AblationMode mode) {
    switch (mode) {
    case AblationMode::Both: return "both";
    case AblationMode::FeaturesOnly: return "features_only";
    case AblationMode::PositionsOnly: return "positions_only";
    }
    return "both";
}

inline AblationMode
parseMode(const std::string &name) {
    if (name == "both")
        return AblationMode::Both;
    if (name == "features_only")
        return AblationMode::FeaturesOnly;
    if (name == "positions_only")
        return AblationMode::PositionsOnly;
    throw Error(ErrorCode::InvalidConfig, "unknown mode '" + name + "' (expected both|features_only|positions_only)");
}

struct TrainConfig {
    int stepsPerFrame = 5;
    int warmupSteps = 500;
    int raysPerBatch = 4096;
    /// Rays per independent work item; gradients are reduced in chunk order.
    int raysPerChunk = 512;
    int particles = 20000;
    double searchRadius = 0.06;
    int featureDim = 4;
    PhysicsConfig physics;
    AdamHyper mlpOptimizer;
    AdamHyper featureOptimizer;
    AblationMode mode = AblationMode::Both;
    std::uint64_t seed = 0;
    RenderConfig render;
    int occupancyResolution = 32;
    /// Cells are occupied when density > occupancyThresholdScale * resolution
    /// (clamped to the mean cell density under ClampToMean).
    double occupancyThresholdScale = 0.01;
    ThresholdRule occupancyRule = ThresholdRule::ClampToMean;
    LossMode loss = LossMode::Squared;
    /// Applied to position gradients before clipping; 1 feeds physics the batch-mean gradient.
    double positionGradientMultiplier = 1.0;

    double occupancyThreshold() const { return occupancyThresholdScale * occupancyResolution; }

    void validate() const {
        if (stepsPerFrame < 1)
            throw Error(ErrorCode::InvalidConfig, "steps_per_frame must be at least 1");
        if (warmupSteps < 0)
            throw Error(ErrorCode::InvalidConfig, "warmup_steps must be non-negative");
        if (raysPerBatch < 1 || raysPerChunk < 1)
            throw Error(ErrorCode::InvalidConfig, "ray batch sizes must be at least 1");
        if (particles < 1 || featureDim < 1)
            throw Error(ErrorCode::InvalidConfig, "particle count and feature dimension must be positive");
        if (!(searchRadius > 0.0))
            throw Error(ErrorCode::InvalidConfig, "search radius must be positive");
        if (searchRadius < physics.minDistance)
            throw Error(ErrorCode::InvalidConfig, "search radius must be at least the collision distance");
        if (render.samplesPerRay < 1 || !(render.far > 0.0) || render.near < 0.0)
            throw Error(ErrorCode::InvalidConfig, "invalid sampling settings");
        if (!(occupancyThresholdScale >= 0.0) || occupancyResolution < 1)
            throw Error(ErrorCode::InvalidConfig, "invalid occupancy grid settings");
        if (!(positionGradientMultiplier >= 0.0) || !std::isfinite(positionGradientMultiplier))
            throw Error(ErrorCode::InvalidConfig, "position_gradient_multiplier must be finite and non-negative");
        physics.validate();
    }
};

inline json
adamToJson(const AdamHyper &h) {
    return {{"learning_rate", h.learningRate}, {"beta1", h.beta1}, {"beta2", h.beta2}, {"epsilon", h.epsilon}};
}

inline AdamHyper
adamFromJson(const json &j, AdamHyper h) {
    h.learningRate = j.value("learning_rate", h.learningRate);
    h.beta1 = j.value("beta1", h.beta1);
    h.beta2 = j.value("beta2", h.beta2);
    h.epsilon = j.value("epsilon", h.epsilon);
    return h;
}

inline json
trainConfigToJson(const TrainConfig &c) {
    json physics = {{"damping", c.physics.damping},
                    {"timestep", c.physics.timestep},
                    {"min_distance", c.physics.minDistance},
                    {"gradient_scale", c.physics.gradientScale},
                    {"clamp_to_unit_cube", c.physics.bounds.has_value()}};
    return {{"steps_per_frame", c.stepsPerFrame},
            {"warmup_steps", c.warmupSteps},
            {"rays_per_batch", c.raysPerBatch},
            {"rays_per_chunk", c.raysPerChunk},
            {"particles", c.particles},
            {"search_radius", c.searchRadius},
            {"feature_dim", c.featureDim},
            {"physics", physics},
            {"mlp_optimizer", adamToJson(c.mlpOptimizer)},
            {"feature_optimizer", adamToJson(c.featureOptimizer)},
            {"mode", modeName(c.mode)},
            {"seed", c.seed},
            {"samples_per_ray", c.render.samplesPerRay},
            {"near", c.render.near},
            {"far", c.render.far},
            {"background", vecToJson(c.render.background)},
            {"occupancy_resolution", c.occupancyResolution},
            {"occupancy_threshold_scale", c.occupancyThresholdScale},
            {"occupancy_threshold_rule", c.occupancyRule == ThresholdRule::Fixed ? "fixed" : "clamp_to_mean"},
            {"loss", c.loss == LossMode::Squared ? "squared" : "unsquared"},
            {"position_gradient_multiplier", c.positionGradientMultiplier}};
}

/// Missing keys keep the values already in `base`.
inline TrainConfig
trainConfigFromJson(const json &j, TrainConfig c = {}) {
    try {
        c.stepsPerFrame = j.value("steps_per_frame", c.stepsPerFrame);
        c.warmupSteps = j.value("warmup_steps", c.warmupSteps);
        c.raysPerBatch = j.value("rays_per_batch", c.raysPerBatch);
        c.raysPerChunk = j.value("rays_per_chunk", c.raysPerChunk);
        c.particles = j.value("particles", c.particles);
        c.searchRadius = j.value("search_radius", c.searchRadius);
        c.featureDim = j.value("feature_dim", c.featureDim);
        if (j.contains("physics")) {
            const json &p = j["physics"];
            c.physics.damping = p.value("damping", c.physics.damping);
            c.physics.timestep = p.value("timestep", c.physics.timestep);
            c.physics.minDistance = p.value("min_distance", c.physics.minDistance);
            c.physics.gradientScale = p.value("gradient_scale", c.physics.gradientScale);
            if (p.contains("clamp_to_unit_cube")) {
                if (p["clamp_to_unit_cube"].get<bool>())
                    c.physics.bounds = std::make_pair(0.0, 1.0);
                else
                    c.physics.bounds.reset();
            }
        }
        if (j.contains("mlp_optimizer"))
            c.mlpOptimizer = adamFromJson(j["mlp_optimizer"], c.mlpOptimizer);
        if (j.contains("feature_optimizer"))
            c.featureOptimizer = adamFromJson(j["feature_optimizer"], c.featureOptimizer);
        if (j.contains("mode"))
            c.mode = parseMode(j["mode"].get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.render.samplesPerRay = j.value("samples_per_ray", c.render.samplesPerRay);
        c.render.near = j.value("near", c.render.near);
        c.render.far = j.value("far", c.render.far);
        if (j.contains("background"))
            c.render.background = vecFromJson(j["background"]);
        c.occupancyResolution = j.value("occupancy_resolution", c.occupancyResolution);
        c.occupancyThresholdScale = j.value("occupancy_threshold_scale", c.occupancyThresholdScale);
        if (j.contains("occupancy_threshold_rule")) {
            const std::string rule = j["occupancy_threshold_rule"].get<std::string>();
            if (rule == "fixed")
                c.occupancyRule = ThresholdRule::Fixed;
            else if (rule == "clamp_to_mean")
                c.occupancyRule = ThresholdRule::ClampToMean;
            else
                throw Error(ErrorCode::InvalidConfig, "unknown occupancy_threshold_rule '" + rule + "'");
        }
        c.positionGradientMultiplier = j.value("position_gradient_multiplier", c.positionGradientMultiplier);
        if (j.contains("loss")) {
            const std::string loss = j["loss"].get<std::string>();
            if (loss == "squared")
                c.loss = LossMode::Squared;
            else if (loss == "unsquared")
                c.loss = LossMode::Unsquared;
            else
                throw Error(ErrorCode::InvalidConfig, "unknown loss '" + loss + "'");
        }
    } catch (const json::exception &e) {
        throw Error(ErrorCode::InvalidConfig, std::string("train config: ") + e.what());
    }
    return c;
}

using TrainReal = float;

struct TrainState {
    TrainConfig config;
    ParticleCloud<TrainReal> cloud;
    FieldParams<TrainReal> params;
    AdamState<TrainReal> mlpAdam;
    AdamState<TrainReal> featureAdam;
    std::uint64_t step = 0;

    // Derived every step from the above; not checkpointed.
    SpatialIndex<TrainReal> index;
    OccupancyGrid grid;

    static TrainState create(const TrainConfig &config) {
        config.validate();
        TrainState s;
        s.config = config;
        s.cloud = initParticles<TrainReal>(static_cast<std::size_t>(config.particles), config.featureDim, config.seed,
                                           static_cast<TrainReal>(config.searchRadius));
        s.params = FieldParams<TrainReal>::heUniform(config.featureDim, config.seed);
        s.mlpAdam = AdamState<TrainReal>(s.params.size(), config.mlpOptimizer);
        s.featureAdam = AdamState<TrainReal>(s.cloud.features.size(), config.featureOptimizer);
        s.grid = OccupancyGrid(config.occupancyResolution, config.occupancyThreshold(), config.occupancyRule);
        s.rebuildIndex();
        return s;
    }

    void rebuildIndex() { index.build(cloud.positions, cloud.searchRadius); }

    bool mlpTrainable() const {
        return config.mode != AblationMode::PositionsOnly || step < static_cast<std::uint64_t>(config.warmupSteps);
    }
    bool featuresTrainable() const { return config.mode != AblationMode::PositionsOnly; }
    bool positionsTrainable() const { return config.mode != AblationMode::FeaturesOnly; }
};

/// Training views of one frame with their decoded images.
struct FrameData {
    Frame frame;
    std::vector<Image> images;
};

/// Access to a frame sequence; the trainer asks for frame t only while on frame t.
class FrameSource {
  public:
    virtual ~FrameSource() = default;
    virtual int frameCount() const = 0;
    virtual Frame loadFrame(int index) = 0;
    virtual Image loadImage(const fs::path &path) = 0;
};

class DiskFrameSource : public FrameSource {
  public:
    explicit DiskFrameSource(FrameSequence sequence) : mSequence(std::move(sequence)) {}

    int frameCount() const override { return mSequence.frameCount(); }
    Frame loadFrame(int index) override { return mSequence.loadFrame(index); }
    Image loadImage(const fs::path &path) override {
        if (!fs::exists(path))
            throw Error(ErrorCode::NotFound, "image " + path.string() + " does not exist");
        return readPng(path);
    }

  private:
    FrameSequence mSequence;
};

inline FrameData
loadFrameData(FrameSource &source, int index) {
    FrameData data;
    data.frame = source.loadFrame(index);
    for (const auto &path : data.frame.imagePaths)
        data.images.push_back(source.loadImage(path));
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const Camera &cam = data.frame.cameras[i];
        if (data.images[i].width != cam.width || data.images[i].height != cam.height)
            throw Error(ErrorCode::DecodeError, "image size does not match its camera");
    }
    return data;
}

/// Refreshes the neighbor index and occupancy grid for the current particles.
inline void
refreshDerivedState(TrainState &state) {
    state.rebuildIndex();
    refreshOccupancy(state.grid, state.cloud, state.index, state.params);
}

struct StepGradients {
    FieldGrads<TrainReal> params;
    EncodingGradients<TrainReal> encoding;
    double loss = 0;
};

/// Forward + backward over one random ray batch, without applying updates.
/// Ray choices and jitter come from Rng(mix(seed, step, chunk)).
inline StepGradients
computeStepGradients(TrainState &state, const FrameData &data) {
    const TrainConfig &cfg = state.config;
    if (data.frame.cameras.empty() || data.images.size() != data.frame.cameras.size())
        throw Error(ErrorCode::NotFound, "frame has no training images");
    const std::size_t batch = static_cast<std::size_t>(cfg.raysPerBatch);
    const std::size_t chunkSize = static_cast<std::size_t>(cfg.raysPerChunk);
    const std::size_t chunks = (batch + chunkSize - 1) / chunkSize;
    const std::uint64_t stepSeed = mixSeed(cfg.seed, state.step);

    std::vector<StepGradients> partial(chunks);
    parallelFor(chunks, [&](std::size_t c) {
        const std::size_t count = std::min(chunkSize, batch - c * chunkSize);
        Rng rng(mixSeed(stepSeed, c));
        std::vector<Ray<TrainReal>> rays(count);
        std::vector<Vec3<TrainReal>> target(count);
        for (std::size_t r = 0; r < count; ++r) {
            const std::size_t cam = rng.below(data.frame.cameras.size());
            const Camera &camera = data.frame.cameras[cam];
            const int px = static_cast<int>(rng.below(camera.width));
            const int py = static_cast<int>(rng.below(camera.height));
            const Ray<double> ray = generateRay(camera, px + 0.5, py + 0.5);
            rays[r].origin = ray.origin.cast<TrainReal>();
            rays[r].direction = ray.direction.cast<TrainReal>();
            for (int ch = 0; ch < 3; ++ch)
                target[r][ch] = data.images[cam].at(px, py, ch);
        }
        RayBatch<TrainReal> tracer;
        tracer.trace(state.cloud, state.index, state.params, state.grid, rays, cfg.render, rng, true);
        LossResult<TrainReal> loss = photometricLoss<TrainReal>(tracer.colors(), target, cfg.loss);
        if (cfg.loss == LossMode::Squared) {
            // Per-chunk mean -> contribution to the batch mean.
            const TrainReal scale = static_cast<TrainReal>(count) / static_cast<TrainReal>(batch);
            loss.loss *= scale;
            for (auto &g : loss.grad)
                g *= scale;
        }
        StepGradients &out = partial[c];
        out.loss = loss.loss;
        out.params.assign(state.params.size(), TrainReal(0));
        out.encoding = EncodingGradients<TrainReal>(state.cloud.size(), state.cloud.featureDim);
        tracer.backward(state.cloud, state.params, loss.grad, out.params, out.encoding);
    });

    StepGradients total = std::move(partial[0]);
    for (std::size_t c = 1; c < chunks; ++c) {
        total.loss += partial[c].loss;
        for (std::size_t i = 0; i < total.params.size(); ++i)
            total.params[i] += partial[c].params[i];
        total.encoding += partial[c].encoding;
    }
    return total;
}

/// One optimization step on `data`; returns the batch loss.
inline double
trainStep(TrainState &state, const FrameData &data) {
    refreshDerivedState(state);
    StepGradients grads = computeStepGradients(state, data);

    if (state.mlpTrainable())
        adamStep<TrainReal>(state.mlpAdam, state.params, grads.params);
    if (state.featuresTrainable())
        adamStep<TrainReal>(state.featureAdam, state.cloud.features, grads.encoding.features);
    if (state.positionsTrainable()) {
        for (auto &g : grads.encoding.positions)
            g *= static_cast<TrainReal>(state.config.positionGradientMultiplier);
        clipPositionGradients(grads.encoding, state.cloud.searchRadius);
        pbdStep<TrainReal>(state.cloud, grads.encoding.positions, state.config.physics, state.index);
    }
    ++state.step;
    return grads.loss;
}

// --- metrics ------------------------------------------------------------------

struct LossRow {
    int frame;
    std::uint64_t step;
    double loss;
};

struct EvalRow {
    int frame;
    int view;
    double psnr;
    double ssim;
};

struct MetricsLog {
    std::vector<LossRow> losses;
    std::vector<EvalRow> evals;

    double meanPsnr(int firstFrame, int lastFrame) const {
        double sum = 0;
        int n = 0;
        for (const auto &r : evals)
            if (r.frame >= firstFrame && r.frame <= lastFrame) {
                sum += r.psnr;
                ++n;
            }
        return n ? sum / n : 0.0;
    }

    std::vector<double> framePsnr() const {
        std::vector<double> sum, count;
        for (const auto &r : evals) {
            if (static_cast<std::size_t>(r.frame) >= sum.size()) {
                sum.resize(r.frame + 1, 0.0);
                count.resize(r.frame + 1, 0.0);
            }
            sum[r.frame] += r.psnr;
            count[r.frame] += 1.0;
        }
        for (std::size_t i = 0; i < sum.size(); ++i)
            sum[i] = count[i] > 0 ? sum[i] / count[i] : 0.0;
        return sum;
    }
};

inline void
writeLossCsv(const fs::path &path, const std::vector<LossRow> &rows) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::WriteError, "cannot write " + path.string());
    out << "frame,step,loss\n" << std::setprecision(9);
    for (const auto &r : rows)
        out << r.frame << ',' << r.step << ',' << r.loss << '\n';
}

inline void
writeEvalCsv(const fs::path &path, const std::vector<EvalRow> &rows) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::WriteError, "cannot write " + path.string());
    out << "frame,view,psnr,ssim\n" << std::setprecision(9);
    for (const auto &r : rows)
        out << r.frame << ',' << r.view << ',' << r.psnr << ',' << r.ssim << '\n';
}

/// Renders one view of the current model.
inline Image
renderState(TrainState &state, const Camera &camera, std::uint64_t seed) {
    refreshDerivedState(state);
    return renderView(state.cloud, state.index, state.params, camera, state.grid, state.config.render, seed);
}

/// Renders every eval view of `frame` and scores it against ground truth.
inline std::vector<EvalRow>
evaluateFrame(TrainState &state, FrameSource &source, const Frame &frame) {
    std::vector<EvalRow> rows;
    refreshDerivedState(state);
    for (std::size_t v = 0; v < frame.evalCameras.size(); ++v) {
        const Image truth = source.loadImage(frame.evalImagePaths[v]);
        const Image render = renderView(state.cloud, state.index, state.params, frame.evalCameras[v], state.grid,
                                        state.config.render, mixSeed(state.config.seed ^ 0x4556414cULL, frame.index * 1000 + v));
        const ImageMetrics m = imageMetrics(render, truth);
        rows.push_back({frame.index, static_cast<int>(v), m.psnr, m.ssim});
    }
    return rows;
}

struct OnlineOptions {
    bool evaluate = true;
    /// Called after each frame's steps and evaluation.
    std::function<void(int frame, const MetricsLog &)> onFrame;
};

/// Warmup on frame 0, then steps_per_frame steps per frame using only that
/// frame's images, evaluating all eval views at the end of every frame.
inline MetricsLog
runOnlineSequence(TrainState &state, FrameSource &source, const OnlineOptions &options = {}) {
    MetricsLog log;
    for (int f = 0; f < source.frameCount(); ++f) {
        const FrameData data = loadFrameData(source, f);
        const int steps = state.config.stepsPerFrame + (f == 0 ? state.config.warmupSteps : 0);
        for (int s = 0; s < steps; ++s) {
            const std::uint64_t step = state.step;
            const double loss = trainStep(state, data);
            log.losses.push_back({f, step, loss});
        }
        if (options.evaluate) {
            auto rows = evaluateFrame(state, source, data.frame);
            log.evals.insert(log.evals.end(), rows.begin(), rows.end());
        }
        if (options.onFrame)
            options.onFrame(f, log);
    }
    return log;
}

// --- checkpoints --------------------------------------------------------------
//
// Layout (little-endian): "PNRF", u32 version, u32 config-json length + bytes,
// u64 step, u32 feature dim, f32 search radius, then length-prefixed (u64)
// f32 arrays: positions, velocities, features, mlp params, mlp adam m/v,
// feature adam m/v, followed by u64 mlp adam step and u64 feature adam step.

inline constexpr char kCheckpointMagic[4] = {'P', 'N', 'R', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace detail {

class Writer {
  public:
    void bytes(const void *p, std::size_t n) {
        const auto *c = static_cast<const char *>(p);
        buffer.insert(buffer.end(), c, c + n);
    }
    template <class T> void pod(T v) { bytes(&v, sizeof(T)); }
    void floats(const float *p, std::size_t n) {
        pod<std::uint64_t>(n);
        bytes(p, n * sizeof(float));
    }
    std::vector<char> buffer;
};

class Reader {
  public:
    explicit Reader(std::vector<char> data) : mData(std::move(data)) {}
    void bytes(void *p, std::size_t n) {
        if (mPos + n > mData.size())
            throw Error(ErrorCode::CorruptCheckpoint, "checkpoint is truncated");
        std::memcpy(p, mData.data() + mPos, n);
        mPos += n;
    }
    template <class T> T pod() {
        T v;
        bytes(&v, sizeof(T));
        return v;
    }
    std::vector<float> floats(std::size_t expected) {
        const auto n = pod<std::uint64_t>();
        if (n != expected)
            throw Error(ErrorCode::CorruptCheckpoint, "checkpoint array length mismatch");
        std::vector<float> out(n);
        bytes(out.data(), n * sizeof(float));
        return out;
    }
    bool atEnd() const { return mPos == mData.size(); }

  private:
    std::vector<char> mData;
    std::size_t mPos = 0;
};

inline std::vector<float>
flatten(const std::vector<Vec3<float>> &v) {
    std::vector<float> out;
    out.reserve(v.size() * 3);
    for (const auto &p : v)
        out.insert(out.end(), {p.x(), p.y(), p.z()});
    return out;
}

inline std::vector<Vec3<float>>
unflatten(const std::vector<float> &v) {
    std::vector<Vec3<float>> out(v.size() / 3);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = Vec3<float>(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
    return out;
}

} // namespace detail

inline std::vector<char>
serializeCheckpoint(const TrainState &state) {
    detail::Writer w;
    w.bytes(kCheckpointMagic, 4);
    w.pod<std::uint32_t>(kCheckpointVersion);
    const std::string config = trainConfigToJson(state.config).dump();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
    w.bytes(config.data(), config.size());
    w.pod<std::uint64_t>(state.step);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(state.cloud.featureDim));
    w.pod<std::uint64_t>(state.cloud.size());
    w.pod<float>(state.cloud.searchRadius);
    const auto pos = detail::flatten(state.cloud.positions);
    const auto vel = detail::flatten(state.cloud.velocities);
    w.floats(pos.data(), pos.size());
    w.floats(vel.data(), vel.size());
    w.floats(state.cloud.features.data(), state.cloud.features.size());
    w.floats(state.params.data().data(), state.params.size());
    w.floats(state.mlpAdam.m.data(), state.mlpAdam.m.size());
    w.floats(state.mlpAdam.v.data(), state.mlpAdam.v.size());
    w.floats(state.featureAdam.m.data(), state.featureAdam.m.size());
    w.floats(state.featureAdam.v.data(), state.featureAdam.v.size());
    w.pod<std::uint64_t>(state.mlpAdam.step);
    w.pod<std::uint64_t>(state.featureAdam.step);
    return std::move(w.buffer);
}

inline TrainState
deserializeCheckpoint(std::vector<char> bytes) {
    detail::Reader r(std::move(bytes));
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw Error(ErrorCode::CorruptCheckpoint, "not a particle-field checkpoint");
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw Error(ErrorCode::IncompatibleCheckpoint,
                    "checkpoint version " + std::to_string(version) + " (expected " + std::to_string(kCheckpointVersion) + ")");
    const auto configLen = r.pod<std::uint32_t>();
    std::string configText(configLen, '\0');
    r.bytes(configText.data(), configLen);
    TrainConfig config;
    try {
        config = trainConfigFromJson(json::parse(configText));
    } catch (const json::exception &e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("bad config block: ") + e.what());
    }

    TrainState s;
    s.config = config;
    s.step = r.pod<std::uint64_t>();
    const auto featureDim = static_cast<int>(r.pod<std::uint32_t>());
    const auto count = r.pod<std::uint64_t>();
    if (featureDim < 1 || count > (1ULL << 32))
        throw Error(ErrorCode::CorruptCheckpoint, "implausible particle array sizes");
    s.cloud.featureDim = featureDim;
    s.cloud.searchRadius = r.pod<float>();
    s.cloud.positions = detail::unflatten(r.floats(count * 3));
    s.cloud.velocities = detail::unflatten(r.floats(count * 3));
    s.cloud.features = r.floats(count * featureDim);
    s.params = FieldParams<TrainReal>(featureDim);
    const auto params = r.floats(s.params.size());
    std::copy(params.begin(), params.end(), s.params.data().begin());
    s.mlpAdam.hyper = config.mlpOptimizer;
    s.mlpAdam.m = r.floats(s.params.size());
    s.mlpAdam.v = r.floats(s.params.size());
    s.featureAdam.hyper = config.featureOptimizer;
    s.featureAdam.m = r.floats(s.cloud.features.size());
    s.featureAdam.v = r.floats(s.cloud.features.size());
    s.mlpAdam.step = r.pod<std::uint64_t>();
    s.featureAdam.step = r.pod<std::uint64_t>();
    if (!r.atEnd())
        throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes after checkpoint payload");
    s.grid = OccupancyGrid(config.occupancyResolution, config.occupancyThreshold(), config.occupancyRule);
    s.rebuildIndex();
    return s;
}

inline void
saveCheckpoint(const TrainState &state, const fs::path &path) {
    const auto bytes = serializeCheckpoint(state);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::WriteError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(ErrorCode::WriteError, "write failed: " + path.string());
}

inline TrainState
loadCheckpoint(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::NotFound, "cannot open checkpoint " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserializeCheckpoint(std::move(bytes));
}

} // namespace pfield
