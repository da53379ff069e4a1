#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <reltrack/core.hpp>
#include <reltrack/features.hpp>

namespace reltrack {

enum class MotionModel { Linear, Bounce, RandomWalk };

struct ScenarioSpec {
    std::string name = "synth";
    int n_targets = 8;
    int length = 60;
    Real fps = 30;
    MotionModel motion = MotionModel::Linear;
    Real sigma = 0;  // random-walk displacement noise, px per frame
    Real size_min = 32;
    Real size_max = 64;
    Real shape_jitter = 0;  // std of the per-frame log aspect noise
    Real density_target = 0;  // fraction of targets spawned next to another one
    Real speed_min = 1;
    Real speed_max = 4;
    int width = 512;
    int height = 512;
    int n_classes = 1;
    Real det_score = 0.9;
    Real det_jitter = 0;  // std of detection box noise, px
    std::uint64_t seed = 0;

    void validate() const;
};

/// key=value lines; unknown keys are rejected. `motion` takes linear, bounce or random_walk.
ScenarioSpec parse_scenario_spec(std::string_view text);
std::string format_scenario_spec(const ScenarioSpec& spec);

/// Oriented sinusoidal grating drawn inside a target's box, anchored at the box corner.
struct Texture {
    Real angle = 0;
    Real period = 8;
    Real base = 0.5;
    Real amplitude = 0.3;
    Real phase = 0;
};

struct SyntheticSequence {
    SequenceMeta meta;
    std::vector<TrackRow> gt;    // frame-major, id-minor
    std::vector<TrackRow> dets;  // same boxes (plus jitter), id -1
    std::vector<Texture> textures;  // textures[id - 1]
    std::vector<GrayImage> frames;  // frames[0] is frame 1
};

SyntheticSequence generate(const ScenarioSpec& spec);

/// Keeps frames 1, 1+k, 1+2k, ... renumbered consecutively; fps divided by k.
SyntheticSequence downsample_fps(const SyntheticSequence& seq, int k);

/// Renders boxes (ids index into `textures`) on a black canvas, later rows on top.
GrayImage render_frame(int height, int width, const std::vector<TrackRow>& rows, const std::vector<Texture>& textures);

/// Replaces each row's class with a different class in [1, n_classes] with probability `rate`.
std::vector<TrackRow> inject_class_noise(std::vector<TrackRow> rows, int n_classes, Real rate, std::uint64_t seed);

struct WriteOptions {
    bool images = true;
    bool features = false;
};

/// Writes gt/gt.txt, det/det.txt, seqinfo.ini, img/NNNNNN.pgm and optionally features/NNNNNN.p2if.
void write_sequence(const SyntheticSequence& seq, const std::filesystem::path& dir, const WriteOptions& opts = {});

}  // namespace reltrack
