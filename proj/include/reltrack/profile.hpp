#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <reltrack/core.hpp>

namespace reltrack {

inline constexpr int kNumAttributes = 5;

/// Raw scenario attributes; frame_rate is in frames per second.
struct AttributeVector {
    Real motion_complexity = 0;
    Real variation_amplitude = 0;
    Real target_density = 0;
    Real small_target = 0;
    Real frame_rate = 0;

    std::array<Real, kNumAttributes> values() const {
        return {motion_complexity, variation_amplitude, target_density, small_target, frame_rate};
    }
    static AttributeVector from_values(const std::array<Real, kNumAttributes>& v) { return {v[0], v[1], v[2], v[3], v[4]}; }
};

/// Normalized attributes in [0, 1], same order as AttributeVector::values().
using AttributeMap = std::array<Real, kNumAttributes>;

struct ProfileConfig {
    Real lambda_dir = 0.5;
    Real lambda_pos = 0.5;
    Real small_area = 1024;
};

/// One identity's boxes in frame order.
using Track = std::vector<BBox>;
/// All boxes of one frame.
using FrameBoxes = std::vector<BBox>;

std::vector<Track> tracks_from_rows(std::span<const TrackRow> rows);
std::vector<FrameBoxes> frames_from_rows(std::span<const TrackRow> rows);

struct MotionTerms {
    Real speed_variance = 0;
    Real circular_variance = 0;
};

/// Per-track terms averaged over tracks with at least three points.
MotionTerms motion_terms(std::span<const Track> tracks);
Real motion_complexity(std::span<const Track> tracks, Real lambda_dir = 0.5);

struct VariationTerms {
    Real aspect_variance = 0;
    Real relative_displacement = 0;
};

/// Per-track terms averaged over tracks with at least two points.
VariationTerms variation_terms(std::span<const Track> tracks);
Real variation_amplitude(std::span<const Track> tracks, Real lambda_pos = 0.5);

Real target_density(std::span<const FrameBoxes> frames);
Real small_target(std::span<const FrameBoxes> frames, Real area_thresh = 1024);

/// Attributes of a set of ground-truth sequences pooled together.
struct ProfiledSequence {
    std::vector<TrackRow> gt;
    Real fps = 30;
};
AttributeVector profile(std::span<const ProfiledSequence> sequences, const ProfileConfig& cfg = {});

struct NormalizedAttributes {
    std::vector<AttributeMap> maps;
    std::vector<std::string> warnings;
};

/// Column-wise min-max; frame rate maps to 1 - minmax. Constant columns and
/// single-dataset inputs map to zero (the latter with a warning).
NormalizedAttributes normalize(std::span<const AttributeVector> raw);

struct DatasetProfile {
    std::string name;
    AttributeVector raw;
    AttributeMap normalized{};
};

/// Each subdirectory of `root` is a dataset; its sequences are the directories
/// below it (or itself) holding gt/gt.txt, with frame rates from seqinfo.ini.
std::vector<DatasetProfile> profile_root(const std::filesystem::path& root, const ProfileConfig& cfg,
                                         std::vector<std::string>* warnings = nullptr);

/// Reads `name,motion,variation,density,small,fps` rows (header optional).
std::vector<DatasetProfile> read_raw_fixtures(const std::filesystem::path& csv);

/// Fills `normalized` for every entry.
std::vector<std::string> normalize_profiles(std::vector<DatasetProfile>& profiles);

std::string profiles_json(std::span<const DatasetProfile> profiles);
std::string profiles_csv(std::span<const DatasetProfile> profiles);

}  // namespace reltrack
