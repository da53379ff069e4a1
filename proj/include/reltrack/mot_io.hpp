#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <reltrack/core.hpp>

namespace reltrack {

/// Parses `frame,id,x,y,w,h[,score[,class[,vis[,...]]]]` lines. Missing score
/// and visibility default to 1, missing class to 1. Rows come back sorted by
/// frame (stable within a frame). Throws ParseError with the line number.
std::vector<TrackRow> parse_mot(std::string_view text, const std::string& source = "<text>");
std::vector<TrackRow> parse_mot_file(const std::filesystem::path& path);

/// Canonical serialisation: nine comma-separated fields, shortest round-trip
/// numbers, one row per line, trailing newline.
std::string format_mot(std::span<const TrackRow> rows);
void write_mot_file(const std::filesystem::path& path, std::span<const TrackRow> rows);

std::vector<Detection> to_detections(std::span<const TrackRow> rows);
std::map<int, std::vector<Detection>> detections_by_frame(std::span<const TrackRow> rows);
std::map<int, std::vector<TrackRow>> rows_by_frame(std::span<const TrackRow> rows);

/// Keeps frames 1, 1+k, 1+2k, ... and renumbers them 1, 2, 3, ...
std::vector<TrackRow> downsample_rows(std::span<const TrackRow> rows, int k);
/// Frame count after keeping every k-th of `length` frames.
int downsampled_length(int length, int k);

/// key=value lines (an optional `[Sequence]` header is skipped).
SequenceMeta parse_seqinfo(std::string_view text);
SequenceMeta read_seqinfo(const std::filesystem::path& path);
std::string format_seqinfo(const SequenceMeta& meta);

}  // namespace reltrack
