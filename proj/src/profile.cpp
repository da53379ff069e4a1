#include <reltrack/profile.hpp>
#include <reltrack/error.hpp>
#include <reltrack/mot_io.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace reltrack {

namespace fs = std::filesystem;

namespace {

Real population_variance(std::span<const Real> xs) {
    if (xs.empty()) return 0;
    Real mean = 0;
    for (Real x : xs) mean += x;
    mean /= static_cast<Real>(xs.size());
    Real var = 0;
    for (Real x : xs) var += (x - mean) * (x - mean);
    return var / static_cast<Real>(xs.size());
}

}  // namespace

std::vector<Track> tracks_from_rows(std::span<const TrackRow> rows) {
    std::map<int, std::vector<std::pair<int, BBox>>> by_id;
    for (const auto& r : rows) by_id[r.id].emplace_back(r.frame, r.box);
    std::vector<Track> out;
    out.reserve(by_id.size());
    for (auto& [id, seq] : by_id) {
        std::stable_sort(seq.begin(), seq.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        Track t;
        t.reserve(seq.size());
        for (const auto& [f, b] : seq) t.push_back(b);
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<FrameBoxes> frames_from_rows(std::span<const TrackRow> rows) {
    std::map<int, FrameBoxes> by_frame;
    for (const auto& r : rows) by_frame[r.frame].push_back(r.box);
    std::vector<FrameBoxes> out;
    out.reserve(by_frame.size());
    for (auto& [f, boxes] : by_frame) out.push_back(std::move(boxes));
    return out;
}

MotionTerms motion_terms(std::span<const Track> tracks) {
    MotionTerms sum;
    int eligible = 0;
    for (const auto& t : tracks) {
        if (t.size() < 3) continue;
        std::vector<Real> speeds;
        Real ux = 0, uy = 0;
        int directions = 0;
        for (std::size_t k = 1; k < t.size(); ++k) {
            const Real dx = t[k].cx() - t[k - 1].cx(), dy = t[k].cy() - t[k - 1].cy();
            const Real s = std::hypot(dx, dy);
            speeds.push_back(s);
            if (s > 0) {
                ux += dx / s;
                uy += dy / s;
                ++directions;
            }
        }
        sum.speed_variance += population_variance(speeds);
        if (directions > 0) sum.circular_variance += 1 - std::hypot(ux, uy) / directions;
        ++eligible;
    }
    if (eligible == 0) throw Error(ErrorKind::NoEligibleTracks, "motion complexity needs a track with at least 3 points");
    sum.speed_variance /= eligible;
    sum.circular_variance /= eligible;
    return sum;
}

Real motion_complexity(std::span<const Track> tracks, Real lambda_dir) {
    const auto t = motion_terms(tracks);
    return (1 - lambda_dir) * t.speed_variance + lambda_dir * t.circular_variance;
}

VariationTerms variation_terms(std::span<const Track> tracks) {
    VariationTerms sum;
    int eligible = 0;
    for (const auto& t : tracks) {
        if (t.size() < 2) continue;
        std::vector<Real> aspects;
        for (const auto& b : t) aspects.push_back(b.w / b.h);
        Real rel = 0;
        for (std::size_t k = 1; k < t.size(); ++k) {
            const Real d = std::hypot(t[k].cx() - t[k - 1].cx(), t[k].cy() - t[k - 1].cy());
            rel += d / std::sqrt(t[k - 1].w * t[k - 1].h);
        }
        sum.aspect_variance += population_variance(aspects);
        sum.relative_displacement += rel / static_cast<Real>(t.size() - 1);
        ++eligible;
    }
    if (eligible == 0) throw Error(ErrorKind::NoEligibleTracks, "variation amplitude needs a track with at least 2 points");
    sum.aspect_variance /= eligible;
    sum.relative_displacement /= eligible;
    return sum;
}

Real variation_amplitude(std::span<const Track> tracks, Real lambda_pos) {
    const auto t = variation_terms(tracks);
    return (1 - lambda_pos) * t.aspect_variance + lambda_pos * t.relative_displacement;
}

Real target_density(std::span<const FrameBoxes> frames) {
    Real total = 0;
    int counted = 0;
    for (const auto& boxes : frames) {
        if (boxes.empty()) continue;
        Real body = 0;
        for (const auto& b : boxes) body += (b.w + b.h) / 2;
        body /= static_cast<Real>(boxes.size());
        int pairs = 0;
        for (std::size_t i = 0; i < boxes.size(); ++i)
            for (std::size_t j = i + 1; j < boxes.size(); ++j)
                if (std::hypot(boxes[i].cx() - boxes[j].cx(), boxes[i].cy() - boxes[j].cy()) < 0.5 * body) ++pairs;
        total += static_cast<Real>(pairs) / static_cast<Real>(boxes.size());
        ++counted;
    }
    return counted > 0 ? total / counted : 0;
}

Real small_target(std::span<const FrameBoxes> frames, Real area_thresh) {
    if (frames.empty()) return 0;
    Real total = 0;
    for (const auto& boxes : frames)
        total += static_cast<Real>(std::count_if(boxes.begin(), boxes.end(), [&](const BBox& b) { return b.area() < area_thresh; }));
    return total / static_cast<Real>(frames.size());
}

AttributeVector profile(std::span<const ProfiledSequence> sequences, const ProfileConfig& cfg) {
    std::vector<Track> tracks;
    std::vector<FrameBoxes> frames;
    Real fps = 0;
    for (const auto& s : sequences) {
        auto t = tracks_from_rows(s.gt);
        auto f = frames_from_rows(s.gt);
        tracks.insert(tracks.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
        frames.insert(frames.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
        fps += s.fps;
    }
    AttributeVector a;
    a.motion_complexity = motion_complexity(tracks, cfg.lambda_dir);
    a.variation_amplitude = variation_amplitude(tracks, cfg.lambda_pos);
    a.target_density = target_density(frames);
    a.small_target = small_target(frames, cfg.small_area);
    a.frame_rate = sequences.empty() ? 0 : fps / static_cast<Real>(sequences.size());
    return a;
}

NormalizedAttributes normalize(std::span<const AttributeVector> raw) {
    NormalizedAttributes out;
    out.maps.assign(raw.size(), AttributeMap{});
    if (raw.size() < 2) {
        if (!raw.empty()) out.warnings.push_back("single dataset: attribute map is all zeros");
        return out;
    }
    for (int k = 0; k < kNumAttributes; ++k) {
        Real lo = raw[0].values()[k], hi = lo;
        for (const auto& r : raw) {
            lo = std::min(lo, r.values()[k]);
            hi = std::max(hi, r.values()[k]);
        }
        if (hi == lo) continue;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const Real m = (raw[i].values()[k] - lo) / (hi - lo);
            out.maps[i][k] = k == kNumAttributes - 1 ? 1 - m : m;
        }
    }
    return out;
}

namespace {

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

ProfiledSequence load_sequence(const fs::path& dir) {
    ProfiledSequence s;
    s.gt = parse_mot_file(dir / "gt" / "gt.txt");
    if (fs::exists(dir / "seqinfo.ini")) s.fps = read_seqinfo(dir / "seqinfo.ini").fps;
    return s;
}

}  // namespace

std::vector<DatasetProfile> profile_root(const fs::path& root, const ProfileConfig& cfg, std::vector<std::string>* warnings) {
    if (!fs::is_directory(root)) throw Error(ErrorKind::Io, "not a directory: " + root.string());
    std::vector<DatasetProfile> out;
    for (const auto& dataset : sorted_subdirs(root)) {
        std::vector<ProfiledSequence> seqs;
        if (fs::exists(dataset / "gt" / "gt.txt")) {
            seqs.push_back(load_sequence(dataset));
        } else {
            for (const auto& seq : sorted_subdirs(dataset))
                if (fs::exists(seq / "gt" / "gt.txt")) seqs.push_back(load_sequence(seq));
        }
        if (seqs.empty()) continue;
        out.push_back({dataset.filename().string(), profile(seqs, cfg), {}});
    }
    auto w = normalize_profiles(out);
    if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
    return out;
}

std::vector<DatasetProfile> read_raw_fixtures(const fs::path& csv) {
    std::ifstream in(csv);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + csv.string());
    std::vector<DatasetProfile> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 6) throw ParseError(ErrorKind::ParseError, lineno, "expected 6 fields");
        std::array<Real, kNumAttributes> v{};
        try {
            for (int k = 0; k < kNumAttributes; ++k) v[static_cast<std::size_t>(k)] = std::stod(fields[static_cast<std::size_t>(k) + 1]);
        } catch (const std::exception&) {
            if (out.empty() && lineno == 1) continue;  // header
            throw ParseError(ErrorKind::ParseError, lineno, "non-numeric attribute");
        }
        for (Real x : v)
            if (!std::isfinite(x)) throw ParseError(ErrorKind::NonFiniteValue, lineno, "non-finite attribute");
        out.push_back({fields[0], AttributeVector::from_values(v), {}});
    }
    return out;
}

std::vector<std::string> normalize_profiles(std::vector<DatasetProfile>& profiles) {
    std::vector<AttributeVector> raw;
    for (const auto& p : profiles) raw.push_back(p.raw);
    auto n = normalize(raw);
    for (std::size_t i = 0; i < profiles.size(); ++i) profiles[i].normalized = n.maps[i];
    return n.warnings;
}

std::string profiles_json(std::span<const DatasetProfile> profiles) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& p : profiles) {
        const auto raw = p.raw.values();
        j[p.name] = {{"raw", std::vector<Real>(raw.begin(), raw.end())},
                     {"normalized", std::vector<Real>(p.normalized.begin(), p.normalized.end())}};
    }
    return j.dump(2) + "\n";
}

std::string profiles_csv(std::span<const DatasetProfile> profiles) {
    std::ostringstream out;
    out << "dataset,motion_complexity,variation_amplitude,target_density,small_target,frame_rate\n";
    for (const auto& p : profiles) {
        out << p.name;
        for (Real x : p.normalized) out << ',' << nlohmann::json(x).dump();
        out << '\n';
    }
    return out.str();
}

}  // namespace reltrack
