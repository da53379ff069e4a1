#include <reltrack/synth.hpp>
#include <reltrack/config.hpp>
#include <reltrack/error.hpp>
#include <reltrack/fs.hpp>
#include <reltrack/mot_io.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace reltrack {

namespace fs = std::filesystem;

void ScenarioSpec::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
    if (n_targets < 1) fail("n_targets must be >= 1");
    if (length < 2) fail("length must be >= 2");
    if (!(fps > 0)) fail("fps must be > 0");
    if (!(size_min >= 2 && size_min <= size_max)) fail("require 2 <= size_min <= size_max");
    if (size_max > std::min(width, height)) fail("size_max exceeds the canvas");
    if (!(sigma >= 0) || !(shape_jitter >= 0) || !(det_jitter >= 0)) fail("noise levels must be >= 0");
    if (!(density_target >= 0 && density_target <= 1)) fail("density_target must lie in [0, 1]");
    if (!(speed_min >= 0 && speed_min <= speed_max)) fail("require 0 <= speed_min <= speed_max");
    if (n_classes < 1) fail("n_classes must be >= 1");
    if (!(det_score >= 0 && det_score <= 1)) fail("det_score must lie in [0, 1]");
}

ScenarioSpec parse_scenario_spec(std::string_view text) {
    ScenarioSpec s;
    for (const auto& kv : parse_key_values(text)) {
        const auto& k = kv.key;
        if (k == "name") s.name = kv.value;
        else if (k == "n_targets") s.n_targets = kv_int(kv);
        else if (k == "length") s.length = kv_int(kv);
        else if (k == "fps") s.fps = kv_real(kv);
        else if (k == "motion") {
            if (kv.value == "linear") s.motion = MotionModel::Linear;
            else if (kv.value == "bounce") s.motion = MotionModel::Bounce;
            else if (kv.value == "random_walk") s.motion = MotionModel::RandomWalk;
            else throw ParseError(ErrorKind::InvalidConfig, kv.line, "motion must be linear, bounce or random_walk");
        }
        else if (k == "sigma") s.sigma = kv_real(kv);
        else if (k == "size_min") s.size_min = kv_real(kv);
        else if (k == "size_max") s.size_max = kv_real(kv);
        else if (k == "shape_jitter") s.shape_jitter = kv_real(kv);
        else if (k == "density_target") s.density_target = kv_real(kv);
        else if (k == "speed_min") s.speed_min = kv_real(kv);
        else if (k == "speed_max") s.speed_max = kv_real(kv);
        else if (k == "width") s.width = kv_int(kv);
        else if (k == "height") s.height = kv_int(kv);
        else if (k == "n_classes") s.n_classes = kv_int(kv);
        else if (k == "det_score") s.det_score = kv_real(kv);
        else if (k == "det_jitter") s.det_jitter = kv_real(kv);
        else if (k == "seed") s.seed = kv_u64(kv);
        else throw ParseError(ErrorKind::InvalidConfig, kv.line, "unknown scenario key '" + k + "'");
    }
    s.validate();
    return s;
}

std::string format_scenario_spec(const ScenarioSpec& s) {
    std::ostringstream out;
    out.precision(17);
    const char* motion = s.motion == MotionModel::Linear ? "linear" : s.motion == MotionModel::Bounce ? "bounce" : "random_walk";
    out << "name = " << s.name << "\nn_targets = " << s.n_targets << "\nlength = " << s.length << "\nfps = " << s.fps
        << "\nmotion = " << motion << "\nsigma = " << s.sigma << "\nsize_min = " << s.size_min
        << "\nsize_max = " << s.size_max << "\nshape_jitter = " << s.shape_jitter
        << "\ndensity_target = " << s.density_target << "\nspeed_min = " << s.speed_min
        << "\nspeed_max = " << s.speed_max << "\nwidth = " << s.width << "\nheight = " << s.height
        << "\nn_classes = " << s.n_classes << "\ndet_score = " << s.det_score << "\ndet_jitter = " << s.det_jitter
        << "\nseed = " << s.seed << '\n';
    return out.str();
}

namespace {

constexpr Real kTwoPi = 2 * std::numbers::pi;

struct Target {
    Real cx, cy;  // centre at frame 1
    Real vx, vy;
    Real w, h;
    int class_id;
};

Real body(const Target& t) { return (t.w + t.h) / 2; }

Texture make_texture(std::uint64_t seed, int id) {
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(id)));
    std::uniform_real_distribution<Real> u(0, 1);
    Texture t;
    // Golden-ratio spacing keeps neighbouring identities' orientations apart.
    t.angle = std::fmod(id * 0.6180339887498949 * std::numbers::pi + 0.2 * (u(rng) - 0.5), std::numbers::pi);
    if (t.angle < 0) t.angle += std::numbers::pi;
    t.period = 5 + 7 * u(rng);
    t.base = 0.35 + 0.5 * u(rng);
    t.amplitude = std::min({0.15 + 0.15 * u(rng), t.base - 0.05, 1.0 - t.base});
    t.phase = kTwoPi * u(rng);
    return t;
}

// Keeps a coordinate inside [lo, hi] by mirroring at the walls; flips `vel` on every bounce.
void reflect(Real& pos, Real& vel, Real lo, Real hi) {
    if (hi <= lo) {
        pos = (lo + hi) / 2;
        return;
    }
    for (int guard = 0; guard < 64 && (pos < lo || pos > hi); ++guard) {
        if (pos < lo) pos = 2 * lo - pos;
        else pos = 2 * hi - pos;
        vel = -vel;
    }
    pos = std::clamp(pos, lo, hi);
}

bool too_close(const Target& a, const Target& b) {
    return std::hypot(a.cx - b.cx, a.cy - b.cy) < 0.5 * (body(a) + body(b)) / 2;
}

}  // namespace

GrayImage render_frame(int height, int width, const std::vector<TrackRow>& rows, const std::vector<Texture>& textures) {
    GrayImage img(height, width, 0.0f);
    for (const auto& r : rows) {
        if (r.id < 1 || static_cast<std::size_t>(r.id) > textures.size()) throw Error(ErrorKind::DimMismatch, "row id without texture");
        const auto& t = textures[static_cast<std::size_t>(r.id - 1)];
        const Real c = std::cos(t.angle), s = std::sin(t.angle);
        const int c0 = std::max(0, static_cast<int>(std::ceil(r.box.x - 0.5)));
        const int c1 = std::min(width, static_cast<int>(std::ceil(r.box.x + r.box.w - 0.5)));
        const int r0 = std::max(0, static_cast<int>(std::ceil(r.box.y - 0.5)));
        const int r1 = std::min(height, static_cast<int>(std::ceil(r.box.y + r.box.h - 0.5)));
        for (int i = r0; i < r1; ++i) {
            for (int j = c0; j < c1; ++j) {
                const Real u = j + 0.5 - r.box.x, v = i + 0.5 - r.box.y;
                const Real val = t.base + t.amplitude * std::sin(kTwoPi * (u * c + v * s) / t.period + t.phase);
                // Quantized so that in-memory frames equal their PGM round trip.
                img.at(i, j) = static_cast<float>(std::round(std::clamp(val, 0.0, 1.0) * 255) / 255);
            }
        }
    }
    return img;
}

SyntheticSequence generate(const ScenarioSpec& spec) {
    spec.validate();
    const Real W = spec.width, H = spec.height;
    if (spec.n_targets * spec.size_min * spec.size_min > 4 * W * H) {
        throw Error(ErrorKind::OvercrowdedSpec, "targets cannot fit on the canvas");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<Real> u01(0, 1);
    auto uniform = [&](Real lo, Real hi) { return lo + (hi - lo) * u01(rng); };
    std::uniform_int_distribution<int> cls(1, spec.n_classes);
    const int L = spec.length;

    std::vector<Target> targets;
    for (int i = 0; i < spec.n_targets; ++i) {
        Target t{};
        t.w = uniform(spec.size_min, spec.size_max);
        t.h = uniform(spec.size_min, spec.size_max);
        t.class_id = cls(rng);
        const Real theta = uniform(0, kTwoPi);
        Real speed = uniform(spec.speed_min, spec.speed_max);
        if (spec.motion == MotionModel::Linear) {
            // The whole straight path has to stay on the canvas.
            const Real span_x = (W - t.w) / (L - 1), span_y = (H - t.h) / (L - 1);
            const Real limit = std::min(std::abs(std::cos(theta)) > 0 ? span_x / std::abs(std::cos(theta)) : speed,
                                        std::abs(std::sin(theta)) > 0 ? span_y / std::abs(std::sin(theta)) : speed);
            speed = std::min(speed, 0.9 * limit);
        }
        t.vx = speed * std::cos(theta);
        t.vy = speed * std::sin(theta);

        auto feasible = [&](const Target& c) {
            const Real x_end = c.cx + c.vx * (L - 1), y_end = c.cy + c.vy * (L - 1);
            auto inside = [&](Real x, Real y) {
                return x - c.w / 2 >= 0 && x + c.w / 2 <= W && y - c.h / 2 >= 0 && y + c.h / 2 <= H;
            };
            if (!inside(c.cx, c.cy)) return false;
            return spec.motion != MotionModel::Linear || inside(x_end, y_end);
        };

        const bool companion = !targets.empty() && u01(rng) < spec.density_target;
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            if (companion) {
                const auto& p = targets[static_cast<std::size_t>(uniform(0, static_cast<Real>(targets.size())))];
                const Real d = uniform(0.3, 0.45) * (body(p) + body(t)) / 2, a = uniform(0, kTwoPi);
                t.cx = p.cx + d * std::cos(a);
                t.cy = p.cy + d * std::sin(a);
                t.vx = p.vx;
                t.vy = p.vy;
                placed = feasible(t);
            } else {
                t.cx = uniform(t.w / 2, W - t.w / 2);
                t.cy = uniform(t.h / 2, H - t.h / 2);
                placed = feasible(t) &&
                         std::none_of(targets.begin(), targets.end(), [&](const Target& o) { return too_close(o, t); });
            }
        }
        if (!placed) throw Error(ErrorKind::OvercrowdedSpec, "could not place target " + std::to_string(i + 1));
        targets.push_back(t);
    }

    SyntheticSequence seq;
    seq.meta = {spec.name, spec.fps, spec.width, spec.height, L};
    for (int id = 1; id <= spec.n_targets; ++id) seq.textures.push_back(make_texture(spec.seed, id));

    std::normal_distribution<Real> normal(0, 1);
    std::mt19937_64 det_rng(spec.seed ^ 0xD1B54A32D192ED03ULL);
    std::vector<Real> cx(targets.size()), cy(targets.size()), vx(targets.size()), vy(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
        cx[k] = targets[k].cx;
        cy[k] = targets[k].cy;
        vx[k] = targets[k].vx;
        vy[k] = targets[k].vy;
    }
    for (int f = 1; f <= L; ++f) {
        std::vector<TrackRow> rows;
        for (std::size_t k = 0; k < targets.size(); ++k) {
            const auto& t = targets[k];
            // Noise is drawn whatever the motion model so that scenarios differing only in
            // sigma or jitter share their random stream.
            const Real zx = normal(rng), zy = normal(rng), zs = normal(rng);
            if (f > 1) {
                switch (spec.motion) {
                    case MotionModel::Linear:
                        cx[k] = t.cx + t.vx * (f - 1);
                        cy[k] = t.cy + t.vy * (f - 1);
                        break;
                    case MotionModel::Bounce:
                        cx[k] += vx[k];
                        cy[k] += vy[k];
                        break;
                    case MotionModel::RandomWalk:
                        cx[k] += vx[k] + spec.sigma * zx;
                        cy[k] += vy[k] + spec.sigma * zy;
                        break;
                }
                if (spec.motion != MotionModel::Linear) {
                    reflect(cx[k], vx[k], t.w / 2, W - t.w / 2);
                    reflect(cy[k], vy[k], t.h / 2, H - t.h / 2);
                }
            }
            Real w = t.w, h = t.h;
            if (spec.shape_jitter > 0) {
                const Real a = std::exp(spec.shape_jitter * zs);
                w = std::min(W, t.w * std::sqrt(a));
                h = std::min(H, t.h / std::sqrt(a));
            }
            TrackRow r;
            r.frame = f;
            r.id = static_cast<int>(k) + 1;
            r.box = BBox::from_center(std::clamp(cx[k], w / 2, W - w / 2), std::clamp(cy[k], h / 2, H - h / 2), w, h);
            r.score = 1;
            r.class_id = t.class_id;
            rows.push_back(r);
        }
        seq.frames.push_back(render_frame(spec.height, spec.width, rows, seq.textures));
        for (const auto& r : rows) {
            TrackRow d = r;
            d.id = -1;
            d.score = spec.det_score;
            if (spec.det_jitter > 0) {
                d.box.x += spec.det_jitter * normal(det_rng);
                d.box.y += spec.det_jitter * normal(det_rng);
                d.box.w = std::max(2.0, d.box.w + spec.det_jitter * normal(det_rng));
                d.box.h = std::max(2.0, d.box.h + spec.det_jitter * normal(det_rng));
            }
            seq.dets.push_back(d);
        }
        seq.gt.insert(seq.gt.end(), rows.begin(), rows.end());
    }
    return seq;
}

SyntheticSequence downsample_fps(const SyntheticSequence& seq, int k) {
    if (k < 1) throw Error(ErrorKind::InvalidConfig, "downsampling factor must be >= 1");
    SyntheticSequence out;
    out.meta = seq.meta;
    out.meta.fps = seq.meta.fps / k;
    out.textures = seq.textures;
    out.gt = downsample_rows(seq.gt, k);
    out.dets = downsample_rows(seq.dets, k);
    for (std::size_t f = 0; f < seq.frames.size(); f += static_cast<std::size_t>(k)) out.frames.push_back(seq.frames[f]);
    out.meta.length = downsampled_length(seq.meta.length, k);
    return out;
}

std::vector<TrackRow> inject_class_noise(std::vector<TrackRow> rows, int n_classes, Real rate, std::uint64_t seed) {
    if (n_classes < 2) return rows;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> u01(0, 1);
    std::uniform_int_distribution<int> other(1, n_classes - 1);
    for (auto& r : rows) {
        const bool flip = u01(rng) < rate;
        const int shift = other(rng);
        if (flip) r.class_id = (r.class_id - 1 + shift) % n_classes + 1;
    }
    return rows;
}

void write_sequence(const SyntheticSequence& seq, const fs::path& dir, const WriteOptions& opts) {
    write_mot_file(dir / "gt" / "gt.txt", seq.gt);
    write_mot_file(dir / "det" / "det.txt", seq.dets);
    atomic_write(dir / "seqinfo.ini", format_seqinfo(seq.meta));
    char name[32];
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        if (opts.images) {
            std::snprintf(name, sizeof name, "%06zu.pgm", f + 1);
            save_pgm(dir / "img" / name, seq.frames[f]);
        }
        if (opts.features) {
            std::snprintf(name, sizeof name, "%06zu.p2if", f + 1);
            save_features(dir / "features" / name, handcrafted_features(seq.frames[f]));
        }
    }
}

}  // namespace reltrack
