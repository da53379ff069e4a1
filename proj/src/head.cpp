#include <reltrack/head.hpp>
#include <reltrack/error.hpp>
#include <reltrack/fs.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>
#include <string>

namespace reltrack {

namespace {

constexpr char kWeightsMagic[4] = {'P', '2', 'I', 'W'};

void check_box(const BBox& b, const char* what) {
    if (!(b.w > 0 && b.h > 0)) throw Error(ErrorKind::DegenerateBox, std::string(what) + " box has non-positive size");
}

}  // namespace

HeadParams HeadParams::zeros(int v, int c, int hidden) {
    if (v < 1 || c < 0 || hidden < 1) throw Error(ErrorKind::InvalidConfig, "invalid head dimensions");
    HeadParams p;
    p.v = v;
    p.c = c;
    p.hidden = hidden;
    p.conv_w.assign(static_cast<std::size_t>(hidden) * (c + 2) * v * v, 0);
    p.conv_b.assign(static_cast<std::size_t>(hidden), 0);
    p.mlp1_w.assign(static_cast<std::size_t>(p.hidden2()) * hidden, 0);
    p.mlp1_b.assign(static_cast<std::size_t>(p.hidden2()), 0);
    p.mlp2_w.assign(static_cast<std::size_t>(p.hidden2()), 0);
    p.mlp2_b = 0;
    return p;
}

HeadParams HeadParams::random(int v, int c, int hidden, std::uint64_t seed) {
    HeadParams p = HeadParams::zeros(v, c, hidden);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::vector<Real>& w, int fan_in) {
        const Real bound = 1.0 / std::sqrt(static_cast<Real>(fan_in));
        std::uniform_real_distribution<Real> dist(-bound, bound);
        for (auto& x : w) x = dist(rng);
    };
    fill(p.conv_w, (c + 2) * v * v);
    fill(p.conv_b, (c + 2) * v * v);
    fill(p.mlp1_w, hidden);
    fill(p.mlp1_b, hidden);
    fill(p.mlp2_w, p.hidden2());
    std::vector<Real> b2(1);
    fill(b2, p.hidden2());
    p.mlp2_b = b2[0];
    return p;
}

std::size_t HeadParams::size() const {
    return conv_w.size() + conv_b.size() + mlp1_w.size() + mlp1_b.size() + mlp2_w.size() + 1;
}

std::vector<Real> HeadParams::flatten() const {
    std::vector<Real> out;
    out.reserve(size());
    for (const auto* part : {&conv_w, &conv_b, &mlp1_w, &mlp1_b, &mlp2_w}) out.insert(out.end(), part->begin(), part->end());
    out.push_back(mlp2_b);
    return out;
}

void HeadParams::assign(std::span<const Real> flat) {
    if (flat.size() != size()) throw Error(ErrorKind::DimMismatch, "parameter vector has wrong length");
    auto it = flat.begin();
    for (auto* part : {&conv_w, &conv_b, &mlp1_w, &mlp1_b, &mlp2_w}) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(part->size()), part->begin());
        it += static_cast<std::ptrdiff_t>(part->size());
    }
    mlp2_b = *it;
}

PartRelation roi_align(const RelationMap& map, const BBox& roi, int v) {
    check_box(roi, "RoI");
    if (v < 1) throw Error(ErrorKind::InvalidConfig, "RoIAlign size must be >= 1");
    PartRelation out{v, map.c, std::vector<Real>(static_cast<std::size_t>(v) * v * map.c)};
    Real* dst = out.data.data();
    for (int a = 0; a < v; ++a) {
        // Cell (i, j) covers [j, j+1) x [i, i+1); its sample sits at the cell center.
        const Real row = std::clamp<Real>(roi.y + (a + 0.5) * roi.h / v - 0.5, 0, map.h - 1);
        const int r0 = static_cast<int>(std::floor(row));
        const int r1 = std::min(r0 + 1, map.h - 1);
        const Real fr = row - r0;
        for (int b = 0; b < v; ++b) {
            const Real col = std::clamp<Real>(roi.x + (b + 0.5) * roi.w / v - 0.5, 0, map.w - 1);
            const int c0 = static_cast<int>(std::floor(col));
            const int c1 = std::min(c0 + 1, map.w - 1);
            const Real fc = col - c0;
            const Real* p00 = map.cell(r0, c0);
            const Real* p01 = map.cell(r0, c1);
            const Real* p10 = map.cell(r1, c0);
            const Real* p11 = map.cell(r1, c1);
            for (int ch = 0; ch < map.c; ++ch) {
                const Real top = p00[ch] * (1 - fc) + p01[ch] * fc;
                const Real bottom = p10[ch] * (1 - fc) + p11[ch] * fc;
                *dst++ = top * (1 - fr) + bottom * fr;
            }
        }
    }
    return out;
}

PartOffsetGrid offset_grid(const BBox& det, const BBox& trk, int v, Real stride) {
    check_box(det, "detection");
    check_box(trk, "tracklet");
    PartOffsetGrid out{v, std::vector<Real>(static_cast<std::size_t>(v) * v * 2)};
    for (int a = 0; a < v; ++a) {
        for (int b = 0; b < v; ++b) {
            const Real det_x = det.x + (b + 0.5) * det.w / v;
            const Real det_y = det.y + (a + 0.5) * det.h / v;
            const Real trk_x = trk.x + (b + 0.5) * trk.w / v;
            const Real trk_y = trk.y + (a + 0.5) * trk.h / v;
            const std::size_t k = (static_cast<std::size_t>(a) * v + b) * 2;
            out.data[k] = (det_x - trk_x) / stride;
            out.data[k + 1] = (det_y - trk_y) / stride;
        }
    }
    return out;
}

std::vector<Real> relation_response(const PartRelation& part, const HeadParams& params) {
    if (part.v != params.v || part.c != params.c) {
        throw Error(ErrorKind::DimMismatch, "part relation " + std::to_string(part.v) + "x" + std::to_string(part.c) +
                                                " does not match head " + std::to_string(params.v) + "x" +
                                                std::to_string(params.c));
    }
    const int v = params.v;
    std::vector<Real> out(static_cast<std::size_t>(params.hidden), 0);
    for (int o = 0; o < params.hidden; ++o) {
        Real acc = 0;
        for (int ch = 0; ch < params.c; ++ch) {
            const Real* w = &params.conv_w[params.conv_index(o, ch, 0, 0)];
            for (int a = 0; a < v; ++a)
                for (int b = 0; b < v; ++b) acc += w[a * v + b] * part.at(a, b, ch);
        }
        out[static_cast<std::size_t>(o)] = acc;
    }
    return out;
}

Real score_from_response(std::span<const Real> response, const PartOffsetGrid& off, const HeadParams& params) {
    if (off.v != params.v || response.size() != static_cast<std::size_t>(params.hidden)) {
        throw Error(ErrorKind::DimMismatch, "offset grid does not match head");
    }
    const int v = params.v;
    std::vector<Real> h1(static_cast<std::size_t>(params.hidden));
    for (int o = 0; o < params.hidden; ++o) {
        Real z = response[static_cast<std::size_t>(o)] + params.conv_b[static_cast<std::size_t>(o)];
        const Real* wx = &params.conv_w[params.conv_index(o, params.c, 0, 0)];
        const Real* wy = &params.conv_w[params.conv_index(o, params.c + 1, 0, 0)];
        for (int a = 0; a < v; ++a)
            for (int b = 0; b < v; ++b) z += wx[a * v + b] * off.dx(a, b) + wy[a * v + b] * off.dy(a, b);
        h1[static_cast<std::size_t>(o)] = std::max<Real>(0, z);
    }
    Real out = params.mlp2_b;
    const int h2n = params.hidden2();
    for (int q = 0; q < h2n; ++q) {
        Real z = params.mlp1_b[static_cast<std::size_t>(q)];
        const Real* w = &params.mlp1_w[static_cast<std::size_t>(q) * params.hidden];
        for (int o = 0; o < params.hidden; ++o) z += w[o] * h1[static_cast<std::size_t>(o)];
        out += params.mlp2_w[static_cast<std::size_t>(q)] * std::max<Real>(0, z);
    }
    return sigmoid(out);
}

Real score_pair(const PartRelation& part, const PartOffsetGrid& off, const HeadParams& params) {
    const auto response = relation_response(part, params);
    return score_from_response(response, off, params);
}

BBox reference_box(const Tracklet& trk) {
    if (trk.state == TrackState::Active && !trk.history.empty()) return trk.last().box;
    return trk.kalman.box();
}

AffinityMatrix build_affinity(const RelationMap& map, std::span<const BBox> tracklet_boxes,
                              std::span<const Detection> dets, const HeadParams& params, Real stride) {
    AffinityMatrix aff{static_cast<int>(dets.size()), static_cast<int>(tracklet_boxes.size()), {}};
    aff.scores.assign(static_cast<std::size_t>(aff.n) * aff.m, 0);
    for (int j = 0; j < aff.m; ++j) {
        const BBox& tb = tracklet_boxes[static_cast<std::size_t>(j)];
        const auto part = roi_align(map, grid_box(tb, stride), params.v);
        const auto response = relation_response(part, params);
        for (int i = 0; i < aff.n; ++i) {
            const auto off = offset_grid(dets[static_cast<std::size_t>(i)].box, tb, params.v, stride);
            aff.at(i, j) = score_from_response(response, off, params);
        }
    }
    return aff;
}

AffinityMatrix build_affinity(const RelationMap& map, std::span<const Tracklet> trks, std::span<const Detection> dets,
                              const HeadParams& params, Real stride) {
    std::vector<BBox> boxes;
    boxes.reserve(trks.size());
    for (const auto& t : trks) boxes.push_back(reference_box(t));
    return build_affinity(map, std::span<const BBox>(boxes), dets, params, stride);
}

HeadParams load_weights(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::size_t pos = 0;
    auto take = [&](void* dst, std::size_t n) {
        if (pos + n > bytes.size()) throw Error(ErrorKind::DimMismatch, path.string() + ": truncated weights file");
        std::memcpy(dst, bytes.data() + pos, n);
        pos += n;
    };
    char magic[4];
    take(magic, 4);
    if (std::memcmp(magic, kWeightsMagic, 4) != 0) throw Error(ErrorKind::BadMagic, path.string() + ": not a P2IW file");
    std::uint32_t hdr[4];
    take(hdr, sizeof hdr);
    if (hdr[0] != 1) throw Error(ErrorKind::BadMagic, path.string() + ": unsupported version");
    HeadParams p = HeadParams::zeros(static_cast<int>(hdr[1]), static_cast<int>(hdr[2]), static_cast<int>(hdr[3]));
    std::vector<Real> flat(p.size());
    for (auto& x : flat) {
        float f;
        take(&f, sizeof f);
        if (!std::isfinite(f)) throw Error(ErrorKind::NonFiniteValue, path.string() + ": non-finite weight");
        x = f;
    }
    if (pos != bytes.size()) throw Error(ErrorKind::DimMismatch, path.string() + ": trailing bytes after weights");
    p.assign(flat);
    return p;
}

void save_weights(const std::filesystem::path& path, const HeadParams& params) {
    std::string bytes(kWeightsMagic, 4);
    const std::uint32_t hdr[4] = {1, static_cast<std::uint32_t>(params.v), static_cast<std::uint32_t>(params.c),
                                  static_cast<std::uint32_t>(params.hidden)};
    bytes.append(reinterpret_cast<const char*>(hdr), sizeof hdr);
    for (Real x : params.flatten()) {
        const float f = static_cast<float>(x);
        bytes.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
    atomic_write(path, bytes);
}

}  // namespace reltrack
