// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <reltrack/correlation.hpp>
#include <reltrack/error.hpp>
#include <reltrack/eval.hpp>
#include <reltrack/features.hpp>
#include <reltrack/fs.hpp>
#include <reltrack/hungarian.hpp>
#include <reltrack/mot_io.hpp>
#include <reltrack/pipeline.hpp>
#include <reltrack/profile.hpp>
#include <reltrack/pyramid.hpp>
#include <reltrack/synth.hpp>
#include <reltrack/tracker.hpp>
#include <reltrack/train.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

using namespace reltrack;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
    std::printf("AC%-2d %s  %-28s %s\n", id, ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

template <class Fn>
void criterion(int id, const char* name, Fn&& fn) {
    try {
        std::string detail;
        const bool ok = fn(detail);
        report(id, name, ok, detail);
    } catch (const std::exception& e) {
        report(id, name, false, std::string("exception: ") + e.what());
    }
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---- 1: attribute maps ----------------------------------------------------

bool ac1(std::string& detail) {
    const auto t0 = Clock::now();
    const std::array<std::array<Real, 5>, 5> raw{{
        {1.76, 1.80, 0.90, 7.11, 5},
        {3.10, 0.28, 0.48, 2.06, 25},
        {1.19, 0.03, 2.77, 7.51, 30},
        {0.57, 0.02, 3.30, 8.39, 30},
        {3.44, 1.34, 1.75, 0.00, 30},
    }};
    const std::array<std::array<Real, 5>, 5> table{{
        {0.41, 1.00, 0.15, 0.85, 1.00},
        {0.88, 0.06, 0.00, 0.25, 0.20},
        {0.22, 0.00, 0.81, 0.90, 0.00},
        {0.00, 0.00, 1.00, 1.00, 0.00},
        {1.00, 0.55, 0.45, 0.00, 0.00},
    }};
    std::vector<AttributeVector> in;
    for (const auto& r : raw) in.push_back({r[0], r[1], r[2], r[3], r[4]});
    const auto maps = normalize(in).maps;
    const double elapsed = seconds_since(t0);
    Real worst = 0;
    for (std::size_t d = 0; d < 5; ++d)
        for (std::size_t a : {0u, 2u, 3u, 4u}) worst = std::max(worst, std::abs(maps[d][a] - table[d][a]));
    detail = "max |err| " + fmt("%.4f", worst) + " (tol 0.01, variation column excluded), " + fmt("%.2e s", elapsed);
    return worst <= 0.01 && elapsed < 1.0;
}

// ---- 2: channel count -----------------------------------------------------

bool ac2(std::string& detail) {
    RelationConfig rel;
    rel.levels = 3;
    rel.radius = 4;
    FeatureMap a(8, 8, 4), b(8, 8, 4);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(-1, 1);
    for (auto& x : a.data) x = u(rng);
    for (auto& x : b.data) x = u(rng);
    const auto map = compute_relation_map(a, b, rel);
    const auto samples = lookup(build_pyramid(build_volume(a, b), 3), 2, 3, 4);
    const int formula = (3 + 1) * (2 * 4 + 1) * (2 * 4 + 1);
    detail = "map.c=" + std::to_string(map.c) + " lookup=" + std::to_string(samples.size()) + " formula=" +
             std::to_string(formula);
    return formula == 324 && map.c == 324 && rel.channels() == 324 && samples.size() == 324u &&
           map.data.size() == static_cast<std::size_t>(8 * 8 * 324);
}

// ---- 3: correlation oracle ------------------------------------------------

bool ac3(std::string& detail) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(1, 8);
    std::uniform_real_distribution<float> u(-2, 2);
    int mismatches = 0;
    std::size_t entries = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int d = dim(rng);
        FeatureMap a(dim(rng), dim(rng), d), b(dim(rng), dim(rng), d);
        for (auto& x : a.data) x = u(rng);
        for (auto& x : b.data) x = u(rng);
        for (auto scale : {CorrelationScale::Raw, CorrelationScale::InvSqrtD}) {
            const auto vol = build_volume(a, b, scale);
            const Real norm = scale == CorrelationScale::Raw ? 1.0 : 1.0 / std::sqrt(static_cast<Real>(d));
            for (int i = 0; i < a.h; ++i)
                for (int j = 0; j < a.w; ++j)
                    for (int k = 0; k < b.h; ++k)
                        for (int l = 0; l < b.w; ++l) {
                            Real dot = 0;
                            for (int c = 0; c < d; ++c)
                                dot += static_cast<Real>(a.at(i, j, c)) * static_cast<Real>(b.at(k, l, c));
                            const Real want = scale == CorrelationScale::Raw ? dot : dot * norm;
                            mismatches += vol.at(i, j, k, l) != want;
                            ++entries;
                        }
        }
    }
    detail = std::to_string(entries) + " entries over 20 pairs x 2 scales, " + std::to_string(mismatches) + " mismatches";
    return mismatches == 0;
}

// ---- 4: pyramid and lookup oracles ---------------------------------------

bool ac4(std::string& detail) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<Real> u(-1, 1);
    Real pool_err = 0;
    for (auto [h2, w2] : {std::pair{8, 8}, std::pair{16, 12}, std::pair{9, 11}}) {
        CorrelationVolume v(3, 2, h2, w2);
        for (auto& x : v.data) x = u(rng);
        const auto pyr = build_pyramid(v, 2);
        CorrelationVolume ref = v;
        for (int s = 1; s <= 2; ++s) {
            CorrelationVolume next(ref.h1, ref.w1, (ref.h2 + 1) / 2, (ref.w2 + 1) / 2);
            for (int i = 0; i < ref.h1; ++i)
                for (int j = 0; j < ref.w1; ++j)
                    for (int k = 0; k < next.h2; ++k)
                        for (int l = 0; l < next.w2; ++l) {
                            const int k1 = std::min(2 * k + 1, ref.h2 - 1), l1 = std::min(2 * l + 1, ref.w2 - 1);
                            next.at(i, j, k, l) = (ref.at(i, j, 2 * k, 2 * l) + ref.at(i, j, 2 * k, l1) +
                                                   ref.at(i, j, k1, 2 * l) + ref.at(i, j, k1, l1)) /
                                                  4;
                        }
            ref = next;
            const auto& got = pyr.levels[static_cast<std::size_t>(s)];
            if (got.data.size() != ref.data.size()) return false;
            for (std::size_t n = 0; n < ref.data.size(); ++n) pool_err = std::max(pool_err, std::abs(got.data[n] - ref.data[n]));
        }
    }

    // Linear ramp over the target dims; bilinear interpolation of a ramp is the ramp
    // itself, evaluated at the border-clamped point.
    const int h1 = 6, w1 = 6, h2 = 16, w2 = 16, S = 3, R = 3;
    CorrelationVolume ramp(h1, w1, h2, w2);
    for (int i = 0; i < h1; ++i)
        for (int j = 0; j < w1; ++j)
            for (int k = 0; k < h2; ++k)
                for (int l = 0; l < w2; ++l) ramp.at(i, j, k, l) = 0.3 * k - 0.7 * l + 0.05 * i - 0.2 * j;
    const auto pyr = build_pyramid(ramp, S);
    Real lookup_err = 0;
    for (int i = 0; i < h1; ++i)
        for (int j = 0; j < w1; ++j) {
            const auto got = lookup(pyr, i, j, R);
            std::size_t n = 0;
            for (int s = 0; s <= S; ++s) {
                const auto& lev = pyr.levels[static_cast<std::size_t>(s)];
                const Real f = std::ldexp(1.0, -s);
                // Pooled ramp: level s value at (k, l) is the mean of its 2^s x 2^s source block.
                auto level_ramp = [&](Real k, Real l) {
                    const Real kc = std::clamp<Real>(k, 0, lev.h2 - 1), lc = std::clamp<Real>(l, 0, lev.w2 - 1);
                    const Real off = (std::ldexp(1.0, s) - 1) / 2;
                    return 0.3 * (kc / f + off) - 0.7 * (lc / f + off) + 0.05 * i - 0.2 * j;
                };
                for (int dy = -R; dy <= R; ++dy)
                    for (int dx = -R; dx <= R; ++dx)
                        lookup_err = std::max(lookup_err, std::abs(got[n++] - level_ramp(i * f + dy, j * f + dx)));
            }
        }
    detail = "pool max err " + fmt("%.1e", pool_err) + ", lookup max err " + fmt("%.1e", lookup_err) + " (tol 1e-6)";
    return pool_err < 1e-6 && lookup_err < 1e-6;
}

// ---- 5: gradient gate -----------------------------------------------------

bool ac5(std::string& detail) {
    const auto rep = gradient_check(10, 7, 1e-5, 1e-6);
    const int code = std::system((std::string(RELTRACK_CLI) + " gradcheck > /dev/null").c_str());
    const int exit_code = code == -1 ? -1 : WEXITSTATUS(code);
    detail = std::to_string(rep.parameters_checked) + " params, max rel err " + fmt("%.2e", rep.max_rel_error) +
             " (tol 1e-6), gradcheck exit " + std::to_string(exit_code);
    return rep.passed && rep.max_rel_error < 1e-6 && exit_code == 0;
}

// ---- 6: assignment oracle -------------------------------------------------

bool ac6(std::string& detail) {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> dim(1, 5);
    std::uniform_real_distribution<Real> u(-10, 10);
    int bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dim(rng), m = dim(rng);
        CostMatrix c(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) c(i, j) = u(rng);
        // Every injection of the smaller side, summed in row order.
        Real best = std::numeric_limits<Real>::infinity();
        std::vector<int> perm(static_cast<std::size_t>(std::max(n, m)));
        std::iota(perm.begin(), perm.end(), 0);
        do {
            Real s = 0;
            if (n <= m) {
                for (int i = 0; i < n; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
            } else {
                std::vector<std::pair<int, int>> pairs;
                for (int j = 0; j < m; ++j) pairs.emplace_back(perm[static_cast<std::size_t>(j)], j);
                std::sort(pairs.begin(), pairs.end());
                for (auto [i, j] : pairs) s += c(i, j);
            }
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        bad += hungarian(c).cost != best;
    }
    detail = "100 random matrices n,m<=5, " + std::to_string(bad) + " cost mismatches (exact)";
    return bad == 0;
}

// ---- 7: metric identities -------------------------------------------------

bool ac7(std::string& detail) {
    std::vector<TrackRow> gt, swap;
    for (int f = 1; f <= 10; ++f) {
        gt.push_back({f, 1, {10.0 + f, 10, 20, 40}, 1, 1, 1});
        gt.push_back({f, 2, {200.0 - f, 60, 20, 40}, 1, 1, 1});
    }
    swap = gt;
    for (auto& r : swap)
        if (r.frame >= 6) r.id = 3 - r.id;
    std::vector<TrackRow> single, split;
    for (int f = 1; f <= 10; ++f) single.push_back({f, 1, {5.0 * f, 0, 10, 10}, 1, 1, 1});
    split = single;
    for (auto& r : split)
        if (r.frame > 5) r.id = 2;

    const auto same = evaluate(gt, gt);
    const auto empty = evaluate(gt, {});
    const Real swap_mota = clear_mot(gt, swap).mota;
    const Real split_idf1 = idf1(single, split).idf1;
    const bool ok = same.mota() == 1.0 && same.idf1() == 1.0 && same.hota() == 1.0 && empty.mota() == 0.0 &&
                    empty.idf1() == 0.0 && empty.hota() == 0.0 && swap_mota == 0.9 && split_idf1 == 0.5;
    std::ostringstream s;
    s << "identity " << same.mota() << "/" << same.idf1() << "/" << same.hota() << ", empty " << empty.mota() << "/"
      << empty.idf1() << "/" << empty.hota() << ", swap MOTA " << swap_mota << ", split IDF1 " << split_idf1;
    detail = s.str();
    return ok;
}

// ---- 8 and 9: trained relation tracker on synthetic scenarios ------------

ScenarioSpec linear_spec(std::uint64_t seed) {
    ScenarioSpec s;
    s.n_targets = 8;
    s.length = 40;
    s.width = s.height = 256;
    s.size_min = 20;
    s.size_max = 32;
    s.speed_min = 1;
    s.speed_max = 4;
    s.seed = seed;
    return s;
}

ScenarioSpec walk_spec(std::uint64_t seed) {
    ScenarioSpec s;
    s.n_targets = 8;
    s.length = 80;
    s.width = s.height = 256;
    s.size_min = 16;
    s.size_max = 24;
    s.motion = MotionModel::RandomWalk;
    s.sigma = 2;
    s.speed_min = 1;
    s.speed_max = 3;
    s.seed = seed;
    return s;
}

struct Prepared {
    std::vector<TrackRow> gt;
    std::vector<TrackRow> dets;
    int frames = 0;
    FeatureProvider features;
};

Prepared prepare(const SyntheticSequence& seq, int k) {
    return {downsample_rows(seq.gt, k), downsample_rows(seq.dets, k), downsampled_length(seq.meta.length, k),
            FeatureProvider::handcrafted(seq.frames).with_frame_step(k)};
}

HeadParams train_head() {
    std::vector<TrainingSequence> seqs;
    for (const auto& seq : {generate(linear_spec(11)), generate(walk_spec(21))})
        for (int k : {1, 4}) {
            auto p = prepare(seq, k);
            seqs.push_back({p.gt, p.frames, p.features});
        }
    LossConfig loss;
    loss.epochs = 10;
    return fit(seqs, RelationConfig{}, 2, 32, loss).params;
}

TrackResult run_relation(const Prepared& p, const HeadParams& head, const TrackOptions& opts) {
    return track_sequence(detections_by_frame(p.dets), p.frames, p.features, head, opts);
}

bool ac8(const HeadParams& head, double train_seconds, std::string& detail) {
    const auto t0 = Clock::now();
    const auto lin = prepare(generate(linear_spec(12)), 1);
    const Real lin_idf1 = idf1(lin.gt, run_relation(lin, head, {}).rows).idf1;

    const auto walk = prepare(generate(walk_spec(22)), 4);
    const Real rel_idf1 = idf1(walk.gt, run_relation(walk, head, {}).rows).idf1;
    const Real base_idf1 =
        idf1(walk.gt, track_sequence_iou(detections_by_frame(walk.dets), walk.frames, AssocConfig{}, 0.3,
                                         ClassCorrection::EndOfSequence)
                          .rows)
            .idf1;
    const double total = train_seconds + seconds_since(t0);
    std::ostringstream s;
    s.precision(4);
    s << "linear IDF1 " << lin_idf1 << " (>=0.95); walk x4 relation " << rel_idf1 << " vs baseline " << base_idf1
      << " (gap >=0.10); " << std::fixed << std::setprecision(1) << total << " s";
    detail = s.str();
    return lin_idf1 >= 0.95 && rel_idf1 - base_idf1 >= 0.10 && total < 300;
}

int class_frags(const std::vector<TrackRow>& gt, const std::vector<TrackRow>& rows) {
    int total = 0;
    for (const auto& [cls, m] : evaluate(gt, rows, {Metric::Clear}).per_class) total += m.clear.frag;
    return total;
}

bool ac9(const HeadParams& head, std::string& detail) {
    constexpr int car = 3, bus = 6;
    Tracklet majority, tie;
    majority.append(1, {0, 0, 1, 1}, car, 1);
    majority.append(2, {0, 0, 1, 1}, car, 1);
    majority.append(3, {0, 0, 1, 1}, bus, 1);
    tie.append(1, {0, 0, 1, 1}, bus, 1);
    tie.append(2, {0, 0, 1, 1}, car, 1);
    const bool toys = correct_classes(majority) == std::vector<int>{car, car, car} &&
                      correct_classes(tie) == std::vector<int>{car, car};

    auto spec = linear_spec(31);
    spec.n_classes = 3;
    const auto seq = generate(spec);
    auto p = prepare(seq, 1);
    p.dets = inject_class_noise(p.dets, spec.n_classes, 0.10, 77);

    TrackOptions agnostic;
    agnostic.correction = ClassCorrection::EndOfSequence;
    TrackOptions restricted = agnostic;
    restricted.assoc.class_restricted = true;
    const int frag_agnostic = class_frags(p.gt, run_relation(p, head, agnostic).rows);
    const int frag_restricted = class_frags(p.gt, run_relation(p, head, restricted).rows);
    detail = std::string("toys ") + (toys ? "ok" : "wrong") + "; per-class Frag agnostic+correction " +
             std::to_string(frag_agnostic) + " vs class-restricted " + std::to_string(frag_restricted);
    return toys && frag_agnostic < frag_restricted;
}

// ---- 10: CLI determinism --------------------------------------------------

std::string snapshot(const fs::path& p) {
    if (!fs::exists(p)) return "<missing " + p.string() + ">";
    if (!fs::is_directory(p)) return read_file(p);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string out;
    for (const auto& f : files) out += fs::relative(f, p).string() + '\n' + read_file(f);
    return out;
}

bool ac10(std::string& detail) {
    const fs::path root = fs::temp_directory_path() / ("reltrack-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    atomic_write(root / "spec.txt",
                 "name = det\nn_targets = 4\nlength = 16\nwidth = 128\nheight = 128\nsize_min = 20\nsize_max = 28\n"
                 "motion = random_walk\nsigma = 1\nseed = 9\n");
    atomic_write(root / "raw.csv", "a,1,2,3,4,30\nb,2,1,0,5,10\nc,0.5,0.2,1,0,25\n");
    const std::string cli = RELTRACK_CLI;
    const std::string r = root.string();

    struct Command {
        std::string name;
        std::function<std::string(const std::string&)> args;  // run suffix -> arguments
        std::function<std::vector<std::string>(const std::string&)> outputs;
    };
    const std::vector<Command> commands{
        {"synth", [&](const std::string& x) { return "synth --spec " + r + "/spec.txt --out " + r + "/seq" + x + " --features"; },
         [&](const std::string& x) { return std::vector<std::string>{r + "/seq" + x}; }},
        {"train",
         [&](const std::string& x) {
             return "train " + r + "/seq1 --out " + r + "/w" + x + ".p2iw --loss-csv " + r + "/loss" + x +
                    ".csv --set epochs=2 --set hidden=8 --set seed=5";
         },
         [&](const std::string& x) { return std::vector<std::string>{r + "/w" + x + ".p2iw", r + "/loss" + x + ".csv"}; }},
        {"track",
         [&](const std::string& x) {
             return "track --det " + r + "/seq1/det/det.txt --features " + r + "/seq1/features --weights " + r +
                    "/w1.p2iw --out " + r + "/res" + x + ".txt";
         },
         [&](const std::string& x) { return std::vector<std::string>{r + "/res" + x + ".txt"}; }},
        {"eval",
         [&](const std::string& x) {
             return "eval --gt " + r + "/seq1/gt/gt.txt --res " + r + "/res1.txt --out " + r + "/eval" + x + ".json";
         },
         [&](const std::string& x) { return std::vector<std::string>{r + "/eval" + x + ".json"}; }},
        {"profile",
         [&](const std::string& x) {
             return "profile --raw-fixtures " + r + "/raw.csv --out " + r + "/prof" + x + ".json --csv " + r + "/prof" +
                    x + ".csv";
         },
         [&](const std::string& x) { return std::vector<std::string>{r + "/prof" + x + ".json", r + "/prof" + x + ".csv"}; }},
        {"gradcheck", [](const std::string&) { return std::string("gradcheck"); },
         [](const std::string&) { return std::vector<std::string>{}; }},
    };

    std::vector<std::string> differing;
    for (const auto& c : commands) {
        std::string captured[2];
        for (int run = 0; run < 2; ++run) {
            const std::string x = std::to_string(run + 1);
            const fs::path out = root / (c.name + x + ".stdout");
            const int code = std::system((cli + " " + c.args(x) + " > " + out.string() + " 2>/dev/null").c_str());
            if (code != 0) {
                differing.push_back(c.name + "(exit)");
                break;
            }
            captured[run] = read_file(out);
            for (const auto& f : c.outputs(x)) captured[run] += snapshot(f);
        }
        if (captured[0] != captured[1] || captured[0].empty()) differing.push_back(c.name);
    }
    fs::remove_all(root);
    detail = differing.empty() ? "synth, train, track, eval, profile, gradcheck byte-identical across two runs"
                               : "differs: " + [&] {
                                     std::string s;
                                     for (const auto& d : differing) s += d + " ";
                                     return s;
                                 }();
    return differing.empty();
}

}  // namespace

int main() {
    criterion(1, "attribute-map reproduction", ac1);
    criterion(2, "channel-count identity", ac2);
    criterion(3, "correlation oracle", ac3);
    criterion(4, "pyramid/lookup oracles", ac4);
    criterion(5, "gradient gate", ac5);
    criterion(6, "assignment oracle", ac6);
    criterion(7, "metric identities", ac7);

    HeadParams head;
    double train_seconds = 0;
    std::string train_error;
    try {
        const auto t0 = Clock::now();
        head = train_head();
        train_seconds = seconds_since(t0);
    } catch (const std::exception& e) {
        train_error = e.what();
    }
    if (train_error.empty()) {
        criterion(8, "end-to-end generalizability", [&](std::string& d) { return ac8(head, train_seconds, d); });
        criterion(9, "class correction", [&](std::string& d) { return ac9(head, d); });
    } else {
        report(8, "end-to-end generalizability", false, "training failed: " + train_error);
        report(9, "class correction", false, "training failed: " + train_error);
    }
    criterion(10, "CLI determinism", ac10);

    std::printf("%d of 10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
