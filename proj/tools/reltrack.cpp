// reltrack: command-line front end for tracking, training, evaluation,
// scenario profiling and synthetic data generation.
#include <reltrack/config.hpp>
#include <reltrack/error.hpp>
#include <reltrack/eval.hpp>
#include <reltrack/fs.hpp>
#include <reltrack/mot_io.hpp>
#include <reltrack/pipeline.hpp>
#include <reltrack/profile.hpp>
#include <reltrack/synth.hpp>
#include <reltrack/train.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace reltrack;

namespace {

struct CommonOpts {
    std::string config;
    std::vector<std::string> sets;
    bool json_errors = false;
};

Config make_config(const CommonOpts& common) {
    std::optional<fs::path> file;
    if (!common.config.empty()) file = common.config;
    return load_config(file, common.sets);
}

void add_config_opts(CLI::App* cmd, CommonOpts& common) {
    cmd->add_option("--config", common.config, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", common.sets, "override a config key (key=value), repeatable");
}

int max_frame(std::span<const TrackRow> rows) {
    int f = 0;
    for (const auto& r : rows) f = std::max(f, r.frame);
    return f;
}

// A MOTChallenge-style sequence directory: gt/gt.txt, seqinfo.ini, and
// either features/NNNNNN.p2if or img/NNNNNN.pgm.
struct SequenceDir {
    SequenceMeta meta;
    std::vector<TrackRow> gt;
    FeatureProvider features;
    int num_frames = 0;
};

FeatureProvider provider_for(const fs::path& dir) {
    if (fs::is_directory(dir / "features")) return FeatureProvider::file_backed(dir / "features");
    if (fs::is_directory(dir / "img")) return FeatureProvider::handcrafted(dir / "img");
    throw Error(ErrorKind::Io, dir.string() + ": no features/ or img/ directory");
}

SequenceDir load_sequence_dir(const fs::path& dir, int k) {
    SequenceDir s;
    s.gt = downsample_rows(parse_mot_file(dir / "gt" / "gt.txt"), k);
    int length = 0;
    if (fs::exists(dir / "seqinfo.ini")) {
        s.meta = read_seqinfo(dir / "seqinfo.ini");
        length = downsampled_length(s.meta.length, k);
    }
    s.num_frames = std::max(length, max_frame(s.gt));
    s.features = provider_for(dir).with_frame_step(k);
    return s;
}

std::string loss_csv(std::span<const Real> trace) {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,loss\n";
    for (std::size_t k = 0; k < trace.size(); ++k) out << k << ',' << trace[k] << '\n';
    return out.str();
}

int run_track(const CommonOpts& common, const std::string& det, const std::string& features_dir,
              const std::string& images_dir, const std::string& weights, const std::string& out, int k,
              int frames, bool baseline) {
    const Config cfg = make_config(common);
    const auto rows = downsample_rows(parse_mot_file(det), k);
    const auto dets = detections_by_frame(rows);
    const int num_frames = frames > 0 ? downsampled_length(frames, k) : max_frame(rows);

    TrackResult result;
    if (baseline) {
        result = track_sequence_iou(dets, num_frames, cfg.assoc, cfg.baseline_iou, cfg.correction);
    } else {
        if (weights.empty()) throw Error(ErrorKind::InvalidConfig, "track needs --weights (or --baseline)");
        if (features_dir.empty() == images_dir.empty()) {
            throw Error(ErrorKind::InvalidConfig, "track needs exactly one of --features and --images");
        }
        const FeatureProvider provider =
            (features_dir.empty() ? FeatureProvider::handcrafted(images_dir) : FeatureProvider::file_backed(features_dir))
                .with_frame_step(k);
        TrackOptions opts{cfg.relation, cfg.assoc, cfg.correction};
        result = track_sequence(dets, num_frames, provider, load_weights(weights), opts);
    }
    write_mot_file(out, result.rows);
    std::cerr << "tracked " << num_frames << " frames, " << result.tracklets.size() << " tracks -> " << out << '\n';
    return 0;
}

int run_train(const CommonOpts& common, const std::vector<std::string>& seq_dirs, const std::string& out,
              const std::string& csv, const std::vector<int>& ks) {
    const Config cfg = make_config(common);
    std::vector<TrainingSequence> seqs;
    for (const auto& d : seq_dirs) {
        for (int k : ks) {
            auto s = load_sequence_dir(d, k);
            seqs.push_back({std::move(s.gt), s.num_frames, std::move(s.features)});
        }
    }
    const auto fitted = fit(seqs, cfg.relation, cfg.v, cfg.hidden, cfg.loss);
    save_weights(out, fitted.params);
    if (!csv.empty()) atomic_write(csv, loss_csv(fitted.loss_trace));
    std::cerr << "loss " << fitted.loss_trace.front() << " -> " << fitted.loss_trace.back() << '\n';
    return 0;
}

int run_eval(const std::string& gt_path, const std::string& res_path, const std::string& metrics,
             const std::string& out, int k) {
    const auto gt = downsample_rows(parse_mot_file(gt_path), k);
    const auto res = parse_mot_file(res_path);
    const auto report = evaluate(gt, res, parse_metrics(metrics));
    if (!out.empty()) atomic_write(out, report_json(report));
    std::cout << report_table(report);
    return 0;
}

int run_profile(const CommonOpts& common, const std::string& root, const std::string& fixtures, const std::string& out,
                const std::string& csv) {
    const Config cfg = make_config(common);
    std::vector<DatasetProfile> profiles;
    std::vector<std::string> warnings;
    if (!fixtures.empty()) {
        profiles = read_raw_fixtures(fixtures);
        warnings = normalize_profiles(profiles);
    } else if (!root.empty()) {
        profiles = profile_root(root, cfg.profile, &warnings);
    } else {
        throw Error(ErrorKind::InvalidConfig, "profile needs --gt-root or --raw-fixtures");
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    const std::string json = profiles_json(profiles);
    if (out.empty()) std::cout << json;
    else atomic_write(out, json);
    if (!csv.empty()) atomic_write(csv, profiles_csv(profiles));
    return 0;
}

int run_synth(const std::string& spec_path, const std::string& out, int k, bool features, bool no_images) {
    const ScenarioSpec spec = parse_scenario_spec(read_file(spec_path));
    const auto seq = downsample_fps(generate(spec), k);
    write_sequence(seq, out, {!no_images, features});
    std::cerr << "wrote " << seq.meta.length << " frames, " << spec.n_targets << " targets -> " << out << '\n';
    return 0;
}

int run_gradcheck(int configs, std::uint64_t seed) {
    const auto rep = gradient_check(configs, seed);
    std::cout << "configs " << rep.configs << "  parameters " << rep.parameters_checked << "  max relative error "
              << rep.max_rel_error << "  " << (rep.passed ? "PASS" : "FAIL") << '\n';
    return rep.passed ? 0 : 1;
}

void report_error(const Error& e, bool as_json) {
    if (as_json) {
        nlohmann::ordered_json j{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
        if (const auto* pe = dynamic_cast<const ParseError*>(&e)) j["line"] = pe->line();
        std::cerr << j.dump() << '\n';
    } else {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relation-based multi-object tracker"};
    app.require_subcommand(1);
    CommonOpts common;
    app.add_flag("--json-errors", common.json_errors, "print errors as JSON on stderr");

    std::string det, features_dir, images_dir, weights, out, csv, gt, res, metrics = "clear,idf1,hota", root, fixtures,
                                                                          spec;
    int k = 1, frames = 0, configs = 10;
    std::vector<int> ks{1};
    std::vector<std::string> seq_dirs;
    std::uint64_t seed = 7;
    bool baseline = false, with_features = false, no_images = false;

    auto* track = app.add_subcommand("track", "track a detection file");
    track->add_option("--det", det, "detections (MOT format)")->required()->check(CLI::ExistingFile);
    track->add_option("--features", features_dir, "directory of NNNNNN.p2if feature maps");
    track->add_option("--images", images_dir, "directory of NNNNNN.pgm frames");
    track->add_option("--weights", weights, "P2IW head weights");
    track->add_option("--out", out, "output MOT file")->required();
    track->add_option("--fps-downsample", k, "keep every k-th frame")->check(CLI::PositiveNumber);
    track->add_option("--frames", frames, "sequence length before downsampling (default: last detection frame)");
    track->add_flag("--baseline", baseline, "greedy IoU/Kalman tracker instead of the relation head");
    add_config_opts(track, common);

    auto* train = app.add_subcommand("train", "fit head weights on ground-truth sequences");
    train->add_option("sequences", seq_dirs, "sequence directories")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", out, "output P2IW file")->required();
    train->add_option("--loss-csv", csv, "write the loss trace");
    train->add_option("--fps-downsample", ks, "downsampling factors to train on (each sequence at each k)");
    add_config_opts(train, common);

    auto* eval = app.add_subcommand("eval", "score tracker output against ground truth");
    eval->add_option("--gt", gt, "ground truth (MOT format)")->required()->check(CLI::ExistingFile);
    eval->add_option("--res", res, "tracker output (MOT format)")->required()->check(CLI::ExistingFile);
    eval->add_option("--metrics", metrics, "comma-separated subset of clear,idf1,hota");
    eval->add_option("--out", out, "JSON report");
    eval->add_option("--fps-downsample", k, "downsample the ground truth first")->check(CLI::PositiveNumber);

    auto* prof = app.add_subcommand("profile", "scenario attribute maps");
    prof->add_option("--gt-root", root, "one subdirectory per dataset")->check(CLI::ExistingDirectory);
    prof->add_option("--raw-fixtures", fixtures, "CSV of raw attribute vectors to normalize")->check(CLI::ExistingFile);
    prof->add_option("--out", out, "JSON output (stdout if omitted)");
    prof->add_option("--csv", csv, "CSV of the normalized maps");
    add_config_opts(prof, common);

    auto* syn = app.add_subcommand("synth", "generate a synthetic sequence");
    syn->add_option("--spec", spec, "scenario spec (key=value)")->required()->check(CLI::ExistingFile);
    syn->add_option("--out", out, "output sequence directory")->required();
    syn->add_option("--fps-downsample", k, "keep every k-th frame")->check(CLI::PositiveNumber);
    syn->add_flag("--features", with_features, "also write P2IF feature maps");
    syn->add_flag("--no-images", no_images, "skip PGM frames");

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the head gradients");
    grad->add_option("--configs", configs, "random configurations")->check(CLI::PositiveNumber);
    grad->add_option("--seed", seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (common.json_errors && e.get_exit_code() != 0) {
            std::cerr << nlohmann::json{{"error", "Usage"}, {"message", e.what()}}.dump() << '\n';
            return 2;
        }
        // --help exits 0; every other parse failure is a usage error.
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*track) return run_track(common, det, features_dir, images_dir, weights, out, k, frames, baseline);
        if (*train) return run_train(common, seq_dirs, out, csv, ks);
        if (*eval) return run_eval(gt, res, metrics, out, k);
        if (*prof) return run_profile(common, root, fixtures, out, csv);
        if (*syn) return run_synth(spec, out, k, with_features, no_images);
        if (*grad) return run_gradcheck(configs, seed);
    } catch (const Error& e) {
        report_error(e, common.json_errors);
        return 3;
    } catch (const std::exception& e) {
        report_error(Error(ErrorKind::Io, e.what()), common.json_errors);
        return 3;
    }
    return 0;
}
