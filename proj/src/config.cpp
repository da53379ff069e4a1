#include <reltrack/config.hpp>
#include <reltrack/error.hpp>
#include <reltrack/fs.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace reltrack {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(const KeyValue& kv, const std::string& what) {
    const std::string msg = "'" + kv.key + "': " + what + " (got '" + kv.value + "')";
    if (kv.line > 0) throw ParseError(ErrorKind::InvalidConfig, kv.line, msg);
    throw Error(ErrorKind::InvalidConfig, msg);
}

template <typename T>
T number(const KeyValue& kv, const char* what) {
    T out{};
    const auto& s = kv.value;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) bad_value(kv, what);
    return out;
}

std::string fmt(Real x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

using Setter = std::function<void(Config&, const KeyValue&)>;
using Getter = std::function<std::string(const Config&)>;

struct Field {
    const char* key;
    Setter set;
    Getter get;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"levels", [](Config& c, const KeyValue& kv) { c.relation.levels = kv_int(kv); },
         [](const Config& c) { return std::to_string(c.relation.levels); }},
        {"radius", [](Config& c, const KeyValue& kv) { c.relation.radius = kv_int(kv); },
         [](const Config& c) { return std::to_string(c.relation.radius); }},
        {"scale",
         [](Config& c, const KeyValue& kv) {
             if (kv.value == "raw") c.relation.scale = CorrelationScale::Raw;
             else if (kv.value == "inv_sqrt_d") c.relation.scale = CorrelationScale::InvSqrtD;
             else bad_value(kv, "expected raw or inv_sqrt_d");
         },
         [](const Config& c) { return std::string(c.relation.scale == CorrelationScale::Raw ? "raw" : "inv_sqrt_d"); }},
        {"pool",
         [](Config& c, const KeyValue& kv) {
             if (kv.value == "average") c.relation.pool = PoolMode::Average;
             else if (kv.value == "max") c.relation.pool = PoolMode::Max;
             else bad_value(kv, "expected average or max");
         },
         [](const Config& c) { return std::string(c.relation.pool == PoolMode::Average ? "average" : "max"); }},
        {"mask_background", [](Config& c, const KeyValue& kv) { c.relation.mask_background = kv_bool(kv); },
         [](const Config& c) { return std::string(c.relation.mask_background ? "true" : "false"); }},
        {"v", [](Config& c, const KeyValue& kv) { c.v = kv_int(kv); }, [](const Config& c) { return std::to_string(c.v); }},
        {"hidden", [](Config& c, const KeyValue& kv) { c.hidden = kv_int(kv); },
         [](const Config& c) { return std::to_string(c.hidden); }},
        {"match_thresh", [](Config& c, const KeyValue& kv) { c.assoc.match_thresh = kv_real(kv); },
         [](const Config& c) { return fmt(c.assoc.match_thresh); }},
        {"det_high", [](Config& c, const KeyValue& kv) { c.assoc.det_high = kv_real(kv); },
         [](const Config& c) { return fmt(c.assoc.det_high); }},
        {"det_low", [](Config& c, const KeyValue& kv) { c.assoc.det_low = kv_real(kv); },
         [](const Config& c) { return fmt(c.assoc.det_low); }},
        {"init_thresh", [](Config& c, const KeyValue& kv) { c.assoc.init_thresh = kv_real(kv); },
         [](const Config& c) { return fmt(c.assoc.init_thresh); }},
        {"max_lost_age", [](Config& c, const KeyValue& kv) { c.assoc.max_lost_age = kv_int(kv); },
         [](const Config& c) { return std::to_string(c.assoc.max_lost_age); }},
        {"iou_thresh_low", [](Config& c, const KeyValue& kv) { c.assoc.iou_thresh_low = kv_real(kv); },
         [](const Config& c) { return fmt(c.assoc.iou_thresh_low); }},
        {"lost_in_relation_stage", [](Config& c, const KeyValue& kv) { c.assoc.lost_in_relation_stage = kv_bool(kv); },
         [](const Config& c) { return std::string(c.assoc.lost_in_relation_stage ? "true" : "false"); }},
        {"class_restricted", [](Config& c, const KeyValue& kv) { c.assoc.class_restricted = kv_bool(kv); },
         [](const Config& c) { return std::string(c.assoc.class_restricted ? "true" : "false"); }},
        {"class_correction",
         [](Config& c, const KeyValue& kv) {
             if (kv.value == "end") c.correction = ClassCorrection::EndOfSequence;
             else if (kv.value == "streaming") c.correction = ClassCorrection::Streaming;
             else if (kv.value == "none") c.correction = ClassCorrection::None;
             else bad_value(kv, "expected end, streaming or none");
         },
         [](const Config& c) {
             switch (c.correction) {
                 case ClassCorrection::EndOfSequence: return std::string("end");
                 case ClassCorrection::Streaming: return std::string("streaming");
                 case ClassCorrection::None: break;
             }
             return std::string("none");
         }},
        {"kalman_std_position", [](Config& c, const KeyValue& kv) { c.assoc.kalman.std_weight_position = kv_real(kv); },
         [](const Config& c) { return fmt(c.assoc.kalman.std_weight_position); }},
        {"kalman_std_velocity", [](Config& c, const KeyValue& kv) { c.assoc.kalman.std_weight_velocity = kv_real(kv); },
         [](const Config& c) { return fmt(c.assoc.kalman.std_weight_velocity); }},
        {"kalman_std_measurement",
         [](Config& c, const KeyValue& kv) { c.assoc.kalman.std_weight_measurement = kv_real(kv); },
         [](const Config& c) { return fmt(c.assoc.kalman.std_weight_measurement); }},
        {"kalman_std_aspect", [](Config& c, const KeyValue& kv) { c.assoc.kalman.aspect_measurement_std = kv_real(kv); },
         [](const Config& c) { return fmt(c.assoc.kalman.aspect_measurement_std); }},
        {"loss_w",
         [](Config& c, const KeyValue& kv) {
             if (kv.value == "auto") c.loss.w.reset();
             else c.loss.w = kv_real(kv);
         },
         [](const Config& c) { return c.loss.w ? fmt(*c.loss.w) : std::string("auto"); }},
        {"loss_w_min", [](Config& c, const KeyValue& kv) { c.loss.w_min = kv_real(kv); },
         [](const Config& c) { return fmt(c.loss.w_min); }},
        {"loss_w_max", [](Config& c, const KeyValue& kv) { c.loss.w_max = kv_real(kv); },
         [](const Config& c) { return fmt(c.loss.w_max); }},
        {"loss_eps", [](Config& c, const KeyValue& kv) { c.loss.eps = kv_real(kv); },
         [](const Config& c) { return fmt(c.loss.eps); }},
        {"lr", [](Config& c, const KeyValue& kv) { c.loss.lr = kv_real(kv); }, [](const Config& c) { return fmt(c.loss.lr); }},
        {"epochs", [](Config& c, const KeyValue& kv) { c.loss.epochs = kv_int(kv); },
         [](const Config& c) { return std::to_string(c.loss.epochs); }},
        {"grad_clip", [](Config& c, const KeyValue& kv) { c.loss.grad_clip = kv_real(kv); },
         [](const Config& c) { return fmt(c.loss.grad_clip); }},
        {"optimizer",
         [](Config& c, const KeyValue& kv) {
             if (kv.value == "adam") c.loss.optimizer = Optimizer::AdamLike;
             else if (kv.value == "sgd") c.loss.optimizer = Optimizer::SGD;
             else bad_value(kv, "expected adam or sgd");
         },
         [](const Config& c) { return std::string(c.loss.optimizer == Optimizer::AdamLike ? "adam" : "sgd"); }},
        {"weight_decay", [](Config& c, const KeyValue& kv) { c.loss.weight_decay = kv_real(kv); },
         [](const Config& c) { return fmt(c.loss.weight_decay); }},
        {"seed", [](Config& c, const KeyValue& kv) { c.loss.seed = kv_u64(kv); },
         [](const Config& c) { return std::to_string(c.loss.seed); }},
        {"lambda_dir", [](Config& c, const KeyValue& kv) { c.profile.lambda_dir = kv_real(kv); },
         [](const Config& c) { return fmt(c.profile.lambda_dir); }},
        {"lambda_pos", [](Config& c, const KeyValue& kv) { c.profile.lambda_pos = kv_real(kv); },
         [](const Config& c) { return fmt(c.profile.lambda_pos); }},
        {"small_area", [](Config& c, const KeyValue& kv) { c.profile.small_area = kv_real(kv); },
         [](const Config& c) { return fmt(c.profile.small_area); }},
        {"baseline_iou", [](Config& c, const KeyValue& kv) { c.baseline_iou = kv_real(kv); },
         [](const Config& c) { return fmt(c.baseline_iou); }},
    };
    return table;
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::string_view text) {
    std::vector<KeyValue> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#' || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(ErrorKind::ParseError, line_no, "expected key=value");
        KeyValue kv{line_no, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1)))};
        if (kv.key.empty()) throw ParseError(ErrorKind::ParseError, line_no, "empty key");
        out.push_back(std::move(kv));
    }
    return out;
}

KeyValue parse_override(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::InvalidConfig, "expected key=value, got '" + std::string(text) + "'");
    return {0, std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

Real kv_real(const KeyValue& kv) {
    const Real x = number<Real>(kv, "expected a number");
    if (!std::isfinite(x)) bad_value(kv, "expected a finite number");
    return x;
}

int kv_int(const KeyValue& kv) { return number<int>(kv, "expected an integer"); }

std::uint64_t kv_u64(const KeyValue& kv) { return number<std::uint64_t>(kv, "expected a non-negative integer"); }

bool kv_bool(const KeyValue& kv) {
    if (kv.value == "true" || kv.value == "1") return true;
    if (kv.value == "false" || kv.value == "0") return false;
    bad_value(kv, "expected true or false");
}

void Config::validate() const {
    if (relation.levels < 0) throw Error(ErrorKind::InvalidConfig, "levels must be >= 0");
    if (relation.radius < 0) throw Error(ErrorKind::InvalidConfig, "radius must be >= 0");
    if (v < 1) throw Error(ErrorKind::InvalidConfig, "v must be >= 1");
    if (hidden < 1) throw Error(ErrorKind::InvalidConfig, "hidden must be >= 1");
    if (!(baseline_iou >= 0 && baseline_iou <= 1)) throw Error(ErrorKind::InvalidConfig, "baseline_iou must lie in [0, 1]");
    if (!(profile.small_area > 0)) throw Error(ErrorKind::InvalidConfig, "small_area must be > 0");
    for (Real l : {profile.lambda_dir, profile.lambda_pos})
        if (!(l >= 0 && l <= 1)) throw Error(ErrorKind::InvalidConfig, "profile weights must lie in [0, 1]");
    assoc.validate();
    loss.validate();
}

void apply_setting(Config& cfg, const KeyValue& kv) {
    for (const auto& f : fields()) {
        if (kv.key == f.key) {
            f.set(cfg, kv);
            return;
        }
    }
    const std::string msg = "unknown config key '" + kv.key + "'";
    if (kv.line > 0) throw ParseError(ErrorKind::InvalidConfig, kv.line, msg);
    throw Error(ErrorKind::InvalidConfig, msg);
}

Config load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
    Config cfg;
    if (file) {
        for (const auto& kv : parse_key_values(read_file(*file))) apply_setting(cfg, kv);
    }
    for (const auto& o : overrides) apply_setting(cfg, parse_override(o));
    cfg.validate();
    return cfg;
}

std::string format_config(const Config& cfg) {
    std::ostringstream out;
    for (const auto& f : fields()) out << f.key << " = " << f.get(cfg) << '\n';
    return out.str();
}

}  // namespace reltrack
