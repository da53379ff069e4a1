#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <reltrack/pipeline.hpp>
#include <reltrack/profile.hpp>
#include <reltrack/train.hpp>

namespace reltrack {

struct KeyValue {
    std::size_t line = 0;
    std::string key;
    std::string value;
};

/// Splits `key = value` lines; blank lines, `#` comments and `[section]` headers are skipped.
std::vector<KeyValue> parse_key_values(std::string_view text);
/// Parses a `key=value` command-line override (line number 0).
KeyValue parse_override(std::string_view text);

Real kv_real(const KeyValue& kv);
int kv_int(const KeyValue& kv);
std::uint64_t kv_u64(const KeyValue& kv);
bool kv_bool(const KeyValue& kv);

/// Every tunable of the tracker, head, trainer and profiler.
struct Config {
    RelationConfig relation;
    int v = 2;
    int hidden = 64;
    AssocConfig assoc;
    ClassCorrection correction = ClassCorrection::EndOfSequence;
    LossConfig loss;
    ProfileConfig profile;
    Real baseline_iou = 0.3;

    void validate() const;
};

/// Throws InvalidConfig for unknown keys or malformed values.
void apply_setting(Config& cfg, const KeyValue& kv);

/// Defaults, then the file (if any), then the overrides in order.
Config load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides = {});

/// Every key with its current value, in a stable order; parses back to the same Config.
std::string format_config(const Config& cfg);

}  // namespace reltrack
