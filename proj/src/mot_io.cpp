#include <reltrack/mot_io.hpp>
#include <reltrack/error.hpp>
#include <reltrack/fs.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace reltrack {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

void append_number(std::string& out, Real v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

void append_number(std::string& out, int v) {
    char buf[16];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

}  // namespace

std::vector<TrackRow> parse_mot(std::string_view text, const std::string& source) {
    std::vector<TrackRow> rows;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        auto fail = [&](const std::string& msg) -> ParseError {
            return ParseError(ErrorKind::ParseError, line_no, source + ": " + msg);
        };
        if (fields.size() < 6) throw fail("expected at least 6 fields, got " + std::to_string(fields.size()));

        TrackRow r;
        Real frame_real = 0, id_real = 0, cls_real = 1;
        if (!parse_number(fields[0], frame_real) || frame_real != static_cast<int>(frame_real) || frame_real < 1) {
            throw fail("bad frame index '" + std::string(fields[0]) + "'");
        }
        if (!parse_number(fields[1], id_real) || id_real != static_cast<int>(id_real)) {
            throw fail("bad id '" + std::string(fields[1]) + "'");
        }
        if (!parse_number(fields[2], r.box.x) || !parse_number(fields[3], r.box.y) ||
            !parse_number(fields[4], r.box.w) || !parse_number(fields[5], r.box.h)) {
            throw fail("bad box coordinates");
        }
        if (fields.size() > 6 && !parse_number(fields[6], r.score)) throw fail("bad score");
        if (fields.size() > 7 && (!parse_number(fields[7], cls_real) || cls_real != static_cast<int>(cls_real))) {
            throw fail("bad class");
        }
        if (fields.size() > 8 && !parse_number(fields[8], r.visibility)) throw fail("bad visibility");
        if (!(r.box.w > 0 && r.box.h > 0)) {
            throw ParseError(ErrorKind::NonPositiveSize, line_no, source + ": box width and height must be positive");
        }
        r.frame = static_cast<int>(frame_real);
        r.id = static_cast<int>(id_real);
        r.class_id = static_cast<int>(cls_real);
        rows.push_back(r);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const TrackRow& a, const TrackRow& b) { return a.frame < b.frame; });
    return rows;
}

std::vector<TrackRow> parse_mot_file(const std::filesystem::path& path) {
    return parse_mot(read_file(path), path.string());
}

std::string format_mot(std::span<const TrackRow> rows) {
    std::string out;
    out.reserve(rows.size() * 48);
    for (const auto& r : rows) {
        append_number(out, r.frame);
        out += ',';
        append_number(out, r.id);
        for (Real v : {r.box.x, r.box.y, r.box.w, r.box.h, r.score}) {
            out += ',';
            append_number(out, v);
        }
        out += ',';
        append_number(out, r.class_id);
        out += ',';
        append_number(out, r.visibility);
        out += '\n';
    }
    return out;
}

void write_mot_file(const std::filesystem::path& path, std::span<const TrackRow> rows) {
    atomic_write(path, format_mot(rows));
}

std::vector<Detection> to_detections(std::span<const TrackRow> rows) {
    std::vector<Detection> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({r.frame, r.box, r.score, r.class_id});
    return out;
}

std::map<int, std::vector<Detection>> detections_by_frame(std::span<const TrackRow> rows) {
    std::map<int, std::vector<Detection>> out;
    for (const auto& r : rows) out[r.frame].push_back({r.frame, r.box, r.score, r.class_id});
    return out;
}

std::map<int, std::vector<TrackRow>> rows_by_frame(std::span<const TrackRow> rows) {
    std::map<int, std::vector<TrackRow>> out;
    for (const auto& r : rows) out[r.frame].push_back(r);
    return out;
}

std::vector<TrackRow> downsample_rows(std::span<const TrackRow> rows, int k) {
    if (k < 1) throw Error(ErrorKind::InvalidConfig, "downsampling factor must be >= 1");
    std::vector<TrackRow> out;
    for (const auto& r : rows) {
        if ((r.frame - 1) % k != 0) continue;
        TrackRow c = r;
        c.frame = (r.frame - 1) / k + 1;
        out.push_back(c);
    }
    return out;
}

int downsampled_length(int length, int k) {
    if (k < 1) throw Error(ErrorKind::InvalidConfig, "downsampling factor must be >= 1");
    return length < 1 ? 0 : (length - 1) / k + 1;
}

SequenceMeta parse_seqinfo(std::string_view text) {
    SequenceMeta meta;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t.front() == '[' || t.front() == '#' || t.front() == ';') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ParseError(ErrorKind::ParseError, line_no, "expected key=value");
        const std::string key{trim(t.substr(0, eq))};
        const std::string_view value = trim(t.substr(eq + 1));
        auto num = [&](auto& dst) {
            if (!parse_number(value, dst)) throw ParseError(ErrorKind::ParseError, line_no, "bad value for " + key);
        };
        if (key == "name") meta.name = std::string(value);
        else if (key == "imWidth") num(meta.width);
        else if (key == "imHeight") num(meta.height);
        else if (key == "frameRate") num(meta.fps);
        else if (key == "seqLength") num(meta.length);
    }
    if (!(meta.fps > 0)) throw Error(ErrorKind::InvalidConfig, "frameRate must be positive");
    if (meta.length < 1) throw Error(ErrorKind::InvalidConfig, "seqLength must be >= 1");
    return meta;
}

SequenceMeta read_seqinfo(const std::filesystem::path& path) { return parse_seqinfo(read_file(path)); }

std::string format_seqinfo(const SequenceMeta& meta) {
    std::string out = "[Sequence]\nname=" + meta.name + "\nimWidth=" + std::to_string(meta.width) +
                      "\nimHeight=" + std::to_string(meta.height) + "\nframeRate=";
    append_number(out, meta.fps);
    out += "\nseqLength=" + std::to_string(meta.length) + "\n";
    return out;
}

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace reltrack
