#include "anteriseg/manifest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "anteriseg/error.hpp"

namespace anteriseg {

namespace {

template <class Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::string_view, N>& names, std::string_view what) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == s) return static_cast<Enum>(i);
    throw ValidationError("invalid " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 5> kGazeNames{"Up", "Down", "Left", "Right", "Straight"};
constexpr std::array<std::string_view, 3> kLabelNames{"Normal", "Controlled", "Uncontrolled"};
constexpr std::array<std::string_view, 3> kSplitNames{"train", "val", "unassigned"};
constexpr std::array<std::string_view, 2> kProvenanceNames{"original", "augmented"};

}  // namespace

std::string_view to_string(Gaze g) { return kGazeNames[static_cast<std::size_t>(g)]; }
std::string_view to_string(Label l) { return kLabelNames[static_cast<std::size_t>(l)]; }
std::string_view to_string(Split s) { return kSplitNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Provenance p) { return kProvenanceNames[static_cast<std::size_t>(p)]; }

Gaze parse_gaze(std::string_view s) { return parse_enum<Gaze>(s, kGazeNames, "gaze"); }
Label parse_label(std::string_view s) { return parse_enum<Label>(s, kLabelNames, "label"); }
Split parse_split(std::string_view s) { return parse_enum<Split>(s, kSplitNames, "split"); }
Provenance parse_provenance(std::string_view s) {
    return parse_enum<Provenance>(s, kProvenanceNames, "provenance");
}

namespace csv {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ValidationError("unterminated quoted CSV field");
    fields.push_back(std::move(cur));
    return fields;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace csv

void validate_manifest(const DatasetManifest& m) {
    std::unordered_set<std::string> val_paths;
    std::unordered_set<std::string> seen;
    for (const auto& r : m.records) {
        require(!r.path.empty(), "manifest record with empty path");
        require(seen.insert(r.path).second, "duplicate manifest path '" + r.path + "'");
        if (r.split == Split::Val) val_paths.insert(r.path);
    }
    for (const auto& r : m.records) {
        if (r.provenance != Provenance::Augmented) continue;
        require(r.split == Split::Train, "leakage: augmented record '" + r.path + "' is not in train split");
        require(!r.source_path.empty(), "augmented record '" + r.path + "' lacks source_path");
        require(!val_paths.contains(r.source_path),
                "leakage: augmented record '" + r.path + "' derives from validation image '" + r.source_path + "'");
    }
}

DatasetManifest parse_manifest_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("manifest is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line != kManifestHeader)
        throw ValidationError("manifest header must be '" + std::string(kManifestHeader) + "'");
    DatasetManifest m;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = csv::split_line(line);
        if (f.size() != 7)
            throw ValidationError("manifest line " + std::to_string(line_no) + ": expected 7 fields");
        try {
            m.records.push_back({f[0], f[1], parse_gaze(f[2]), parse_label(f[3]), parse_split(f[4]),
                                 parse_provenance(f[5]), f[6]});
        } catch (const ValidationError& e) {
            throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    validate_manifest(m);
    return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    return parse_manifest_csv(in);
}

void write_manifest_csv(const DatasetManifest& m, std::ostream& out) {
    out << kManifestHeader << '\n';
    for (const auto& r : m.records) {
        out << csv::escape(r.path) << ',' << csv::escape(r.patient_id) << ',' << to_string(r.gaze) << ','
            << to_string(r.label) << ',' << to_string(r.split) << ',' << to_string(r.provenance) << ','
            << csv::escape(r.source_path) << '\n';
    }
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    write_manifest_csv(m, out);
    if (!out) throw IoError("short write to " + path.string());
}

std::filesystem::path resolve_path(const std::filesystem::path& manifest_dir, const std::string& record_path) {
    const std::filesystem::path p(record_path);
    return p.is_absolute() ? p : manifest_dir / p;
}

}  // namespace anteriseg
