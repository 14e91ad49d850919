#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace anteriseg {

enum class Gaze { Up, Down, Left, Right, Straight };
enum class Label { Normal, Controlled, Uncontrolled };
enum class Split { Train, Val, Unassigned };
enum class Provenance { Original, Augmented };

inline constexpr std::array<Label, 3> kAllLabels{Label::Normal, Label::Controlled, Label::Uncontrolled};
inline constexpr std::size_t kLabelCount = kAllLabels.size();

std::string_view to_string(Gaze g);
std::string_view to_string(Label l);
std::string_view to_string(Split s);
std::string_view to_string(Provenance p);

Gaze parse_gaze(std::string_view s);
Label parse_label(std::string_view s);
Split parse_split(std::string_view s);
Provenance parse_provenance(std::string_view s);

inline std::size_t label_index(Label l) { return static_cast<std::size_t>(l); }
inline Label label_from_index(std::size_t i) { return kAllLabels.at(i); }

struct ManifestRecord {
    std::string path;
    std::string patient_id;
    Gaze gaze = Gaze::Straight;
    Label label = Label::Normal;
    Split split = Split::Unassigned;
    Provenance provenance = Provenance::Original;
    std::string source_path;  // set for augmented records only

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;

    std::size_t size() const { return records.size(); }
    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline constexpr std::string_view kManifestHeader = "path,patient_id,gaze,label,split,provenance,source_path";

/// Checks closed vocabularies and the leakage invariant: augmented records
/// are train-only and never derive from a validation source.
void validate_manifest(const DatasetManifest& m);

DatasetManifest parse_manifest_csv(std::istream& in);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest_csv(const DatasetManifest& m, std::ostream& out);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// Resolves a record path relative to the directory holding the manifest.
std::filesystem::path resolve_path(const std::filesystem::path& manifest_dir, const std::string& record_path);

namespace csv {
/// Splits one CSV line; supports double-quoted fields with "" escapes.
std::vector<std::string> split_line(std::string_view line);
/// Quotes a field if it contains a comma, quote or newline.
std::string escape(std::string_view field);
}  // namespace csv

}  // namespace anteriseg
