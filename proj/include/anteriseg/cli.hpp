#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "anteriseg/pipeline.hpp"
#include "anteriseg/quality.hpp"
#include "json.hpp"

namespace anteriseg::cli {

inline constexpr std::string_view kToolName = "anteriseg";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Every tunable the subcommands read. Defaults match the library defaults;
/// a --config file overrides them and command-line flags override both.
struct RunConfig {
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0 = ANTERISEG_THREADS or hardware concurrency
    quality::QualityConfig quality;
    pipeline::PreprocessParams prep;
    pipeline::SplitParams split;
    std::size_t variants = 3;
    std::string augment_dir = "augmented";
    double tau = 0.5;
    double overlay_alpha = 0.4;

    nlohmann::json to_json() const;
    /// Overlays keys present in `j`; unknown keys are rejected.
    void merge_json(const nlohmann::json& j);
};

RunConfig load_config(const std::string& path);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns 0 on success, 1 on validation or usage errors and
/// 2 on I/O errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Map file name used by `xai regions` for a manifest path:
/// "img/a.png" -> "img_a.atns".
std::string map_file_name(const std::string& record_path);

}  // namespace anteriseg::cli
