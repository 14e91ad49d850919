#include "anteriseg/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "anteriseg/error.hpp"
#include "anteriseg/evalstat.hpp"
#include "anteriseg/lossmath.hpp"
#include "anteriseg/parallel.hpp"
#include "anteriseg/synth.hpp"
#include "anteriseg/xai.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace anteriseg::cli {

// ---------------------------------------------------------------------------
// Config

json RunConfig::to_json() const {
    return {
        {"seed", seed},
        {"threads", threads},
        {"quality",
         {{"hue_low_max", quality.redness.hue_low_max},
          {"hue_high_min", quality.redness.hue_high_min},
          {"min_saturation", quality.redness.min_saturation},
          {"min_value", quality.redness.min_value},
          {"clahe_clip", quality.clahe.clip_limit},
          {"clahe_tiles", quality.clahe.tiles_x},
          {"canny_sigma", quality.canny.gaussian_sigma},
          {"canny_low", quality.canny.low_threshold},
          {"canny_high", quality.canny.high_threshold},
          {"specular_threshold", quality.specular_threshold},
          {"dilate_k", quality.dilate_k}}},
        {"prep",
         {{"threshold", prep.specular_threshold},
          {"dilate_k", prep.dilate_k},
          {"inpaint_radius", prep.inpaint_radius},
          {"clip", prep.clahe.clip_limit},
          {"tiles", prep.clahe.tiles_x}}},
        {"split", {{"train_frac", split.train_frac}, {"group_by_patient", split.group_by_patient}}},
        {"augment", {{"variants", variants}, {"output_dir", augment_dir}}},
        {"loss", {{"tau", tau}}},
        {"xai", {{"alpha", overlay_alpha}}},
    };
}

namespace {

template <class T>
void take(const json& obj, const char* key, T& dst) {
    if (auto it = obj.find(key); it != obj.end()) dst = it->get<T>();
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
    require(obj.is_object(), "config section '" + where + "' must be an object");
    for (const auto& [k, v] : obj.items())
        require(std::find(allowed.begin(), allowed.end(), k) != allowed.end(),
                "unknown config key '" + where + (where.empty() ? "" : ".") + k + "'");
}

}  // namespace

void RunConfig::merge_json(const json& j) {
    check_keys(j, "", {"seed", "threads", "quality", "prep", "split", "augment", "loss", "xai"});
    take(j, "seed", seed);
    take(j, "threads", threads);
    if (auto it = j.find("quality"); it != j.end()) {
        const json& q = *it;
        check_keys(q, "quality",
                   {"hue_low_max", "hue_high_min", "min_saturation", "min_value", "clahe_clip", "clahe_tiles",
                    "canny_sigma", "canny_low", "canny_high", "specular_threshold", "dilate_k"});
        take(q, "hue_low_max", quality.redness.hue_low_max);
        take(q, "hue_high_min", quality.redness.hue_high_min);
        take(q, "min_saturation", quality.redness.min_saturation);
        take(q, "min_value", quality.redness.min_value);
        take(q, "clahe_clip", quality.clahe.clip_limit);
        if (q.contains("clahe_tiles")) quality.clahe.tiles_x = quality.clahe.tiles_y = q["clahe_tiles"].get<int>();
        take(q, "canny_sigma", quality.canny.gaussian_sigma);
        take(q, "canny_low", quality.canny.low_threshold);
        take(q, "canny_high", quality.canny.high_threshold);
        take(q, "specular_threshold", quality.specular_threshold);
        take(q, "dilate_k", quality.dilate_k);
    }
    if (auto it = j.find("prep"); it != j.end()) {
        const json& p = *it;
        check_keys(p, "prep", {"threshold", "dilate_k", "inpaint_radius", "clip", "tiles"});
        take(p, "threshold", prep.specular_threshold);
        take(p, "dilate_k", prep.dilate_k);
        take(p, "inpaint_radius", prep.inpaint_radius);
        take(p, "clip", prep.clahe.clip_limit);
        if (p.contains("tiles")) prep.clahe.tiles_x = prep.clahe.tiles_y = p["tiles"].get<int>();
    }
    if (auto it = j.find("split"); it != j.end()) {
        check_keys(*it, "split", {"train_frac", "group_by_patient"});
        take(*it, "train_frac", split.train_frac);
        take(*it, "group_by_patient", split.group_by_patient);
    }
    if (auto it = j.find("augment"); it != j.end()) {
        check_keys(*it, "augment", {"variants", "output_dir"});
        take(*it, "variants", variants);
        take(*it, "output_dir", augment_dir);
    }
    if (auto it = j.find("loss"); it != j.end()) {
        check_keys(*it, "loss", {"tau"});
        take(*it, "tau", tau);
    }
    if (auto it = j.find("xai"); it != j.end()) {
        check_keys(*it, "xai", {"alpha"});
        take(*it, "alpha", overlay_alpha);
    }
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path + " is not valid JSON: " + e.what());
    }
    RunConfig cfg;
    try {
        cfg.merge_json(j);
    } catch (const json::type_error& e) {
        throw ValidationError("config " + path + " has a value of the wrong type: " + e.what());
    }
    return cfg;
}

std::string map_file_name(const std::string& record_path) {
    std::string s = fs::path(record_path).replace_extension(".atns").generic_string();
    std::replace(s.begin(), s.end(), '/', '_');
    return s;
}

namespace {

// ---------------------------------------------------------------------------
// File helpers

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + " is not valid JSON: " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path dir_of(const fs::path& file) {
    const fs::path p = file.parent_path();
    return p.empty() ? fs::path(".") : p;
}

/// Rewrites record paths written relative to `from` so they stay valid
/// relative to `to`.
DatasetManifest rebase(DatasetManifest m, const fs::path& from, const fs::path& to) {
    const fs::path a = fs::weakly_canonical(fs::absolute(from));
    const fs::path b = fs::weakly_canonical(fs::absolute(to));
    if (a == b) return m;
    auto fix = [&](std::string& p) {
        if (p.empty() || fs::path(p).is_absolute()) return;
        p = (a / p).lexically_normal().lexically_relative(b).generic_string();
    };
    for (auto& r : m.records) {
        fix(r.path);
        fix(r.source_path);
    }
    return m;
}

void write_manifest_from(const DatasetManifest& m, const fs::path& in_manifest, const fs::path& out_manifest) {
    if (out_manifest.has_parent_path()) fs::create_directories(out_manifest.parent_path());
    write_manifest(rebase(m, dir_of(in_manifest), dir_of(out_manifest)), out_manifest);
}

std::vector<std::string> read_csv_rows(const fs::path& path, std::string_view header_prefix,
                                       std::vector<std::string>& header) {
    std::istringstream in(read_text(path));
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line.rfind(header_prefix, 0) == 0,
            path.string() + ": header must start with '" + std::string(header_prefix) + "'");
    header = csv::split_line(line);
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) rows.push_back(line);
    }
    return rows;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        require(used == s.size(), "");
        return v;
    } catch (...) {
        throw ValidationError("cannot parse " + what + " value '" + s + "'");
    }
}

std::string iso_timestamp(std::time_t t) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// --timestamp, then SOURCE_DATE_EPOCH, then the wall clock.
std::string report_timestamp(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
        char* end = nullptr;
        const long long v = std::strtoll(env, &end, 10);
        require(end && *end == '\0' && v >= 0, "SOURCE_DATE_EPOCH must be a non-negative integer");
        return iso_timestamp(static_cast<std::time_t>(v));
    }
    return iso_timestamp(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
}

std::vector<std::string> label_names() {
    std::vector<std::string> v;
    for (Label l : kAllLabels) v.emplace_back(to_string(l));
    return v;
}

// ---------------------------------------------------------------------------
// Subcommand implementations. Each receives the fully merged config.

struct QcScoreArgs {
    std::string manifest, out;
};

void cmd_qc_score(const RunConfig& cfg, const QcScoreArgs& a, std::ostream& out) {
    const DatasetManifest m = read_manifest(a.manifest);
    const fs::path base = dir_of(a.manifest);
    std::vector<std::pair<std::string, quality::QualityFeatures>> rows(m.size());
    parallel_for(m.size(), worker_count(cfg.threads), [&](std::size_t i) {
        const auto& rec = m.records[i];
        rows[i] = {rec.path, quality::extract_features(img::load_image(resolve_path(base, rec.path)), cfg.quality)};
    });
    std::ostringstream ss;
    quality::write_scores_csv(rows, ss);
    write_text(a.out, ss.str());
    out << fmt::format("scored {} images -> {}\n", rows.size(), a.out);
}

struct QcRelabelArgs {
    std::string manifest, scores, out_manifest, report, model_out;
};

void cmd_qc_relabel(const RunConfig& cfg, const QcRelabelArgs& a, std::ostream& out) {
    const DatasetManifest m = read_manifest(a.manifest);
    const quality::FeatureTable table = quality::read_scores(a.scores);
    std::vector<quality::FeatureVector> fv;
    fv.reserve(m.size());
    for (const auto& r : m.records) {
        const auto it = table.find(r.path);
        require(it != table.end(), "missing features for " + r.path);
        fv.push_back(it->second.vector());
    }
    const quality::ClusterModel model = quality::kmeans_fit(fv, 3, cfg.seed);
    auto [relabeled, report] = quality::relabel(m, model, table);
    write_manifest_from(relabeled, a.manifest, a.out_manifest);
    write_json(a.report, report.to_json());
    if (!a.model_out.empty()) write_json(a.model_out, model.to_json());
    out << fmt::format("relabeled {} of {} records ({:.1f}%)\n", report.changes, report.entries.size(),
                       100.0 * report.change_fraction());
}

struct PrepArgs {
    std::string manifest, out_dir, input, output;
};

void cmd_prep(const RunConfig& cfg, const PrepArgs& a, std::ostream& out) {
    if (!a.input.empty() || !a.output.empty()) {
        require(!a.input.empty() && !a.output.empty(), "--input and --output must be given together");
        require(a.manifest.empty(), "use either --input/--output or --manifest/--out-dir");
        img::save_image(pipeline::preprocess(img::load_image(a.input), cfg.prep).image, a.output);
        out << fmt::format("preprocessed {} -> {}\n", a.input, a.output);
        return;
    }
    require(!a.manifest.empty() && !a.out_dir.empty(), "prep run needs --manifest and --out-dir (or --input/--output)");
    const DatasetManifest m = read_manifest(a.manifest);
    const fs::path base = dir_of(a.manifest), dst = a.out_dir;
    for (const auto& r : m.records)
        require(!fs::path(r.path).is_absolute() && fs::path(r.path).lexically_normal().string().rfind("..", 0) != 0,
                "prep run needs manifest-relative paths inside the manifest directory: " + r.path);
    parallel_for(m.size(), worker_count(cfg.threads), [&](std::size_t i) {
        const auto& rec = m.records[i];
        fs::path target = dst / rec.path;
        fs::create_directories(target.parent_path());
        img::save_image(pipeline::preprocess(img::load_image(resolve_path(base, rec.path)), cfg.prep).image,
                        target.replace_extension(".png"));
    });
    DatasetManifest copy = m;
    for (auto& r : copy.records) {
        r.path = fs::path(r.path).replace_extension(".png").generic_string();
        if (!r.source_path.empty()) r.source_path = fs::path(r.source_path).replace_extension(".png").generic_string();
    }
    write_manifest(copy, dst / "manifest.csv");
    out << fmt::format("preprocessed {} images -> {}\n", m.size(), a.out_dir);
}

struct AugmentArgs {
    std::string manifest, out_manifest;
    bool dry_run = false;
};

void cmd_augment(const RunConfig& cfg, const AugmentArgs& a, std::ostream& out) {
    const fs::path in_dir = dir_of(a.manifest);
    const fs::path out_manifest = a.out_manifest.empty() ? in_dir / "manifest.augmented.csv" : fs::path(a.out_manifest);
    const fs::path out_dir = dir_of(out_manifest);
    const DatasetManifest m = rebase(read_manifest(a.manifest), in_dir, out_dir);
    pipeline::AugmentRequest req;
    req.variants_per_image = cfg.variants;
    req.master_seed = cfg.seed;
    req.output_dir = cfg.augment_dir;
    const auto jobs = pipeline::plan_augmentation(m, req);
    const DatasetManifest result = pipeline::augment_dataset(m, req);
    if (!a.dry_run) {
        parallel_for(jobs.size(), worker_count(cfg.threads), [&](std::size_t i) {
            const auto& job = jobs[i];
            const fs::path target = resolve_path(out_dir, job.output_path);
            fs::create_directories(target.parent_path());
            img::save_image(
                pipeline::render_augmentation(img::load_image(resolve_path(out_dir, job.source_path)), job), target);
        });
    }
    write_manifest(result, out_manifest);
    out << fmt::format("{} originals + {} augmented = {} records -> {}\n", m.size(), jobs.size(), result.size(),
                       out_manifest.string());
}

struct SplitArgs {
    std::string manifest, out;
};

void cmd_split(const RunConfig& cfg, const SplitArgs& a, std::ostream& out) {
    const DatasetManifest m = read_manifest(a.manifest);
    pipeline::SplitParams p = cfg.split;
    p.seed = cfg.seed;
    const DatasetManifest s = pipeline::stratified_split(m, p);
    const fs::path target = a.out.empty() ? dir_of(a.manifest) / "manifest.split.csv" : fs::path(a.out);
    write_manifest_from(s, a.manifest, target);
    const auto val = std::count_if(s.records.begin(), s.records.end(), [](auto& r) { return r.split == Split::Val; });
    out << fmt::format("train {} val {} -> {}\n", s.size() - static_cast<std::size_t>(val), val, target.string());
}

struct NtXentArgs {
    std::string embeddings, grad_out;
    bool normalize = false;
};

void cmd_ntxent(const RunConfig& cfg, const NtXentArgs& a, std::ostream& out) {
    const Tensor32 t = img::read_tensor(a.embeddings);
    loss::EmbeddingBatch batch{loss::Matrix::from_tensor(t), cfg.tau};
    const auto res = loss::nt_xent(batch, {.through_normalization = a.normalize});
    if (!a.grad_out.empty()) img::write_tensor(res.grad.to_tensor(), a.grad_out);
    out << json{{"loss", res.loss}, {"pairs", batch.pairs()}, {"tau", cfg.tau}}.dump() << "\n";
}

void cmd_weights(const std::vector<std::size_t>& counts, std::ostream& out) {
    const auto w = loss::class_weights(counts);
    out << json{{"counts", w.counts}, {"total", w.total}, {"weights", w.weights}}.dump() << "\n";
}

struct EvalArgs {
    std::string pred, truth, out, curves_dir;
};

void write_curve(const fs::path& path, const char* header, const std::vector<eval::CurvePoint>& pts) {
    std::string s = std::string(header) + "\n";
    for (const auto& p : pts) s += fmt::format("{},{}\n", p.x, p.y);
    write_text(path, s);
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
    const DatasetManifest m = read_manifest(a.truth);
    std::map<std::string, Label> truth;
    for (const auto& r : m.records) truth.emplace(r.path, r.label);

    std::vector<std::string> header;
    const auto rows = read_csv_rows(a.pred, "path,pred", header);
    const bool has_probs = header.size() > 2;
    if (has_probs) {
        require(header.size() == 2 + kLabelCount, "probability columns must be p_Normal,p_Controlled,p_Uncontrolled");
        for (std::size_t c = 0; c < kLabelCount; ++c)
            require(header[2 + c] == "p_" + std::string(to_string(kAllLabels[c])),
                    "probability columns must be p_Normal,p_Controlled,p_Uncontrolled");
    }
    std::vector<std::size_t> labels, preds;
    std::vector<double> probs;
    for (const auto& line : rows) {
        const auto f = csv::split_line(line);
        require(f.size() == header.size(), "prediction row has " + std::to_string(f.size()) + " fields: " + line);
        const auto it = truth.find(f[0]);
        require(it != truth.end(), "prediction for path not in the manifest: " + f[0]);
        labels.push_back(label_index(it->second));
        preds.push_back(label_index(parse_label(f[1])));
        for (std::size_t c = 2; c < f.size(); ++c) probs.push_back(parse_double(f[c], "probability"));
    }
    require(!labels.empty(), "no predictions in " + a.pred);

    const auto names = label_names();
    const auto cm = eval::confusion(labels, preds, kLabelCount);
    json j{{"samples", labels.size()}, {"classes", names}, {"confusion", cm.to_json()},
           {"metrics", eval::metrics(cm).to_json(names)}};
    if (has_probs) {
        const auto curves = eval::roc_pr(probs, labels, kLabelCount);
        json per = json::array();
        for (std::size_t c = 0; c < kLabelCount; ++c) {
            const auto& pc = curves.per_class[c];
            per.push_back({{"class", names[c]},
                           {"auc", pc ? json(pc->auc) : json(nullptr)},
                           {"average_precision", pc ? json(pc->average_precision) : json(nullptr)}});
            if (pc && !a.curves_dir.empty()) {
                write_curve(fs::path(a.curves_dir) / ("roc_" + names[c] + ".csv"), "fpr,tpr", pc->roc);
                write_curve(fs::path(a.curves_dir) / ("pr_" + names[c] + ".csv"), "recall,precision", pc->pr);
            }
        }
        j["curves"] = {{"per_class", per}, {"macro_auc", curves.macro_auc}, {"macro_ap", curves.macro_ap}};
        if (!a.curves_dir.empty()) {
            write_curve(fs::path(a.curves_dir) / "roc_macro.csv", "fpr,tpr", curves.macro_roc);
            write_curve(fs::path(a.curves_dir) / "pr_macro.csv", "recall,precision", curves.macro_pr);
        }
    }
    if (a.out.empty())
        out << j.dump(2) << "\n";
    else
        write_json(a.out, j);
}

struct StatsArgs {
    std::string test, groups, ratings, out;
};

void cmd_stats(const StatsArgs& a, std::ostream& out) {
    json j;
    if (a.test == "kappa") {
        require(!a.ratings.empty(), "stats kappa needs --ratings");
        std::vector<std::string> header;
        const auto rows = read_csv_rows(a.ratings, "rater_a,rater_b", header);
        std::vector<std::pair<std::string, std::string>> pairs;
        std::vector<std::string> cats;
        for (const auto& line : rows) {
            const auto f = csv::split_line(line);
            require(f.size() == 2, "ratings rows need two fields: " + line);
            pairs.emplace_back(f[0], f[1]);
            cats.push_back(f[0]);
            cats.push_back(f[1]);
        }
        std::sort(cats.begin(), cats.end());
        cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
        auto idx = [&](const std::string& s) {
            return static_cast<std::size_t>(std::lower_bound(cats.begin(), cats.end(), s) - cats.begin());
        };
        std::vector<std::size_t> ra, rb;
        for (const auto& [x, y] : pairs) {
            ra.push_back(idx(x));
            rb.push_back(idx(y));
        }
        j = eval::cohens_kappa(ra, rb, std::max<std::size_t>(cats.size(), 1)).to_json();
        j["categories"] = cats;
    } else {
        require(!a.groups.empty(), "stats " + a.test + " needs --groups");
        std::vector<std::string> header;
        const auto rows = read_csv_rows(a.groups, "group,value", header);
        std::vector<std::string> names;
        eval::Groups groups;
        for (const auto& line : rows) {
            const auto f = csv::split_line(line);
            require(f.size() == 2, "group rows need two fields: " + line);
            auto it = std::find(names.begin(), names.end(), f[0]);
            if (it == names.end()) {
                names.push_back(f[0]);
                groups.emplace_back();
                it = names.end() - 1;
            }
            groups[static_cast<std::size_t>(it - names.begin())].push_back(parse_double(f[1], "group"));
        }
        if (a.test == "kw") {
            j = eval::kruskal_wallis(groups).to_json();
        } else if (a.test == "anova") {
            j = eval::anova_oneway(groups).to_json();
        } else {
            j = json::array();
            for (const auto& r : eval::dunn_posthoc(groups, names)) j.push_back(r.to_json());
        }
    }
    if (a.out.empty())
        out << j.dump(2) << "\n";
    else
        write_json(a.out, j);
}

struct GradCamArgs {
    std::string features, grads, image, out, map;
    std::size_t height = 0, width = 0;
};

void cmd_gradcam(const RunConfig& cfg, const GradCamArgs& a, std::ostream& out) {
    require(!a.out.empty() || !a.map.empty(), "xai gradcam needs --out and/or --map");
    require(a.out.empty() || !a.image.empty(), "--out (overlay) needs --image");
    const xai::GradCamInput in{img::read_tensor(a.features), img::read_tensor(a.grads)};
    std::optional<ImageRGB8> image;
    if (!a.image.empty()) image = img::load_image(a.image);
    std::size_t h = a.height, w = a.width;
    if (image) {
        h = static_cast<std::size_t>(image->height());
        w = static_cast<std::size_t>(image->width());
    } else if (h == 0 || w == 0) {
        require(in.feature_maps.rank() == 3, "feature maps must be a rank-3 tensor [K,h,w]");
        h = in.feature_maps.dim(1);
        w = in.feature_maps.dim(2);
    }
    const xai::AttentionMap map = xai::grad_cam(in, h, w);
    if (!a.map.empty()) img::write_tensor(map.heatmap, a.map);
    if (!a.out.empty()) img::save_image(xai::overlay(*image, map, cfg.overlay_alpha), a.out);
    out << fmt::format("grad-cam {}x{}\n", h, w);
}

struct RegionsArgs {
    std::string maps, manifest, out;
};

void cmd_regions(const RegionsArgs& a, std::ostream& out) {
    const DatasetManifest m = read_manifest(a.manifest);
    std::vector<std::string> missing;
    for (const auto& r : m.records)
        if (!fs::is_regular_file(fs::path(a.maps) / map_file_name(r.path))) missing.push_back(map_file_name(r.path));
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 5); ++i) list += " " + missing[i];
        throw IoError(fmt::format("{} attention maps missing in {}:{}{}", missing.size(), a.maps, list,
                                  missing.size() > 5 ? " ..." : ""));
    }
    std::vector<xai::RegionalAttention> items;
    json per_image = json::array();
    std::optional<xai::RegionMasks> masks;
    for (const auto& r : m.records) {
        xai::AttentionMap map{img::read_tensor(fs::path(a.maps) / map_file_name(r.path))};
        require(map.heatmap.rank() == 2, "attention map for " + r.path + " is not rank 2");
        if (!masks || masks->height() != static_cast<int>(map.height()) ||
            masks->width() != static_cast<int>(map.width()))
            masks.emplace(static_cast<int>(map.height()), static_cast<int>(map.width()));
        auto ra = xai::regional_attention(map, *masks);
        ra.label = r.label;
        per_image.push_back({{"path", r.path},
                             {"label", std::string(to_string(r.label))},
                             {"iris", ra.iris()},
                             {"sclera", ra.sclera()},
                             {"peripheral", ra.peripheral()}});
        items.push_back(ra);
    }
    json j = xai::attention_cohort_report(items).to_json();
    j["images"] = per_image;
    write_json(a.out, j);
    out << fmt::format("regional attention for {} maps -> {}\n", items.size(), a.out);
}

struct ReportArgs {
    std::string artifacts, out, markdown, timestamp;
};

constexpr std::array<std::string_view, 3> kRequiredArtifacts{"scores.csv", "relabel.json", "manifest.csv"};
constexpr std::array<std::string_view, 3> kOptionalArtifacts{"metrics.json", "stats.json", "attention.json"};

json dataset_summary(const DatasetManifest& m) {
    json by_split = json::object(), by_label = json::object(), by_prov = json::object();
    json train_by_label = json::object(), val_by_label = json::object();
    for (Label l : kAllLabels) {
        by_label[std::string(to_string(l))] = 0;
        train_by_label[std::string(to_string(l))] = 0;
        val_by_label[std::string(to_string(l))] = 0;
    }
    for (Split s : {Split::Train, Split::Val, Split::Unassigned}) by_split[std::string(to_string(s))] = 0;
    for (Provenance p : {Provenance::Original, Provenance::Augmented}) by_prov[std::string(to_string(p))] = 0;
    for (const auto& r : m.records) {
        const std::string l(to_string(r.label));
        by_label[l] = by_label[l].get<std::size_t>() + 1;
        by_split[std::string(to_string(r.split))] = by_split[std::string(to_string(r.split))].get<std::size_t>() + 1;
        by_prov[std::string(to_string(r.provenance))] =
            by_prov[std::string(to_string(r.provenance))].get<std::size_t>() + 1;
        if (r.split == Split::Train) train_by_label[l] = train_by_label[l].get<std::size_t>() + 1;
        if (r.split == Split::Val) val_by_label[l] = val_by_label[l].get<std::size_t>() + 1;
    }
    return {{"records", m.size()},         {"by_split", by_split},           {"by_label", by_label},
            {"by_provenance", by_prov},    {"train_by_label", train_by_label}, {"val_by_label", val_by_label}};
}

std::string markdown_summary(const json& r) {
    std::string s = "# Pipeline report\n\n";
    s += fmt::format("Generated {} by {} {}.\n\n", r["generated_at"].get<std::string>(),
                     r["tool"]["name"].get<std::string>(), r["tool"]["version"].get<std::string>());
    const json& d = r["dataset"];
    s += "## Dataset\n\n| | Normal | Controlled | Uncontrolled | Total |\n|---|---|---|---|---|\n";
    auto row = [&](const char* name, const json& counts, std::size_t total) {
        s += fmt::format("| {} | {} | {} | {} | {} |\n", name, counts["Normal"].get<std::size_t>(),
                         counts["Controlled"].get<std::size_t>(), counts["Uncontrolled"].get<std::size_t>(), total);
    };
    row("all", d["by_label"], d["records"].get<std::size_t>());
    row("train", d["train_by_label"], d["by_split"]["train"].get<std::size_t>());
    row("val", d["val_by_label"], d["by_split"]["val"].get<std::size_t>());
    s += fmt::format("\nAugmented records: {}.\n\n", d["by_provenance"]["augmented"].get<std::size_t>());

    const json& q = r["quality"];
    s += fmt::format("## Quality scoring\n\n{} images scored; mean inflammation score {:.4f} (sd {:.4f}).\n\n",
                     q["images"].get<std::size_t>(), q["i_score_mean"].get<double>(), q["i_score_sd"].get<double>());
    const json& rl = r["relabel"];
    s += fmt::format("## Relabeling\n\n{} of {} labels changed ({:.1f}%).\n\n", rl["changes"].get<std::size_t>(),
                     rl["total"].get<std::size_t>(), 100.0 * rl["change_fraction"].get<double>());
    s += "| Class | n | mean i_score | sd |\n|---|---|---|---|\n";
    for (const auto& c : rl["per_class"])
        s += fmt::format("| {} | {} | {:.4f} | {:.4f} |\n", c["label"].get<std::string>(), c["n"].get<std::size_t>(),
                         c["mean_i_score"].get<double>(), c["sd_i_score"].get<double>());
    if (rl["anova"].is_object() && rl["anova"]["p_value"].is_number())
        s += fmt::format("\nOne-way ANOVA: F = {:.4f}, p = {:.3g}.\n", rl["anova"]["statistic"].is_number()
                                                                          ? rl["anova"]["statistic"].get<double>()
                                                                          : 0.0,
                         rl["anova"]["p_value"].get<double>());
    if (r["metrics"].is_object())
        s += fmt::format("\n## Classification\n\nMacro F1 {:.4f}, accuracy {:.4f}.\n",
                         r["metrics"]["metrics"]["macro_f1"].get<double>(),
                         r["metrics"]["metrics"]["accuracy"].get<double>());
    return s;
}

void cmd_report(const RunConfig& cfg, const ReportArgs& a, std::ostream& out) {
    const fs::path dir = a.artifacts;
    std::vector<std::string> missing;
    for (auto name : kRequiredArtifacts)
        if (!fs::is_regular_file(dir / name)) missing.emplace_back(name);
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw IoError("missing artifacts in " + dir.string() + ": " + list +
                      " (expected scores.csv, relabel.json, manifest.csv; optional metrics.json, stats.json, "
                      "attention.json)");
    }

    const quality::FeatureTable scores = quality::read_scores(dir / "scores.csv");
    std::vector<double> iscores;
    for (const auto& [path, f] : scores) iscores.push_back(f.i_score);
    const auto summary = eval::summarize(iscores);

    json relabel = read_json(dir / "relabel.json");
    require(relabel.is_object() && relabel.contains("changes") && relabel.contains("total"),
            "relabel.json is not a relabel report");
    relabel.erase("entries");

    json r;
    r["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    r["generated_at"] = report_timestamp(a.timestamp);
    r["config"] = cfg.to_json();
    r["config"].erase("threads");  // outputs do not depend on the worker count
    r["dataset"] = dataset_summary(read_manifest(dir / "manifest.csv"));
    r["quality"] = {{"images", summary.n}, {"i_score_mean", summary.mean}, {"i_score_sd", summary.sd}};
    r["relabel"] = relabel;
    r["metrics"] = fs::is_regular_file(dir / "metrics.json") ? read_json(dir / "metrics.json") : json(nullptr);
    r["statistics"] = json::array();
    if (fs::is_regular_file(dir / "stats.json")) {
        json st = read_json(dir / "stats.json");
        if (st.is_array())
            for (auto& e : st) r["statistics"].push_back(e);
        else
            r["statistics"].push_back(st);
    }
    r["attention"] = json(nullptr);
    if (fs::is_regular_file(dir / "attention.json")) {
        json at = read_json(dir / "attention.json");
        at.erase("images");
        r["attention"] = at;
    }
    std::vector<std::string> used;
    for (auto name : kRequiredArtifacts) used.emplace_back(name);
    for (auto name : kOptionalArtifacts)
        if (fs::is_regular_file(dir / name)) used.emplace_back(name);
    r["artifacts"] = used;

    write_json(a.out, r);
    if (!a.markdown.empty()) write_text(a.markdown, markdown_summary(r));
    out << fmt::format("report -> {}\n", a.out);
}

struct SynthArgs {
    std::string kind, out;
    std::size_t n = 60, per_class = 20;
    int width = 128, height = 96;
    double noise = 0.0;
};

void cmd_synth(const RunConfig& cfg, const SynthArgs& a, std::ostream& out) {
    const fs::path dir = a.out;
    if (a.kind == "images") {
        std::vector<Label> truth(a.n), seen(a.n);
        for (std::size_t i = 0; i < a.n; ++i) {
            truth[i] = label_from_index(i % kLabelCount);
            Rng rng(derive_seed(cfg.seed, "label-noise", i));
            seen[i] = rng.bernoulli(a.noise)
                          ? label_from_index((i + 1 + rng.index(kLabelCount - 1)) % kLabelCount)
                          : truth[i];
        }
        const DatasetManifest m = synth::synthetic_manifest(a.n, seen);
        fs::create_directories(dir / "img");
        parallel_for(a.n, worker_count(cfg.threads), [&](std::size_t i) {
            Rng rng(derive_seed(cfg.seed, "eye", i));
            img::save_image(synth::eye_image(truth[i], a.width, a.height, rng), dir / m.records[i].path);
        });
        write_manifest(m, dir / "manifest.csv");
        std::string t = "path,label\n";
        for (std::size_t i = 0; i < a.n; ++i) t += m.records[i].path + "," + std::string(to_string(truth[i])) + "\n";
        write_text(dir / "truth.csv", t);
        out << fmt::format("{} synthetic images -> {}\n", a.n, a.out);
    } else if (a.kind == "features") {
        const auto c = synth::feature_cohort(a.n, a.noise, cfg.seed);
        const DatasetManifest m = synth::synthetic_manifest(a.n, c.observed);
        std::vector<std::pair<std::string, quality::QualityFeatures>> rows;
        std::string t = "path,label\n";
        for (std::size_t i = 0; i < a.n; ++i) {
            rows.emplace_back(m.records[i].path, c.features[i]);
            t += m.records[i].path + "," + std::string(to_string(c.truth[i])) + "\n";
        }
        fs::create_directories(dir);
        std::ostringstream ss;
        quality::write_scores_csv(rows, ss);
        write_text(dir / "scores.csv", ss.str());
        write_manifest(m, dir / "manifest.csv");
        write_text(dir / "truth.csv", t);
        out << fmt::format("{} synthetic feature rows ({} noisy labels) -> {}\n", a.n, c.flipped, a.out);
    } else {
        const auto c = synth::attention_cohort(a.per_class, a.height, a.width, cfg.seed);
        std::vector<Label> labels;
        for (const auto& ra : c.attention) labels.push_back(*ra.label);
        const DatasetManifest m = synth::synthetic_manifest(labels.size(), labels);
        fs::create_directories(dir / "maps");
        for (std::size_t i = 0; i < labels.size(); ++i)
            img::write_tensor(c.maps[i].heatmap, dir / "maps" / map_file_name(m.records[i].path));
        write_manifest(m, dir / "manifest.csv");
        out << fmt::format("{} synthetic attention maps -> {}\n", labels.size(), a.out);
    }
}

std::string find_config_path(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return {};
}

std::vector<std::size_t> parse_counts(const std::string& s) {
    std::vector<std::size_t> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            const long long n = std::stoll(tok, &used);
            require(used == tok.size() && n >= 0, "");
            v.push_back(static_cast<std::size_t>(n));
        } catch (...) {
            throw ValidationError("bad class count '" + tok + "'");
        }
    }
    return v;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    if (const std::string path = find_config_path(args); !path.empty()) cfg = load_config(path);

    CLI::App app{"Anterior-segment screening toolkit: quality scoring, preprocessing, augmentation, loss "
                 "math, evaluation, attention auditing and statistics.",
                 std::string(kToolName)};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration (flags override it)");
    app.add_option("--threads", cfg.threads, "Worker threads (0 = ANTERISEG_THREADS or all cores)");
    app.set_version_flag("--version", std::string(kToolVersion));

    auto seed_opt = [&](CLI::App* sub) { sub->add_option("--seed", cfg.seed, "Master seed"); };

    // qc
    auto* qc = app.add_subcommand("qc", "Quality scoring and relabeling");
    qc->require_subcommand(1);
    QcScoreArgs score;
    int quality_tiles = cfg.quality.clahe.tiles_x;
    auto* qs = qc->add_subcommand("score", "Per-image biomarkers and inflammation score (CSV)");
    qs->add_option("--manifest", score.manifest, "Input manifest")->required();
    qs->add_option("--out", score.out, "Output scores CSV")->required();
    qs->add_option("--clip", cfg.quality.clahe.clip_limit, "CLAHE clip limit");
    auto* qs_tiles = qs->add_option("--tiles", quality_tiles, "CLAHE tiles per axis");
    qs->add_option("--canny-sigma", cfg.quality.canny.gaussian_sigma, "Canny Gaussian sigma");
    qs->add_option("--canny-low", cfg.quality.canny.low_threshold, "Canny low threshold");
    qs->add_option("--canny-high", cfg.quality.canny.high_threshold, "Canny high threshold");
    qs->add_option("--threshold", cfg.quality.specular_threshold, "Specular threshold");
    QcRelabelArgs rel;
    auto* qr = qc->add_subcommand("relabel", "k-means relabeling from a scores CSV");
    qr->add_option("--manifest", rel.manifest, "Input manifest")->required();
    qr->add_option("--scores", rel.scores, "Scores CSV from qc score")->required();
    qr->add_option("--out-manifest", rel.out_manifest, "Corrected manifest")->required();
    qr->add_option("--report", rel.report, "Relabel report JSON")->required();
    qr->add_option("--model", rel.model_out, "Write the fitted cluster model");
    seed_opt(qr);

    // prep
    auto* prep = app.add_subcommand("prep", "Specular removal and CLAHE");
    prep->require_subcommand(1);
    PrepArgs prep_args;
    int prep_tiles = cfg.prep.clahe.tiles_x;
    auto* pr = prep->add_subcommand("run", "Preprocess one image or every image of a manifest");
    pr->add_option("--manifest", prep_args.manifest, "Input manifest");
    pr->add_option("--out-dir", prep_args.out_dir, "Output directory (mirrors manifest paths)");
    pr->add_option("--input", prep_args.input, "Single input image");
    pr->add_option("--output", prep_args.output, "Single output PNG");
    pr->add_option("--threshold", cfg.prep.specular_threshold, "Specular threshold on max(R,G,B)");
    pr->add_option("--dilate", cfg.prep.dilate_k, "Mask dilation kernel (odd)");
    pr->add_option("--radius", cfg.prep.inpaint_radius, "Inpainting radius");
    pr->add_option("--clip", cfg.prep.clahe.clip_limit, "CLAHE clip limit");
    auto* pr_tiles = pr->add_option("--tiles", prep_tiles, "CLAHE tiles per axis");

    // augment
    AugmentArgs aug;
    auto* au = app.add_subcommand("augment", "Offline augmentation of train originals");
    au->add_option("--manifest", aug.manifest, "Split manifest")->required();
    au->add_option("--out-manifest", aug.out_manifest, "Output manifest");
    au->add_option("--variants", cfg.variants, "Variants per original");
    au->add_option("--output-dir", cfg.augment_dir, "Image directory relative to the output manifest");
    au->add_flag("--dry-run", aug.dry_run, "Write the manifest only");
    seed_opt(au);

    // split
    SplitArgs split;
    auto* sp = app.add_subcommand("split", "Stratified train/validation split");
    sp->add_option("--manifest", split.manifest, "Input manifest")->required();
    sp->add_option("--out", split.out, "Output manifest");
    sp->add_option("--train-frac", cfg.split.train_frac, "Training fraction");
    sp->add_flag("--group-by-patient", cfg.split.group_by_patient, "Keep each patient in one split");
    seed_opt(sp);

    // loss
    auto* lo = app.add_subcommand("loss", "Loss mathematics");
    lo->require_subcommand(1);
    NtXentArgs nx;
    auto* ln = lo->add_subcommand("ntxent", "NT-Xent loss and gradient of a [2N,d] tensor");
    ln->add_option("--embeddings", nx.embeddings, "Embedding tensor (.atns)")->required();
    ln->add_option("--tau", cfg.tau, "Temperature");
    ln->add_option("--grad", nx.grad_out, "Write the gradient tensor");
    ln->add_flag("--normalize", nx.normalize, "Normalize rows internally");
    std::string counts;
    auto* lw = lo->add_subcommand("weights", "Inverse-frequency class weights");
    lw->add_option("--counts", counts, "Comma-separated class counts")->required();

    // eval
    EvalArgs ev;
    auto* evc = app.add_subcommand("eval", "Classification metrics and curves");
    evc->add_option("--pred", ev.pred, "Predictions CSV: path,pred[,p_Normal,p_Controlled,p_Uncontrolled]")
        ->required();
    evc->add_option("--truth", ev.truth, "Manifest with true labels")->required();
    evc->add_option("--out", ev.out, "Metrics JSON (stdout if omitted)");
    evc->add_option("--curves-dir", ev.curves_dir, "Directory for ROC/PR CSVs");

    // stats
    StatsArgs st;
    auto* stc = app.add_subcommand("stats", "Hypothesis tests");
    stc->add_option("test", st.test, "kw | anova | dunn | kappa")
        ->required()
        ->check(CLI::IsMember({"kw", "anova", "dunn", "kappa"}));
    stc->add_option("--groups", st.groups, "CSV: group,value");
    stc->add_option("--ratings", st.ratings, "CSV: rater_a,rater_b");
    stc->add_option("--out", st.out, "Result JSON (stdout if omitted)");

    // xai
    auto* xa = app.add_subcommand("xai", "Attention maps and regional analysis");
    xa->require_subcommand(1);
    GradCamArgs gc;
    auto* xg = xa->add_subcommand("gradcam", "Grad-CAM from serialized feature maps and gradients");
    xg->add_option("--features", gc.features, "Feature maps [K,h,w] (.atns)")->required();
    xg->add_option("--grads", gc.grads, "Gradients [K,h,w] (.atns)")->required();
    xg->add_option("--image", gc.image, "Image to overlay; sets the output size");
    xg->add_option("--out", gc.out, "Overlay PNG");
    xg->add_option("--map", gc.map, "Heatmap tensor (.atns)");
    xg->add_option("--height", gc.height, "Output height without --image");
    xg->add_option("--width", gc.width, "Output width without --image");
    xg->add_option("--alpha", cfg.overlay_alpha, "Overlay opacity");
    RegionsArgs rg;
    auto* xr = xa->add_subcommand("regions", "Regional attention by class with Kruskal-Wallis and Dunn tests");
    xr->add_option("--maps", rg.maps, "Directory of heatmaps named like img_00001.atns")->required();
    xr->add_option("--manifest", rg.manifest, "Manifest with class labels")->required();
    xr->add_option("--out", rg.out, "Report JSON")->required();

    // report
    ReportArgs rp;
    auto* rpc = app.add_subcommand("report", "Consolidated JSON and Markdown report");
    rpc->add_option("--artifacts", rp.artifacts, "Artifacts directory")->required();
    rpc->add_option("--out", rp.out, "Report JSON")->required();
    rpc->add_option("--markdown", rp.markdown, "Markdown summary");
    rpc->add_option("--timestamp", rp.timestamp, "generated_at value (default: SOURCE_DATE_EPOCH or now)");

    // synth
    SynthArgs sy;
    auto* syc = app.add_subcommand("synth", "Synthetic cohorts with known ground truth");
    syc->add_option("kind", sy.kind, "images | features | attention")
        ->required()
        ->check(CLI::IsMember({"images", "features", "attention"}));
    syc->add_option("--out", sy.out, "Output directory")->required();
    syc->add_option("--n", sy.n, "Cohort size (images, features)");
    syc->add_option("--per-class", sy.per_class, "Maps per class (attention)");
    syc->add_option("--width", sy.width, "Frame width");
    syc->add_option("--height", sy.height, "Frame height");
    syc->add_option("--noise", sy.noise, "Injected label-noise rate");
    seed_opt(syc);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        if (!args.empty()) err << "error: " << e.what() << "\n\n";
        err << app.help();
        return 1;
    }

    if (qs_tiles->count()) cfg.quality.clahe.tiles_x = cfg.quality.clahe.tiles_y = quality_tiles;
    if (pr_tiles->count()) cfg.prep.clahe.tiles_x = cfg.prep.clahe.tiles_y = prep_tiles;

    if (qs->parsed()) cmd_qc_score(cfg, score, out);
    else if (qr->parsed()) cmd_qc_relabel(cfg, rel, out);
    else if (pr->parsed()) cmd_prep(cfg, prep_args, out);
    else if (au->parsed()) cmd_augment(cfg, aug, out);
    else if (sp->parsed()) cmd_split(cfg, split, out);
    else if (ln->parsed()) cmd_ntxent(cfg, nx, out);
    else if (lw->parsed()) cmd_weights(parse_counts(counts), out);
    else if (evc->parsed()) cmd_eval(ev, out);
    else if (stc->parsed()) cmd_stats(st, out);
    else if (xg->parsed()) cmd_gradcam(cfg, gc, out);
    else if (xr->parsed()) cmd_regions(rg, out);
    else if (rpc->parsed()) cmd_report(cfg, rp, out);
    else if (syc->parsed()) cmd_synth(cfg, sy, out);
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return run(args, out, err);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace anteriseg::cli
