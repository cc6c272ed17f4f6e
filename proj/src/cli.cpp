#include "capypipe/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "capypipe/audio.hpp"
#include "capypipe/config.hpp"
#include "capypipe/curation.hpp"
#include "capypipe/errors.hpp"
#include "capypipe/image.hpp"
#include "capypipe/manifest.hpp"
#include "capypipe/metrics.hpp"
#include "capypipe/parallel.hpp"
#include "capypipe/text.hpp"
#include "capypipe/tokens.hpp"
#include "capypipe/video.hpp"

namespace capypipe {

namespace {

namespace fs = std::filesystem;

constexpr const char* kConfigEnv = "CAPYPIPE_CONFIG";

std::string dump(const Json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

// Flags shared by every subcommand.
struct CommonArgs {
  std::string manifest;
  std::string out;
  std::string report;
  std::string config;
  int jobs = default_jobs();
};

// Pipeline knobs that can be overridden on the command line. Unset values
// fall back to the config file, then to built-in defaults.
struct ConfigFlags {
  std::optional<double> wer_threshold;
  std::optional<double> s2tt_threshold;
  std::optional<std::string> dedup_normalization;
  std::optional<double> cluster_threshold;
  std::optional<int> shingle_n;
  std::optional<int> max_slices;
  std::optional<int> cell_size;
  std::optional<double> fps;
  std::optional<int> frame_cap;
};

template <typename T>
std::string default_str(T value) {
  std::ostringstream s;
  s << value;
  return s.str();
}

void add_common(CLI::App* cmd, CommonArgs& common) {
  cmd->add_option("--manifest", common.manifest, "Input manifest (.jsonl)");
  cmd->add_option("--out", common.out, "Output path (default: stdout)");
  cmd->add_option("--report", common.report, "Report output path or directory");
  cmd->add_option("--config", common.config,
                  std::string("Config JSON (default: $") + kConfigEnv + ")");
  cmd->add_option("--jobs", common.jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->default_str(default_str(default_jobs()));
}

void add_tiling_flags(CLI::App* cmd, ConfigFlags& f) {
  const PipelineConfig d;
  cmd->add_option("--max-slices", f.max_slices, "Maximum sub-images per image")
      ->default_str(default_str(d.max_slices));
  cmd->add_option("--cell-size", f.cell_size, "Sub-image edge in pixels")
      ->default_str(default_str(d.cell_size));
}

void add_video_flags(CLI::App* cmd, ConfigFlags& f) {
  const PipelineConfig d;
  cmd->add_option("--fps", f.fps, "Video sampling rate (frames/s)")
      ->default_str(default_str(d.video_fps));
  cmd->add_option("--cap", f.frame_cap, "Maximum frames per video")
      ->default_str(default_str(d.video_frame_cap));
}

void add_filter_flags(CLI::App* cmd, ConfigFlags& f) {
  const PipelineConfig d;
  cmd->add_option("--wer-threshold", f.wer_threshold,
                  "Drop ASR samples with WER/CER above this")
      ->default_str(default_str(d.wer_threshold));
  cmd->add_option("--s2tt-threshold", f.s2tt_threshold,
                  "Drop S2TT samples with similarity below this")
      ->default_str(default_str(d.s2tt_similarity_threshold));
  cmd->add_option("--dedup-normalization", f.dedup_normalization,
                  "Text normalization for exact dedup")
      ->check(CLI::IsMember({"none", "whitespace", "full"}))
      ->default_str(std::string(to_string(d.dedup_normalization)));
  cmd->add_option("--cluster-threshold", f.cluster_threshold,
                  "Jaccard similarity that merges near-duplicates")
      ->default_str(default_str(d.cluster_jaccard_threshold));
  cmd->add_option("--shingle-n", f.shingle_n, "Character shingle size")
      ->default_str(default_str(d.cluster_shingle_n));
}

PipelineConfig resolve_config(const CommonArgs& common, const ConfigFlags& f) {
  PipelineConfig c;
  std::string path = common.config;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env) {
      path = env;
    }
  }
  if (!path.empty()) c = load_config(path, c);
  if (f.wer_threshold) c.wer_threshold = *f.wer_threshold;
  if (f.s2tt_threshold) c.s2tt_similarity_threshold = *f.s2tt_threshold;
  if (f.dedup_normalization) {
    c.dedup_normalization = parse_normalization(*f.dedup_normalization);
  }
  if (f.cluster_threshold) c.cluster_jaccard_threshold = *f.cluster_threshold;
  if (f.shingle_n) c.cluster_shingle_n = *f.shingle_n;
  if (f.max_slices) c.max_slices = *f.max_slices;
  if (f.cell_size) c.cell_size = *f.cell_size;
  if (f.fps) c.video_fps = *f.fps;
  if (f.frame_cap) c.video_frame_cap = *f.frame_cap;
  if (auto v = validate(c); !v.empty()) throw ValidationError(v.front());
  return c;
}

// Writes to --out when given, otherwise to the dispatch stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path) {
    if (path.empty()) {
      stream_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw IoError("cannot write '" + path + "'");
    stream_ = file_.get();
  }
  std::ostream& operator*() { return *stream_; }
  void line(const Json& j) { *stream_ << dump(j) << '\n'; }
  void close() {
    stream_->flush();
    if (!*stream_) throw IoError("error writing '" + (path_.empty() ? "stdout" : path_) + "'");
  }

 private:
  std::string path_;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

std::vector<SampleRecord> load_manifest(const CommonArgs& common,
                                        std::ostream& err) {
  if (common.manifest.empty()) throw ValidationError("--manifest is required");
  auto records = read_manifest(common.manifest);
  err << "read " << records.size() << " records from " << common.manifest << '\n';
  return records;
}

Json plan_json(const TilePlan& plan, int width, int height) {
  const ResizeGeometry g = resize_geometry(width, height, plan);
  return Json{{"rows", plan.grid_rows},
              {"cols", plan.grid_cols},
              {"thumbnail", plan.thumbnail},
              {"cell_size", plan.cell_size},
              {"resized_width", plan.resized_width},
              {"resized_height", plan.resized_height},
              {"scaled_width", g.scaled_width},
              {"scaled_height", g.scaled_height},
              {"pad_x", g.pad_x},
              {"pad_y", g.pad_y},
              {"score", plan.score},
              {"units", plan.cells() + (plan.thumbnail ? 1 : 0)},
              {"tokens", image_budget(plan).total()}};
}

Json profile_json(const AudioProfile& p) {
  return Json{{"source_rate", p.source_rate}, {"duration", p.duration},
              {"resampled_len", p.resampled_len}, {"n_frames", p.n_frames},
              {"n_tokens", p.n_tokens}, {"rms", p.rms}};
}

Json schedule_json(const FrameSchedule& s) {
  Json stamps = Json::array();
  for (double t : s.timestamps) stamps.push_back(t);
  return stamps;
}

std::vector<std::pair<std::string, std::string>> read_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 'id<TAB>text'");
    }
    rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return rows;
}

// ---------------------------------------------------------------- commands

int run_plan_tiles(const CommonArgs& common, const ConfigFlags& flags,
                   std::optional<int> width, std::optional<int> height,
                   const std::string& ppm, const std::string& tiles_dir,
                   std::ostream& out, std::ostream& err) {
  const PipelineConfig config = resolve_config(common, flags);
  Sink sink(common.out, out);

  if (!common.manifest.empty()) {
    for (const auto& record : load_manifest(common, err)) {
      for (size_t i = 0; i < record.media.size(); ++i) {
        const MediaRef& m = record.media[i];
        if (m.kind != MediaKind::Image) continue;
        if (!m.width || !m.height) {
          throw ValidationError("record '" + record.id + "' image '" + m.path +
                                "' lacks width/height");
        }
        const TilePlan plan =
            plan_tiles(*m.width, *m.height, config.max_slices, config.cell_size);
        Json row = Json{{"id", record.id}, {"media_index", i}, {"path", m.path}};
        row.update(plan_json(plan, *m.width, *m.height));
        sink.line(row);
      }
    }
    sink.close();
    return kExitOk;
  }

  std::optional<PixelImage> image;
  if (!ppm.empty()) {
    image = read_ppm(ppm);
    width = image->width;
    height = image->height;
  }
  if (!width || !height) {
    throw ValidationError("plan-tiles needs --width/--height, --ppm or --manifest");
  }
  const TilePlan plan = plan_tiles(*width, *height, config.max_slices, config.cell_size);
  Json result = plan_json(plan, *width, *height);

  if (!tiles_dir.empty()) {
    if (!image) throw ValidationError("--tiles-dir requires --ppm");
    fs::create_directories(tiles_dir);
    const SlicedImage sliced = slice_image(*image, plan);
    Json files = Json::array();
    for (size_t i = 0; i < sliced.cells.size(); ++i) {
      const fs::path p = fs::path(tiles_dir) / ("cell_" + std::to_string(i) + ".ppm");
      write_ppm(sliced.cells[i], p);
      files.push_back(p.string());
    }
    if (sliced.thumbnail) {
      const fs::path p = fs::path(tiles_dir) / "thumbnail.ppm";
      write_ppm(*sliced.thumbnail, p);
      files.push_back(p.string());
    }
    result["files"] = std::move(files);
  }
  sink.line(result);
  sink.close();
  return kExitOk;
}

int run_budget(const CommonArgs& common, const ConfigFlags& flags,
               std::ostream& out, std::ostream& err) {
  const PipelineConfig config = resolve_config(common, flags);
  const auto records = load_manifest(common, err);

  std::vector<Json> rows(records.size());
  parallel_for(records.size(), common.jobs, [&](size_t r) {
    const SampleRecord& record = records[r];
    std::vector<std::optional<MediaPlan>> plans;
    for (const MediaRef& m : record.media) {
      switch (m.kind) {
        case MediaKind::Image:
          if (m.width && m.height) {
            plans.emplace_back(plan_tiles(*m.width, *m.height, config.max_slices,
                                          config.cell_size));
          } else {
            plans.emplace_back(std::nullopt);
          }
          break;
        case MediaKind::Audio:
          if (m.duration) {
            AudioProfile p;
            p.duration = *m.duration;
            p.n_frames = audio_frames(*m.duration);
            p.n_tokens = audio_budget(*m.duration);
            plans.emplace_back(std::move(p));
          } else {
            plans.emplace_back(profile(m.path));
          }
          break;
        case MediaKind::Video:
          if (m.duration) {
            plans.emplace_back(schedule(*m.duration, config.video_fps,
                                        config.video_frame_cap));
          } else {
            plans.emplace_back(std::nullopt);
          }
          break;
      }
    }
    const TokenLayout layout = assemble_layout(record, plans);
    Json row = Json{{"id", record.id}};
    row.update(layout.to_json());
    rows[r] = std::move(row);
  });

  Sink sink(common.out, out);
  for (const auto& row : rows) sink.line(row);
  sink.close();
  return kExitOk;
}

int run_audio_profile(const CommonArgs& common, const std::string& wav,
                      const std::string& mel_out, std::ostream& out,
                      std::ostream& err) {
  Sink sink(common.out, out);
  if (!common.manifest.empty()) {
    for (const auto& record : load_manifest(common, err)) {
      for (size_t i = 0; i < record.media.size(); ++i) {
        const MediaRef& m = record.media[i];
        if (m.kind != MediaKind::Audio) continue;
        Json row = Json{{"id", record.id}, {"media_index", i}, {"path", m.path}};
        row.update(profile_json(profile(m.path)));
        sink.line(row);
      }
    }
    sink.close();
    return kExitOk;
  }
  if (wav.empty()) throw ValidationError("audio-profile needs --wav or --manifest");
  const AudioProfile p = profile(wav, !mel_out.empty());
  Json row = profile_json(p);
  if (!mel_out.empty() && p.mel) {
    write_mel(*p.mel, mel_out);
    row["mel_frames"] = p.mel->n_frames;
    row["mel_path"] = mel_out;
  }
  sink.line(row);
  sink.close();
  return kExitOk;
}

int run_video_schedule(const CommonArgs& common, const ConfigFlags& flags,
                       std::optional<double> duration, std::ostream& out,
                       std::ostream& err) {
  const PipelineConfig config = resolve_config(common, flags);
  Sink sink(common.out, out);
  if (!common.manifest.empty()) {
    for (const auto& record : load_manifest(common, err)) {
      for (size_t i = 0; i < record.media.size(); ++i) {
        const MediaRef& m = record.media[i];
        if (m.kind != MediaKind::Video) continue;
        if (!m.duration) {
          throw ValidationError("record '" + record.id + "' video '" + m.path +
                                "' lacks duration");
        }
        const FrameSchedule s =
            schedule(*m.duration, config.video_fps, config.video_frame_cap);
        sink.line(Json{{"id", record.id},
                       {"media_index", i},
                       {"path", m.path},
                       {"truncated", s.truncated},
                       {"timestamps", schedule_json(s)}});
      }
    }
    sink.close();
    return kExitOk;
  }
  if (!duration) throw ValidationError("video-schedule needs --duration or --manifest");
  sink.line(schedule_json(schedule(*duration, config.video_fps, config.video_frame_cap)));
  sink.close();
  return kExitOk;
}

int run_metrics(const CommonArgs& common, const std::string& kind,
                const std::string& ref_path, const std::string& hyp_path, int n,
                std::ostream& out) {
  const auto refs = read_tsv(ref_path);
  const auto hyps_list = read_tsv(hyp_path);
  std::map<std::string, std::string> hyps;
  for (const auto& [id, text] : hyps_list) {
    if (!hyps.emplace(id, text).second) {
      throw ValidationError(hyp_path + ": duplicate id '" + id + "'");
    }
  }
  std::vector<const std::string*> paired(refs.size());
  for (size_t i = 0; i < refs.size(); ++i) {
    auto it = hyps.find(refs[i].first);
    if (it == hyps.end()) {
      throw ValidationError("id '" + refs[i].first + "' missing from " + hyp_path);
    }
    paired[i] = &it->second;
  }

  std::vector<Json> rows(refs.size());
  Json summary = Json{{"summary", true}, {"pairs", refs.size()}};
  if (kind == "wer" || kind == "cer") {
    std::vector<EditSummary> edits(refs.size());
    parallel_for(refs.size(), common.jobs, [&](size_t i) {
      edits[i] = kind == "wer" ? wer(refs[i].second, *paired[i])
                               : cer(refs[i].second, *paired[i]);
    });
    size_t s = 0, ins = 0, del = 0, len = 0;
    for (size_t i = 0; i < refs.size(); ++i) {
      const EditSummary& e = edits[i];
      rows[i] = Json{{"id", refs[i].first}, {"substitutions", e.substitutions},
                     {"insertions", e.insertions}, {"deletions", e.deletions},
                     {"ref_len", e.ref_len}, {"rate", e.rate}};
      s += e.substitutions;
      ins += e.insertions;
      del += e.deletions;
      len += e.ref_len;
    }
    summary["substitutions"] = s;
    summary["insertions"] = ins;
    summary["deletions"] = del;
    summary["ref_len"] = len;
    summary["rate"] = len == 0 ? 0.0 : static_cast<double>(s + ins + del) / len;
  } else if (kind == "bleu") {
    std::vector<TokenList> ref_tokens(refs.size());
    std::vector<TokenList> hyp_tokens(refs.size());
    for (size_t i = 0; i < refs.size(); ++i) {
      ref_tokens[i] = split_words(normalize_text(refs[i].second));
      hyp_tokens[i] = split_words(normalize_text(*paired[i]));
      rows[i] = Json{{"id", refs[i].first},
                     {"bleu", bleu({ref_tokens[i]}, {hyp_tokens[i]})}};
    }
    summary["bleu"] = bleu(ref_tokens, hyp_tokens);
  } else {
    std::vector<double> sims(refs.size());
    parallel_for(refs.size(), common.jobs, [&](size_t i) {
      sims[i] = ngram_cosine(refs[i].second, *paired[i], n);
    });
    double total = 0.0;
    for (size_t i = 0; i < refs.size(); ++i) {
      rows[i] = Json{{"id", refs[i].first}, {"similarity", sims[i]}};
      total += sims[i];
    }
    summary["n"] = n;
    summary["mean_similarity"] = refs.empty() ? 0.0 : total / refs.size();
  }

  Sink sink(common.out, out);
  for (const auto& row : rows) sink.line(row);
  sink.line(summary);
  sink.close();
  return kExitOk;
}

int run_filter(const CommonArgs& common, const ConfigFlags& flags,
               const std::string& dropped_path, std::ostream& out,
               std::ostream& err) {
  const PipelineConfig config = resolve_config(common, flags);
  if (common.out.empty()) throw ValidationError("filter requires --out");
  const auto records = load_manifest(common, err);
  const PipelineResult result = run_pipeline(records, config, common.jobs);

  write_manifest(result.kept, common.out);
  std::string dropped = dropped_path;
  if (dropped.empty()) {
    fs::path p(common.out);
    dropped = (p.parent_path() / (p.stem().string() + ".dropped.jsonl")).string();
  }
  write_manifest(result.dropped, dropped);

  Json summary = Json::array();
  for (size_t i = 0; i < result.reports.size(); ++i) {
    const Json report = result.reports[i].to_json();
    summary.push_back(report);
    if (!common.report.empty()) {
      fs::create_directories(common.report);
      const fs::path p = fs::path(common.report) /
                         (std::to_string(i + 1) + "-" + result.reports[i].stage + ".json");
      std::ofstream f(p, std::ios::binary | std::ios::trunc);
      if (!f) throw IoError("cannot write report '" + p.string() + "'");
      f << report.dump(2) << '\n';
      if (!f) throw IoError("error writing report '" + p.string() + "'");
    }
  }
  err << "kept " << result.kept.size() << ", dropped " << result.dropped.size() << '\n';
  out << dump(Json{{"kept", result.kept.size()},
                   {"dropped", result.dropped.size()},
                   {"reports", std::move(summary)}})
      << '\n';
  return kExitOk;
}

int run_stats(const CommonArgs& common, const std::string& format,
              std::ostream& out, std::ostream& err) {
  const auto rows = stats(load_manifest(common, err));
  Sink sink(common.out, out);
  if (format == "table") {
    *sink << format_stats_table(rows);
  } else {
    for (const auto& row : to_json(rows)) sink.line(row);
  }
  sink.close();
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{
      "capypipe: multimodal data curation and token budgeting.\n"
      "Config precedence: command-line flags > --config file (or $CAPYPIPE_CONFIG) "
      "> built-in defaults.",
      "capypipe"};
  app.require_subcommand(1);
  app.allow_extras(false);

  CommonArgs common;
  ConfigFlags flags;
  std::function<int()> action;

  // plan-tiles
  std::optional<int> width, height;
  std::string ppm, tiles_dir;
  auto* plan_cmd = app.add_subcommand("plan-tiles", "Choose the sub-image grid for an image");
  add_common(plan_cmd, common);
  add_tiling_flags(plan_cmd, flags);
  plan_cmd->add_option("--width", width, "Image width in pixels");
  plan_cmd->add_option("--height", height, "Image height in pixels");
  plan_cmd->add_option("--ppm", ppm, "Binary PPM image to plan (and slice)");
  plan_cmd->add_option("--tiles-dir", tiles_dir, "Write cells and thumbnail as PPM here");
  plan_cmd->callback([&] {
    action = [&] {
      return run_plan_tiles(common, flags, width, height, ppm, tiles_dir, out, err);
    };
  });

  // budget
  auto* budget_cmd = app.add_subcommand("budget", "Token budget per manifest record");
  add_common(budget_cmd, common);
  add_tiling_flags(budget_cmd, flags);
  add_video_flags(budget_cmd, flags);
  budget_cmd->callback([&] {
    action = [&] { return run_budget(common, flags, out, err); };
  });

  // audio-profile
  std::string wav, mel_out;
  auto* audio_cmd = app.add_subcommand("audio-profile", "Decode, resample and profile audio");
  add_common(audio_cmd, common);
  audio_cmd->add_option("--wav", wav, "PCM16 WAV file");
  audio_cmd->add_option("--mel-out", mel_out, "Write log-mel features (MELS format)");
  audio_cmd->callback([&] {
    action = [&] { return run_audio_profile(common, wav, mel_out, out, err); };
  });

  // video-schedule
  std::optional<double> duration;
  auto* video_cmd = app.add_subcommand("video-schedule", "Frame timestamps for a video");
  add_common(video_cmd, common);
  add_video_flags(video_cmd, flags);
  video_cmd->add_option("--duration", duration, "Video duration in seconds");
  video_cmd->callback([&] {
    action = [&] { return run_video_schedule(common, flags, duration, out, err); };
  });

  // metrics
  std::string metric_kind, ref_path, hyp_path;
  int ngram = 3;
  auto* metrics_cmd = app.add_subcommand("metrics", "WER/CER/BLEU/similarity over TSV pairs");
  add_common(metrics_cmd, common);
  metrics_cmd->add_option("kind", metric_kind, "wer | cer | bleu | sim")
      ->required()
      ->check(CLI::IsMember({"wer", "cer", "bleu", "sim"}));
  metrics_cmd->add_option("--ref", ref_path, "Reference TSV (id<TAB>text)")->required();
  metrics_cmd->add_option("--hyp", hyp_path, "Hypothesis TSV (id<TAB>text)")->required();
  metrics_cmd->add_option("--n", ngram, "Character n-gram order for sim")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  metrics_cmd->callback([&] {
    action = [&] { return run_metrics(common, metric_kind, ref_path, hyp_path, ngram, out); };
  });

  // filter
  std::string dropped_path;
  auto* filter_cmd = app.add_subcommand("filter", "Run dedup, clustering and ASR/S2TT filters");
  add_common(filter_cmd, common);
  add_filter_flags(filter_cmd, flags);
  filter_cmd->add_option("--dropped", dropped_path,
                         "Dropped-records manifest (default: <out>.dropped.jsonl)");
  filter_cmd->callback([&] {
    action = [&] { return run_filter(common, flags, dropped_path, out, err); };
  });

  // stats
  std::string format = "json";
  auto* stats_cmd = app.add_subcommand("stats", "Counts per scenario, language and source");
  add_common(stats_cmd, common);
  stats_cmd->add_option("--format", format, "json | table")
      ->check(CLI::IsMember({"json", "table"}))
      ->capture_default_str();
  stats_cmd->callback([&] {
    action = [&] { return run_stats(common, format, out, err); };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    return action ? action() : kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace capypipe
