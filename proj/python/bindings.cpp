#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "capypipe/audio.hpp"
#include "capypipe/cli.hpp"
#include "capypipe/config.hpp"
#include "capypipe/curation.hpp"
#include "capypipe/errors.hpp"
#include "capypipe/image.hpp"
#include "capypipe/manifest.hpp"
#include "capypipe/metrics.hpp"
#include "capypipe/text.hpp"
#include "capypipe/tokens.hpp"
#include "capypipe/video.hpp"

#include <sstream>

namespace py = pybind11;
using namespace capypipe;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::dict plan_dict(const TilePlan& p) {
  py::dict d;
  d["rows"] = p.grid_rows;
  d["cols"] = p.grid_cols;
  d["thumbnail"] = p.thumbnail;
  d["cell_size"] = p.cell_size;
  d["resized_width"] = p.resized_width;
  d["resized_height"] = p.resized_height;
  d["score"] = p.score;
  return d;
}

TilePlan plan_from(int width, int height, int max_slices, int cell_size) {
  return plan_tiles(width, height, max_slices, cell_size);
}

py::list layout_list(const TokenLayout& layout) {
  py::list out;
  for (const Segment& s : layout.segments()) {
    out.append(py::make_tuple(std::string(to_string(s.kind)), s.count));
  }
  return out;
}

py::dict edit_dict(const EditSummary& e) {
  py::dict d;
  d["substitutions"] = e.substitutions;
  d["insertions"] = e.insertions;
  d["deletions"] = e.deletions;
  d["ref_len"] = e.ref_len;
  d["rate"] = e.rate;
  return d;
}

EmbeddingGrid grid_from(const FloatArray& a) {
  if (a.ndim() != 3) throw py::value_error("expected a (rows, cols, dim) array");
  EmbeddingGrid g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                  static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), g.values.begin());
  return g;
}

FloatArray grid_to(const EmbeddingGrid& g) {
  FloatArray a({g.rows, g.cols, g.dim});
  std::copy(g.values.begin(), g.values.end(), a.mutable_data());
  return a;
}

std::span<const float> span_of(const FloatArray& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D sample array");
  return {a.data(), static_cast<size_t>(a.size())};
}

py::dict profile_dict(const AudioProfile& p) {
  py::dict d;
  d["source_rate"] = p.source_rate;
  d["duration"] = p.duration;
  d["resampled_len"] = p.resampled_len;
  d["n_frames"] = p.n_frames;
  d["n_tokens"] = p.n_tokens;
  d["rms"] = p.rms;
  return d;
}

}  // namespace

PYBIND11_MODULE(_capypipe, m) {
  m.doc() = "Multimodal data curation and token budgeting.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  // image
  m.def("plan_tiles",
        [](int w, int h, int max_slices, int cell_size) {
          return plan_dict(plan_from(w, h, max_slices, cell_size));
        },
        py::arg("width"), py::arg("height"), py::arg("max_slices") = 9,
        py::arg("cell_size") = 448);
  m.def("resize_geometry",
        [](int w, int h, int max_slices, int cell_size) {
          const ResizeGeometry g =
              resize_geometry(w, h, plan_from(w, h, max_slices, cell_size));
          return py::make_tuple(g.scaled_width, g.scaled_height, g.pad_x, g.pad_y);
        },
        py::arg("width"), py::arg("height"), py::arg("max_slices") = 9,
        py::arg("cell_size") = 448);
  m.def("interpolate_pos_embed",
        [](const FloatArray& a, int rows, int cols) {
          return grid_to(interpolate_pos_embed(grid_from(a), rows, cols));
        },
        py::arg("grid"), py::arg("rows"), py::arg("cols"));

  // tokens
  m.def("compress_tokens",
        [](const FloatArray& a) { return grid_to(compress_tokens(grid_from(a))); },
        py::arg("grid"));
  m.def("flatten_with_row_breaks",
        [](int rows, int cols) {
          std::vector<std::string> out;
          for (TokenKind k : flatten_with_row_breaks(rows, cols)) {
            out.emplace_back(to_string(k));
          }
          return out;
        },
        py::arg("rows"), py::arg("cols"));
  m.def("image_budget",
        [](int w, int h, int max_slices, int cell_size) {
          return image_budget(plan_from(w, h, max_slices, cell_size)).total();
        },
        py::arg("width"), py::arg("height"), py::arg("max_slices") = 9,
        py::arg("cell_size") = 448);
  m.def("image_layout",
        [](int w, int h, int max_slices, int cell_size) {
          return layout_list(image_budget(plan_from(w, h, max_slices, cell_size)));
        },
        py::arg("width"), py::arg("height"), py::arg("max_slices") = 9,
        py::arg("cell_size") = 448);
  m.def("video_budget",
        [](double d, double fps, int cap) { return video_budget(d, fps, cap).total(); },
        py::arg("duration"), py::arg("fps") = 1.0, py::arg("cap") = 128);
  m.def("audio_budget", &audio_budget, py::arg("duration"));

  // video
  m.def("schedule",
        [](double d, double fps, int cap) { return schedule(d, fps, cap).timestamps; },
        py::arg("duration"), py::arg("fps") = 1.0, py::arg("cap") = 128);

  // audio
  m.def("resample_16k",
        [](const FloatArray& a, int rate) {
          const std::vector<float> out = resample_16k(span_of(a), rate);
          FloatArray r(static_cast<py::ssize_t>(out.size()));
          std::copy(out.begin(), out.end(), r.mutable_data());
          return r;
        },
        py::arg("samples"), py::arg("rate"));
  m.def("log_mel",
        [](const FloatArray& a) {
          const MelSpectrogram mel = log_mel(span_of(a));
          FloatArray r({mel.n_mels, mel.n_frames});
          std::copy(mel.values.begin(), mel.values.end(), r.mutable_data());
          return r;
        },
        py::arg("samples"));
  m.def("audio_profile",
        [](const std::filesystem::path& path) { return profile_dict(profile(path)); },
        py::arg("path"));

  // text metrics
  m.def("normalize_text",
        [](std::string_view s) { return normalize_text(s); }, py::arg("text"));
  m.def("wer", [](std::string_view r, std::string_view h) { return edit_dict(wer(r, h)); },
        py::arg("reference"), py::arg("hypothesis"));
  m.def("cer", [](std::string_view r, std::string_view h) { return edit_dict(cer(r, h)); },
        py::arg("reference"), py::arg("hypothesis"));
  m.def("ngram_cosine", &ngram_cosine, py::arg("a"), py::arg("b"), py::arg("n") = 3);
  m.def("jaccard_shingles", &jaccard_shingles, py::arg("a"), py::arg("b"),
        py::arg("n") = 3);
  m.def("bleu",
        [](const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
           int max_n) {
          std::vector<TokenList> r, h;
          for (const auto& s : refs) r.push_back(split_words(normalize_text(s)));
          for (const auto& s : hyps) h.push_back(split_words(normalize_text(s)));
          return bleu(r, h, max_n);
        },
        py::arg("references"), py::arg("hypotheses"), py::arg("max_n") = 4);

  // curation
  m.def("filter_manifest",
        [](const std::filesystem::path& in, const std::filesystem::path& kept,
           const std::filesystem::path& dropped, int jobs) {
          const auto records = read_manifest(in);
          PipelineResult result;
          {
            py::gil_scoped_release release;
            result = run_pipeline(records, PipelineConfig{}, jobs);
          }
          write_manifest(result.kept, kept);
          write_manifest(result.dropped, dropped);
          py::list reports;
          for (const auto& r : result.reports) {
            reports.append(py::module_::import("json").attr("loads")(r.to_json().dump()));
          }
          return reports;
        },
        py::arg("manifest"), py::arg("kept"), py::arg("dropped"), py::arg("jobs") = 1);

  m.def("main",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = dispatch(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"),
        "Run a CLI invocation; returns (exit_code, stdout, stderr).");
}
