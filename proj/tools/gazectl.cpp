// gazectl: command-line front end for dataset generation, training,
// evaluation, layout handling and the live overlay pipeline.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "gaze/dataset.hpp"
#include "gaze/error.hpp"
#include "gaze/eval.hpp"
#include "gaze/facedet.hpp"
#include "gaze/kvfile.hpp"
#include "gaze/layout.hpp"
#include "gaze/nn/gradcheck.hpp"
#include "gaze/nn/serialize.hpp"
#include "gaze/nn/train.hpp"
#include "gaze/rng.hpp"
#include "gaze/runtime.hpp"

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "gazectl: " << msg << "\n"; }

struct Command {
  CLI::App* app = nullptr;
  std::string config;
  std::function<int()> run;
};

/// Fills options not given on the command line from a `key = value` file.
void apply_config(CLI::App& app, const std::string& path) {
  for (const auto& [key, value] : gaze::read_key_values(path)) {
    CLI::Option* opt = key == "config" ? nullptr : app.get_option_no_throw("--" + key);
    if (!opt) throw UsageError("unknown key `" + key + "` in " + path);
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void require(CLI::App& app, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    auto* opt = app.get_option_no_throw(name);
    if (!opt || opt->count() == 0) throw UsageError(std::string(name) + " is required");
  }
}

gaze::CalibrationProfile calibration_from(const std::string& path) {
  return path.empty() ? gaze::CalibrationProfile{} : gaze::load_calibration(path);
}

std::vector<std::string> split_names(const std::string& text) {
  if (text.empty()) return {};
  return gaze::split_fields(text);
}

struct LoadedData {
  gaze::DatasetManifest manifest;
  gaze::SampleStore store;
};

LoadedData load_data(const std::string& dir, gaze::BBoxFeatureMode mode) {
  LoadedData d;
  d.manifest = gaze::load_manifest(fs::path(dir) / "manifest.csv");
  d.store = gaze::SampleStore::load(d.manifest, dir, mode, d.manifest.render.frame_w, d.manifest.render.frame_h);
  return d;
}

gaze::Split split_option(const std::string& text) {
  try {
    return gaze::parse_split(text);
  } catch (const gaze::Error&) {
    throw UsageError("--split must be train, val or test");
  }
}

std::vector<gaze::LayoutStyle> styles_option(const std::string& text) {
  if (text == "all") return {gaze::LayoutStyle::FullscreenGrid, gaze::LayoutStyle::HorizontalStrip};
  try {
    return {gaze::parse_layout_style(text)};
  } catch (const gaze::Error&) {
    throw UsageError("--style must be grid, strip or all");
  }
}

int min_participants(gaze::LayoutStyle style) { return style == gaze::LayoutStyle::HorizontalStrip ? 3 : 2; }

std::vector<int> participant_counts(gaze::LayoutStyle style, int n) {
  std::vector<int> out;
  if (n > 0) {
    if (n >= min_participants(style)) out.push_back(n);
    return out;
  }
  for (int k = min_participants(style); k <= 8; ++k) out.push_back(k);
  return out;
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::atomic<bool> g_interrupted{false};

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Gaze target estimation toolkit", "gazectl"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  std::vector<Command> commands;
  commands.reserve(16);

  auto add_command = [&](CLI::App* parent, const std::string& name, const std::string& desc,
                         const std::string& output = {}) -> Command& {
    auto& cmd = commands.emplace_back();
    cmd.app = parent->add_subcommand(name, desc);
    if (!output.empty()) cmd.app->footer("Output: " + output);
    cmd.app->add_option("--config", cmd.config, "key = value file supplying defaults for the other flags");
    return cmd;
  };

  // ---- dataset ----
  auto* dataset = app.add_subcommand("dataset", "Synthetic face dataset");
  dataset->require_subcommand(1);

  std::string gen_out, gen_cal;
  std::uint64_t gen_seed = 0;
  int gen_subjects = 5, gen_frames = 4;
  bool gen_by_subject = false;
  {
    auto& c = add_command(dataset, "gen", "Render crops and write manifest.csv.", "Prints record and split counts.");
    c.app->add_option("--out", gen_out, "Output directory");
    c.app->add_option("--seed", gen_seed, "Generation seed");
    c.app->add_option("--subjects", gen_subjects, "Synthetic subjects")->check(CLI::PositiveNumber);
    c.app->add_option("--frames", gen_frames, "Frames per gaze location")->check(CLI::PositiveNumber);
    c.app->add_option("--calibration", gen_cal, "Calibration file");
    c.app->add_flag("--split-by-subject", gen_by_subject, "Assign splits per subject instead of per sample");
    c.run = [&, app = c.app] {
      require(*app, {"--out"});
      gaze::GenerateOptions o;
      o.seed = gen_seed;
      o.n_subjects = gen_subjects;
      o.frames_per_location = gen_frames;
      o.calibration = calibration_from(gen_cal);
      o.split_by_subject = gen_by_subject;
      const auto m = gaze::generate(o, gen_out);
      std::cout << "records = " << m.records.size() << "\n";
      std::cout << "train = " << m.split(gaze::Split::Train).size() << "\n";
      std::cout << "val = " << m.split(gaze::Split::Val).size() << "\n";
      std::cout << "test = " << m.split(gaze::Split::Test).size() << "\n";
      std::cout << "manifest = " << (fs::path(gen_out) / "manifest.csv").string() << "\n";
      return 0;
    };
  }

  std::string frames_out;
  std::uint64_t frames_seed = 0;
  int frames_count = 10;
  std::optional<int> frames_location;
  {
    auto& c = add_command(dataset, "frames", "Render full camera frames for `run`.", "Prints `frame_id, gaze_x_cm, gaze_y_cm` rows.");
    c.app->add_option("--out", frames_out, "Output directory");
    c.app->add_option("--seed", frames_seed, "Render seed");
    c.app->add_option("--count", frames_count, "Number of frames")->check(CLI::PositiveNumber);
    c.app->add_option("--location", frames_location, "Fixed gaze location index (1..91)")->check(CLI::Range(1, 91));
    c.run = [&, app = c.app] {
      require(*app, {"--out"});
      fs::create_directories(frames_out);
      const gaze::LocationTable table{gaze::CalibrationProfile{}};
      gaze::Rng rng(frames_seed);
      for (int i = 0; i < frames_count; ++i) {
        const int loc = frames_location.value_or(1 + static_cast<int>(rng.index(gaze::kLocationCount)));
        const auto gaze_cm = table.at(loc);
        const auto head = gaze::sample_head_state(frames_seed, 0, static_cast<std::uint64_t>(i));
        const auto sample = gaze::render_sample(gaze_cm, head, gaze::derive_seed(frames_seed, static_cast<std::uint64_t>(i)));
        char name[32];
        std::snprintf(name, sizeof name, "cam_%06d", i + 1);
        gaze::save_ppm(sample.frame, fs::path(frames_out) / (std::string(name) + ".ppm"));
        std::cout << name << ", " << gaze::format_exact(gaze_cm.x) << ", " << gaze::format_exact(gaze_cm.y) << "\n";
      }
      return 0;
    };
  }

  // ---- train ----
  std::string train_data, train_out, train_log;
  int train_epochs = 10;
  std::size_t train_batch = 32;
  std::uint64_t train_seed = 0;
  double train_mult = 0.25, train_lr = 1e-3;
  bool train_last = false, train_raw_bbox = false;
  {
    auto& c = add_command(&app, "train", "Train the gaze regressor.", "Prints `epoch, train_loss, val_loss` rows; epoch 0 is the untrained network.");
    c.app->add_option("--data", train_data, "Dataset directory (with manifest.csv)");
    c.app->add_option("--out", train_out, "Output parameter file");
    c.app->add_option("--epochs", train_epochs, "Epochs")->check(CLI::NonNegativeNumber);
    c.app->add_option("--batch", train_batch, "Batch size")->check(CLI::PositiveNumber);
    c.app->add_option("--seed", train_seed, "Init and shuffle seed");
    c.app->add_option("--multiplier", train_mult, "Width multiplier in (0, 1]")->check(CLI::Range(1e-6, 1.0));
    c.app->add_option("--lr", train_lr, "Adam learning rate")->check(CLI::PositiveNumber);
    c.app->add_option("--log", train_log, "Also write the loss log here");
    c.app->add_flag("--last-epoch", train_last, "Keep the final epoch instead of the best validation epoch");
    c.app->add_flag("--raw-bbox", train_raw_bbox, "Feed raw pixel bbox values instead of normalized ones");
    c.run = [&, app = c.app] {
      require(*app, {"--data", "--out"});
      gaze::nn::GazeNetConfig config;
      config.width_multiplier = train_mult;
      config.bbox_mode = train_raw_bbox ? gaze::BBoxFeatureMode::RawPixels : gaze::BBoxFeatureMode::Normalized;
      const auto data = load_data(train_data, config.bbox_mode);
      gaze::nn::TrainOptions o;
      o.epochs = train_epochs;
      o.batch_size = train_batch;
      o.seed = train_seed;
      o.adam.lr = train_lr;
      o.keep_best_val = !train_last;
      const auto started = std::chrono::steady_clock::now();
      const auto result = gaze::nn::train(data.store, config, o, [&](const gaze::nn::EpochLog& e) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        log("epoch " + std::to_string(e.epoch) + " train " + gaze::format_fixed(e.train_loss, 4) + " val " +
            gaze::format_fixed(e.val_loss, 4) + " (" + gaze::format_fixed(s, 1) + " s)");
      });
      gaze::nn::save_params(train_out, result.params, config);
      const auto text = gaze::nn::format_loss_log(result.log);
      if (!train_log.empty()) gaze::write_text_file(train_log, text);
      std::cout << text;
      log("kept epoch " + std::to_string(result.selected_epoch) + ", " + std::to_string(result.steps) + " steps");
      return 0;
    };
  }

  // ---- gradcheck ----
  std::uint64_t gc_seed = 0;
  std::string gc_corrupt;
  {
    auto& c = add_command(&app, "gradcheck", "Central-difference gradient check of the tiny network.", "Prints per-tensor errors; exit 2 when any exceeds the tolerance.");
    c.app->add_option("--seed", gc_seed, "Seed for weights and inputs");
    c.app->add_option("--corrupt", gc_corrupt, "Tensor name whose analytic gradient is perturbed (self-test)");
    c.run = [&] {
      gaze::nn::GradCheckOptions o;
      o.seed = gc_seed;
      if (!gc_corrupt.empty()) {
        for (std::size_t i = 0; i < gaze::nn::kParamCount; ++i) {
          if (gaze::nn::param_name(i) == gc_corrupt) o.corrupt_param = i;
        }
        if (!o.corrupt_param) throw UsageError("unknown tensor `" + gc_corrupt + "`");
      }
      const auto report = gaze::nn::grad_check(gaze::nn::gradcheck_config(), o);
      std::cout << gaze::nn::format_report(report);
      return report.passed ? 0 : 2;
    };
  }

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "Evaluation reports");
  eval->require_subcommand(1);

  std::string reg_data, reg_model, reg_split = "test";
  {
    auto& c = add_command(eval, "regression", "Mean euclidean and per-axis absolute error in cm.");
    c.app->add_option("--data", reg_data, "Dataset directory");
    c.app->add_option("--model", reg_model, "Parameter file");
    c.app->add_option("--split", reg_split, "train, val or test");
    c.run = [&, app = c.app] {
      require(*app, {"--data", "--model"});
      const auto model = gaze::nn::load_params(reg_model);
      const auto data = load_data(reg_data, model.config.bbox_mode);
      const auto rows = data.store.indices(split_option(reg_split));
      if (rows.empty()) throw gaze::Error(gaze::ErrorCode::EmptySplit, reg_split + " split is empty");
      const auto pred = gaze::nn::predict(model.params, model.config, data.store, rows);
      std::vector<gaze::GazePointCm> truth;
      for (auto i : rows) truth.push_back(data.store.record(i).gaze_cm);
      std::cout << gaze::format_regression_report(gaze::regression_report(pred, truth));
      return 0;
    };
  }

  bool hr_sim = false, hr_emp = false;
  std::string hr_style = "all", hr_truth = "screen", hr_data, hr_model, hr_split = "test", hr_cal;
  int hr_n = 0;
  double hr_sx = gaze::kDefaultSigmaX, hr_sy = gaze::kDefaultSigmaY;
  std::size_t hr_trials = 1'000'000;
  std::uint64_t hr_seed = 0;
  {
    auto& c = add_command(eval, "hitrate", "Nearest-cell hit rate per layout.", "Prints `style, n, hit_rate, trials` rows.");
    auto* sim = c.app->add_flag("--simulated", hr_sim, "Monte Carlo with Gaussian gaze error");
    auto* emp = c.app->add_flag("--empirical", hr_emp, "Model predictions on a dataset split");
    sim->excludes(emp);
    c.app->add_option("--style", hr_style, "grid, strip or all");
    c.app->add_option("--n", hr_n, "Participants (default: every supported count up to 8)");
    c.app->add_option("--sigma-x", hr_sx, "Horizontal error sigma, cm")->check(CLI::NonNegativeNumber);
    c.app->add_option("--sigma-y", hr_sy, "Vertical error sigma, cm")->check(CLI::NonNegativeNumber);
    c.app->add_option("--trials", hr_trials, "Simulated trials per layout")->check(CLI::PositiveNumber);
    c.app->add_option("--seed", hr_seed, "Simulation seed");
    c.app->add_option("--truth", hr_truth, "Simulated true gaze: screen or centroids");
    c.app->add_option("--data", hr_data, "Dataset directory (empirical)");
    c.app->add_option("--model", hr_model, "Parameter file (empirical)");
    c.app->add_option("--split", hr_split, "Dataset split (empirical)");
    c.app->add_option("--calibration", hr_cal, "Calibration file");
    c.run = [&, app = c.app] {
      if (hr_sim == hr_emp) throw UsageError("pass exactly one of --simulated or --empirical");
      const auto cal = calibration_from(hr_cal);
      std::vector<gaze::HitRateRow> rows;
      if (hr_sim) {
        gaze::TruthModel truth;
        try {
          truth = gaze::parse_truth_model(hr_truth);
        } catch (const gaze::Error&) {
          throw UsageError("--truth must be screen or centroids");
        }
        for (auto style : styles_option(hr_style)) {
          for (int n : participant_counts(style, hr_n)) {
            gaze::SimulationOptions o{style, n, hr_sx, hr_sy, hr_trials, hr_seed, truth, cal};
            rows.push_back({style, n, gaze::hit_rate_simulated(o)});
          }
        }
      } else {
        require(*app, {"--data", "--model"});
        const auto model = gaze::nn::load_params(hr_model);
        const auto data = load_data(hr_data, model.config.bbox_mode);
        const auto split = split_option(hr_split);
        for (auto style : styles_option(hr_style)) {
          for (int n : participant_counts(style, hr_n)) {
            gaze::LayoutSpec spec;
            spec.style = style;
            spec.n_participants = n;
            spec.names = gaze::default_names(n);
            spec.calibration = cal;
            rows.push_back({style, n,
                            gaze::hit_rate_empirical(model.params, model.config, data.store, split,
                                                     gaze::plan_layout(spec))});
          }
        }
      }
      std::cout << gaze::format_hit_rate_table(rows);
      return 0;
    };
  }

  std::uint64_t cs_h = 0, cs_m = 0, cs_fp = 0, cs_cr = 0;
  {
    auto& c = add_command(eval, "cuestats", "Hit, miss, precision and accuracy from cue-response counts.");
    c.app->set_help_flag("--help", "Print this help message and exit");
    c.app->add_option("--h", cs_h, "Hits");
    c.app->add_option("--m", cs_m, "Misses");
    c.app->add_option("--fp", cs_fp, "False plays");
    c.app->add_option("--cr", cs_cr, "Correct rejects");
    c.run = [&] {
      std::cout << gaze::format_cue_stats(gaze::cue_stats(cs_h, cs_m, cs_fp, cs_cr));
      return 0;
    };
  }

  // ---- layout ----
  auto* layout = app.add_subcommand("layout", "Videoconference gallery layouts");
  layout->require_subcommand(1);

  std::string lg_out, lg_style = "grid", lg_names, lg_cal, lg_records;
  int lg_n = 4;
  std::uint64_t lg_seed = 0;
  bool lg_decor = false;
  {
    auto& c = add_command(layout, "gen", "Render a gallery screenshot.", "Prints the layout records.");
    c.app->add_option("--n", lg_n, "Participants")->check(CLI::PositiveNumber);
    c.app->add_option("--style", lg_style, "grid or strip");
    c.app->add_option("--out", lg_out, "Screenshot path (PPM)");
    c.app->add_option("--names", lg_names, "Comma-separated participant names");
    c.app->add_option("--seed", lg_seed, "Cell color seed");
    c.app->add_option("--calibration", lg_cal, "Calibration file");
    c.app->add_option("--records", lg_records, "Also write the layout records here");
    c.app->add_flag("--decorations", lg_decor, "Add a toolbar and icon below the gallery");
    c.run = [&, app = c.app] {
      require(*app, {"--out"});
      gaze::LayoutSpec spec;
      spec.n_participants = lg_n;
      const auto styles = styles_option(lg_style);
      if (styles.size() != 1) throw UsageError("--style must be grid or strip");
      spec.style = styles.front();
      spec.names = lg_names.empty() ? gaze::default_names(lg_n) : split_names(lg_names);
      spec.calibration = calibration_from(lg_cal);
      spec.decorations = lg_decor;
      spec.seed = lg_seed;
      const auto [frame, map] = gaze::generate_screenshot(spec);
      gaze::save_ppm(frame, lg_out);
      const auto text = gaze::format_layout_records(map);
      if (!lg_records.empty()) gaze::write_text_file(lg_records, text);
      std::cout << text;
      return 0;
    };
  }

  std::string lp_in, lp_labels, lp_cal, lp_records;
  int lp_tol = 8;
  {
    auto& c = add_command(layout, "parse", "Find video cells in a screenshot.", "Prints the layout records.");
    c.app->add_option("--in", lp_in, "Screenshot path (PPM)");
    c.app->add_option("--labels", lp_labels, "One name per line, replacing decoded names");
    c.app->add_option("--calibration", lp_cal, "Calibration file");
    c.app->add_option("--tolerance", lp_tol, "Background color tolerance")->check(CLI::NonNegativeNumber);
    c.app->add_option("--records", lp_records, "Also write the layout records here");
    c.run = [&, app = c.app] {
      require(*app, {"--in"});
      gaze::ParseOptions o;
      o.tolerance = lp_tol;
      if (!lp_labels.empty()) o.labels = gaze::read_labels(lp_labels);
      const auto map = gaze::parse_screenshot(gaze::load_ppm(lp_in), calibration_from(lp_cal), o);
      const auto text = gaze::format_layout_records(map);
      if (!lp_records.empty()) gaze::write_text_file(lp_records, text);
      std::cout << text;
      return 0;
    };
  }

  // ---- run ----
  std::string run_frames, run_model, run_shot, run_records, run_style, run_sidecar, run_outdir, run_serve, run_cal,
      run_names;
  int run_n = 0;
  std::size_t run_window = 5;
  std::optional<double> run_tau;
  double run_fps = 0.0, run_linger = 0.0;
  bool run_append = false;
  {
    auto& c = add_command(&app, "run", "Overlay the gaze target on every frame of a directory.", "Prints `frame_id, face_found, gaze_x_cm, gaze_y_cm, raw_target, label` rows.");
    c.app->add_option("--frames", run_frames, "Directory of input PPM frames (processed in name order)");
    c.app->add_option("--model", run_model, "Parameter file");
    c.app->add_option("--layout-shot", run_shot, "Layout from a gallery screenshot");
    c.app->add_option("--layout-records", run_records, "Layout from a records file");
    c.app->add_option("--layout-style", run_style, "Layout planned for this style (with --layout-n)");
    c.app->add_option("--layout-n", run_n, "Participants for --layout-style");
    c.app->add_option("--names", run_names, "Comma-separated names for --layout-style");
    c.app->add_option("--calibration", run_cal, "Calibration file");
    c.app->add_option("--sidecar", run_sidecar, "Offline face detections instead of the key-color detector");
    c.app->add_option("--outdir", run_outdir, "Write annotated frames as frame_NNNNNN.ppm");
    c.app->add_flag("--append", run_append, "Continue numbering in --outdir instead of replacing");
    c.app->add_option("--serve", run_serve, "Serve /frame, /stream and /healthz on host:port");
    c.app->add_option("--window", run_window, "Smoothing window in frames")->check(CLI::PositiveNumber);
    c.app->add_option("--tau", run_tau, "Target distance threshold in cm (default: from the layout)");
    c.app->add_option("--fps", run_fps, "Pace processing to this frame rate (0 = as fast as possible)");
    c.app->add_option("--linger", run_linger, "Keep serving this many seconds after the last frame");
    c.run = [&, app = c.app] {
      require(*app, {"--frames", "--model"});
      const int sources = !run_shot.empty() + !run_records.empty() + !run_style.empty();
      if (sources != 1) throw UsageError("pass exactly one of --layout-shot, --layout-records, --layout-style");
      const auto cal = calibration_from(run_cal);
      gaze::LayoutSource source;
      if (!run_shot.empty()) {
        source = gaze::LayoutFromScreenshot{run_shot, {}};
      } else if (!run_records.empty()) {
        source = gaze::LayoutFromRecords{run_records};
      } else {
        gaze::LayoutSpec spec;
        spec.style = styles_option(run_style).front();
        spec.n_participants = run_n;
        spec.names = run_names.empty() ? gaze::default_names(run_n) : split_names(run_names);
        source = gaze::LayoutFromSpec{spec};
      }
      auto model = gaze::nn::load_params(run_model);
      gaze::PipelineConfig pc;
      pc.calibration = cal;
      pc.layout = gaze::resolve_layout(source, cal);
      pc.tau_override_cm = run_tau;
      pc.smoothing_window = run_window;
      pc.net = model.config;
      std::shared_ptr<const gaze::FaceDetector> detector;
      if (run_sidecar.empty()) {
        detector = std::make_shared<gaze::SyntheticDetector>();
      } else {
        detector = std::make_shared<gaze::SidecarDetector>(gaze::SidecarDetections::load(run_sidecar));
      }
      gaze::GazePipeline pipeline(pc, std::move(model.params), detector);

      std::optional<gaze::FrameSequenceWriter> writer;
      if (!run_outdir.empty()) writer.emplace(run_outdir, run_append);
      auto slot = std::make_shared<gaze::LatestFrameSlot>();
      std::unique_ptr<gaze::StreamServer> server;
      if (!run_serve.empty()) {
        const auto [host, port] = gaze::parse_bind_address(run_serve);
        server = std::make_unique<gaze::StreamServer>(slot);
        server->start(host, port);
        log("serving on " + host + ":" + std::to_string(server->bound_port()));
      }

      const auto period = run_fps > 0.0 ? std::chrono::duration<double>(1.0 / run_fps) : std::chrono::duration<double>(0);
      auto next = std::chrono::steady_clock::now();
      for (const auto& path : list_frames(run_frames)) {
        if (g_interrupted) break;
        const auto result = pipeline.process(gaze::load_ppm(path), path.stem().string());
        if (writer) writer->write(result.annotated);
        if (server) slot->publish(result.annotated);
        std::cout << result.frame_id << ", " << (result.face_found ? 1 : 0) << ", "
                  << (result.gaze_cm ? gaze::format_fixed(result.gaze_cm->x, 4) : "nan") << ", "
                  << (result.gaze_cm ? gaze::format_fixed(result.gaze_cm->y, 4) : "nan") << ", "
                  << (result.assignment.is_target() ? std::to_string(result.assignment.index + 1) : "0") << ", "
                  << result.displayed_label << "\n";
        if (run_fps > 0.0) {
          next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
          std::this_thread::sleep_until(next);
        }
      }
      std::cout.flush();
      if (server) {
        const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(run_linger);
        while (!g_interrupted && std::chrono::steady_clock::now() < until) {
          std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        slot->close();
        server->stop();
      }
      return 0;
    };
  }

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "Benchmarks");
  bench->require_subcommand(1);
  std::string bench_model;
  double bench_mult = 0.25, bench_sleep_ms = 0.0;
  std::size_t bench_trials = gaze::kDefaultBenchTrials;
  std::uint64_t bench_seed = 0;
  {
    auto& c = add_command(bench, "fps", "Latency of detect + crop + regress + assign + overlay per frame.", "Prints trials, mean latency, fps, p50 and p95.");
    c.app->add_option("--model", bench_model, "Parameter file (default: freshly initialized network)");
    c.app->add_option("--multiplier", bench_mult, "Width multiplier when no model is given")->check(CLI::Range(1e-6, 1.0));
    c.app->add_option("--trials", bench_trials, "Timed iterations")->check(CLI::PositiveNumber);
    c.app->add_option("--seed", bench_seed, "Seed for the frame and the initial weights");
    c.app->add_option("--stub-sleep-ms", bench_sleep_ms, "Time a stub that sleeps this long instead of the pipeline");
    c.run = [&] {
      gaze::FpsReport report;
      if (bench_sleep_ms > 0.0) {
        const auto d = std::chrono::duration<double, std::milli>(bench_sleep_ms);
        report = gaze::fps_benchmark([d] { std::this_thread::sleep_for(d); }, bench_trials);
      } else {
        gaze::nn::SavedModel model;
        if (bench_model.empty()) {
          model.config.width_multiplier = bench_mult;
          model.params = gaze::nn::init_params<float>(model.config, bench_seed);
        } else {
          model = gaze::nn::load_params(bench_model);
        }
        gaze::LayoutSpec spec;
        spec.n_participants = 4;
        spec.names = gaze::default_names(4);
        gaze::PipelineConfig pc;
        pc.layout = gaze::plan_layout(spec);
        pc.net = model.config;
        gaze::GazePipeline pipeline(pc, std::move(model.params), std::make_shared<gaze::SyntheticDetector>());
        const auto frame = gaze::render_sample({0.0, 20.0}, gaze::HeadState{}, bench_seed).frame;
        report = gaze::fps_benchmark([&] { pipeline.process(frame, "bench"); }, bench_trials);
      }
      std::cout << gaze::format_fps_report(report);
      return 0;
    };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (auto& cmd : commands) {
    if (!cmd.app->parsed()) continue;
    try {
      if (!cmd.config.empty()) apply_config(*cmd.app, cmd.config);
      return cmd.run();
    } catch (const UsageError& e) {
      std::cerr << "gazectl: " << e.what() << "\n\n" << cmd.app->help();
      return 1;
    } catch (const CLI::ParseError& e) {
      std::cerr << "gazectl: " << e.what() << "\n\n" << cmd.app->help();
      return 1;
    } catch (const gaze::Error& e) {
      log(e.what());
      return 2;
    } catch (const std::exception& e) {
      log(e.what());
      return 2;
    }
  }
  std::cerr << app.help();
  return 1;
}

int main(int argc, char** argv) {
  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGPIPE, SIG_IGN);
  return run_cli(argc, argv);
}
