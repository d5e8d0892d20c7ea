#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gaussmix/gaussmix.hpp"

namespace gaussmix::cli {
namespace {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Mask resolve_mask(const std::string& spec, const Surface& target, bool exclude_extremes) {
  Mask mask = Mask::full(target.height(), target.width());
  if (spec != "none") {
    mask = load_mask(spec);
    require_same_shape(mask, target, "mask");
  }
  if (exclude_extremes) {
    const Mask impulse = mask_excluding_extremes(target);
    for (std::size_t i = 0; i < mask.size(); ++i) mask.set(i, mask[i] && impulse[i]);
  }
  return mask;
}

void write_trace(const fs::path& path, const FitTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,l2,pae,total\n";
  for (const auto& row : trace.rows) {
    out << row.iteration << ',' << format_number(row.l2) << ',' << format_number(row.pae) << ','
        << format_number(row.total) << '\n';
  }
  if (!out) throw IoError("error writing " + path.string());
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string input;
  std::string out;
  std::string trace;
  std::string mask = "none";
  bool exclude_extremes = false;
  FitConfig config;
};

int cmd_fit(const FitArgs& args, std::ostream& out) {
  const Surface target = load_surface(args.input);
  const Mask mask = resolve_mask(args.mask, target, args.exclude_extremes);
  const FitResult result = fit(target, mask, args.config);

  ModelFile file;
  file.model = result.model;
  file.provenance = Provenance{args.config, result.best_loss,
                               std::vector<double>(result.raw.values().begin(), result.raw.values().end())};
  save_model_file(args.out, file);
  if (!args.trace.empty()) write_trace(args.trace, result.trace);

  const Grid<double> rendered = render(result.model, target.height(), target.width());
  const double m = mse(rendered, target.grid(), mask);
  out << "mse=" << format_number(m) << " pae=" << format_number(pae(rendered, target.grid(), mask))
      << " psnr=" << format_number(psnr_from_mse(m)) << " total=" << format_number(result.best_loss.total)
      << " elements=" << result.model.n_elements() << " params=" << result.raw.size()
      << " iterations=" << result.trace.iterations << " termination=" << to_string(result.trace.reason)
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderArgs {
  std::string model;
  std::string out;
  std::size_t width = 0;
  std::size_t height = 0;
};

int cmd_render(const RenderArgs& args, std::ostream& out) {
  const ModelFile file = load_model_file(args.model);
  std::size_t h = args.height;
  std::size_t w = args.width;
  if (file.model.source_dims) {
    if (h == 0) h = file.model.source_dims->height;
    if (w == 0) w = file.model.source_dims->width;
  }
  if (h == 0 || w == 0) throw UsageError("render: --width and --height are required for this model");
  save_surface(args.out, render(file.model, h, w));
  out << "width=" << w << " height=" << h << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// transform
// ---------------------------------------------------------------------------

struct TransformArgs {
  std::string model;
  std::string out;
  std::vector<double> translate;
  std::optional<double> scale;
  std::optional<double> rotate_deg;
  std::vector<double> center{0.5, 0.5};
};

int cmd_transform(const TransformArgs& args, std::ostream& out) {
  const int groups = (args.translate.empty() ? 0 : 1) + (args.scale ? 1 : 0) + (args.rotate_deg ? 1 : 0);
  if (groups != 1) throw UsageError("transform: give exactly one of --translate, --scale, --rotate");

  ModelFile file = load_model_file(args.model);
  if (!args.translate.empty()) {
    file.model = translate(file.model, {args.translate[0], args.translate[1]});
  } else if (args.scale) {
    file.model = scale(file.model, *args.scale);
  } else {
    const double radians = *args.rotate_deg * std::numbers::pi / 180.0;
    file.model = rotate(file.model, radians, {args.center[0], args.center[1]});
  }
  // Fit metadata no longer describes the transformed model.
  file.provenance.reset();
  save_model_file(args.out, file);
  out << "elements=" << file.model.n_elements() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// corrupt
// ---------------------------------------------------------------------------

struct CorruptArgs {
  std::string input;
  std::string out;
  std::string mask_out;
  std::string mode;
  std::optional<std::size_t> patch;
  std::optional<std::size_t> patch_h;
  std::optional<std::size_t> patch_w;
  double fill = 0.0;
  std::optional<double> sigma;
  std::optional<double> ratio;
  std::uint64_t seed = 0;
};

int cmd_corrupt(const CorruptArgs& args, std::ostream& out) {
  const Surface clean = load_surface(args.input);
  std::optional<Corrupted> result;
  if (args.mode == "occlude") {
    const std::optional<std::size_t> ph = args.patch_h ? args.patch_h : args.patch;
    const std::optional<std::size_t> pw = args.patch_w ? args.patch_w : args.patch;
    if (!ph || !pw) throw UsageError("corrupt: occlude needs --patch or --patch-h/--patch-w");
    if (*ph > clean.height() || *pw > clean.width()) {
      throw UsageError("corrupt: patch does not fit inside the image");
    }
    result = occlude(clean, *ph, *pw, args.seed, args.fill);
  } else if (args.mode == "awgn") {
    if (!args.sigma) throw UsageError("corrupt: awgn needs --sigma");
    result = awgn(clean, *args.sigma, args.seed);
  } else {
    if (!args.ratio) throw UsageError("corrupt: saltpepper needs --ratio");
    result = salt_pepper(clean, *args.ratio, args.seed);
  }
  save_surface(args.out, result->surface.grid());
  if (!args.mask_out.empty()) save_mask(args.mask_out, result->report.mask);

  out << "kind=" << to_string(result->report.kind);
  for (const auto& [name, value] : result->report.parameters) out << ' ' << name << '=' << format_number(value);
  out << " seed=" << result->report.seed << " observed=" << result->report.mask.count() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string a;
  std::string b;
  std::string mask;
};

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const Surface a = load_surface(args.a);
  const Surface b = load_surface(args.b);
  require_same_shape(a, b, "eval");
  Mask mask = Mask::full(a.height(), a.width());
  if (!args.mask.empty()) {
    mask = load_mask(args.mask);
    require_same_shape(mask, a, "eval mask");
  }
  const double m = mse(a.grid(), b.grid(), mask);
  out << "mse=" << format_number(m) << " pae=" << format_number(pae(a.grid(), b.grid(), mask))
      << " psnr=" << format_number(psnr_from_mse(m)) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::string suite;
  std::string input;
  std::string out;
  FitConfig config;
};

struct ReportRow {
  std::string suite;
  std::string image;
  std::string setting;
  std::size_t n_elements = 0;
  std::optional<double> mse_input;
  double mse_fit = 0.0;
  double pae_fit = 0.0;
  std::size_t iterations = 0;
};

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = detail::lower_extension(entry.path());
    if (ext == ".png" || ext == ".pgm") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  return images;
}

ReportRow fit_row(const std::string& suite, const std::string& image, const std::string& setting,
                  const Surface& clean, const Surface& observed, const Mask& mask,
                  const FitConfig& config, bool corrupted) {
  const FitResult result = fit(observed, mask, config);
  const Grid<double> rendered = render(result.model, clean.height(), clean.width());
  ReportRow row;
  row.suite = suite;
  row.image = image;
  row.setting = setting;
  row.n_elements = config.n_elements;
  if (corrupted) row.mse_input = mse(observed.grid(), clean.grid());
  row.mse_fit = mse(rendered, clean.grid());
  row.pae_fit = pae(rendered, clean.grid());
  row.iterations = result.trace.iterations;
  return row;
}

void write_report(const fs::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "suite,image,setting,n_elements,mse_input,mse_fit,pae_fit,psnr_fit,mse_ratio,iterations\n";
  for (const auto& r : rows) {
    out << r.suite << ',' << r.image << ',' << r.setting << ',' << r.n_elements << ','
        << (r.mse_input ? format_number(*r.mse_input) : "") << ',' << format_number(r.mse_fit) << ','
        << format_number(r.pae_fit) << ',' << format_number(psnr_from_mse(r.mse_fit)) << ','
        << (r.mse_input && r.mse_fit > 0.0 ? format_number(mse_ratio(*r.mse_input, r.mse_fit)) : "")
        << ',' << r.iterations << '\n';
  }
  if (!out) throw IoError("error writing " + path.string());
}

inline constexpr std::size_t kSweepElements[] = {40, 50, 60, 70, 80, 90};
inline constexpr std::size_t kPatchSizes[] = {40, 60};
inline constexpr double kNoiseSigmas[] = {25.0, 50.0};
inline constexpr double kDropRatios[] = {0.25, 0.50};

int cmd_experiment(const ExperimentArgs& args, std::ostream& out, std::ostream& err) {
  const auto images = list_images(args.input);
  if (images.empty()) throw EmptyInputError("experiment: no .png or .pgm images in " + args.input);

  std::vector<ReportRow> rows;
  for (const auto& path : images) {
    const std::string name = path.filename().string();
    const Surface clean = load_surface(path);
    const Mask full = Mask::full(clean.height(), clean.width());
    err << "experiment: " << args.suite << " on " << name << '\n';

    if (args.suite == "elements-sweep") {
      for (std::size_t n : kSweepElements) {
        FitConfig config = args.config;
        config.n_elements = n;
        rows.push_back(fit_row(args.suite, name, "N=" + std::to_string(n), clean, clean, full, config, false));
      }
    } else if (args.suite == "restore") {
      for (std::size_t patch : kPatchSizes) {
        if (patch > clean.height() || patch > clean.width()) {
          err << "experiment: skipping " << patch << "x" << patch << " patch on " << name << '\n';
          continue;
        }
        const Corrupted c = occlude(clean, patch, patch, args.config.seed);
        const std::string setting = "occlusion-" + std::to_string(patch) + "x" + std::to_string(patch);
        rows.push_back(fit_row(args.suite, name, setting, clean, c.surface, c.report.mask, args.config, true));
      }
    } else {
      for (double sigma : kNoiseSigmas) {
        const Corrupted c = awgn(clean, sigma, args.config.seed);
        rows.push_back(fit_row(args.suite, name, "awgn-" + format_number(sigma), clean, c.surface, full,
                               args.config, true));
      }
      for (double ratio : kDropRatios) {
        const Corrupted c = salt_pepper(clean, ratio, args.config.seed);
        rows.push_back(fit_row(args.suite, name, "saltpepper-" + format_number(ratio), clean, c.surface,
                               mask_excluding_extremes(c.surface), args.config, true));
      }
    }
  }
  write_report(args.out, rows);
  out << "rows=" << rows.size() << " images=" << images.size() << '\n';
  return kOk;
}

void add_fit_config_options(CLI::App* cmd, FitConfig& config) {
  cmd->add_option("--alpha", config.alpha, "Weight of the peak-error term")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--lr", config.learning_rate, "Adam learning rate")
      ->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--iters", config.max_iters, "Maximum Adam iterations")
      ->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--tol", config.convergence_tol, "Stop when the loss changes by less than this fraction over 50 iterations")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", config.seed, "Random seed")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fit, render, transform and evaluate Gaussian-mixture image models", "gaussmix"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a grayscale image");
  fit_cmd->add_option("image", fit_args.input, "Input PGM or PNG")->required();
  fit_cmd->add_option("--elements", fit_args.config.n_elements, "Number of Gaussian elements")
      ->capture_default_str()->check(CLI::PositiveNumber);
  add_fit_config_options(fit_cmd, fit_args.config);
  fit_cmd->add_option("--mask", fit_args.mask, "Observation mask image (non-zero = observed) or 'none'")
      ->capture_default_str();
  fit_cmd->add_flag("--exclude-extremes", fit_args.exclude_extremes,
                    "Also ignore pixels that are exactly black or white (impulse noise)");
  fit_cmd->add_option("--out", fit_args.out, "Output model JSON")->required();
  fit_cmd->add_option("--trace", fit_args.trace, "Optional per-iteration loss CSV");

  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render", "Render a model at any resolution");
  render_cmd->add_option("model", render_args.model, "Model JSON")->required();
  render_cmd->add_option("--width", render_args.width, "Output width (default: source width)")
      ->check(CLI::PositiveNumber);
  render_cmd->add_option("--height", render_args.height, "Output height (default: source height)")
      ->check(CLI::PositiveNumber);
  render_cmd->add_option("--out", render_args.out, "Output .png or .pgm")->required();

  TransformArgs transform_args;
  auto* transform_cmd = app.add_subcommand("transform", "Translate, scale or rotate a model");
  transform_cmd->add_option("model", transform_args.model, "Model JSON")->required();
  auto* translate_opt = transform_cmd->add_option("--translate", transform_args.translate,
                                                  "Offset (dx1 dx2) in normalized coordinates")
                            ->expected(2);
  auto* scale_opt = transform_cmd->add_option("--scale", transform_args.scale, "Scale factor k (out(x) = in(kx))");
  auto* rotate_opt = transform_cmd->add_option("--rotate", transform_args.rotate_deg, "Rotation angle in degrees");
  auto* center_opt = transform_cmd->add_option("--center", transform_args.center, "Rotation center")
                         ->expected(2)->capture_default_str();
  translate_opt->excludes(scale_opt)->excludes(rotate_opt)->excludes(center_opt);
  scale_opt->excludes(rotate_opt)->excludes(center_opt);
  center_opt->needs(rotate_opt);
  transform_cmd->add_option("--out", transform_args.out, "Output model JSON")->required();

  CorruptArgs corrupt_args;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Apply a seeded corruption to an image");
  corrupt_cmd->add_option("image", corrupt_args.input, "Input PGM or PNG")->required();
  corrupt_cmd->add_option("--mode", corrupt_args.mode, "occlude | awgn | saltpepper")
      ->required()->check(CLI::IsMember({"occlude", "awgn", "saltpepper"}));
  corrupt_cmd->add_option("--patch", corrupt_args.patch, "Square patch side (occlude)");
  corrupt_cmd->add_option("--patch-h", corrupt_args.patch_h, "Patch height (occlude)");
  corrupt_cmd->add_option("--patch-w", corrupt_args.patch_w, "Patch width (occlude)");
  corrupt_cmd->add_option("--fill", corrupt_args.fill, "Patch fill value in [0, 1] (occlude)")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  corrupt_cmd->add_option("--sigma", corrupt_args.sigma, "Noise std-dev on the 0..255 scale (awgn)")
      ->check(CLI::NonNegativeNumber);
  corrupt_cmd->add_option("--ratio", corrupt_args.ratio, "Fraction of pixels dropped (saltpepper)")
      ->check(CLI::Range(0.0, 1.0));
  corrupt_cmd->add_option("--seed", corrupt_args.seed, "Random seed")->capture_default_str();
  corrupt_cmd->add_option("--out", corrupt_args.out, "Output .png or .pgm")->required();
  corrupt_cmd->add_option("--mask-out", corrupt_args.mask_out, "Optional observation mask output");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Compare two images: MSE, PAE, PSNR");
  eval_cmd->add_option("image_a", eval_args.a, "First image")->required();
  eval_cmd->add_option("image_b", eval_args.b, "Second image")->required();
  eval_cmd->add_option("--mask", eval_args.mask, "Restrict to observed pixels of this mask image");

  ExperimentArgs experiment_args;
  auto* experiment_cmd = app.add_subcommand("experiment", "Run a batch protocol over a directory of images");
  experiment_cmd->add_option("--suite", experiment_args.suite, "elements-sweep | restore | denoise")
      ->required()->check(CLI::IsMember({"elements-sweep", "restore", "denoise"}));
  experiment_cmd->add_option("--input", experiment_args.input, "Directory of .pgm/.png images")->required();
  experiment_cmd->add_option("--out", experiment_args.out, "Output report CSV")->required();
  experiment_cmd->add_option("--elements", experiment_args.config.n_elements,
                             "Elements for restore/denoise (the sweep sets its own)")
      ->capture_default_str()->check(CLI::PositiveNumber);
  add_fit_config_options(experiment_cmd, experiment_args.config);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "gaussmix: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit_args, out);
    if (*render_cmd) return cmd_render(render_args, out);
    if (*transform_cmd) return cmd_transform(transform_args, out);
    if (*corrupt_cmd) return cmd_corrupt(corrupt_args, out);
    if (*eval_cmd) return cmd_eval(eval_args, out);
    if (*experiment_cmd) return cmd_experiment(experiment_args, out, err);
  } catch (const UsageError& e) {
    err << "gaussmix: " << e.what() << '\n';
    return kUsage;
  } catch (const EmptyInputError& e) {
    err << "gaussmix: " << e.what() << '\n';
    return kEmptyInput;
  } catch (const EmptyMaskError& e) {
    err << "gaussmix: " << e.what() << '\n';
    return kEmptyInput;
  } catch (const InvalidArgumentError& e) {
    err << "gaussmix: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "gaussmix: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "gaussmix: " << e.what() << '\n';
    return kBadInput;
  }
  return kUsage;
}

}  // namespace gaussmix::cli
