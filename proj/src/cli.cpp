#include "nsnet/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "nsnet/binary_io.hpp"
#include "nsnet/dataset.hpp"
#include "nsnet/error.hpp"
#include "nsnet/eval.hpp"
#include "nsnet/image_io.hpp"
#include "nsnet/linalg.hpp"
#include "nsnet/patchsel.hpp"
#include "nsnet/trainer.hpp"

namespace fs = std::filesystem;

namespace nsnet::cli {

namespace {

void require_file(const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw IoError("no such file: " + path);
}

template <typename T, typename Reader>
T load_with(const std::string& path, Reader&& reader) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return reader(in);
  } catch (const ParseError& e) {
    throw ParseError(e.code(), path + ": " + e.what());
  }
}

SemanticNullSpace load_projection(const std::string& path) {
  return load_with<SemanticNullSpace>(path, [](std::istream& in) { return read_projection(in); });
}

DetectionHead load_head(const std::string& path) {
  return load_with<DetectionHead>(path, [](std::istream& in) { return read_head(in); });
}

EmbeddingSet load_set(const std::string& path) {
  require_file(path);
  return load_embeddings(path);
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::string entropy_csv(const std::vector<PatchScore>& scores) {
  std::string out = "grid_row,grid_col,entropy\n";
  char buf[64];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.9f\n", s.grid_row, s.grid_col, s.entropy);
    out += buf;
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file_atomic(path, [&](std::ostream& o) { o << text; });
}

struct NullspaceArgs {
  std::string embeddings, out;
  double threshold = kDefaultNullspaceThreshold;
};

struct ProjectArgs {
  std::string embeddings, proj, out;
};

struct PatchselArgs {
  std::string input, output, entropy_dir;
  int patch = 32;
  int target = 224;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string embeddings, proj, out;
  TrainConfig cfg;
  bool no_normalize = false;
};

struct EvalArgs {
  std::string embeddings, proj, head, report;
  double threshold = 0.5;
};

struct ExportArgs {
  std::string embeddings, proj, head, out;
};

void run_nullspace(const NullspaceArgs& a, std::ostream& out) {
  const auto set = load_set(a.embeddings);
  const auto ns = build_nullspace(text_matrix(set), a.threshold);
  io::write_file_atomic(a.out, [&](std::ostream& o) { write_projection(ns, o); });
  out << "null-space: dim " << ns.dim << ", rank kept " << ns.rank_kept << ", from "
      << ns.source_count << " text vectors\n";
}

void run_project(const ProjectArgs& a, std::ostream& out) {
  auto set = load_set(a.embeddings);
  const auto ns = load_projection(a.proj);
  const auto decoupled = project(visual_matrix(set), ns);
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    const auto row = decoupled.row(i);
    auto& v = set.records[i].visual;
    for (std::size_t j = 0; j < set.dim; ++j) v[j] = static_cast<float>(row[j]);
  }
  save_embeddings(set, a.out);
  out << "projected " << set.records.size() << " records\n";
}

void run_patchsel(const PatchselArgs& a, std::ostream& out, std::string& diagnostics) {
  SelectionConfig cfg{a.patch, a.target, a.seed};
  cfg.validate();
  std::error_code ec;
  if (!fs::is_directory(a.input, ec)) throw IoError("no such directory: " + a.input);
  fs::create_directories(a.output, ec);
  if (ec) throw IoError("cannot create directory: " + a.output);
  if (!a.entropy_dir.empty()) {
    fs::create_directories(a.entropy_dir, ec);
    if (ec) throw IoError("cannot create directory: " + a.entropy_dir);
  }

  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(a.input)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());

  std::vector<std::string> errors(inputs.size());
  const auto count = static_cast<std::int64_t>(inputs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t ii = 0; ii < count; ++ii) {
    const auto& src = inputs[static_cast<std::size_t>(ii)];
    try {
      const auto result = select_and_reassemble(load_image(src), cfg);
      const auto stem = src.stem().string();
      save_png(result.image, fs::path(a.output) / (stem + ".png"));
      if (!a.entropy_dir.empty()) {
        write_text(fs::path(a.entropy_dir) / (stem + ".csv"), entropy_csv(result.scores));
      }
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(ii)] = src.string() + ": " + e.what();
    }
  }

  std::size_t failed = 0;
  for (const auto& e : errors) {
    if (e.empty()) continue;
    ++failed;
    diagnostics += "error: " + e + "\n";
  }
  out << "patchsel: " << (inputs.size() - failed) << " of " << inputs.size() << " images written\n";
  if (failed > 0) throw Error(std::to_string(failed) + " image(s) failed");
}

void run_train(TrainArgs a, std::ostream& out) {
  a.cfg.normalize = !a.no_normalize;
  a.cfg.validate();
  const auto set = load_set(a.embeddings);
  const auto ns = load_projection(a.proj);
  const auto head = train(set, ns, a.cfg);
  io::write_file_atomic(a.out, [&](std::ostream& o) { write_head(head, o); });
  out << "trained head: dim " << head.dim << ", width " << head.width << "\n";
}

void run_eval(const EvalArgs& a, std::ostream& out) {
  const auto set = load_set(a.embeddings);
  const auto ns = load_projection(a.proj);
  const auto head = load_head(a.head);
  const auto report = evaluate(head, ns, set, a.threshold);
  write_text(a.report, report_to_json(report));
  out << "mean_acc " << report.mean_acc << "\n";
}

void run_export(const ExportArgs& a, std::ostream& out) {
  const auto set = load_set(a.embeddings);
  const auto ns = load_projection(a.proj);
  const auto head = load_head(a.head);
  const auto features = adapter_features(head, ns, set);
  io::write_file_atomic(a.out, [&](std::ostream& o) { write_feature_csv(set, features, o); });
  out << "exported " << features.rows() << " x " << features.cols() << " features\n";
}

}  // namespace

CommandOutcome run(const std::vector<std::string>& argv, std::ostream& out) {
  CLI::App app{"Semantic null-space projection toolkit for AI-generated image detection",
               argv.empty() ? "nsnet" : argv.front()};
  app.require_subcommand(1);

  NullspaceArgs ns_args;
  auto* ns_cmd = app.add_subcommand("nullspace", "Build a projection matrix from text vectors");
  ns_cmd->add_option("--embeddings", ns_args.embeddings, "NSEB file with text vectors")->required();
  ns_cmd->add_option("--threshold", ns_args.threshold, "Relative singular-value cutoff in [0, 1)")
      ->capture_default_str();
  ns_cmd->add_option("--out", ns_args.out, "Output NSPJ file")->required();

  ProjectArgs proj_args;
  auto* proj_cmd = app.add_subcommand("project", "Replace visual vectors by their projection");
  proj_cmd->add_option("--embeddings", proj_args.embeddings, "Input NSEB file")->required();
  proj_cmd->add_option("--proj", proj_args.proj, "NSPJ projection file")->required();
  proj_cmd->add_option("--out", proj_args.out, "Output NSEB file")->required();

  PatchselArgs ps_args;
  auto* ps_cmd = app.add_subcommand("patchsel", "Spectral-entropy patch selection over a directory");
  ps_cmd->add_option("--input", ps_args.input, "Directory of PNG/JPEG images")->required();
  ps_cmd->add_option("--output", ps_args.output, "Directory for reassembled PNGs")->required();
  ps_cmd->add_option("--patch", ps_args.patch, "Patch size N")->capture_default_str();
  ps_cmd->add_option("--target", ps_args.target, "Output size M")->capture_default_str();
  ps_cmd->add_option("--seed", ps_args.seed, "Shuffle seed")->capture_default_str();
  ps_cmd->add_option("--entropy-csv", ps_args.entropy_dir, "Directory for per-patch entropy CSVs");

  TrainArgs tr_args;
  auto* tr_cmd = app.add_subcommand("train", "Train the detection head");
  tr_cmd->add_option("--embeddings", tr_args.embeddings, "Training NSEB file")->required();
  tr_cmd->add_option("--proj", tr_args.proj, "NSPJ projection file")->required();
  tr_cmd->add_option("--lambda", tr_args.cfg.lambda, "BCE weight")->capture_default_str();
  tr_cmd->add_option("--tau", tr_args.cfg.tau, "Contrastive temperature")->capture_default_str();
  tr_cmd->add_option("--epochs", tr_args.cfg.epochs, "Epochs")->capture_default_str();
  tr_cmd->add_option("--batch", tr_args.cfg.batch_size, "Batch size")->capture_default_str();
  tr_cmd->add_option("--lr", tr_args.cfg.learning_rate, "Adam learning rate")->capture_default_str();
  tr_cmd->add_option("--seed", tr_args.cfg.seed, "Seed")->capture_default_str();
  tr_cmd->add_option("--width", tr_args.cfg.adapter_width, "Adapter width h")->capture_default_str();
  tr_cmd->add_flag("--no-normalize", tr_args.no_normalize,
                   "Use raw adapter outputs in the contrastive term");
  tr_cmd->add_option("--out", tr_args.out, "Output NSHD file")->required();

  EvalArgs ev_args;
  auto* ev_cmd = app.add_subcommand("eval", "Score a set and write the metric report");
  ev_cmd->add_option("--embeddings", ev_args.embeddings, "NSEB file")->required();
  ev_cmd->add_option("--proj", ev_args.proj, "NSPJ projection file")->required();
  ev_cmd->add_option("--head", ev_args.head, "NSHD head file")->required();
  ev_cmd->add_option("--threshold", ev_args.threshold, "Decision threshold")->capture_default_str();
  ev_cmd->add_option("--report", ev_args.report, "Output JSON report")->required();

  ExportArgs ex_args;
  auto* ex_cmd = app.add_subcommand("export-features", "Write adapter outputs as CSV");
  ex_cmd->add_option("--embeddings", ex_args.embeddings, "NSEB file")->required();
  ex_cmd->add_option("--proj", ex_args.proj, "NSPJ projection file")->required();
  ex_cmd->add_option("--head", ex_args.head, "NSHD head file")->required();
  ex_cmd->add_option("--out", ex_args.out, "Output CSV")->required();

  std::vector<std::string> args(argv.size() > 1 ? argv.begin() + 1 : argv.end(), argv.end());
  std::reverse(args.begin(), args.end());

  CommandOutcome outcome;
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return outcome;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return outcome;
  } catch (const CLI::ParseError& e) {
    outcome.exit_code = kExitUsage;
    outcome.diagnostics = std::string("error: ") + e.what() + "\n" + app.help();
    return outcome;
  }

  try {
    if (*ns_cmd) run_nullspace(ns_args, out);
    if (*proj_cmd) run_project(proj_args, out);
    if (*ps_cmd) run_patchsel(ps_args, out, outcome.diagnostics);
    if (*tr_cmd) run_train(tr_args, out);
    if (*ev_cmd) run_eval(ev_args, out);
    if (*ex_cmd) run_export(ex_args, out);
  } catch (const std::exception& e) {
    outcome.exit_code = kExitFailure;
    outcome.diagnostics += std::string("error: ") + e.what() + "\n";
  }
  return outcome;
}

}  // namespace nsnet::cli
