// sguie: enhance, evaluate, train, gradient-check and run reference curation.

#include <omp.h>

#include <charconv>
#include <csignal>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "sguie/curation_server.hpp"
#include "sguie/sguie.hpp"

namespace fs = std::filesystem;
using namespace sguie;

namespace {

// JSON config files: {"threads": 2, "train": {"epochs": 3, "hyper": {...}}}.
// Subcommand names open sections; other nested objects are flattened and
// underscores in keys become dashes, so "lambda_aux" sets --lambda-aux.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::set<std::string> sections) : sections_(std::move(sections)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    throw CLI::FileError("writing JSON configs is not supported");
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("config: top level must be an object");
    std::vector<CLI::ConfigItem> items;
    walk(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config: unsupported value " + v.dump());
  }

  void walk(const nlohmann::json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) const {
    for (const auto& [key, value] : obj.items()) {
      std::string name = key;
      std::replace(name.begin(), name.end(), '_', '-');
      if (value.is_null()) continue;
      if (value.is_object()) {
        if (sections_.count(name)) {
          auto p = parents;
          p.push_back(name);
          walk(value, p, out);
        } else {
          walk(value, parents, out);
        }
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = name;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }

  std::set<std::string> sections_;
};

/// Images given as files or directories, keyed by id (file stem).
std::map<std::string, fs::path> collect_images(const std::vector<std::string>& inputs) {
  std::map<std::string, fs::path> out;
  for (const auto& in : inputs) {
    std::map<std::string, fs::path> found;
    if (fs::is_directory(in)) found = sguie::detail::index_dir(in);
    else found[fs::path(in).stem().string()] = in;
    for (const auto& [id, p] : found) {
      if (!out.emplace(id, p).second) throw UsageError("duplicate image id '" + id + "' among the inputs");
    }
  }
  if (out.empty()) throw UsageError("no input images found");
  return out;
}

void print_table(std::ostream& os, const MetricReport& report) {
  const auto json = report.json();
  const auto& metrics = report.metrics();
  auto header = [](const std::string& m) { return m == "mse" ? std::string("MSE(x10^3)") : m; };
  auto cell = [](const std::string& m, double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(m == "mse" ? 3 : 4) << (m == "mse" ? v / 1000.0 : v);
    return s.str();
  };
  std::size_t idw = 5;
  for (const auto& [id, row] : json["images"].items()) idw = std::max(idw, id.size());
  os << std::left << std::setw(static_cast<int>(idw) + 2) << "image";
  for (const auto& m : metrics) os << std::right << std::setw(13) << header(m);
  os << '\n';
  auto line = [&](const std::string& id, const nlohmann::ordered_json& row) {
    os << std::left << std::setw(static_cast<int>(idw) + 2) << id;
    for (const auto& m : metrics) {
      os << std::right << std::setw(13) << (row.contains(m) ? cell(m, row[m].get<double>()) : std::string("-"));
    }
    os << '\n';
  };
  for (const auto& [id, row] : json["images"].items()) line(id, row);
  line("mean", json["mean"]);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

CurationServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-attention-guided underwater image enhancement"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);

  int threads = 0;
  auto* threads_opt =
      app.add_option("--threads", threads, "Worker threads (0: library default; fallback SGUIE_THREADS)")->check(CLI::NonNegativeNumber);
  std::string config_path;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  }
  app.set_config("--config", "", "Config file (JSON, or TOML for any other extension)");
  if (fs::path(config_path).extension() == ".json") {
    app.config_formatter(std::make_shared<JsonConfig>(std::set<std::string>{
        "enhance", "eval", "train", "gradcheck", "curate", "serve", "tally", "gen-candidates", "build-session"}));
  }

  // enhance ---------------------------------------------------------------
  auto* enhance = app.add_subcommand("enhance", "Enhance images with a trained checkpoint");
  std::vector<std::string> en_inputs;
  std::string en_ckpt, en_masks, en_palette, en_out;
  bool en_no_mask = false;
  enhance->add_option("inputs", en_inputs, "Image files or directories")->required()->check(CLI::ExistingPath);
  enhance->add_option("--checkpoint", en_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  auto* mask_opt = enhance->add_option("--mask-dir", en_masks, "Masks named by image id")->check(CLI::ExistingDirectory);
  enhance->add_flag("--no-mask", en_no_mask, "Main branch only (zero regions)")->excludes(mask_opt);
  enhance->add_option("--palette", en_palette, "Palette JSON")->check(CLI::ExistingFile);
  enhance->add_option("--out", en_out, "Output directory")->required();

  // eval ------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Score images (MSE, PSNR, SSIM, UIQM, UCIQE, chart metrics)");
  std::string ev_a, ev_b, ev_noref, ev_chart, ev_out;
  eval->add_option("dir_a", ev_a, "Enhanced images")->check(CLI::ExistingDirectory);
  eval->add_option("dir_b", ev_b, "References matched by id")->check(CLI::ExistingDirectory);
  eval->add_option("--noref", ev_noref, "Images for no-reference metrics")->check(CLI::ExistingDirectory);
  eval->add_option("--chart", ev_chart, "Color chart layout JSON")->check(CLI::ExistingFile);
  eval->add_option("--out", ev_out, "Write metrics.csv and metrics.json here");

  // train -----------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train on a dataset root (images/, reference/, masks/)");
  TrainConfig tc;
  std::string tr_data, tr_out, tr_ckpt, tr_test_list, tr_val_list;
  double tr_test_ratio = SplitSpec{}.test_ratio;
  std::uint64_t tr_split_seed = 0;
  bool tr_no_augment = false, tr_no_zero_tail = false;
  train_cmd->add_option("--data", tr_data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", tr_out, "Output directory (checkpoints, log)")->required();
  train_cmd->add_option("--checkpoint", tr_ckpt, "Start from these weights")->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", tc.epochs, "Epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", tc.lr0, "Initial learning rate (linear decay to 0)")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lambda-aux", tc.lambda_aux, "Weight of the per-region auxiliary loss")->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", tc.seed, "Initialization, shuffling and augmentation seed")->capture_default_str();
  train_cmd->add_option("--checkpoint-every", tc.checkpoint_every, "Epochs between snapshots (0: final only)")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--image-size", tc.image_size, "Training crop side")->capture_default_str()->check(CLI::Range(8, 4096));
  train_cmd->add_flag("--no-augment", tr_no_augment, "Center crops, no flips");
  train_cmd->add_flag("--no-zero-tail", tr_no_zero_tail, "Random tail init instead of the identity start");
  train_cmd->add_option("--test-list", tr_test_list, "Ids held out for test")->check(CLI::ExistingFile);
  train_cmd->add_option("--val-list", tr_val_list, "Ids held out for validation")->check(CLI::ExistingFile);
  train_cmd->add_option("--test-ratio", tr_test_ratio, "Held-out fraction without lists")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--split-seed", tr_split_seed, "Seed of the held-out draw")->capture_default_str();
  train_cmd->add_option("--base-channels", tc.hyper.base_channels)->capture_default_str();
  train_cmd->add_option("--reduction", tc.hyper.reduction)->capture_default_str();
  train_cmd->add_option("--rg-count", tc.hyper.rg_count)->capture_default_str();
  train_cmd->add_option("--fab-per-rg", tc.hyper.fab_per_rg)->capture_default_str();
  train_cmd->add_option("--unet-depth", tc.hyper.unet_depth)->capture_default_str();
  train_cmd->add_option("--srm-stem-channels", tc.hyper.srm_stem_channels)->capture_default_str();
  train_cmd->add_option("--unet-channels", tc.hyper.unet_channels)->capture_default_str();

  // gradcheck -------------------------------------------------------------
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  std::string gc_precision = "both";
  std::size_t gc_shapes = 5;
  std::uint64_t gc_seed = 2024;
  double gc_tol32 = 1e-3, gc_tol64 = 1e-6;
  gradcheck->add_option("--precision", gc_precision)->check(CLI::IsMember({"f32", "f64", "both"}))->capture_default_str();
  gradcheck->add_option("--shapes", gc_shapes, "Random shapes per op")->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", gc_seed)->capture_default_str();
  gradcheck->add_option("--threshold-f32", gc_tol32)->capture_default_str();
  gradcheck->add_option("--threshold-f64", gc_tol64)->capture_default_str();

  // curate ----------------------------------------------------------------
  auto* curate = app.add_subcommand("curate", "Reference curation by volunteer voting");
  curate->require_subcommand(1);
  auto* serve = curate->add_subcommand("serve", "Serve ballots over HTTP");
  std::string cu_session, cu_ledger, cu_host = "127.0.0.1", cu_ui;
  int cu_port = 8080;
  serve->add_option("--session", cu_session, "Session file")->required()->check(CLI::ExistingFile);
  serve->add_option("--ledger", cu_ledger, "Vote ledger (default: ledger.jsonl beside the session)");
  serve->add_option("--host", cu_host)->capture_default_str();
  serve->add_option("--port", cu_port)->capture_default_str()->check(CLI::Range(0, 65535));
  serve->add_option("--ui", cu_ui, "Static UI directory served at /")->check(CLI::ExistingDirectory);

  auto* tally_cmd = curate->add_subcommand("tally", "Tally a vote ledger");
  std::string ta_out, ta_refs;
  tally_cmd->add_option("--session", cu_session, "Session file")->required()->check(CLI::ExistingFile);
  tally_cmd->add_option("--ledger", cu_ledger, "Vote ledger (default: ledger.jsonl beside the session)");
  tally_cmd->add_option("--out", ta_out, "Write tally.json and tally.csv here");
  tally_cmd->add_option("--references", ta_refs, "Copy each winner here as <id>.png");

  auto* gen = curate->add_subcommand("gen-candidates", "Built-in candidate enhancements");
  std::string ge_raw, ge_out;
  std::vector<std::string> ge_methods{"identity", "gray_world", "gamma(0.7)", "hist_eq"};
  gen->add_option("--raw", ge_raw, "Raw image directory")->required()->check(CLI::ExistingDirectory);
  gen->add_option("--methods", ge_methods, "identity, gray_world, gamma(g), hist_eq")->delimiter(',')->capture_default_str();
  gen->add_option("--out", ge_out, "Output root; one directory per method")->required();

  auto* build = curate->add_subcommand("build-session", "Create a session file");
  std::string bs_raw, bs_root, bs_out, bs_id;
  std::vector<std::string> bs_candidates, bs_volunteers;
  std::uint64_t bs_seed = 0;
  build->add_option("--raw", bs_raw, "Raw image directory")->required()->check(CLI::ExistingDirectory);
  build->add_option("--candidates", bs_candidates, "method=directory, repeatable");
  build->add_option("--candidates-root", bs_root, "Every subdirectory is a method")->check(CLI::ExistingDirectory);
  build->add_option("--volunteers", bs_volunteers, "Volunteer ids")->required()->delimiter(',');
  build->add_option("--seed", bs_seed, "Ballot shuffle seed")->capture_default_str();
  build->add_option("--id", bs_id, "Session id");
  build->add_option("--out", bs_out, "Session file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (threads_opt->count() == 0) {
    if (const char* env = std::getenv("SGUIE_THREADS"); env && *env) {
      const std::string v(env);
      const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), threads);
      if (ec != std::errc() || end != v.data() + v.size() || threads < 0) {
        std::cerr << "error: SGUIE_THREADS must be a non-negative integer, got '" << v << "'\n";
        return 2;
      }
    }
  }
  if (threads > 0) {
    omp_set_num_threads(threads);
    Eigen::setNbThreads(threads);
  }

  try {
    if (*enhance) {
      if (en_masks.empty() && !en_no_mask) throw UsageError("enhance: pass --mask-dir or --no-mask");
      const Palette palette = en_palette.empty() ? Palette::suim() : Palette::load(en_palette);
      const auto images = collect_images(en_inputs);
      std::map<std::string, fs::path> masks;
      if (!en_masks.empty()) {
        masks = sguie::detail::index_dir(en_masks);
        std::vector<std::string> missing;
        for (const auto& [id, p] : images) {
          if (!masks.count(id)) missing.push_back(id);
        }
        if (!missing.empty()) {
          std::ostringstream os;
          os << "enhance: no mask for";
          for (const auto& id : missing) os << ' ' << id;
          throw UsageError(os.str());
        }
      }
      auto params = load_model<float>(en_ckpt);
      fs::create_directories(en_out);
      for (const auto& [id, path] : images) {
        std::optional<Rgb8Image> mask;
        if (!en_masks.empty()) mask = read_image(masks.at(id));
        const EnhanceResult r = enhance_image(params, read_image(path), mask, palette);
        write_image(fs::path(en_out) / (id + ".png"), r.image);
        std::cout << id << ": " << r.regions << " region(s)";
        if (!r.dropped.empty()) std::cout << ", " << r.dropped.size() << " dropped (smaller than 4x4)";
        std::cout << '\n';
      }
      return 0;
    }

    if (*eval) {
      EvalOptions opt;
      if (!ev_a.empty()) opt.dir_a = ev_a;
      if (!ev_b.empty()) opt.dir_b = ev_b;
      if (!ev_noref.empty()) opt.noref = ev_noref;
      if (!ev_chart.empty()) opt.chart = ev_chart;
      if (!opt.dir_b && !opt.noref && !opt.chart) throw UsageError("eval: give dir_a dir_b, --noref, or --chart");
      const EvalResult res = evaluate(opt);
      if (!res.unmatched.empty()) {
        std::cerr << "error: unmatched files:\n";
        for (const auto& u : res.unmatched) std::cerr << "  " << u << '\n';
        return 1;
      }
      if (res.report.size() == 0) throw UsageError("eval: no images to score");
      print_table(std::cout, res.report);
      if (!ev_out.empty()) {
        write_text(fs::path(ev_out) / "metrics.csv", res.report.csv());
        write_text(fs::path(ev_out) / "metrics.json", res.report.json().dump(2) + "\n");
      }
      return 0;
    }

    if (*train_cmd) {
      tc.augment = !tr_no_augment;
      tc.zero_tail = !tr_no_zero_tail;
      SplitSpec split;
      if (!tr_test_list.empty()) split.test_list = tr_test_list;
      if (!tr_val_list.empty()) split.val_list = tr_val_list;
      split.test_ratio = tr_test_ratio;
      split.seed = tr_split_seed;
      const DatasetManifest manifest = scan_dataset(tr_data, split);
      for (const auto& e : manifest.entries) {
        for (const auto& f : e.flags) std::cerr << "warning: " << e.id << ": " << f << '\n';
      }
      std::optional<Trainer<float>> trainer;
      if (!tr_ckpt.empty()) {
        auto params = load_model<float>(tr_ckpt);
        tc.hyper = params.config;
        trainer.emplace(tc, std::move(params));
      } else {
        trainer.emplace(tc);
      }
      fs::create_directories(tr_out);
      write_text(fs::path(tr_out) / "manifest.json", manifest.to_json().dump(2) + "\n");
      std::cout << "train: " << manifest.count(Split::Train) << " images, " << tc.epochs << " epoch(s)\n";
      try {
        train(*trainer, manifest, TrainOutputs{tr_out}, {}, [](const EpochRecord& e) {
          std::cout << "epoch " << e.epoch + 1 << "  loss " << std::setprecision(6) << e.mean_loss << "  lr " << e.lr
                    << "  " << std::fixed << std::setprecision(1) << e.wall_seconds << "s" << std::defaultfloat << '\n';
        });
      } catch (const DivergenceError& e) {
        std::cerr << "error: training diverged: " << e.what() << '\n';
        return 3;
      }
      return 0;
    }

    if (*gradcheck) {
      std::map<std::string, std::pair<double, double>> rows;
      const bool do32 = gc_precision != "f64", do64 = gc_precision != "f32";
      if (do32) {
        for (const auto& c : op_gradcheck_suite<float>(1e-3, gc_shapes, gc_seed)) rows[c.op].first = c.max_rel_error;
      }
      if (do64) {
        for (const auto& c : op_gradcheck_suite<double>(1e-5, gc_shapes, gc_seed)) rows[c.op].second = c.max_rel_error;
      }
      bool ok = true;
      std::cout << std::left << std::setw(22) << "op";
      if (do32) std::cout << std::right << std::setw(14) << "f32";
      if (do64) std::cout << std::right << std::setw(14) << "f64";
      std::cout << '\n';
      for (const auto& [op, e] : rows) {
        std::cout << std::left << std::setw(22) << op << std::scientific << std::setprecision(3);
        if (do32) {
          std::cout << std::right << std::setw(13) << e.first << (e.first <= gc_tol32 ? ' ' : '!');
          ok = ok && e.first <= gc_tol32;
        }
        if (do64) {
          std::cout << std::right << std::setw(13) << e.second << (e.second <= gc_tol64 ? ' ' : '!');
          ok = ok && e.second <= gc_tol64;
        }
        std::cout << std::defaultfloat << '\n';
      }
      std::cout << (ok ? "all ops within tolerance" : "FAILED: some ops exceed tolerance") << " (f32 " << gc_tol32
                << ", f64 " << gc_tol64 << ")\n";
      return ok ? 0 : 1;
    }

    if (*curate) {
      auto ledger_for = [&] {
        return cu_ledger.empty() ? fs::path(cu_session).parent_path() / "ledger.jsonl" : fs::path(cu_ledger);
      };

      if (*serve) {
        CurationStore store(load_session(cu_session), ledger_for());
        CurationServer server(store, cu_ui);
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        const int port = server.bind(cu_host, cu_port);
        if (port <= 0) throw UsageError("cannot bind " + cu_host + ":" + std::to_string(cu_port));
        std::cout << "serving session '" << store.session().id << "' on http://" << cu_host << ":" << port
                  << " (ledger " << store.ledger_path().string() << ")" << std::endl;
        server.serve();
        g_server = nullptr;
        return 0;
      }

      if (*tally_cmd) {
        const CurationSession session = load_session(cu_session);
        const TallyResult t = tally(session, read_ledger(ledger_for()));
        if (t.empty()) std::cerr << "warning: no votes in the ledger; the tally is empty\n";
        if (!ta_out.empty()) {
          write_text(fs::path(ta_out) / "tally.json", t.to_json().dump(2) + "\n");
          write_text(fs::path(ta_out) / "tally.csv", t.csv());
        }
        for (const auto& im : t.images) {
          std::cout << im.id << ": " << im.winner << " (" << im.counts.at(im.winner) << "/" << im.votes << ")"
                    << (im.tie ? " tie" : "") << '\n';
        }
        for (const auto& id : t.no_votes) std::cerr << "warning: " << id << " has no votes\n";
        if (!t.empty()) {
          std::cout << std::fixed << std::setprecision(2);
          for (const auto& [m, v] : t.vote_share) {
            std::cout << "  " << std::left << std::setw(16) << m << std::right << std::setw(8) << v << "% of votes"
                      << std::setw(8) << t.reference_share.at(m) << "% of references\n";
          }
        }
        if (!ta_refs.empty()) {
          const auto written = select_references(session, t, ta_refs);
          std::cout << written.size() << " reference(s) written to " << ta_refs << '\n';
        }
        return 0;
      }

      if (*gen) {
        std::vector<CandidateMethod> methods;
        for (const auto& m : ge_methods) methods.push_back(CandidateMethod::parse(m));
        const GenReport rep = gen_candidates(ge_raw, methods, ge_out);
        for (const auto& [name, dir] : rep.dirs) std::cout << name << " -> " << dir.string() << '\n';
        std::cout << rep.written << " file(s) written\n";
        for (const auto& f : rep.failures) std::cerr << "error: " << f << '\n';
        return rep.failures.empty() ? 0 : 1;
      }

      if (*build) {
        std::map<std::string, fs::path> dirs;
        if (!bs_root.empty()) {
          for (const auto& d : fs::directory_iterator(bs_root)) {
            if (d.is_directory()) dirs[d.path().filename().string()] = d.path();
          }
        }
        for (const auto& c : bs_candidates) {
          const auto eq = c.find('=');
          if (eq == std::string::npos || eq == 0 || eq + 1 == c.size()) {
            throw UsageError("--candidates expects method=directory, got '" + c + "'");
          }
          dirs[c.substr(0, eq)] = c.substr(eq + 1);
        }
        const SessionBuild b = build_session(bs_raw, dirs, bs_volunteers, bs_seed, bs_id);
        for (const auto& ex : b.excluded) {
          std::cerr << "warning: " << ex.id << " excluded, missing:";
          for (const auto& m : ex.missing_methods) std::cerr << ' ' << m;
          std::cerr << '\n';
        }
        if (fs::path(bs_out).has_parent_path()) fs::create_directories(fs::path(bs_out).parent_path());
        save_session(bs_out, b.session);
        std::cout << b.session.images.size() << " image(s), " << dirs.size() << " method(s), "
                  << b.session.volunteers.size() << " volunteer(s), " << b.session.ballot_count() << " ballot(s)\n";
        return 0;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
