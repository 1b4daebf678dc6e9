#include "driftforge/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "driftforge/losses.hpp"
#include "driftforge/metrics.hpp"
#include "driftforge/optim.hpp"

namespace driftforge::cli {

namespace fs = std::filesystem;

json to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["dataset"] = driftforge::to_json(cfg.dataset);
  j["model"] = {{"hidden", cfg.hidden}};
  j["train"] = {{"epochs", cfg.train_epochs}};
  j["refine"] = {{"epochs", cfg.refine_epochs},
                 {"lr", cfg.refine_lr},
                 {"weights", {cfg.refine_weights(0), cfg.refine_weights(1), cfg.refine_weights(2)}}};
  j["calibration"] = {{"max_samples", cfg.calib_max_samples}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("dataset")) cfg.dataset = dataset_config_from_json(j.at("dataset"));
  if (j.contains("model") && j.at("model").contains("hidden")) cfg.hidden = j.at("model").at("hidden").get<int>();
  if (j.contains("train") && j.at("train").contains("epochs"))
    cfg.train_epochs = j.at("train").at("epochs").get<int>();
  if (j.contains("refine")) {
    const auto& r = j.at("refine");
    if (r.contains("epochs")) cfg.refine_epochs = r.at("epochs").get<int>();
    if (r.contains("lr")) cfg.refine_lr = r.at("lr").get<double>();
    if (r.contains("weights")) {
      const auto& w = r.at("weights");
      cfg.refine_weights = Vec3d(w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>());
    }
  }
  if (j.contains("calibration") && j.at("calibration").contains("max_samples"))
    cfg.calib_max_samples = j.at("calibration").at("max_samples").get<int>();
  return cfg;
}

namespace {

std::string sanitize_filename(std::string id) {
  for (char& c : id)
    if (c == '#' || c == '+' || c == '/' || c == ' ') c = '-';
  return id;
}

void prepare_out_dir(const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_empty(out) && !force)
    throw std::runtime_error("output directory " + out.string() + " already exists; pass --force to overwrite");
  fs::create_directories(out);
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  bool force = false;
  int workers = 1;
  bool no_mss = false;
  bool no_scs = false;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = run_config_from_json(json::parse(read_text_file(args.config_path)));
  if (const char* env = std::getenv("DRIFT_FORGE_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
  if (args.seed_override) cfg.seed = *args.seed_override;
  cfg.dataset.seed = cfg.seed;
  return cfg;
}

void dump_config(const fs::path& out, const RunConfig& cfg) {
  write_text_file(out / "config.json", to_json(cfg).dump(1) + "\n");
}

std::vector<Scan> load_split(const fs::path& data, const std::string& split, const std::vector<std::string>& ids) {
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::vector<Scan> scans;
  scans.reserve(sorted.size());
  for (const auto& id : sorted) scans.push_back(load_scan(data / split / (sanitize_filename(id) + ".json")));
  return scans;
}

std::vector<ImuMount> mounts_from_calibration(const CalibrationReport& report) {
  std::vector<ImuMount> mounts;
  mounts.reserve(report.imus.size());
  for (const auto& fit : report.imus) {
    ImuMount m;
    m.rotation = fit.rotation;
    mounts.push_back(m);
  }
  return mounts;
}

int cmd_simulate(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  prepare_out_dir(args.out_dir, args.force);
  const Dataset ds = make_dataset(cfg.dataset);

  Manifest manifest;
  manifest.config = cfg.dataset;
  manifest.mounts = ds.mounts;
  manifest.subject_of = ds.subject_of;
  auto emit = [&](const std::vector<Scan>& scans, const std::string& split, std::vector<std::string>& ids) {
    for (const auto& s : scans) {
      ids.push_back(s.id);
      save_scan(fs::path(args.out_dir) / split / (sanitize_filename(s.id) + ".json"), s);
    }
    std::sort(ids.begin(), ids.end());
  };
  emit(ds.train, "train", manifest.train_ids);
  emit(ds.val, "val", manifest.val_ids);
  emit(ds.test, "test", manifest.test_ids);
  save_manifest(fs::path(args.out_dir) / "manifest.json", manifest);
  dump_config(args.out_dir, cfg);
  std::cout << "simulate: wrote " << manifest.train_ids.size() << " train / " << manifest.val_ids.size()
            << " val / " << manifest.test_ids.size() << " test scans to " << args.out_dir << "\n";
  return 0;
}

int cmd_calibrate(const CommonArgs& args, const std::string& data_dir) {
  const RunConfig cfg = resolve_config(args);
  prepare_out_dir(args.out_dir, args.force);
  const Manifest manifest = load_manifest(fs::path(data_dir) / "manifest.json");
  const std::vector<Scan> scans = load_split(data_dir, "train", manifest.train_ids);

  const int m = manifest.config.num_imus;
  std::vector<std::vector<CalibSample>> samples(static_cast<std::size_t>(m));
  for (const auto& scan : scans) {
    if (!scan.gt) throw std::runtime_error("calibrate: scan " + scan.id + " has no ground truth");
    const auto abs = accumulate_transforms(*scan.gt);
    for (int k = 0; k + 1 < scan.n_frames; ++k) {
      const Vec3d ref = euler_from_rotation(Mat3d(abs[static_cast<std::size_t>(k)].topLeftCorner<3, 3>()));
      for (int j = 0; j < m; ++j) {
        CalibSample s;
        s.ref_angle_deg = ref;
        s.imu_angle_deg = scan.imu[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].angle_deg;
        samples[static_cast<std::size_t>(j)].push_back(s);
      }
    }
  }
  for (auto& per_imu : samples) {
    if (static_cast<int>(per_imu.size()) > cfg.calib_max_samples) {
      const std::size_t stride = per_imu.size() / static_cast<std::size_t>(cfg.calib_max_samples) + 1;
      std::vector<CalibSample> thinned;
      for (std::size_t i = 0; i < per_imu.size(); i += stride) thinned.push_back(per_imu[i]);
      per_imu = std::move(thinned);
    }
  }

  CalibrationReport report;
  bool all_converged = true;
  for (int j = 0; j < m; ++j) {
    LmReport lm;
    MountFit fit;
    fit.rotation = fit_mount(samples[static_cast<std::size_t>(j)], LmConfig{}, &lm);
    fit.final_residual = lm.final_residual_norm;
    fit.iterations = lm.iterations;
    fit.converged = lm.converged;
    all_converged = all_converged && lm.converged;
    report.imus.push_back(fit);
    std::cout << "imu " << j << ": mount=(" << format_double(fit.rotation.phi(0)) << ", "
              << format_double(fit.rotation.phi(1)) << ", " << format_double(fit.rotation.phi(2))
              << ") deg, residual=" << format_double(fit.final_residual) << ", iters=" << fit.iterations
              << (fit.converged ? "" : " [not converged]") << "\n";
  }
  save_calibration(fs::path(args.out_dir) / "calibration.json", report);
  dump_config(args.out_dir, cfg);
  return all_converged ? 0 : 2;
}

int cmd_train(const CommonArgs& args, const std::string& data_dir) {
  const RunConfig cfg = resolve_config(args);
  prepare_out_dir(args.out_dir, args.force);
  const Manifest manifest = load_manifest(fs::path(data_dir) / "manifest.json");
  const std::vector<Scan> scans = load_split(data_dir, "train", manifest.train_ids);
  if (scans.empty()) throw std::runtime_error("train: no training scans");

  const MotionModel init =
      MotionModel::init(manifest.config.obs.dim, cfg.hidden, hash_combine(cfg.seed, fnv1a64("model-init")));
  TrainConfig tc;
  tc.epochs = cfg.train_epochs;
  tc.seed = hash_combine(cfg.seed, fnv1a64("train"));
  const TrainResult result = train(init, scans, manifest.mounts, tc);

  Checkpoint ckpt;
  ckpt.model = result.model;
  ckpt.seed = tc.seed;
  ckpt.config_hash = compat_hash(manifest.config.obs.dim, manifest.config.num_imus);
  save_checkpoint(fs::path(args.out_dir) / "checkpoint.json", ckpt);

  std::vector<std::vector<double>> rows;
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    rows.push_back({static_cast<double>(e), lr_schedule(Phase::kTrain, static_cast<int>(e)), result.epoch_loss[e]});
  write_csv(fs::path(args.out_dir) / "loss_curve.csv", {"epoch", "lr", "loss"}, rows);
  dump_config(args.out_dir, cfg);
  std::cout << "train: " << result.epoch_loss.size() << " epochs, final loss "
            << format_double(result.epoch_loss.back()) << "\n";
  return 0;
}

int cmd_refine(const CommonArgs& args, const std::string& data_dir, const std::string& checkpoint_path,
               const std::string& mounts_path) {
  const RunConfig cfg = resolve_config(args);
  prepare_out_dir(args.out_dir, args.force);
  const Manifest manifest = load_manifest(fs::path(data_dir) / "manifest.json");
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const std::uint64_t expect = compat_hash(manifest.config.obs.dim, manifest.config.num_imus);
  if (ckpt.config_hash != expect)
    throw std::runtime_error("refine: checkpoint/data config hash mismatch (checkpoint " +
                             std::to_string(ckpt.config_hash) + ", data " + std::to_string(expect) + ")");

  std::vector<ImuMount> mounts = manifest.mounts;
  if (!mounts_path.empty()) {
    mounts = mounts_from_calibration(load_calibration(mounts_path));
    if (static_cast<int>(mounts.size()) != manifest.config.num_imus)
      throw std::runtime_error("refine: calibration report IMU count mismatch");
  }

  const std::vector<Scan> scans = load_split(data_dir, "test", manifest.test_ids);
  Vec3d weights = cfg.refine_weights;
  if (args.no_mss) {
    weights(0) = 0.0;
    weights(1) = 0.0;
  }
  if (args.no_scs) weights(2) = 0.0;

  std::vector<RefineResult> results(scans.size());
  const std::uint64_t refine_seed = hash_combine(cfg.seed, fnv1a64("refine"));
  auto worker_fn = [&](std::atomic<std::size_t>& next) {
    for (std::size_t i = next.fetch_add(1); i < scans.size(); i = next.fetch_add(1)) {
      RefineConfig rc;
      rc.epochs = cfg.refine_epochs;
      rc.lr = cfg.refine_lr;
      rc.weights = weights;
      rc.seed = hash_combine(refine_seed, fnv1a64(scans[i].id));
      results[i] = refine_online(ckpt.model, scans[i], mounts, rc);
    }
  };
  const int workers = std::max(1, args.workers);
  if (workers == 1) {
    std::atomic<std::size_t> next{0};
    worker_fn(next);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back([&] { worker_fn(next); });
    for (auto& t : pool) t.join();
  }

  json scan_list = json::array();
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const auto& scan = scans[i];
    const auto& res = results[i];
    EstimateRecord rec;
    rec.scan_id = scan.id;
    rec.backbone = res.backbone.mean;
    rec.refined = res.refined.mean;
    save_estimates(fs::path(args.out_dir) / "refined" / (sanitize_filename(scan.id) + ".json"), rec);

    std::vector<std::vector<double>> rows;
    for (const auto& row : res.trace)
      rows.push_back({static_cast<double>(row.iteration), row.loss.single_imu, row.loss.multi_imu,
                      row.loss.self_consistency, row.loss.total, row.fdr, row.adr, row.ea});
    write_csv(fs::path(args.out_dir) / "traces" / (sanitize_filename(scan.id) + ".csv"),
              {"iteration", "single_imu", "multi_imu", "self_consistency", "total", "fdr", "adr", "ea"}, rows);
    scan_list.push_back({{"id", scan.id}, {"aborted_non_finite", res.aborted_non_finite}});
  }
  write_text_file(fs::path(args.out_dir) / "refine_manifest.json", json{{"scans", scan_list}}.dump(1) + "\n");
  dump_config(args.out_dir, cfg);
  std::cout << "refine: processed " << scans.size() << " scans\n";
  return 0;
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

Stats mean_std(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double acc = 0.0;
    for (double x : v) acc += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::vector<std::vector<double>> rows;
  std::size_t pos = text.find('\n');  // skip header
  while (pos != std::string::npos && pos + 1 < text.size()) {
    const std::size_t end = text.find('\n', pos + 1);
    const std::string line = text.substr(pos + 1, end == std::string::npos ? std::string::npos : end - pos - 1);
    if (!line.empty()) {
      std::vector<double> row;
      std::size_t start = 0;
      while (start <= line.size()) {
        const std::size_t comma = line.find(',', start);
        row.push_back(std::strtod(line.substr(start, comma - start).c_str(), nullptr));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      rows.push_back(std::move(row));
    }
    pos = end;
  }
  return rows;
}

int cmd_eval(const CommonArgs& args, const std::string& data_dir, const std::string& refined_dir) {
  const RunConfig cfg = resolve_config(args);
  prepare_out_dir(args.out_dir, args.force);
  const Manifest manifest = load_manifest(fs::path(data_dir) / "manifest.json");
  const std::vector<Scan> scans = load_split(data_dir, "test", manifest.test_ids);

  std::ostringstream csv;
  csv << "scan_id,condition,fdr,adr,md,sd,hd,ea,length\n";
  std::map<std::string, std::vector<double>> backbone_cols, refined_cols;
  const std::vector<std::string> metric_names = {"fdr", "adr", "md", "sd", "hd", "ea"};
  auto push_metrics = [&](std::map<std::string, std::vector<double>>& cols, const MetricReport& r) {
    cols["fdr"].push_back(r.fdr);
    cols["adr"].push_back(r.adr);
    cols["md"].push_back(r.md);
    cols["sd"].push_back(r.sd);
    cols["hd"].push_back(r.hd);
    cols["ea"].push_back(r.ea);
  };
  auto emit_row = [&](const std::string& id, const std::string& cond, const MetricReport& r) {
    csv << id << "," << cond << "," << format_double(r.fdr) << "," << format_double(r.adr) << ","
        << format_double(r.md) << "," << format_double(r.sd) << "," << format_double(r.hd) << ","
        << format_double(r.ea) << "," << format_double(r.length) << "\n";
  };

  for (const auto& scan : scans) {
    if (!scan.gt) throw std::runtime_error("eval: scan " + scan.id + " has no ground truth");
    const EstimateRecord rec =
        load_estimates(fs::path(refined_dir) / "refined" / (sanitize_filename(scan.id) + ".json"));
    const MetricReport rb = compute_report(rec.backbone, *scan.gt);
    const MetricReport rr = compute_report(rec.refined, *scan.gt);
    emit_row(scan.id, "backbone", rb);
    emit_row(scan.id, "refined", rr);
    push_metrics(backbone_cols, rb);
    push_metrics(refined_cols, rr);
  }
  write_text_file(fs::path(args.out_dir) / "metrics.csv", csv.str());

  json summary;
  for (const auto& name : metric_names) {
    const Stats b = mean_std(backbone_cols[name]);
    const Stats r = mean_std(refined_cols[name]);
    summary["backbone"][name] = {{"mean", b.mean}, {"std", b.sd}};
    summary["refined"][name] = {{"mean", r.mean}, {"std", r.sd}};
    summary["relative_improvement"][name] = b.mean != 0.0 ? (b.mean - r.mean) / b.mean : 0.0;
  }
  summary["num_scans"] = scans.size();
  write_text_file(fs::path(args.out_dir) / "summary.json", summary.dump(1) + "\n");

  // decline curves averaged over scans (iteration vs metric)
  std::vector<std::vector<double>> fdr_curves, adr_curves, ea_curves;
  for (const auto& scan : scans) {
    const auto rows = read_csv_rows(fs::path(refined_dir) / "traces" / (sanitize_filename(scan.id) + ".csv"));
    std::vector<double> f, a, e;
    for (const auto& row : rows) {
      f.push_back(row.at(5));
      a.push_back(row.at(6));
      e.push_back(row.at(7));
    }
    fdr_curves.push_back(std::move(f));
    adr_curves.push_back(std::move(a));
    ea_curves.push_back(std::move(e));
  }
  auto average_curve = [](const std::vector<std::vector<double>>& curves) {
    std::size_t n = 0;
    for (const auto& c : curves) n = std::max(n, c.size());
    std::vector<double> mean(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      int count = 0;
      for (const auto& c : curves) {
        // an aborted refinement holds its last value
        if (c.empty()) continue;
        sum += i < c.size() ? c[i] : c.back();
        ++count;
      }
      mean[i] = count ? sum / count : 0.0;
    }
    return mean;
  };
  struct CurveSpec {
    const char* name;
    const char* label;
    double y_max;
    const std::vector<std::vector<double>>* curves;
  };
  const std::vector<CurveSpec> specs = {{"fdr", "FDR (%)", 40.0, &fdr_curves},
                                        {"adr", "ADR (%)", 50.0, &adr_curves},
                                        {"ea", "EA (deg)", 10.0, &ea_curves}};
  for (const auto& spec : specs) {
    const std::vector<double> refined_curve = average_curve(*spec.curves);
    const std::vector<double> backbone_line(refined_curve.size(), refined_curve.empty() ? 0.0 : refined_curve.front());
    const std::string svg = render_curve_svg(std::string("online refinement: ") + spec.name, spec.label,
                                             {{"backbone", "#c0392b", backbone_line},
                                              {"refined", "#2e6da4", refined_curve}},
                                             0.0, spec.y_max);
    write_text_file(fs::path(args.out_dir) / "curves" / (std::string(spec.name) + ".svg"), svg);
  }
  dump_config(args.out_dir, cfg);
  std::cout << "eval: wrote metrics for " << scans.size() << " scans\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"driftforge: multi-IMU freehand scan simulation, training and online refinement"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string data_dir, checkpoint_path, refined_dir, mounts_path;

  auto add_common = [&](CLI::App* cmd, bool with_out = true) {
    cmd->add_option("--config", common.config_path, "run configuration JSON");
    cmd->add_option("--seed", common.seed_override, "override the config seed");
    if (with_out) cmd->add_option("--out", common.out_dir, "output directory")->required();
    cmd->add_flag("--force", common.force, "allow writing into a non-empty output directory");
    cmd->add_option("--workers", common.workers, "parallel workers for per-scan work");
  };

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_common(sim);

  auto* calib = app.add_subcommand("calibrate", "fit IMU mounting rotations from scans");
  add_common(calib);
  calib->add_option("--data", data_dir, "dataset directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train the motion estimator");
  add_common(train_cmd);
  train_cmd->add_option("--data", data_dir, "dataset directory")->required();

  auto* refine = app.add_subcommand("refine", "online per-scan refinement of a trained model");
  add_common(refine);
  refine->add_option("--data", data_dir, "dataset directory")->required();
  refine->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  refine->add_option("--mounts", mounts_path, "calibration report to take mounts from");
  refine->add_flag("--no-mss", common.no_mss, "disable the modal-level (IMU agreement) losses");
  refine->add_flag("--no-scs", common.no_scs, "disable the sequence-level self-consistency loss");

  auto* eval_cmd = app.add_subcommand("eval", "metric reports and decline curves");
  add_common(eval_cmd);
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--refined", refined_dir, "refine output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (sim->parsed()) return cmd_simulate(common);
    if (calib->parsed()) return cmd_calibrate(common, data_dir);
    if (train_cmd->parsed()) return cmd_train(common, data_dir);
    if (refine->parsed()) return cmd_refine(common, data_dir, checkpoint_path, mounts_path);
    if (eval_cmd->parsed()) return cmd_eval(common, data_dir, refined_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace driftforge::cli
