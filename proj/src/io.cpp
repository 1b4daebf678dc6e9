#include "driftforge/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace driftforge {

namespace {

json vec3_to_json(const Vec3d& v) { return json::array({v(0), v(1), v(2)}); }

Vec3d vec3_from_json(const json& j) { return Vec3d(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

json chain_to_json(const PoseChain& chain) {
  json rows = json::array();
  for (const auto& p : chain)
    rows.push_back(json::array({p.t(0), p.t(1), p.t(2), p.phi(0), p.phi(1), p.phi(2)}));
  return rows;
}

PoseChain chain_from_json(const json& rows) {
  PoseChain chain;
  chain.reserve(rows.size());
  for (const auto& r : rows) {
    RelPose p;
    for (int c = 0; c < 3; ++c) {
      p.t(c) = r.at(c).get<double>();
      p.phi(c) = r.at(c + 3).get<double>();
    }
    chain.push_back(p);
  }
  return chain;
}

}  // namespace

json scan_to_json(const Scan& scan) {
  json j;
  j["id"] = scan.id;
  j["tactic"] = to_string(scan.tactic);
  j["dt"] = scan.dt;
  j["N"] = scan.n_frames;
  j["M"] = scan.num_imus();
  j["d"] = scan.obs_dim();
  json obs = json::array();
  for (const auto& o : scan.obs) {
    json row = json::array();
    for (Eigen::Index i = 0; i < o.size(); ++i) row.push_back(o(i));
    obs.push_back(std::move(row));
  }
  j["obs"] = std::move(obs);
  json imu = json::array();
  for (const auto& stream : scan.imu) {
    json rows = json::array();
    for (const auto& r : stream)
      rows.push_back(json::array(
          {r.angle_deg(0), r.angle_deg(1), r.angle_deg(2), r.accel_g(0), r.accel_g(1), r.accel_g(2)}));
    imu.push_back(std::move(rows));
  }
  j["imu"] = std::move(imu);
  if (scan.gt) j["gt"] = chain_to_json(*scan.gt);
  return j;
}

Scan scan_from_json(const json& j) {
  Scan scan;
  scan.id = j.at("id").get<std::string>();
  scan.tactic = tactic_from_string(j.at("tactic").get<std::string>());
  scan.dt = j.at("dt").get<double>();
  scan.n_frames = j.at("N").get<int>();
  const int d = j.at("d").get<int>();
  for (const auto& row : j.at("obs")) {
    Eigen::VectorXd o(d);
    for (int i = 0; i < d; ++i) o(i) = row.at(static_cast<std::size_t>(i)).get<double>();
    scan.obs.push_back(std::move(o));
  }
  for (const auto& rows : j.at("imu")) {
    std::vector<ImuReading> stream;
    stream.reserve(rows.size());
    for (const auto& r : rows) {
      ImuReading reading;
      for (int c = 0; c < 3; ++c) {
        reading.angle_deg(c) = r.at(static_cast<std::size_t>(c)).get<double>();
        reading.accel_g(c) = r.at(static_cast<std::size_t>(c + 3)).get<double>();
      }
      stream.push_back(reading);
    }
    scan.imu.push_back(std::move(stream));
  }
  if (j.contains("gt")) scan.gt = chain_from_json(j.at("gt"));
  validate(scan);
  if (scan.num_imus() != j.at("M").get<int>()) throw std::invalid_argument("scan file: M mismatch");
  return scan;
}

void save_scan(const std::filesystem::path& path, const Scan& scan) {
  write_text_file(path, scan_to_json(scan).dump(1) + "\n");
}

Scan load_scan(const std::filesystem::path& path) { return scan_from_json(json::parse(read_text_file(path))); }

json to_json(const DatasetConfig& cfg) {
  json j;
  j["subjects"] = cfg.subjects;
  j["scans_per_subject"] = cfg.scans_per_subject;
  json tactics = json::array();
  for (auto t : cfg.tactics) tactics.push_back(to_string(t));
  j["tactics"] = tactics;
  j["n_frames"] = cfg.n_frames;
  j["preset"] = cfg.preset;
  j["length_mm"] = cfg.length_mm;
  j["length_jitter_frac"] = cfg.length_jitter_frac;
  j["dt"] = cfg.dt;
  j["num_imus"] = cfg.num_imus;
  j["obs"] = {{"dim", cfg.obs.dim},
              {"noise_sd", cfg.obs.noise_sd},
              {"elevation_gain", cfg.obs.elevation_gain},
              {"elevation_rel_noise_sd", cfg.obs.elevation_rel_noise_sd}};
  j["angle_noise_sd_deg"] = cfg.angle_noise_sd_deg;
  j["accel_noise_sd_g"] = cfg.accel_noise_sd_g;
  j["accel_bias_sd_g"] = cfg.accel_bias_sd_g;
  j["trajectory"] = {{"jitter_scale", cfg.traj.jitter_scale},
                     {"rot_jitter_sd_deg", cfg.traj.rot_jitter_sd_deg},
                     {"wobble_amp_deg", cfg.traj.wobble_amp_deg},
                     {"speed_mod_amp", cfg.traj.speed_mod_amp},
                     {"speed_mod_cycles", cfg.traj.speed_mod_cycles}};
  j["subject_variation"] = cfg.subject_variation;
  j["train_subjects"] = cfg.train_subjects;
  j["val_subjects"] = cfg.val_subjects;
  j["test_subjects"] = cfg.test_subjects;
  j["train_aug_per_scan"] = cfg.train_aug_per_scan;
  j["test_aug_per_scan"] = cfg.test_aug_per_scan;
  j["seed"] = cfg.seed;
  return j;
}

DatasetConfig dataset_config_from_json(const json& j) {
  DatasetConfig cfg;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("subjects", cfg.subjects);
  get("scans_per_subject", cfg.scans_per_subject);
  if (j.contains("tactics")) {
    cfg.tactics.clear();
    for (const auto& t : j.at("tactics")) cfg.tactics.push_back(tactic_from_string(t.get<std::string>()));
  }
  get("n_frames", cfg.n_frames);
  get("preset", cfg.preset);
  get("length_mm", cfg.length_mm);
  get("length_jitter_frac", cfg.length_jitter_frac);
  get("dt", cfg.dt);
  get("num_imus", cfg.num_imus);
  if (j.contains("obs")) {
    const auto& o = j.at("obs");
    if (o.contains("dim")) cfg.obs.dim = o.at("dim").get<int>();
    if (o.contains("noise_sd")) cfg.obs.noise_sd = o.at("noise_sd").get<double>();
    if (o.contains("elevation_gain")) cfg.obs.elevation_gain = o.at("elevation_gain").get<double>();
    if (o.contains("elevation_rel_noise_sd"))
      cfg.obs.elevation_rel_noise_sd = o.at("elevation_rel_noise_sd").get<double>();
  }
  get("angle_noise_sd_deg", cfg.angle_noise_sd_deg);
  get("accel_noise_sd_g", cfg.accel_noise_sd_g);
  get("accel_bias_sd_g", cfg.accel_bias_sd_g);
  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    if (t.contains("jitter_scale")) cfg.traj.jitter_scale = t.at("jitter_scale").get<double>();
    if (t.contains("rot_jitter_sd_deg")) cfg.traj.rot_jitter_sd_deg = t.at("rot_jitter_sd_deg").get<double>();
    if (t.contains("wobble_amp_deg")) cfg.traj.wobble_amp_deg = t.at("wobble_amp_deg").get<double>();
    if (t.contains("speed_mod_amp")) cfg.traj.speed_mod_amp = t.at("speed_mod_amp").get<double>();
    if (t.contains("speed_mod_cycles")) cfg.traj.speed_mod_cycles = t.at("speed_mod_cycles").get<double>();
  }
  get("subject_variation", cfg.subject_variation);
  get("train_subjects", cfg.train_subjects);
  get("val_subjects", cfg.val_subjects);
  get("test_subjects", cfg.test_subjects);
  get("train_aug_per_scan", cfg.train_aug_per_scan);
  get("test_aug_per_scan", cfg.test_aug_per_scan);
  get("seed", cfg.seed);
  return cfg;
}

json mount_to_json(const ImuMount& m) {
  json j;
  j["rotation_deg"] = vec3_to_json(m.rotation.phi);
  j["accel_bias_g"] = vec3_to_json(m.accel_bias_g);
  j["angle_noise_sd_deg"] = m.angle_noise_sd_deg;
  j["accel_noise_sd_g"] = m.accel_noise_sd_g;
  return j;
}

ImuMount mount_from_json(const json& j) {
  ImuMount m;
  m.rotation.phi = vec3_from_json(j.at("rotation_deg"));
  m.accel_bias_g = vec3_from_json(j.at("accel_bias_g"));
  m.angle_noise_sd_deg = j.at("angle_noise_sd_deg").get<double>();
  m.accel_noise_sd_g = j.at("accel_noise_sd_g").get<double>();
  return m;
}

std::uint64_t compat_hash(int obs_dim, int num_imus) {
  return fnv1a64("d=" + std::to_string(obs_dim) + ";M=" + std::to_string(num_imus));
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  json j;
  j["config"] = to_json(m.config);
  j["config_hash"] = compat_hash(m.config.obs.dim, m.config.num_imus);
  json mounts = json::array();
  for (const auto& mount : m.mounts) mounts.push_back(mount_to_json(mount));
  j["mounts"] = std::move(mounts);
  j["splits"] = {{"train", m.train_ids}, {"val", m.val_ids}, {"test", m.test_ids}};
  j["subjects"] = m.subject_of;
  write_text_file(path, j.dump(1) + "\n");
}

Manifest load_manifest(const std::filesystem::path& path) {
  const json j = json::parse(read_text_file(path));
  Manifest m;
  m.config = dataset_config_from_json(j.at("config"));
  for (const auto& mount : j.at("mounts")) m.mounts.push_back(mount_from_json(mount));
  m.train_ids = j.at("splits").at("train").get<std::vector<std::string>>();
  m.val_ids = j.at("splits").at("val").get<std::vector<std::string>>();
  m.test_ids = j.at("splits").at("test").get<std::vector<std::string>>();
  m.subject_of = j.at("subjects").get<std::map<std::string, std::string>>();
  return m;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json flat = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return flat;
}

Eigen::MatrixXd matrix_from_json(const json& flat, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw std::invalid_argument("checkpoint: weight array size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat.at(i++).get<double>();
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  json j;
  j["obs_dim"] = c.model.obs_dim;
  j["hidden"] = c.model.hidden;
  j["seed"] = c.seed;
  j["config_hash"] = c.config_hash;
  j["w_in"] = matrix_to_json(c.model.w_in);
  j["w_h"] = matrix_to_json(c.model.w_h);
  j["b_h"] = matrix_to_json(c.model.b_h);
  j["w_out"] = matrix_to_json(c.model.w_out);
  j["b_out"] = matrix_to_json(c.model.b_out);
  write_text_file(path, j.dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const json j = json::parse(read_text_file(path));
  Checkpoint c;
  c.model.obs_dim = j.at("obs_dim").get<int>();
  c.model.hidden = j.at("hidden").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.config_hash = j.at("config_hash").get<std::uint64_t>();
  const int h = c.model.hidden;
  c.model.w_in = matrix_from_json(j.at("w_in"), h, c.model.input_dim());
  c.model.w_h = matrix_from_json(j.at("w_h"), h, h);
  c.model.b_h = matrix_from_json(j.at("b_h"), h, 1);
  c.model.w_out = matrix_from_json(j.at("w_out"), 6, h);
  c.model.b_out = matrix_from_json(j.at("b_out"), 6, 1);
  return c;
}

void save_calibration(const std::filesystem::path& path, const CalibrationReport& r) {
  json imus = json::array();
  for (const auto& fit : r.imus) {
    imus.push_back({{"mount_deg", vec3_to_json(fit.rotation.phi)},
                    {"final_residual", fit.final_residual},
                    {"iterations", fit.iterations},
                    {"converged", fit.converged}});
  }
  write_text_file(path, json{{"imus", imus}}.dump(1) + "\n");
}

CalibrationReport load_calibration(const std::filesystem::path& path) {
  const json j = json::parse(read_text_file(path));
  CalibrationReport r;
  for (const auto& f : j.at("imus")) {
    MountFit fit;
    fit.rotation.phi = vec3_from_json(f.at("mount_deg"));
    fit.final_residual = f.at("final_residual").get<double>();
    fit.iterations = f.at("iterations").get<int>();
    fit.converged = f.at("converged").get<bool>();
    r.imus.push_back(fit);
  }
  return r;
}

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
  write_text_file(path, out.str());
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void save_estimates(const std::filesystem::path& path, const EstimateRecord& rec) {
  json j;
  j["scan_id"] = rec.scan_id;
  j["backbone"] = chain_to_json(rec.backbone);
  j["refined"] = chain_to_json(rec.refined);
  write_text_file(path, j.dump(1) + "\n");
}

EstimateRecord load_estimates(const std::filesystem::path& path) {
  const json j = json::parse(read_text_file(path));
  EstimateRecord rec;
  rec.scan_id = j.at("scan_id").get<std::string>();
  rec.backbone = chain_from_json(j.at("backbone"));
  rec.refined = chain_from_json(j.at("refined"));
  return rec;
}

}  // namespace driftforge
