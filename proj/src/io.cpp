#include "scansnap/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace scansnap {

using nlohmann::json;

std::string fmt_double(double x) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return buf.data();
}

DatasetSpec dataset_from_json_text(const std::string& text) {
  DatasetSpec spec;
  try {
    const json j = json::parse(text);
    spec.vocab_size = j.at("vocab_size").get<std::size_t>();
    for (const auto& jc : j.at("classes")) {
      SequenceClassSpec c;
      c.next_token = jc.at("next_token").get<Token>();
      c.last_token = jc.at("last_token").get<Token>();
      const auto p = jc.at("cond_prob").get<std::vector<double>>();
      c.cond_prob = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
      spec.classes.push_back(std::move(c));
    }
    if (j.contains("class_prior")) {
      const auto p = j.at("class_prior").get<std::vector<double>>();
      spec.class_prior = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("dataset file: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string dataset_to_json_text(const DatasetSpec& spec) {
  json j;
  j["vocab_size"] = spec.vocab_size;
  j["classes"] = json::array();
  for (const auto& c : spec.classes) {
    j["classes"].push_back({{"next_token", c.next_token},
                            {"last_token", c.last_token},
                            {"cond_prob", std::vector<double>(c.cond_prob.data(), c.cond_prob.data() + c.cond_prob.size())}});
  }
  if (spec.class_prior.size() != 0)
    j["class_prior"] = std::vector<double>(spec.class_prior.data(), spec.class_prior.data() + spec.class_prior.size());
  return j.dump(2) + "\n";
}

DatasetSpec load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return dataset_from_json_text(ss.str());
}

void save_dataset(const DatasetSpec& spec, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_to_json_text(spec));
}

DatasetSpec resolve_dataset(const std::string& name, std::size_t K, std::uint64_t seed) {
  if (name == "syn-small") return build_syn_small();
  if (name == "syn-medium") return build_syn_medium(K, 10, 10, seed);
  return load_dataset(name);
}

namespace {

constexpr char kMagic[8] = {'S', 'S', 'N', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelState<double>& st, const std::string& rng_state) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kCheckpointVersion);
  const std::uint64_t M = st.vocab_size();
  put<std::uint64_t>(os, M);
  for (const Eigen::MatrixXd* m : {&st.Y, &st.Z})
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) put<double>(os, (*m)(i, j));
  put<std::uint64_t>(os, rng_state.size());
  os.write(rng_state.data(), static_cast<std::streamsize>(rng_state.size()));
  write_file_atomic(path, os.str());
}

ModelState<double> load_checkpoint(const std::filesystem::path& path, std::string* rng_state) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::invalid_argument("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error("checkpoint: bad magic");
  if (get<std::uint32_t>(is) != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version");
  const auto M = get<std::uint64_t>(is);
  ModelState<double> st = ModelState<double>::zeros(M);
  for (Eigen::MatrixXd* m : {&st.Y, &st.Z})
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = get<double>(is);
  const auto len = get<std::uint64_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("checkpoint: truncated rng state");
  if (rng_state) *rng_state = std::move(s);
  return st;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_metrics_header(std::ostream& os) {
  os << "run_id,step,class,entropy_distinct_nats,c_top_mass,c_top_token,loss,grad_norm_Y,grad_norm_Z\n";
}

void write_metric_row(std::ostream& os, const MetricRow& r) {
  os << r.run_id << ',' << r.step << ',' << r.cls << ',' << fmt_double(r.entropy_distinct) << ','
     << fmt_double(r.c_top_mass) << ',' << r.c_top_token << ',' << fmt_double(r.loss) << ','
     << fmt_double(r.grad_norm_y) << ',' << fmt_double(r.grad_norm_z) << '\n';
}

void write_snapshots_header(std::ostream& os) { os << "step,class,token,c\n"; }

void write_snapshot(std::ostream& os, const AttentionSnapshot& s) {
  for (Eigen::Index l = 0; l < s.c.size(); ++l)
    os << s.step << ',' << s.cls << ',' << l << ',' << fmt_double(s.c[l]) << '\n';
}

void write_limit_header(std::ostream& os) { os << "step,class,token,z,c,f,xi,B_n,chi\n"; }

void write_limit_record(std::ostream& os, const DatasetSpec& spec, const std::vector<Token>& rows,
                        const LimitRecord& r0, const LimitRecord& r) {
  for (std::size_t n = 0; n < spec.num_classes(); ++n) {
    const auto row = static_cast<Eigen::Index>(
        std::find(rows.begin(), rows.end(), spec.classes[n].last_token) - rows.begin());
    const double xi = r.xi[static_cast<Eigen::Index>(n)];
    const double B = r.B[static_cast<Eigen::Index>(n)];
    for (Token l : spec.classes[n].support()) {
      const auto li = static_cast<Eigen::Index>(l);
      const double z = r.z(row, li);
      os << r.t << ',' << n << ',' << l << ',' << fmt_double(z) << ',' << fmt_double(r.attention[n].c[li]) << ','
         << fmt_double(r.attention[n].f[li]) << ',' << fmt_double(xi) << ',' << fmt_double(B) << ','
         << fmt_double(std::exp(2.0 * (z - r0.z(row, li)))) << '\n';
    }
  }
}

std::vector<double> log_grid(double t_max, std::size_t points) {
  std::vector<double> g{0.0};
  if (t_max < 1.0 || points == 0) return g;
  if (points == 1) {
    g.push_back(t_max);
    return g;
  }
  const double lmax = std::log10(t_max);
  for (std::size_t i = 0; i < points; ++i)
    g.push_back(std::pow(10.0, lmax * static_cast<double>(i) / static_cast<double>(points - 1)));
  g.back() = t_max;
  return g;
}

void write_theory_csv(std::ostream& os, const TheoryParams& p, const std::vector<double>& t_grid) {
  const PhaseTimes pt = phase_times(p.M, p.K, p.eta_y, p.c_prime);
  os << "# schema=" << kSchemaVersion << " M=" << p.M << " K=" << p.K << " eta_y=" << fmt_double(p.eta_y)
     << " eta_z=" << fmt_double(p.eta_z) << " rho0=" << fmt_double(p.rho0) << " f0_sq=" << fmt_double(p.f0_sq)
     << " c_prime=" << fmt_double(p.c_prime) << " t0_prime=" << fmt_double(pt.t0_prime)
     << " t0=" << fmt_double(pt.t0) << " omega1=" << fmt_double(pt.omega1) << '\n';
  os << "t,h,h_star,gamma,Gamma,B_n_absolute,B_n_zeroed,chi_lower,chi_upper\n";
  HStarTable hs(p.M, p.eta_y);
  const double Kd = static_cast<double>(p.K);
  for (double t : t_grid) {
    const double h = h_continuous(p.M, p.eta_y, t / Kd);
    const double hstar = hs(static_cast<std::size_t>(std::ceil(t / Kd)));
    const double bz = b_n_closed_form(p.M, p.K, p.eta_y, p.eta_z, p.rho0, t, BnConvention::Zeroed);
    os << fmt_double(t) << ',' << fmt_double(h) << ',' << fmt_double(hstar) << ','
       << fmt_double(gamma_of_t(p.M, p.K, p.eta_y, t)) << ',' << fmt_double(big_gamma(p.M, p.K, p.eta_y, p.eta_z, t))
       << ',' << fmt_double(b_n_closed_form(p.M, p.K, p.eta_y, p.eta_z, p.rho0, t, BnConvention::Absolute)) << ','
       << fmt_double(bz) << ',' << fmt_double(std::exp(2.0 * p.f0_sq * bz)) << ',' << fmt_double(std::exp(2.0 * bz))
       << '\n';
  }
}

void write_sweep_runs_csv(std::ostream& os, const SweepResult& r) {
  os << "K,eta_y,eta_z,ratio,seed,final_entropy_nats,final_loss,ok,error\n";
  for (const auto& x : r.runs) {
    os << x.K << ',' << fmt_double(x.eta_y) << ',' << fmt_double(x.eta_z) << ','
       << fmt_double(x.eta_z > 0 ? x.eta_y / x.eta_z : NAN) << ',' << x.seed << ',' << fmt_double(x.final_entropy)
       << ',' << fmt_double(x.final_loss) << ',' << (x.ok ? 1 : 0) << ',' << '"' << x.error << '"' << '\n';
  }
}

void write_sweep_cells_csv(std::ostream& os, const SweepResult& r) {
  os << "K,eta_y,eta_z,ratio,runs,mean_entropy_nats,sem_entropy_nats,complete\n";
  for (const auto& c : r.cells) {
    os << c.K << ',' << fmt_double(c.eta_y) << ',' << fmt_double(c.eta_z) << ','
       << fmt_double(c.eta_z > 0 ? c.eta_y / c.eta_z : NAN) << ',' << c.runs << ',' << fmt_double(c.mean) << ','
       << fmt_double(c.sem) << ',' << (c.complete ? 1 : 0) << '\n';
  }
}

void write_crossings_csv(std::ostream& os, const std::vector<RatioCrossing>& c) {
  os << "K,eta_z,min_entropy_ratio,min_mean_entropy_nats,cells\n";
  for (const auto& x : c)
    os << x.K << ',' << fmt_double(x.eta_z) << ',' << fmt_double(x.ratio) << ',' << fmt_double(x.mean) << ','
       << x.cells << '\n';
}

void write_consistency_csv(std::ostream& os, const ConsistencyReport& r) {
  os << "T,seed,max_c_deviation\n";
  for (const auto& x : r.rows) os << x.T << ',' << x.seed << ',' << fmt_double(x.max_c_deviation) << '\n';
}

void write_growth_csv(std::ostream& os, const std::vector<GrowthCurve>& curves, std::size_t stride) {
  os << "eta_y,t,chi,chi_lower,chi_upper,B_n,B_n_closed\n";
  if (stride == 0) stride = 1;
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      if (p.t % stride != 0 && p.t != c.points.back().t) continue;
      os << fmt_double(c.eta_y) << ',' << p.t << ',' << fmt_double(p.chi) << ',' << fmt_double(p.chi_lower) << ','
         << fmt_double(p.chi_upper) << ',' << fmt_double(p.B_n) << ','
         << fmt_double(p.B_n_closed) << '\n';
    }
}

void write_growth_markers_csv(std::ostream& os, const std::vector<GrowthCurve>& curves) {
  os << "eta_y,t0,t0_prime,l0,sandwich_violations\n";
  for (const auto& c : curves)
    os << fmt_double(c.eta_y) << ',' << fmt_double(c.t0) << ',' << fmt_double(c.t0_prime) << ',' << c.l0 << ','
       << c.sandwich_violations << '\n';
}

}  // namespace scansnap
