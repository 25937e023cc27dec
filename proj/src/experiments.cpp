#include "scansnap/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "scansnap/errors.hpp"
#include "scansnap/linalg.hpp"
#include "scansnap/theory.hpp"

namespace scansnap {

double entropy_on_distinct(const AttentionState& c, const std::vector<TokenRole>& roles, std::size_t n) {
  std::vector<double> mass;
  for (std::size_t l = 0; l < roles.size(); ++l)
    if (roles[l].kind == TokenKind::Distinct && roles[l].owners.front() == n)
      mass.push_back(c.c[static_cast<Eigen::Index>(l)]);
  if (mass.empty()) throw std::invalid_argument("entropy_on_distinct: class has no distinct token");
  const Eigen::Map<const Eigen::VectorXd> m(mass.data(), static_cast<Eigen::Index>(mass.size()));
  const double total = m.sum();
  if (!(total > 0.0)) throw std::domain_error("entropy_on_distinct: zero mass on distinct tokens");
  return shannon_entropy((m / total).eval());
}

std::vector<std::size_t> log_spaced_schedule(std::size_t steps) {
  std::vector<std::size_t> out{0};
  for (std::size_t decade = 1; decade <= steps; decade *= 10) {
    for (std::size_t k : {1, 2, 5}) {
      const std::size_t s = k * decade;
      if (s <= steps) out.push_back(s);
    }
    if (decade > steps / 10) break;
  }
  if (out.back() != steps) out.push_back(steps);
  return out;
}

namespace {

std::vector<SequenceSample> draw_batch(const DatasetSpec& spec, const CategoricalSampler& classes,
                                       std::size_t batch, std::size_t T, Rng& rng) {
  std::vector<SequenceSample> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(sample_sequence(spec, classes(rng), T, rng));
  return out;
}

}  // namespace

TrainResult train(const DatasetSpec& spec, const TrainConfig& cfg, const std::string& run_id,
                  const TrainObserver& observer) {
  spec.validate();
  if (cfg.batch == 0) throw std::invalid_argument("train: batch must be >= 1");
  if (cfg.seq_len < 2) throw std::invalid_argument("train: seq_len must be >= 2");
  const std::size_t M = spec.vocab_size;
  const std::size_t K = spec.num_classes();
  const auto roles = classify_tokens(spec);
  const Eigen::VectorXd prior = spec.prior();
  const CategoricalSampler class_draw({prior.data(), static_cast<std::size_t>(prior.size())});

  const Rng root(cfg.seed);
  Rng train_rng = root.split(0);
  Rng eval_rng = root.split(1);
  const double loss_threshold = cfg.loss_threshold < 0.0 ? 0.1 * std::log(static_cast<double>(M)) : cfg.loss_threshold;
  std::vector<std::size_t> schedule = cfg.snapshot_steps.empty() ? log_spaced_schedule(cfg.steps) : cfg.snapshot_steps;
  std::sort(schedule.begin(), schedule.end());

  TrainResult res;
  res.state = ModelState<double>::zeros(M);
  Velocity<double> vel;
  AdamMoments<double> mom;

  auto emit = [&](std::size_t step) {
    const auto eval = draw_batch(spec, class_draw, cfg.batch, cfg.seq_len, eval_rng);
    BatchStats st;
    batch_grad(res.state, std::span<const SequenceSample>(eval), &st);
    for (std::size_t n = 0; n < K; ++n) {
      const Eigen::VectorXd z = res.state.Z.row(static_cast<Eigen::Index>(spec.classes[n].last_token)).transpose();
      const AttentionState att = attention_from_z(spec, n, z);
      MetricRow row;
      row.run_id = run_id;
      row.step = step;
      row.cls = n;
      row.entropy_distinct = entropy_on_distinct(att, roles, n);
      Eigen::Index top = 0;
      row.c_top_mass = att.c.maxCoeff(&top);
      row.c_top_token = static_cast<Token>(top);
      row.loss = st.mean_loss;
      row.grad_norm_y = st.grad_norm_y;
      row.grad_norm_z = st.grad_norm_z;
      if (observer.on_metric) observer.on_metric(row);
      res.metrics.push_back(row);
      AttentionSnapshot snap{step, n, att.c};
      if (observer.on_snapshot) observer.on_snapshot(snap);
      res.snapshots.push_back(std::move(snap));
    }
  };

  auto next_snapshot = schedule.begin();
  auto maybe_emit = [&](std::size_t step, bool force) {
    while (next_snapshot != schedule.end() && *next_snapshot < step) ++next_snapshot;
    const bool due = next_snapshot != schedule.end() && *next_snapshot == step;
    if (due || force) emit(step);
    if (due) ++next_snapshot;
  };

  maybe_emit(0, false);
  for (std::size_t s = 1; s <= cfg.steps; ++s) {
    const auto batch = draw_batch(spec, class_draw, cfg.batch, cfg.seq_len, train_rng);
    const std::span<const SequenceSample> view(batch);
    BatchStats st;
    if (cfg.optimizer == OptimizerKind::SgdMomentum) {
      sgd_step_inplace(res.state, view, cfg.eta_y, cfg.eta_z, cfg.momentum, vel, &st);
    } else {
      adam_step_inplace(res.state, view, cfg.adam_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, mom, &st);
    }
    res.steps_run = s;
    if (!std::isfinite(st.mean_loss) || !res.state.Z.allFinite() || !res.state.Y.allFinite() ||
        res.state.Z.cwiseAbs().maxCoeff() > kDivergenceGuard)
      throw DivergenceError("train: divergence at step " + std::to_string(s) + " (loss " +
                            std::to_string(st.mean_loss) + ", max|Z| " +
                            std::to_string(res.state.Z.cwiseAbs().maxCoeff()) + ")");
    if (!res.steps_to_loss_threshold && st.mean_loss < loss_threshold) res.steps_to_loss_threshold = s - 1;
    const bool stop = cfg.grad_norm_threshold > 0.0 && st.grad_norm_y + st.grad_norm_z < cfg.grad_norm_threshold;
    maybe_emit(s, stop || s == cfg.steps);
    if (stop) {
      res.stopped_on_grad_norm = true;
      break;
    }
  }
  res.rng_state = train_rng.state();
  return res;
}

TrainResult run_syn_small(double eta_y, double eta_z, std::uint64_t seed, std::size_t steps) {
  TrainConfig cfg;
  cfg.eta_y = eta_y;
  cfg.eta_z = eta_z;
  cfg.momentum = 0.9;
  cfg.batch = 128;
  cfg.seq_len = 128;
  cfg.steps = steps;
  cfg.seed = seed;
  return train(build_syn_small(), cfg, "syn-small");
}

SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sign_test: paired samples differ in length");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) (a[i] > b[i] ? t.wins : (a[i] < b[i] ? t.losses : t.ties))++;
  const std::size_t n = t.wins + t.losses;
  double tail = 0.0;
  for (std::size_t k = t.wins; k <= n; ++k) {
    // C(n, k) / 2^n via lgamma to stay finite for large n.
    tail += std::exp(std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                     std::lgamma(static_cast<double>(n - k) + 1) - static_cast<double>(n) * std::log(2.0));
  }
  t.p_value = std::min(1.0, tail);
  return t;
}

void SweepConfig::validate() const {
  if (eta_y_grid.empty() || eta_z_grid.empty() || seeds.empty())
    throw std::invalid_argument("sweep: eta_y_grid, eta_z_grid and seeds must be non-empty");
  if (!dataset && K_grid.empty()) throw std::invalid_argument("sweep: K_grid must be non-empty");
  if (steps < 1) throw std::invalid_argument("sweep: steps must be >= 1");
  if (batch < 1 || seq_len < 2) throw std::invalid_argument("sweep: batch >= 1 and seq_len >= 2 required");
  for (double e : eta_y_grid)
    if (e < 0) throw std::invalid_argument("sweep: negative eta_y");
  for (double e : eta_z_grid)
    if (e < 0) throw std::invalid_argument("sweep: negative eta_z");
}

SweepResult run_entropy_sweep(const SweepConfig& cfg) {
  cfg.validate();
  SweepResult res;
  const std::vector<std::size_t> Ks = cfg.dataset ? std::vector<std::size_t>{cfg.dataset->num_classes()} : cfg.K_grid;
  for (std::size_t K : Ks)
    for (double ey : cfg.eta_y_grid)
      for (double ez : cfg.eta_z_grid)
        for (std::uint64_t seed : cfg.seeds) res.runs.push_back({K, ey, ez, seed, 0.0, 0.0, false, {}});

  auto run_one = [&](SweepRun& r) {
    try {
      const DatasetSpec spec = cfg.dataset ? *cfg.dataset : build_syn_medium(r.K, 10, 10, r.seed);
      TrainConfig tc;
      tc.eta_y = r.eta_y;
      tc.eta_z = r.eta_z;
      tc.momentum = cfg.momentum;
      tc.batch = cfg.batch;
      tc.seq_len = cfg.seq_len;
      tc.steps = cfg.steps;
      tc.seed = r.seed;
      tc.optimizer = cfg.optimizer;
      tc.snapshot_steps = {cfg.steps};
      const TrainResult tr = train(spec, tc);
      double h = 0.0;
      std::size_t count = 0;
      for (const auto& m : tr.metrics) {
        if (m.step != cfg.steps) continue;
        h += m.entropy_distinct;
        r.final_loss = m.loss;
        ++count;
      }
      r.final_entropy = h / static_cast<double>(count);
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, res.runs.size()));
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < res.runs.size(); i = next++) run_one(res.runs[i]);
      });
  }

  for (std::size_t i = 0; i < res.runs.size(); i += cfg.seeds.size()) {
    SweepCell c;
    c.K = res.runs[i].K;
    c.eta_y = res.runs[i].eta_y;
    c.eta_z = res.runs[i].eta_z;
    c.complete = true;
    std::vector<double> v;
    for (std::size_t j = i; j < i + cfg.seeds.size(); ++j) {
      if (res.runs[j].ok) {
        v.push_back(res.runs[j].final_entropy);
      } else {
        c.complete = false;
      }
    }
    c.runs = v.size();
    if (!v.empty()) {
      double sum = 0.0;
      for (double x : v) sum += x;
      c.mean = sum / static_cast<double>(v.size());
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - c.mean) * (x - c.mean);
        c.sem = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
      }
    }
    res.cells.push_back(c);
  }
  return res;
}

std::vector<RatioCrossing> ratio_crossings(const SweepResult& r) {
  std::vector<RatioCrossing> out;
  for (const auto& c : r.cells) {
    if (!c.complete || !(c.eta_z > 0.0)) continue;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const RatioCrossing& x) { return x.K == c.K && x.eta_z == c.eta_z; });
    if (it == out.end()) {
      out.push_back({c.K, c.eta_z, c.eta_y / c.eta_z, c.mean, 1});
      continue;
    }
    ++it->cells;
    if (c.mean < it->mean) {
      it->ratio = c.eta_y / c.eta_z;
      it->mean = c.mean;
    }
  }
  return out;
}

ConsistencyReport consistency_study(const DatasetSpec& spec, const ConsistencyConfig& cfg) {
  spec.validate();
  const std::size_t K = spec.num_classes();
  const std::size_t M = spec.vocab_size;
  const Eigen::VectorXd prior = spec.prior();

  LimitConfig lc;
  lc.eta_y = cfg.eta_y;
  lc.eta_z = cfg.eta_z;
  lc.steps = cfg.steps;
  lc.mode = LimitSourceMode::CoupledDecoder;
  lc.scheme = LimitScheme::Euler;
  lc.record_every = 1;
  const LimitTrajectory lim = integrate_limit(spec, lc);

  ConsistencyReport rep;
  for (std::size_t T : cfg.T_list) {
    double sum = 0.0;
    for (std::uint64_t seed : cfg.seeds) {
      Rng rng = Rng(seed).split(T);
      ModelState<double> st = ModelState<double>::zeros(M);
      double dev = 0.0;
      for (std::size_t s = 1; s <= cfg.steps; ++s) {
        GradPair<double> acc{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M)),
                             Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M))};
        for (std::size_t n = 0; n < K; ++n)
          accumulate_grad(st, sample_sequence(spec, n, T, rng), acc, prior[static_cast<Eigen::Index>(n)]);
        st.Y += cfg.eta_y * acc.dY;
        st.Z += cfg.eta_z * acc.dZ;
        for (std::size_t n = 0; n < K; ++n) {
          const Eigen::VectorXd z = st.Z.row(static_cast<Eigen::Index>(spec.classes[n].last_token)).transpose();
          const AttentionState a = attention_from_z(spec, n, z);
          dev = std::max(dev, (a.c - lim.records[s].attention[n].c).cwiseAbs().maxCoeff());
        }
      }
      rep.rows.push_back({T, seed, dev});
      sum += dev;
    }
    rep.mean_deviation.push_back(sum / static_cast<double>(cfg.seeds.size()));
  }
  for (std::size_t i = 1; i < rep.mean_deviation.size(); ++i)
    if (rep.mean_deviation[i] > rep.mean_deviation[i - 1]) ++rep.inversions;

  double rho0 = std::numeric_limits<double>::quiet_NaN();
  if (cfg.rho0) {
    rho0 = *cfg.rho0;
  } else if (!common_tokens(spec).empty()) {
    rho0 = default_rho0(spec, 0);
  }
  if (std::isfinite(rho0)) {
    for (std::size_t s = 1; s <= cfg.steps; ++s) {
      const double closed =
          b_n_closed_form(M, K, cfg.eta_y, cfg.eta_z, rho0, static_cast<double>(s), BnConvention::Zeroed);
      if (!(closed > 0.0)) continue;
      for (std::size_t n = 0; n < K; ++n) {
        const double b = lim.records[s].B[static_cast<Eigen::Index>(n)];
        if (std::isfinite(b)) rep.max_bn_rel_deviation = std::max(rep.max_bn_rel_deviation, std::abs(b - closed) / closed);
      }
    }
  } else {
    rep.max_bn_rel_deviation = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

DatasetSpec build_single_common_token_spec(std::size_t K, std::size_t M, double ct_mass) {
  if (K < 2 || M < K + 3) throw std::invalid_argument("single-common-token spec: need K >= 2 and M >= K + 3");
  if (!(ct_mass > 0.0 && ct_mass < 1.0)) throw std::invalid_argument("single-common-token spec: ct_mass in (0, 1)");
  const std::size_t D = (M - 2) / K;
  DatasetSpec spec;
  spec.vocab_size = M;
  const double ranks = static_cast<double>(D) * static_cast<double>(D + 1) / 2.0;
  for (std::size_t n = 0; n < K; ++n) {
    SequenceClassSpec c;
    c.next_token = n;
    c.last_token = M - 1;
    c.cond_prob = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M));
    c.cond_prob[0] = ct_mass;
    for (std::size_t k = 1; k <= D; ++k)
      c.cond_prob[static_cast<Eigen::Index>(1 + n * D + k - 1)] = (1.0 - ct_mass) * static_cast<double>(k) / ranks;
    c.cond_prob /= c.cond_prob.sum();
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

std::vector<GrowthCurve> run_growth_curves(const GrowthCurveConfig& cfg) {
  std::vector<GrowthCurve> out;
  const DatasetSpec spec = build_single_common_token_spec(cfg.K, cfg.M, cfg.ct_mass);
  const auto dts = distinct_tokens(spec, 0);
  const Token l0 = dts.back();
  const double rho0 = default_rho0(spec, 0, Token{0});
  constexpr double kTol = 1e-12;

  // Class 0 restricted to its support: the common token follows the ODE and
  // each distinct token l gets z_l' = eta_z xi f_l^2.
  const auto& P = spec.classes[0].cond_prob;
  std::vector<Token> supp{0};
  supp.insert(supp.end(), dts.begin(), dts.end());
  const auto S = static_cast<Eigen::Index>(supp.size());
  Eigen::VectorXd p0(S);
  for (Eigen::Index i = 0; i < S; ++i) p0[i] = P[static_cast<Eigen::Index>(supp[static_cast<std::size_t>(i)])];
  const Eigen::Index top = S - 1;  // l0 is the last distinct token

  for (double eta_y : cfg.eta_y_grid) {
    GrowthCurve curve;
    curve.eta_y = eta_y;
    curve.l0 = l0;
    const PhaseTimes pt = phase_times(cfg.M, cfg.K, eta_y, cfg.c_prime);
    curve.t0 = pt.t0;
    curve.t0_prime = pt.t0_prime;
    const auto ode = simulate_common_token_ode(cfg.M, cfg.K, eta_y, cfg.eta_z, rho0, cfg.steps);

    Eigen::VectorXd z = Eigen::VectorXd::Zero(S);
    const auto f_of = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
      const Eigen::VectorXd c = p0.array() * zz.array().exp();
      return c / c.norm();
    };
    const double f0sq = f_of(z)[top] * f_of(z)[top];
    curve.dominance_ok = true;
    curve.points.reserve(cfg.steps + 1);
    for (std::size_t s = 0; s <= cfg.steps; ++s) {
      if (s > 0) {
        z[0] = ode[s - 1].z;
        const Eigen::VectorXd f = f_of(z);
        const Eigen::Index others = S - 1;
        if (f.tail(others).maxCoeff() > f[top]) curve.dominance_ok = false;
        z.tail(others).array() += cfg.eta_z * ode[s].xi * f.tail(others).array().square();
        if (!z.allFinite() || z.cwiseAbs().maxCoeff() > kDivergenceGuard)
          throw DivergenceError("growth curves: |z| exceeded the guard at step " + std::to_string(s));
      }
      GrowthPoint p;
      p.t = s;
      p.B_n = ode[s].B;
      p.chi = std::exp(2.0 * z[top]);
      p.chi_lower = std::exp(2.0 * f0sq * p.B_n);
      p.chi_upper = std::exp(2.0 * p.B_n);
      p.B_n_closed =
          b_n_closed_form(cfg.M, cfg.K, eta_y, cfg.eta_z, rho0, static_cast<double>(s), BnConvention::Zeroed);
      if (p.chi < p.chi_lower * (1.0 - kTol) || p.chi > p.chi_upper * (1.0 + kTol)) ++curve.sandwich_violations;
      curve.points.push_back(p);
    }
    out.push_back(std::move(curve));
  }
  return out;
}

double log_slope(const GrowthCurve& curve, double t) {
  const auto last = static_cast<double>(curve.points.back().t);
  const auto t1 = static_cast<std::size_t>(std::max(1.0, std::floor(0.95 * t)));
  const auto t2 = static_cast<std::size_t>(std::min(last, std::ceil(1.05 * t)));
  if (t2 <= t1) throw std::out_of_range("log_slope: t outside the curve");
  const double l1 = std::log(curve.points.at(t1).chi);
  const double l2 = std::log(curve.points.at(t2).chi);
  return (l2 - l1) / (std::log(static_cast<double>(t2)) - std::log(static_cast<double>(t1)));
}

}  // namespace scansnap
