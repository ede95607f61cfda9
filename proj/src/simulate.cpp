#include "mrtcount/simulate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mrtcount/errors.hpp"
#include "mrtcount/rng.hpp"

namespace mrtcount {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

long long sample_zinb(double pi, double mu, double r, std::mt19937_64& rng) {
  if (!(pi >= 0 && pi <= 1) || !(mu >= 0) || !(r > 0))
    throw_input(errc::invalid_config, "sample_zinb parameters out of range");
  if (pi <= 0) return 0;
  std::bernoulli_distribution occupied(pi);
  if (!occupied(rng)) return 0;
  if (mu <= 0) return 0;
  std::gamma_distribution<double> rate(r, mu / r);
  std::poisson_distribution<long long> count(rate(rng));
  return count(rng);
}

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// outcome laws; arm = 0..K with K = 2 in scenario 4, else 1
double pi_of(int scenario, int z, int arm) {
  double a1 = arm == 1 ? 1.0 : 0.0;
  double a2 = arm == 2 ? 1.0 : 0.0;
  return std::exp(-0.4 * (z + 0.1) + 0.1 * z * a1 + (scenario == 4 ? 0.1 * z * a2 : 0.0));
}

double mu_of(int scenario, int z, int arm) {
  double a1 = arm == 1 ? 1.0 : 0.0;
  if (scenario == 2) return std::exp(0.2 + 0.5 * z + a1 * (0.1 + 0.3 * z));
  double base = z == 0 ? 2.2 : z == 1 ? 2.5 : 2.4;
  double a2 = arm == 2 ? 1.0 : 0.0;
  return base * std::exp(a1 * (0.1 + 0.3 * z) + a2 * (0.1 + 0.1 * z));
}

int k_arms_of(int scenario) { return scenario == 4 ? 2 : 1; }

void validate(const GenConfig& cfg) {
  if (cfg.scenario < 1 || cfg.scenario > 4)
    throw_input(errc::invalid_config, "scenario must be 1..4");
  if (cfg.n < 1 || cfg.t < 1) throw_input(errc::invalid_config, "n and t must be >= 1");
  if (!(cfg.dispersion > 0)) throw_input(errc::invalid_config, "dispersion must be > 0");
  if (cfg.scenario == 3) {
    if (cfg.t <= cfg.ts_warmup)
      throw_input(errc::invalid_config, "scenario 3 needs t > the warm-up length");
    if (!(cfg.ts_alpha > 0)) throw_input(errc::invalid_config, "ts_alpha must be > 0");
    if (!(cfg.ts_clip_lo > 0 && cfg.ts_clip_lo < cfg.ts_clip_hi && cfg.ts_clip_hi < 1))
      throw_input(errc::invalid_config, "ts clip bounds must satisfy 0 < lo < hi < 1");
  }
}

}  // namespace

void ThompsonSampler::push(double z, double a, double outcome) {
  x.push_back({1.0, z, a, a * z});
  y.push_back(outcome);
}

double ThompsonSampler::probability(double z) {
  const Eigen::Index n = static_cast<Eigen::Index>(y.size());
  bool ok = n >= 4;
  Eigen::Vector4d beta = Eigen::Vector4d::Zero();
  Eigen::Matrix4d info = Eigen::Matrix4d::Zero();
  if (ok) {
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < 4; ++j) X(i, j) = x[i][j];
      Y(i) = y[i];
    }
    ok = false;
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd mu =
          (X * beta).unaryExpr([](double e) { return std::exp(std::clamp(e, -30.0, 30.0)); });
      info = X.transpose() * mu.asDiagonal() * X;
      Eigen::FullPivLU<Eigen::Matrix4d> lu(info);
      if (!lu.isInvertible()) break;
      Eigen::Vector4d step = lu.solve(X.transpose() * (Y - mu));
      if (!step.allFinite()) break;
      beta += step;
      if (step.cwiseAbs().maxCoeff() < 1e-8 * (1.0 + beta.cwiseAbs().maxCoeff())) {
        ok = true;
        break;
      }
    }
  }
  double p = 0.5;
  if (ok) {
    Eigen::Vector4d delta(0.0, 0.0, 1.0, z);
    Eigen::FullPivLU<Eigen::Matrix4d> lu(info);
    double var = ok && lu.isInvertible() ? delta.dot(lu.solve(delta)) : -1.0;
    if (var > 0 && std::isfinite(var))
      p = phi_cdf(delta.dot(beta) / (alpha * std::sqrt(var)));
    else
      ok = false;
  }
  if (!ok) {
    ++fallbacks;
    p = 0.5;
  }
  return std::clamp(p, clip_lo, clip_hi);
}

PanelDataset gen_scenario(const GenConfig& cfg, std::uint64_t seed, GenDiagnostics* diag) {
  validate(cfg);
  const int K = k_arms_of(cfg.scenario);
  PanelDataset data;
  data.covariate_names = {"Z"};
  data.k_arms = K;
  data.has_rand_prob = cfg.scenario != 2;

  std::mt19937_64 rng = make_rng(seed);
  std::uniform_int_distribution<int> z_draw(0, 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int i = 0; i < cfg.n; ++i) {
    data.participant_ids.push_back(std::to_string(i + 1));
    ThompsonSampler ts;
    ts.alpha = cfg.ts_alpha;
    ts.clip_lo = cfg.ts_clip_lo;
    ts.clip_hi = cfg.ts_clip_hi;
    int a_prev = 0;  // any-arm indicator at t-1; zero before the first decision
    for (int t = 1; t <= cfg.t; ++t) {
      int z = z_draw(rng);
      DecisionRecord rec;
      rec.participant = i;
      rec.t = t;
      rec.availability = 1;
      rec.covariates = {static_cast<double>(z)};
      int arm = 0;
      if (cfg.scenario == 4) {
        double q = 0.5 * expit(-0.5 * a_prev + 0.5 * z);
        double u = unif(rng);
        arm = u < q ? 1 : (u < 2 * q ? 2 : 0);
        rec.rand_prob = {q, q};
      } else {
        double p;
        if (cfg.scenario == 3) {
          if (t <= cfg.ts_warmup) {
            p = 0.5;
          } else {
            long long before = ts.fallbacks;
            p = ts.probability(z);
            if (diag) {
              ++diag->ts_draws;
              diag->ts_fallbacks += ts.fallbacks - before;
              diag->ts_prob_min = std::min(diag->ts_prob_min, p);
              diag->ts_prob_max = std::max(diag->ts_prob_max, p);
            }
          }
        } else {
          p = expit(-0.5 * a_prev + 0.5 * z);
        }
        arm = unif(rng) < p ? 1 : 0;
        if (data.has_rand_prob) rec.rand_prob = {p};
      }
      rec.arm = arm;
      rec.outcome = sample_zinb(pi_of(cfg.scenario, z, arm), mu_of(cfg.scenario, z, arm),
                                cfg.dispersion, rng);
      if (cfg.scenario == 3)
        ts.push(static_cast<double>(z), arm == 1 ? 1.0 : 0.0,
                static_cast<double>(rec.outcome));
      a_prev = arm > 0 ? 1 : 0;
      data.records.push_back(std::move(rec));
    }
  }
  data.finalize();
  return data;
}

TrueEffect true_effect(int scenario) {
  if (scenario < 1 || scenario > 4)
    throw_input(errc::invalid_config, "scenario must be 1..4");
  const int K = k_arms_of(scenario);
  TrueEffect out;
  for (int k = 1; k <= K; ++k) {
    double num = 0, den = 0;
    for (int z = 0; z < 3; ++z) {
      num += pi_of(scenario, z, k) * mu_of(scenario, z, k);
      den += pi_of(scenario, z, 0) * mu_of(scenario, z, 0);
    }
    out.marginal.push_back(std::log(num / den));

    auto at = [&](int z) {
      return std::log(pi_of(scenario, z, k) * mu_of(scenario, z, k)) -
             std::log(pi_of(scenario, z, 0) * mu_of(scenario, z, 0));
    };
    double e0 = at(0), e1 = at(1), e2 = at(2);
    // every law here is log-linear in z, so two points determine the line
    if (std::fabs(e2 - 2.0 * e1 + e0) > 1e-12)
      throw_estimation(errc::invalid_config, "conditional effect is not linear in z");
    out.conditional.push_back({e0, e1 - e0});
  }
  return out;
}

McEffect mc_true_effect(int scenario, int arm, long long draws, std::uint64_t seed) {
  if (scenario < 1 || scenario > 4)
    throw_input(errc::invalid_config, "scenario must be 1..4");
  if (arm < 1 || arm > k_arms_of(scenario))
    throw_input(errc::invalid_config, "arm outside the scenario's range");
  if (draws < 2) throw_input(errc::invalid_config, "draws must be >= 2");
  std::mt19937_64 rng = make_rng(seed);
  std::uniform_int_distribution<int> z_draw(0, 2);
  double s1 = 0, s0 = 0, q1 = 0, q0 = 0;
  for (long long i = 0; i < draws; ++i) {
    int za = z_draw(rng);
    double ya = static_cast<double>(
        sample_zinb(pi_of(scenario, za, arm), mu_of(scenario, za, arm), 1.0, rng));
    int zc = z_draw(rng);
    double yc = static_cast<double>(
        sample_zinb(pi_of(scenario, zc, 0), mu_of(scenario, zc, 0), 1.0, rng));
    s1 += ya;
    q1 += ya * ya;
    s0 += yc;
    q0 += yc * yc;
  }
  double n = static_cast<double>(draws);
  double m1 = s1 / n, m0 = s0 / n;
  double v1 = (q1 - n * m1 * m1) / (n - 1), v0 = (q0 - n * m0 * m0) / (n - 1);
  McEffect out;
  out.estimate = std::log(m1 / m0);
  out.se = std::sqrt(v1 / (n * m1 * m1) + v0 / (n * m0 * m0));
  return out;
}

}  // namespace mrtcount
