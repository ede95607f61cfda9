#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mrtcount/panel.hpp"

namespace mrtcount {

double expit(double x);

// zero-inflated count draw: Bernoulli(pi) occupancy times a negative-binomial
// count sampled as Poisson with a Gamma(shape r, mean mu) rate; E = pi * mu,
// NB variance mu + mu^2 / r
long long sample_zinb(double pi, double mu, double r, std::mt19937_64& rng);

struct GenConfig {
  int scenario = 1;  // 1..4; 2 withholds the randomization-probability columns
  int n = 30;
  int t = 30;
  double dispersion = 1.0;  // NB shape r
  // adaptive-randomization settings (scenario 3)
  int ts_warmup = 20;  // decisions 1..ts_warmup use p = 0.5 exactly
  double ts_alpha = 1.0;
  double ts_clip_lo = 0.05;
  double ts_clip_hi = 0.95;
};

struct GenDiagnostics {
  long long ts_fallbacks = 0;  // degenerate fits that fell back to p = 0.5
  long long ts_draws = 0;      // post-warm-up adaptive probabilities used
  double ts_prob_min = 1.0;
  double ts_prob_max = 0.0;
};

PanelDataset gen_scenario(const GenConfig& cfg, std::uint64_t seed,
                          GenDiagnostics* diag = nullptr);

// Per-participant adaptive randomizer over a Poisson working model with
// features (1, z, a, a*z). The assignment probability is the Gaussian
// approximation to P(treated predictor beats untreated | history): with
// delta = f(1,z) - f(0,z), Phi(delta' b / (alpha * sqrt(delta' I^-1 delta)))
// at the MLE b, clipped to [clip_lo, clip_hi]. A degenerate fit (singular
// information or no MLE) falls back to 0.5 and is counted.
struct ThompsonSampler {
  double alpha = 1.0;
  double clip_lo = 0.05;
  double clip_hi = 0.95;

  std::vector<std::array<double, 4>> x;  // history features
  std::vector<double> y;
  long long fallbacks = 0;

  void push(double z, double a, double outcome);
  double probability(double z);
};

struct TrueEffect {
  // log-ratio effect per arm, averaged over the exogenous state
  std::vector<double> marginal;
  // per arm, coefficients on (1, z) of the state-conditional effect
  std::vector<std::array<double, 2>> conditional;
};

TrueEffect true_effect(int scenario);

struct McEffect {
  double estimate = 0;
  double se = 0;
};

// simulation check of the analytic values: forced-arm draws with independent
// states per arm, delta-method SE of the log ratio
McEffect mc_true_effect(int scenario, int arm, long long draws, std::uint64_t seed);

}  // namespace mrtcount
