#include "mrtcount/replicate.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "mrtcount/rng.hpp"

namespace mrtcount {

EstimandSpec scenario_estimand(int scenario, EstimatorKind kind, bool conditional) {
  if (scenario < 1 || scenario > 4)
    throw_input(errc::invalid_config, "scenario must be 1..4");
  EstimandSpec spec;
  spec.estimator = kind;
  spec.model.moderators =
      conditional ? std::vector<std::string>{"1", "Z"} : std::vector<std::string>{"1"};
  spec.model.controls = {"1", "Z"};
  TermSpec z_term;
  z_term.feature = "Z";
  z_term.kind = TermKind::categorical;
  spec.nuisance.mean_terms = {z_term};
  // scenario 2 withholds the randomization probabilities; everything else
  // carries them in the dataset, which the estimators then use directly
  spec.nuisance.propensity =
      scenario == 2 ? PropensityMode::sample_proportion : PropensityMode::known_prob;
  return spec;
}

Eigen::VectorXd scenario_truth(int scenario, bool conditional) {
  TrueEffect te = true_effect(scenario);
  const int K = static_cast<int>(te.marginal.size());
  if (!conditional) {
    Eigen::VectorXd v(K);
    for (int k = 0; k < K; ++k) v(k) = te.marginal[k];
    return v;
  }
  Eigen::VectorXd v(2 * K);
  for (int k = 0; k < K; ++k) {
    v(2 * k) = te.conditional[k][0];
    v(2 * k + 1) = te.conditional[k][1];
  }
  return v;
}

EstimatorSummary summarize_replicates(const std::string& name,
                                      const std::vector<std::string>& labels,
                                      const std::vector<Eigen::VectorXd>& estimates,
                                      const std::vector<Eigen::VectorXd>& ses,
                                      const std::vector<Eigen::VectorXd>& ci_lo,
                                      const std::vector<Eigen::VectorXd>& ci_hi,
                                      const Eigen::VectorXd& truth, int failures) {
  EstimatorSummary s;
  s.estimator = name;
  s.labels = labels;
  s.failures = failures;
  s.used = static_cast<int>(estimates.size());
  const Eigen::Index d = truth.size();
  s.bias = s.mean_se = s.sd = s.rmse = s.cp = Eigen::VectorXd::Zero(d);
  if (s.used == 0) return s;
  const double R = static_cast<double>(s.used);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& e : estimates) mean += e;
  mean /= R;
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(d), mse = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < s.used; ++k) {
    Eigen::VectorXd c = estimates[k] - mean;
    ss += c.cwiseProduct(c);
    Eigen::VectorXd err = estimates[k] - truth;
    mse += err.cwiseProduct(err);
    s.mean_se += ses[k];
    for (Eigen::Index j = 0; j < d; ++j)
      if (ci_lo[k](j) <= truth(j) && truth(j) <= ci_hi[k](j)) s.cp(j) += 1.0;
  }
  s.bias = mean - truth;
  s.mean_se /= R;
  s.sd = s.used > 1 ? Eigen::VectorXd((ss / (R - 1.0)).cwiseSqrt())
                    : Eigen::VectorXd::Zero(d);
  s.rmse = (mse / R).cwiseSqrt();
  s.cp /= R;
  return s;
}

namespace {

struct ReplicateCell {
  bool ok = false;
  std::string message;
  std::vector<std::string> labels;
  Eigen::VectorXd est, se, lo, hi;
};

ReplicateCell run_one(const PanelDataset& data, const EstimandSpec& spec,
                      Eigen::Index want_dim) {
  ReplicateCell cell;
  EstimateReport rep = estimate(data, spec);
  if (rep.all_zero_outcomes) {
    cell.message = "all outcomes zero";
    return cell;
  }
  if (rep.effect_dim != want_dim) {
    cell.message = "effect dimension mismatch";
    return cell;
  }
  int off = rep.effect_offset;
  cell.est = rep.estimates.segment(off, want_dim);
  cell.se = rep.se.segment(off, want_dim);
  cell.lo = rep.ci_lo.segment(off, want_dim);
  cell.hi = rep.ci_hi.segment(off, want_dim);
  cell.labels.assign(rep.labels.begin() + off, rep.labels.begin() + off + want_dim);
  cell.ok = true;
  return cell;
}

}  // namespace

ReplicationSummary run_replications(const ReplicationRequest& req) {
  if (req.replicates < 2) throw_input(errc::invalid_config, "need at least 2 replicates");
  if (req.estimators.empty()) throw_input(errc::invalid_config, "no estimators requested");
  for (EstimatorKind k : req.estimators)
    if (estimator_is_conditional(k) && req.gen.scenario == 4)
      throw_input(errc::invalid_config,
                  std::string(estimator_name(k)) + " supports binary treatment only");

  const int R = req.replicates;
  const int E = static_cast<int>(req.estimators.size());
  Eigen::VectorXd truth = scenario_truth(req.gen.scenario, req.conditional);

  std::vector<EstimandSpec> specs;
  for (EstimatorKind k : req.estimators)
    specs.push_back(scenario_estimand(req.gen.scenario, k, req.conditional));

  std::vector<ReplicateCell> cells(static_cast<size_t>(R) * E);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int k = next.fetch_add(1);
      if (k >= R) break;
      PanelDataset data;
      bool gen_ok = true;
      std::string gen_msg;
      try {
        data = gen_scenario(req.gen, replicate_seed(req.seed, static_cast<std::uint64_t>(k)));
      } catch (const error& e) {
        gen_ok = false;
        gen_msg = e.what();
      }
      for (int j = 0; j < E; ++j) {
        ReplicateCell& cell = cells[static_cast<size_t>(k) * E + j];
        if (!gen_ok) {
          cell.message = "generation failed: " + gen_msg;
          continue;
        }
        try {
          cell = run_one(data, specs[j], truth.size());
        } catch (const error& e) {
          cell.ok = false;
          cell.message = e.what();
        }
      }
    }
  };

  int w = std::min(std::max(1, req.workers), R);
  if (w == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < w; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ReplicationSummary out;
  out.scenario = req.gen.scenario;
  out.t = req.gen.t;
  out.replicates = R;
  out.truth = truth;
  for (int j = 0; j < E; ++j) {
    std::vector<Eigen::VectorXd> est, se, lo, hi;
    std::vector<std::string> labels;
    int failures = 0;
    for (int k = 0; k < R; ++k) {
      const ReplicateCell& cell = cells[static_cast<size_t>(k) * E + j];
      if (!cell.ok) {
        ++failures;
        out.failure_log.push_back("replicate " + std::to_string(k) + ", " +
                                  estimator_name(req.estimators[j]) + ": " + cell.message);
        continue;
      }
      if (labels.empty()) labels = cell.labels;
      est.push_back(cell.est);
      se.push_back(cell.se);
      lo.push_back(cell.lo);
      hi.push_back(cell.hi);
    }
    if (est.empty())
      throw_estimation(errc::all_replicates_failed,
                       std::string(estimator_name(req.estimators[j])) +
                           ": every replicate failed; first: " +
                           (out.failure_log.empty() ? "?" : out.failure_log.front()));
    out.by_estimator.push_back(summarize_replicates(estimator_name(req.estimators[j]), labels,
                                                    est, se, lo, hi, truth, failures));
  }
  return out;
}

std::string ReplicationSummary::render_table() const {
  size_t name_w = 9, term_w = 4;
  for (const auto& e : by_estimator) {
    name_w = std::max(name_w, e.estimator.size());
    for (const auto& l : e.labels) term_w = std::max(term_w, l.size());
  }
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-*s %5s %-*s %8s %8s %8s %8s %6s %5s %5s\n",
                static_cast<int>(name_w), "estimator", "t", static_cast<int>(term_w), "term",
                "bias", "se", "sd", "rmse", "cp", "used", "fail");
  out += buf;
  for (const auto& e : by_estimator)
    for (Eigen::Index j = 0; j < e.bias.size(); ++j) {
      std::snprintf(buf, sizeof(buf),
                    "%-*s %5d %-*s %8.3f %8.3f %8.3f %8.3f %6.3f %5d %5d\n",
                    static_cast<int>(name_w), e.estimator.c_str(), t,
                    static_cast<int>(term_w), e.labels[j].c_str(), e.bias(j), e.mean_se(j),
                    e.sd(j), e.rmse(j), e.cp(j), e.used, e.failures);
      out += buf;
    }
  return out;
}

std::string ReplicationSummary::to_csv() const {
  std::string out = "estimator,t,term,bias,se,sd,rmse,cp,used,failures\n";
  char buf[256];
  for (const auto& e : by_estimator)
    for (Eigen::Index j = 0; j < e.bias.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%s,%d,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d\n",
                    e.estimator.c_str(), t, e.labels[j].c_str(), e.bias(j), e.mean_se(j),
                    e.sd(j), e.rmse(j), e.cp(j), e.used, e.failures);
      out += buf;
    }
  return out;
}

}  // namespace mrtcount
