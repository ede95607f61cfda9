// command-line front end: `analyze` runs one estimator on a panel CSV,
// `simulate` reproduces the replication studies on generated scenarios
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mrtcount/estimators.hpp"
#include "mrtcount/gee.hpp"
#include "mrtcount/nuisance.hpp"
#include "mrtcount/panel.hpp"
#include "mrtcount/replicate.hpp"
#include "mrtcount/simulate.hpp"

namespace {

using mrtcount::errc;
using mrtcount::throw_input;

struct KeyValue {
  std::string key;
  std::string value;  // already config-file formatted
};

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string quote_list(const std::vector<std::string>& v) {
  std::string out = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += quote(v[i]);
  }
  return out + "]";
}

std::string number_list(const std::vector<double>& v) {
  std::string out = "[";
  char buf[48];
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    out += buf;
  }
  return out + "]";
}

// config.resolved body; the section header lets --config re-trigger the
// subcommand without naming it again
std::string config_text(const char* section, const std::vector<KeyValue>& kv) {
  std::string out = std::string("[") + section + "]\n";
  for (const auto& e : kv) out += e.key + "=" + e.value + "\n";
  return out;
}

std::string comment_header(const std::vector<KeyValue>& kv) {
  std::string out;
  for (const auto& e : kv) out += "# " + e.key + "=" + e.value + "\n";
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_input(errc::io_failure, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw_input(errc::io_failure, "short write to '" + path.string() + "'");
}

mrtcount::TermKind term_kind_from(const std::string& name) {
  if (name == "linear") return mrtcount::TermKind::linear;
  if (name == "categorical") return mrtcount::TermKind::categorical;
  if (name == "spline") return mrtcount::TermKind::spline;
  throw_input(errc::invalid_config, "unknown term kind '" + name + "'");
}

const char* term_kind_name(mrtcount::TermKind k) {
  switch (k) {
    case mrtcount::TermKind::linear: return "linear";
    case mrtcount::TermKind::categorical: return "categorical";
    case mrtcount::TermKind::spline: return "spline";
  }
  return "?";
}

// "name" or "name:kind"; spline settings come from the shared flags
mrtcount::TermSpec parse_term(const std::string& text, int n_basis, int degree,
                              int penalty_order) {
  mrtcount::TermSpec term;
  term.n_basis = n_basis;
  term.degree = degree;
  term.penalty_order = penalty_order;
  size_t colon = text.find(':');
  if (colon == std::string::npos) {
    term.feature = text;
  } else {
    term.feature = text.substr(0, colon);
    term.kind = term_kind_from(text.substr(colon + 1));
  }
  if (term.feature.empty()) throw_input(errc::invalid_config, "empty term name");
  return term;
}

// terms for covariates left unspecified: few distinct values fit a saturated
// categorical, many fit a penalized spline
std::vector<mrtcount::TermSpec> auto_mean_terms(const mrtcount::PanelDataset& data, int n_basis,
                                                int degree, int penalty_order) {
  std::vector<mrtcount::TermSpec> terms;
  for (size_t j = 0; j < data.covariate_names.size(); ++j) {
    std::vector<double> seen;
    for (const auto& r : data.records) {
      double v = r.covariates[j];
      bool found = false;
      for (double s : seen)
        if (s == v) {
          found = true;
          break;
        }
      if (!found) seen.push_back(v);
      if (seen.size() > 5) break;
    }
    mrtcount::TermSpec term;
    term.feature = data.covariate_names[j];
    term.kind = seen.size() <= 5 ? mrtcount::TermKind::categorical : mrtcount::TermKind::spline;
    term.n_basis = n_basis;
    term.degree = degree;
    term.penalty_order = penalty_order;
    terms.push_back(term);
  }
  return terms;
}

std::string term_to_text(const mrtcount::TermSpec& t) {
  return t.feature + ":" + term_kind_name(t.kind);
}

struct AnalyzeArgs {
  std::string input;
  std::string out_dir;
  std::string estimator = "emee-nonp";
  std::vector<std::string> moderators{"1"};
  std::vector<std::string> controls{"1"};
  std::vector<std::string> covariates;
  std::vector<std::string> mean_terms;
  std::vector<std::string> propensity_terms;
  std::string propensity = "known-prob";
  std::vector<double> ptilde;
  std::string meat = "per-record";
  bool t_critical = false;
  bool two_fold = false;
  bool no_lag_initial = false;
  double lag_initial = 0.0;
  double prob_clip = 0.01;
  int n_basis = 10;
  int degree = 3;
  int penalty_order = 2;
  std::string save_nuisance, load_nuisance;
  // schema mapping
  std::string col_id = "id", col_time = "t", col_avail = "avail", col_arm = "arm",
              col_outcome = "y", col_prob_prefix = "prob";
};

int run_analyze(const AnalyzeArgs& a) {
  mrtcount::PanelSchema schema;
  schema.participant = a.col_id;
  schema.time = a.col_time;
  schema.availability = a.col_avail;
  schema.arm = a.col_arm;
  schema.outcome = a.col_outcome;
  schema.prob_prefix = a.col_prob_prefix;
  schema.covariates = a.covariates;
  mrtcount::PanelDataset data = mrtcount::load_panel(a.input, schema);

  mrtcount::EstimandSpec spec;
  spec.estimator = mrtcount::estimator_from_name(a.estimator);
  spec.model.moderators = a.moderators;
  spec.model.controls = a.controls;
  if (a.no_lag_initial) {
    spec.model.lag_initial.reset();
    spec.nuisance.lag_initial.reset();
  } else {
    spec.model.lag_initial = a.lag_initial;
    spec.nuisance.lag_initial = a.lag_initial;
  }
  spec.nuisance.propensity = mrtcount::propensity_mode_from_name(a.propensity);
  spec.nuisance.prob_clip = a.prob_clip;
  std::vector<mrtcount::TermSpec> mean_terms;
  if (a.mean_terms.empty()) {
    mean_terms = auto_mean_terms(data, a.n_basis, a.degree, a.penalty_order);
  } else {
    for (const auto& t : a.mean_terms)
      mean_terms.push_back(parse_term(t, a.n_basis, a.degree, a.penalty_order));
  }
  spec.nuisance.mean_terms = mean_terms;
  for (const auto& t : a.propensity_terms)
    spec.nuisance.propensity_terms.push_back(parse_term(t, a.n_basis, a.degree, a.penalty_order));
  if (!a.ptilde.empty()) {
    spec.ptilde.use_fixed = true;
    spec.ptilde.fixed = a.ptilde;
  }
  if (a.meat == "cluster")
    spec.meat = mrtcount::MeatMode::cluster;
  else if (a.meat != "per-record")
    throw_input(errc::invalid_config, "meat must be per-record or cluster");
  spec.t_critical = a.t_critical;
  spec.two_fold = a.two_fold;

  mrtcount::NuisanceOverride over;
  std::optional<mrtcount::NuisanceFit> loaded;
  if (!a.load_nuisance.empty()) {
    std::ifstream in(a.load_nuisance, std::ios::binary);
    if (!in) throw_input(errc::io_failure, "cannot read '" + a.load_nuisance + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    loaded = mrtcount::nuisance_from_text(text);
  } else if (!a.save_nuisance.empty()) {
    loaded = mrtcount::fit_nuisance(data, spec.nuisance);
    write_file(a.save_nuisance, mrtcount::nuisance_to_text(*loaded));
  }
  Eigen::MatrixXd loaded_feat;
  std::map<std::pair<int, int>, int> row_of;
  if (loaded) {
    loaded_feat =
        mrtcount::build_feature_matrix(data, loaded->mean_features, loaded->lag_initial);
    for (size_t i = 0; i < data.records.size(); ++i)
      row_of[{data.records[i].participant, data.records[i].t}] = static_cast<int>(i);
    const mrtcount::NuisanceFit* fit = &*loaded;
    const Eigen::MatrixXd* feat = &loaded_feat;
    const auto* rows = &row_of;
    over.mu = [fit, feat, rows](const mrtcount::DecisionRecord& r, int arm) {
      return fit->predict_mu(feat->row(rows->at({r.participant, r.t})), arm);
    };
  }

  mrtcount::EstimateReport report = mrtcount::estimate(data, spec, over);
  std::string table = report.render_table();
  std::fputs(table.c_str(), stdout);

  if (!a.out_dir.empty()) {
    std::vector<KeyValue> kv{
        {"input", quote(a.input)},
        {"estimator", quote(a.estimator)},
        {"moderator", quote_list(a.moderators)},
        {"control", quote_list(a.controls)},
        {"propensity", quote(a.propensity)},
        {"meat", quote(a.meat)},
        {"t-critical", a.t_critical ? "true" : "false"},
        {"two-fold", a.two_fold ? "true" : "false"},
        {"prob-clip", std::to_string(a.prob_clip)},
        {"basis", std::to_string(a.n_basis)},
        {"spline-degree", std::to_string(a.degree)},
        {"penalty-order", std::to_string(a.penalty_order)},
    };
    std::vector<std::string> resolved_terms;
    for (const auto& t : mean_terms) resolved_terms.push_back(term_to_text(t));
    kv.push_back({"mean-term", quote_list(resolved_terms)});
    if (!a.propensity_terms.empty())
      kv.push_back({"propensity-term", quote_list(a.propensity_terms)});
    if (!a.ptilde.empty()) kv.push_back({"ptilde", number_list(a.ptilde)});
    if (a.no_lag_initial)
      kv.push_back({"no-lag-initial", "true"});
    else
      kv.push_back({"lag-initial", std::to_string(a.lag_initial)});
    if (!a.covariates.empty()) kv.push_back({"covariate", quote_list(a.covariates)});

    std::filesystem::create_directories(a.out_dir);
    std::filesystem::path dir(a.out_dir);
    write_file(dir / "report.txt", comment_header(kv) + table);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(report.to_json_text());
    std::vector<std::string> lines;
    for (const auto& e : kv) lines.push_back(e.key + "=" + e.value);
    j["config"] = lines;
    write_file(dir / "report.json", j.dump(2) + "\n");
    write_file(dir / "config.resolved", config_text("analyze", kv));
  }
  return 0;
}

struct SimulateArgs {
  int scenario = 1;
  int n = 100;
  int t = 30;
  int replicates = 200;
  std::uint64_t seed = 1;
  int workers = 1;
  double dispersion = 1.0;
  bool conditional = false;
  std::vector<std::string> estimators;
  int ts_warmup = 20;
  double ts_alpha = 1.0;
  double ts_clip_lo = 0.05, ts_clip_hi = 0.95;
  std::string out_dir;
};

std::vector<std::string> default_estimators(int scenario, bool conditional) {
  std::vector<std::string> all{"ece",      "ece-nonp",     "emee",    "emee-nonp",
                               "dr-emee-nonp", "gee-ind", "gee-exch"};
  if (scenario == 4)  // conditional pair is binary-treatment only
    return {"emee", "emee-nonp", "dr-emee-nonp", "gee-ind", "gee-exch"};
  (void)conditional;
  return all;
}

int run_simulate(const SimulateArgs& s) {
  mrtcount::ReplicationRequest req;
  req.gen.scenario = s.scenario;
  req.gen.n = s.n;
  req.gen.t = s.t;
  req.gen.dispersion = s.dispersion;
  req.gen.ts_warmup = s.ts_warmup;
  req.gen.ts_alpha = s.ts_alpha;
  req.gen.ts_clip_lo = s.ts_clip_lo;
  req.gen.ts_clip_hi = s.ts_clip_hi;
  req.replicates = s.replicates;
  req.seed = s.seed;
  req.workers = s.workers;
  req.conditional = s.conditional;
  std::vector<std::string> names =
      s.estimators.empty() ? default_estimators(s.scenario, s.conditional) : s.estimators;
  for (const auto& n : names) req.estimators.push_back(mrtcount::estimator_from_name(n));

  mrtcount::ReplicationSummary summary = mrtcount::run_replications(req);
  std::string table = summary.render_table();
  std::fputs(table.c_str(), stdout);
  if (!summary.failure_log.empty())
    std::fprintf(stdout, "failed replicates: %zu\n", summary.failure_log.size());

  if (!s.out_dir.empty()) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(s.seed));
    std::vector<KeyValue> kv{
        {"scenario", std::to_string(s.scenario)},
        {"n", std::to_string(s.n)},
        {"t", std::to_string(s.t)},
        {"replicates", std::to_string(s.replicates)},
        {"seed", buf},
        {"workers", std::to_string(s.workers)},
        {"dispersion", std::to_string(s.dispersion)},
        {"conditional", s.conditional ? "true" : "false"},
        {"estimator", quote_list(names)},
    };
    if (s.scenario == 3) {
      kv.push_back({"ts-warmup", std::to_string(s.ts_warmup)});
      kv.push_back({"ts-alpha", std::to_string(s.ts_alpha)});
      kv.push_back({"ts-clip-lo", std::to_string(s.ts_clip_lo)});
      kv.push_back({"ts-clip-hi", std::to_string(s.ts_clip_hi)});
    }
    std::filesystem::create_directories(s.out_dir);
    std::filesystem::path dir(s.out_dir);
    write_file(dir / "summary.txt", comment_header(kv) + table);
    write_file(dir / "summary.csv", comment_header(kv) + summary.to_csv());
    write_file(dir / "config.resolved", config_text("simulate", kv));
    if (!summary.failure_log.empty()) {
      std::string log;
      for (const auto& line : summary.failure_log) log += line + "\n";
      write_file(dir / "failures.txt", log);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal excursion effect estimation for zero-inflated count panels"};
  app.require_subcommand(1);
  app.set_config("--config", "", "saved config.resolved to reproduce a run; flags win");

  AnalyzeArgs a;
  CLI::App* analyze = app.add_subcommand("analyze", "estimate effects from a panel CSV");
  analyze->configurable(true);
  analyze->add_option("--input", a.input, "panel CSV path")->required();
  analyze->add_option("--out", a.out_dir, "output directory (report.txt/.json, config.resolved)");
  analyze->add_option("--estimator", a.estimator,
                      "ece|ece-nonp|emee|emee-nonp|dr-emee-nonp|gee-ind|gee-exch");
  analyze->add_option("--moderator", a.moderators, "effect-model feature (repeatable)");
  analyze->add_option("--control", a.controls, "control feature (repeatable)");
  analyze->add_option("--covariate", a.covariates,
                      "covariate column to load (repeatable; default: all)");
  analyze->add_option("--mean-term", a.mean_terms,
                      "outcome-mean term name[:linear|categorical|spline] (repeatable)");
  analyze->add_option("--propensity-term", a.propensity_terms,
                      "propensity term for fitted modes (repeatable)");
  analyze->add_option("--propensity", a.propensity,
                      "known-prob|sample-proportion|logistic|spline-logistic");
  analyze->add_option("--ptilde", a.ptilde, "fixed numerator probability per arm (repeatable)");
  analyze->add_option("--meat", a.meat, "per-record|cluster sandwich aggregation");
  analyze->add_flag("--t-critical", a.t_critical, "Student-t critical value instead of 1.96");
  analyze->add_flag("--two-fold", a.two_fold, "split-sample nuisance fits");
  analyze->add_option("--lag-initial", a.lag_initial, "lag-1 feature value at first records");
  analyze->add_flag("--no-lag-initial", a.no_lag_initial,
                    "error on lag-1 features at first records");
  analyze->add_option("--prob-clip", a.prob_clip, "fitted-propensity clip bound");
  analyze->add_option("--basis", a.n_basis, "spline basis size for nuisance terms");
  analyze->add_option("--spline-degree", a.degree, "spline degree");
  analyze->add_option("--penalty-order", a.penalty_order, "difference-penalty order");
  analyze->add_option("--save-nuisance", a.save_nuisance, "write fitted nuisance models here");
  analyze->add_option("--load-nuisance", a.load_nuisance, "reuse fitted nuisance models");
  analyze->add_option("--col-id", a.col_id, "participant column");
  analyze->add_option("--col-time", a.col_time, "decision-index column");
  analyze->add_option("--col-avail", a.col_avail, "availability column");
  analyze->add_option("--col-arm", a.col_arm, "arm column");
  analyze->add_option("--col-outcome", a.col_outcome, "outcome column");
  analyze->add_option("--col-prob-prefix", a.col_prob_prefix,
                      "randomization-probability column prefix");

  SimulateArgs s;
  CLI::App* simulate = app.add_subcommand("simulate", "replication study on a generated scenario");
  simulate->configurable(true);
  simulate->add_option("--scenario", s.scenario, "1..4")->required()->check(CLI::Range(1, 4));
  simulate->add_option("--n", s.n, "participants per replicate");
  simulate->add_option("--t", s.t, "decision points per participant");
  simulate->add_option("--replicates,--r", s.replicates, "replicate count");
  simulate->add_option("--seed", s.seed, "master RNG seed");
  simulate->add_option("--workers", s.workers, "parallel replicate workers");
  simulate->add_option("--dispersion", s.dispersion, "negative-binomial shape r");
  simulate->add_flag("--conditional", s.conditional,
                     "target the state-conditional effect (moderators 1, Z)");
  simulate->add_option("--estimator", s.estimators, "estimator subset (repeatable)");
  simulate->add_option("--ts-warmup", s.ts_warmup, "scenario-3 fixed-0.5 decisions");
  simulate->add_option("--ts-alpha", s.ts_alpha, "scenario-3 posterior scale");
  simulate->add_option("--ts-clip-lo", s.ts_clip_lo, "scenario-3 probability floor");
  simulate->add_option("--ts-clip-hi", s.ts_clip_hi, "scenario-3 probability ceiling");
  simulate->add_option("--out", s.out_dir, "output directory (summary.txt/.csv, config.resolved)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  // library messages start with the error name so logs stay self-describing;
  // the bracket already shows it here, so drop the repeat
  auto bare = [](const mrtcount::error& e) {
    std::string msg = e.what();
    std::string prefix = std::string(errc_name(e.code())) + ": ";
    return msg.rfind(prefix, 0) == 0 ? msg.substr(prefix.size()) : msg;
  };

  try {
    if (analyze->parsed()) return run_analyze(a);
    return run_simulate(s);
  } catch (const mrtcount::input_error& e) {
    std::fprintf(stderr, "input error [%s]: %s\n", errc_name(e.code()), bare(e).c_str());
    return 2;
  } catch (const mrtcount::estimation_error& e) {
    std::fprintf(stderr, "estimation error [%s]: %s\n", errc_name(e.code()), bare(e).c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
