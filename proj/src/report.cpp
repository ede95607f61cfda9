#include "mrtcount/report.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include "json.hpp"

namespace mrtcount {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void append_number(std::string& out, double v, int width) {
  char buf[48];
  if (std::isinf(v))
    std::snprintf(buf, sizeof(buf), "%*s", width, v > 0 ? "inf" : "-inf");
  else
    std::snprintf(buf, sizeof(buf), "%*.4f", width, v);
  out += buf;
}

double json_safe(double v) { return v; }  // nlohmann serializes non-finite as null

}  // namespace

void finish_inference(EstimateReport& report, long long n_records, bool t_critical) {
  const Eigen::Index dim = report.estimates.size();
  report.used_t_critical = t_critical;
  if (t_critical) {
    long long df = std::max<long long>(1, n_records - static_cast<long long>(dim));
    boost::math::students_t dist(static_cast<double>(df));
    report.critical_value = boost::math::quantile(dist, 0.975);
  } else {
    report.critical_value = 1.96;
  }
  report.se.resize(dim);
  report.ci_lo.resize(dim);
  report.ci_hi.resize(dim);
  report.z_value.resize(dim);
  report.p_value.resize(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    double v = report.cov(j, j);
    double se = v >= 0 ? std::sqrt(v) : kInf;
    report.se(j) = se;
    double z = (se > 0 && std::isfinite(se)) ? report.estimates(j) / se : 0.0;
    report.z_value(j) = z;
    if (t_critical) {
      long long df = std::max<long long>(1, n_records - static_cast<long long>(dim));
      boost::math::students_t dist(static_cast<double>(df));
      report.p_value(j) = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(z)));
    } else {
      report.p_value(j) = std::erfc(std::fabs(z) / std::sqrt(2.0));
    }
    report.ci_lo(j) = report.estimates(j) - report.critical_value * se;
    report.ci_hi(j) = report.estimates(j) + report.critical_value * se;
  }
}

std::string EstimateReport::render_table() const {
  size_t name_w = 4;
  for (const auto& l : labels) name_w = std::max(name_w, l.size());
  char buf[256];
  std::string out = "estimator: " + estimator + "\n";
  std::snprintf(buf, sizeof(buf), "%-*s %10s %10s %10s %10s %10s %10s\n",
                static_cast<int>(name_w), "term", "estimate", "se", "ci_lo", "ci_hi", "z",
                "p");
  out += buf;
  for (Eigen::Index j = 0; j < estimates.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%-*s ", static_cast<int>(name_w),
                  j < static_cast<Eigen::Index>(labels.size()) ? labels[j].c_str() : "?");
    out += buf;
    append_number(out, estimates(j), 10);
    out += ' ';
    append_number(out, se(j), 10);
    out += ' ';
    append_number(out, ci_lo(j), 10);
    out += ' ';
    append_number(out, ci_hi(j), 10);
    out += ' ';
    append_number(out, z_value(j), 10);
    out += ' ';
    std::snprintf(buf, sizeof(buf), "%10.4g", p_value(j));
    out += buf;
    out += '\n';
  }
  for (const auto& w : warnings) out += "warning: " + w + "\n";
  return out;
}

std::string EstimateReport::to_json_text() const {
  nlohmann::ordered_json j;
  j["estimator"] = estimator;
  j["labels"] = labels;
  auto vec = [](const Eigen::VectorXd& v) {
    std::vector<double> out(v.data(), v.data() + v.size());
    return out;
  };
  j["estimates"] = vec(estimates);
  j["se"] = vec(se);
  j["ci_lo"] = vec(ci_lo);
  j["ci_hi"] = vec(ci_hi);
  j["z"] = vec(z_value);
  j["p"] = vec(p_value);
  std::vector<std::vector<double>> cv;
  for (Eigen::Index r = 0; r < cov.rows(); ++r) {
    std::vector<double> row(cov.cols());
    for (Eigen::Index c = 0; c < cov.cols(); ++c) row[c] = json_safe(cov(r, c));
    cv.push_back(std::move(row));
  }
  j["cov"] = cv;
  j["effect_offset"] = effect_offset;
  j["effect_dim"] = effect_dim;
  j["critical_value"] = critical_value;
  j["used_t_critical"] = used_t_critical;
  j["all_zero_outcomes"] = all_zero_outcomes;
  j["solver"] = {{"iterations", solver_iterations}, {"restarts", solver_restarts}};
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

}  // namespace mrtcount
