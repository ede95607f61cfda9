#include "mrtcount/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace mrtcount {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& s, const std::string& col, int line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw_input(errc::bad_record_field,
                "column '" + col + "' line " + std::to_string(line_no) +
                    ": not a finite number: '" + s + "'");
  return v;
}

long long parse_int_field(const std::string& s, const std::string& col, int line_no) {
  double v = parse_double(s, col, line_no);
  double r = std::nearbyint(v);
  if (std::fabs(v - r) > 0)
    throw_input(errc::bad_record_field, "column '" + col + "' line " +
                                            std::to_string(line_no) +
                                            ": expected an integer, got '" + s + "'");
  return static_cast<long long>(r);
}

// doubles print with 17 significant digits so a write/load round trip is
// bit-exact
void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

int PanelDataset::t_max() const {
  int m = 0;
  for (const auto& r : records) m = std::max(m, r.t);
  return m;
}

int PanelDataset::covariate_index(const std::string& name) const {
  for (size_t j = 0; j < covariate_names.size(); ++j)
    if (covariate_names[j] == name) return static_cast<int>(j);
  return -1;
}

void PanelDataset::finalize() {
  if (k_arms < 1) throw_input(errc::invalid_config, "k_arms must be >= 1");
  std::stable_sort(records.begin(), records.end(),
                   [](const DecisionRecord& a, const DecisionRecord& b) {
                     if (a.participant != b.participant) return a.participant < b.participant;
                     return a.t < b.t;
                   });
  groups.clear();
  int n_groups = static_cast<int>(participant_ids.size());
  groups.assign(n_groups, {0, 0});
  int at = 0;
  for (int g = 0; g < n_groups; ++g) {
    int begin = at;
    while (at < static_cast<int>(records.size()) && records[at].participant == g) ++at;
    groups[g] = {begin, at};
  }
  if (at != static_cast<int>(records.size()))
    throw_input(errc::bad_record_field, "record participant index out of range");

  size_t n_probs = 0;
  bool any_probs = false, all_probs = true;
  for (int g = 0; g < n_groups; ++g) {
    int prev_t = 0;
    for (int i = groups[g].first; i < groups[g].second; ++i) {
      const DecisionRecord& r = records[i];
      if (r.t < 1)
        throw_input(errc::bad_record_field,
                    "participant '" + participant_ids[g] + "': decision index must be >= 1");
      if (i > groups[g].first && r.t == prev_t)
        throw_input(errc::duplicate_decision_point,
                    "participant '" + participant_ids[g] + "' repeats decision index " +
                        std::to_string(r.t));
      prev_t = r.t;
      if (r.availability != 0 && r.availability != 1)
        throw_input(errc::bad_record_field, "availability must be 0 or 1");
      if (r.arm < 0 || r.arm > k_arms)
        throw_input(errc::bad_record_field,
                    "arm " + std::to_string(r.arm) + " outside 0.." + std::to_string(k_arms));
      if (r.availability == 0 && r.arm != 0)
        throw_input(errc::bad_record_field,
                    "participant '" + participant_ids[g] + "' t=" + std::to_string(r.t) +
                        ": arm must be 0 when availability is 0");
      if (r.outcome < 0)
        throw_input(errc::non_integer_outcome, "outcome must be a nonnegative count");
      if (r.covariates.size() != covariate_names.size())
        throw_input(errc::bad_record_field, "covariate vector length mismatch");
      if (!r.rand_prob.empty()) {
        any_probs = true;
        if (r.rand_prob.size() != static_cast<size_t>(k_arms))
          throw_input(errc::probability_out_of_range,
                      "expected " + std::to_string(k_arms) + " randomization probabilities");
        double total = 0;
        for (double p : r.rand_prob) {
          if (!(p > 0.0 && p < 1.0))
            throw_input(errc::probability_out_of_range,
                        "randomization probability " + std::to_string(p) +
                            " outside (0, 1)");
          total += p;
        }
        if (total >= 1.0)
          throw_input(errc::probability_out_of_range,
                      "randomization probabilities sum to " + std::to_string(total));
        n_probs += 1;
      } else {
        all_probs = false;
      }
    }
  }
  (void)n_probs;
  if (any_probs && !all_probs)
    throw_input(errc::probability_out_of_range,
                "randomization probabilities must be present on every record or none");
  has_rand_prob = any_probs;
}

PanelDataset load_panel_text(const std::string& csv_text, const PanelSchema& schema) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line))
    throw_input(errc::missing_column, "empty input, no header row");
  std::vector<std::string> header = split_csv_line(line);

  auto find_col = [&](const std::string& name) {
    for (size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  };
  auto require_col = [&](const std::string& name) {
    int j = find_col(name);
    if (j < 0) throw_input(errc::missing_column, "required column '" + name + "' not in header");
    return j;
  };

  int c_id = require_col(schema.participant);
  int c_t = require_col(schema.time);
  int c_avail = require_col(schema.availability);
  int c_arm = require_col(schema.arm);
  int c_y = require_col(schema.outcome);

  // prob1..probK, consecutive from 1
  std::vector<int> c_prob;
  for (int k = 1;; ++k) {
    int j = find_col(schema.prob_prefix + std::to_string(k));
    if (j < 0) break;
    c_prob.push_back(j);
  }

  std::vector<int> c_cov;
  std::vector<std::string> cov_names;
  if (schema.covariates.empty()) {
    std::vector<bool> taken(header.size(), false);
    taken[c_id] = taken[c_t] = taken[c_avail] = taken[c_arm] = taken[c_y] = true;
    for (int j : c_prob) taken[j] = true;
    for (size_t j = 0; j < header.size(); ++j)
      if (!taken[j]) {
        c_cov.push_back(static_cast<int>(j));
        cov_names.push_back(header[j]);
      }
  } else {
    for (const auto& name : schema.covariates) {
      c_cov.push_back(require_col(name));
      cov_names.push_back(name);
    }
  }

  PanelDataset data;
  data.covariate_names = cov_names;
  data.k_arms = c_prob.empty() ? 1 : static_cast<int>(c_prob.size());

  std::map<std::string, int> group_of;
  int line_no = 1;
  int max_arm = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size())
      throw_input(errc::bad_record_field, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(header.size()) + " fields, got " +
                                              std::to_string(f.size()));
    DecisionRecord r;
    const std::string& id = f[c_id];
    auto it = group_of.find(id);
    if (it == group_of.end()) {
      it = group_of.emplace(id, static_cast<int>(data.participant_ids.size())).first;
      data.participant_ids.push_back(id);
    }
    r.participant = it->second;
    r.t = static_cast<int>(parse_int_field(f[c_t], schema.time, line_no));
    r.availability = static_cast<int>(parse_int_field(f[c_avail], schema.availability, line_no));
    r.arm = static_cast<int>(parse_int_field(f[c_arm], schema.arm, line_no));
    max_arm = std::max(max_arm, r.arm);

    double y = parse_double(f[c_y], schema.outcome, line_no);
    if (y < 0 || std::fabs(y - std::nearbyint(y)) > 0)
      throw_input(errc::non_integer_outcome,
                  "column '" + schema.outcome + "' line " + std::to_string(line_no) +
                      ": outcome must be a nonnegative integer, got '" + f[c_y] + "'");
    r.outcome = static_cast<long long>(std::nearbyint(y));

    for (size_t k = 0; k < c_prob.size(); ++k) {
      const std::string& cell = f[c_prob[k]];
      if (cell.empty() || cell == "NA") {
        r.rand_prob.clear();
        break;
      }
      double p = parse_double(cell, schema.prob_prefix + std::to_string(k + 1), line_no);
      if (!(p > 0.0 && p < 1.0))
        throw_input(errc::probability_out_of_range,
                    "column '" + schema.prob_prefix + std::to_string(k + 1) + "' line " +
                        std::to_string(line_no) + ": probability " + cell + " outside (0, 1)");
      r.rand_prob.push_back(p);
    }
    for (int j : c_cov) r.covariates.push_back(parse_double(f[j], header[j], line_no));
    data.records.push_back(std::move(r));
  }

  if (c_prob.empty() && max_arm > 1) data.k_arms = max_arm;
  data.finalize();
  return data;
}

PanelDataset load_panel(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_input(errc::io_failure, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_panel_text(ss.str(), schema);
}

std::string write_panel_text(const PanelDataset& data, const PanelSchema& schema) {
  std::string out;
  out += schema.participant;
  out += ',' + schema.time + ',' + schema.availability + ',' + schema.arm;
  if (data.has_rand_prob)
    for (int k = 1; k <= data.k_arms; ++k) out += ',' + schema.prob_prefix + std::to_string(k);
  out += ',' + schema.outcome;
  for (const auto& name : data.covariate_names) out += ',' + name;
  out += '\n';

  for (const auto& r : data.records) {
    out += data.participant_ids[r.participant];
    out += ',' + std::to_string(r.t) + ',' + std::to_string(r.availability) + ',' +
           std::to_string(r.arm);
    if (data.has_rand_prob)
      for (double p : r.rand_prob) {
        out += ',';
        append_double(out, p);
      }
    out += ',' + std::to_string(r.outcome);
    for (double v : r.covariates) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

void write_panel(const PanelDataset& data, const std::string& path, const PanelSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_input(errc::io_failure, "cannot open '" + path + "' for writing");
  out << write_panel_text(data, schema);
  if (!out) throw_input(errc::io_failure, "short write to '" + path + "'");
}

PanelSummary summarize(const PanelDataset& data) {
  if (data.records.empty()) throw_input(errc::empty_dataset, "no records to summarize");
  PanelSummary s;
  s.n = data.n();
  s.records = data.record_count();
  s.t_max = data.t_max();
  s.k_arms = data.k_arms;
  s.by_arm.assign(data.k_arms + 1, {});
  long long available = 0;
  std::vector<long long> zeros(data.k_arms + 1, 0);
  std::vector<long long> sums(data.k_arms + 1, 0);
  for (const auto& r : data.records) {
    if (r.availability == 0) continue;
    ++available;
    ArmSummary& a = s.by_arm[r.arm];
    a.records += 1;
    sums[r.arm] += r.outcome;
    if (r.outcome == 0) zeros[r.arm] += 1;
  }
  s.availability_rate = static_cast<double>(available) / static_cast<double>(s.records);
  for (int k = 0; k <= data.k_arms; ++k) {
    if (s.by_arm[k].records > 0) {
      s.by_arm[k].outcome_mean =
          static_cast<double>(sums[k]) / static_cast<double>(s.by_arm[k].records);
      s.by_arm[k].zero_proportion =
          static_cast<double>(zeros[k]) / static_cast<double>(s.by_arm[k].records);
    }
  }
  return s;
}

PanelDataset subset_participants(const PanelDataset& data, const std::vector<int>& keep) {
  PanelDataset out;
  out.covariate_names = data.covariate_names;
  out.k_arms = data.k_arms;
  out.has_rand_prob = data.has_rand_prob;
  for (int g : keep) {
    if (g < 0 || g >= data.n())
      throw_input(errc::bad_record_field, "participant index " + std::to_string(g) +
                                              " outside the dataset");
    out.participant_ids.push_back(data.participant_ids[g]);
    int new_g = static_cast<int>(out.participant_ids.size()) - 1;
    for (int i = data.groups[g].first; i < data.groups[g].second; ++i) {
      DecisionRecord r = data.records[i];
      r.participant = new_g;
      out.records.push_back(std::move(r));
    }
  }
  out.finalize();
  return out;
}

std::string PanelSummary::render() const {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "participants %d, records %lld, t_max %d, arms %d, availability %.4f\n", n,
                records, t_max, k_arms, availability_rate);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%6s %10s %12s %10s\n", "arm", "records", "mean", "zero");
  out += buf;
  for (size_t k = 0; k < by_arm.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%6zu %10lld %12.4f %10.4f\n", k, by_arm[k].records,
                  by_arm[k].outcome_mean, by_arm[k].zero_proportion);
    out += buf;
  }
  return out;
}

}  // namespace mrtcount
