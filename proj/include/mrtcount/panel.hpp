#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mrtcount/errors.hpp"

namespace mrtcount {

// One decision point for one participant. arm = 0 means no treatment and is
// forced whenever availability = 0. rand_prob holds the per-arm randomization
// probabilities when the design makes them known (size k_arms), else empty.
struct DecisionRecord {
  int participant = 0;  // group index within the dataset
  int t = 1;            // decision index, 1-based, strictly increasing per participant
  int availability = 1;
  int arm = 0;
  long long outcome = 0;
  std::vector<double> rand_prob;
  std::vector<double> covariates;  // aligned with PanelDataset::covariate_names
};

struct PanelDataset {
  std::vector<std::string> participant_ids;  // group index -> external id
  std::vector<std::string> covariate_names;
  int k_arms = 1;
  bool has_rand_prob = false;
  std::vector<DecisionRecord> records;      // grouped by participant, t ascending
  std::vector<std::pair<int, int>> groups;  // per participant [begin, end) into records

  int n() const { return static_cast<int>(groups.size()); }
  long long record_count() const { return static_cast<long long>(records.size()); }
  int t_max() const;
  int covariate_index(const std::string& name) const;  // -1 if absent

  // sorts records into (participant, t) order, rebuilds groups, and checks
  // every dataset invariant; throws input_error on violation
  void finalize();
};

// Column names in the CSV header. Probability columns are <prob_prefix>1 ..
// <prob_prefix>K and are optional; when `covariates` is empty every remaining
// column is treated as a numeric covariate.
struct PanelSchema {
  std::string participant = "id";
  std::string time = "t";
  std::string availability = "avail";
  std::string arm = "arm";
  std::string outcome = "y";
  std::string prob_prefix = "prob";
  std::vector<std::string> covariates;
};

PanelDataset load_panel(const std::string& path, const PanelSchema& schema = {});
PanelDataset load_panel_text(const std::string& csv_text, const PanelSchema& schema = {});
void write_panel(const PanelDataset& data, const std::string& path,
                 const PanelSchema& schema = {});
std::string write_panel_text(const PanelDataset& data, const PanelSchema& schema = {});

struct ArmSummary {
  long long records = 0;  // available records on this arm
  double outcome_mean = 0;
  double zero_proportion = 0;
};

struct PanelSummary {
  int n = 0;
  long long records = 0;
  int t_max = 0;
  int k_arms = 1;
  double availability_rate = 0;
  std::vector<ArmSummary> by_arm;  // index = arm
  std::string render() const;
};

PanelSummary summarize(const PanelDataset& data);

// New dataset holding only the listed participant groups (records copied in
// order, participants renumbered). Keeps whole trajectories together so lagged
// features stay valid.
PanelDataset subset_participants(const PanelDataset& data, const std::vector<int>& keep);

}  // namespace mrtcount
