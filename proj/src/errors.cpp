#include "mrtcount/errors.hpp"

namespace mrtcount {

const char* errc_name(errc c) {
  switch (c) {
    case errc::missing_column: return "MissingColumn";
    case errc::non_integer_outcome: return "NonIntegerOutcome";
    case errc::probability_out_of_range: return "ProbabilityOutOfRange";
    case errc::duplicate_decision_point: return "DuplicateDecisionPoint";
    case errc::bad_record_field: return "BadRecordField";
    case errc::empty_dataset: return "EmptyDataset";
    case errc::unknown_feature: return "UnknownFeature";
    case errc::lag_before_start: return "LagBeforeStart";
    case errc::invalid_config: return "InvalidConfig";
    case errc::no_records_for_arm: return "NoRecordsForArm";
    case errc::degenerate_arm: return "DegenerateArm";
    case errc::missing_known_probabilities: return "MissingKnownProbabilities";
    case errc::separation_detected: return "SeparationDetected";
    case errc::irls_diverged: return "IrlsDiverged";
    case errc::rank_deficient_controls: return "RankDeficientControls";
    case errc::no_convergence: return "NoConvergence";
    case errc::singular_bread: return "SingularBread";
    case errc::non_psd_covariance: return "NonPsdCovariance";
    case errc::all_replicates_failed: return "AllReplicatesFailed";
    case errc::io_failure: return "IoFailure";
  }
  return "UnknownError";
}

void throw_input(errc c, const std::string& what) {
  throw input_error(c, std::string(errc_name(c)) + ": " + what);
}

void throw_estimation(errc c, const std::string& what) {
  throw estimation_error(c, std::string(errc_name(c)) + ": " + what);
}

}  // namespace mrtcount
