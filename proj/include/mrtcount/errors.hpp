#pragma once

#include <stdexcept>
#include <string>

namespace mrtcount {

// Error kinds surfaced to callers. The CLI maps input_error to exit code 2
// and estimation_error to exit code 1.
enum class errc {
  missing_column,
  non_integer_outcome,
  probability_out_of_range,
  duplicate_decision_point,
  bad_record_field,
  empty_dataset,
  unknown_feature,
  lag_before_start,
  invalid_config,
  no_records_for_arm,
  degenerate_arm,
  missing_known_probabilities,
  separation_detected,
  irls_diverged,
  rank_deficient_controls,
  no_convergence,
  singular_bread,
  non_psd_covariance,
  all_replicates_failed,
  io_failure,
};

const char* errc_name(errc c);

class error : public std::runtime_error {
 public:
  error(errc c, const std::string& what) : std::runtime_error(what), code_(c) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

// malformed or inconsistent input: CSV defects, unknown features, bad config
class input_error : public error {
 public:
  using error::error;
};

// data admits no estimate: degenerate arms, non-convergence, singular pieces
class estimation_error : public error {
 public:
  using error::error;
};

[[noreturn]] void throw_input(errc c, const std::string& what);
[[noreturn]] void throw_estimation(errc c, const std::string& what);

}  // namespace mrtcount
