// Copyright 2026 The dhist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dhist {

enum class Errc {
  dimension_mismatch,
  invalid_operator,
  not_hermitian,
  not_projector,
  invalid_density_matrix,
  invalid_state,
  completeness_violation,
  exclusivity_violation,
  non_commuting_simultaneous,
  invalid_history_set,
  invalid_index,
  invalid_partition,
  non_monotone_times,
  time_out_of_range,
  axiom_violation,
  not_decoherent,
  not_medium_decoherent,
  not_strongly_decoherent,
  impure_state,
  subspaces_not_orthogonal,
  verification_failed,
  not_converged,
  non_unitary,
  invalid_model,
  parse_error,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::invalid_operator: return "InvalidOperator";
    case Errc::not_hermitian: return "NotHermitian";
    case Errc::not_projector: return "NotProjector";
    case Errc::invalid_density_matrix: return "InvalidDensityMatrix";
    case Errc::invalid_state: return "InvalidState";
    case Errc::completeness_violation: return "CompletenessViolation";
    case Errc::exclusivity_violation: return "ExclusivityViolation";
    case Errc::non_commuting_simultaneous: return "NonCommutingSimultaneousFamilies";
    case Errc::invalid_history_set: return "InvalidHistorySet";
    case Errc::invalid_index: return "InvalidIndex";
    case Errc::invalid_partition: return "InvalidPartition";
    case Errc::non_monotone_times: return "NonMonotoneTimes";
    case Errc::time_out_of_range: return "TimeOutOfRange";
    case Errc::axiom_violation: return "AxiomViolation";
    case Errc::not_decoherent: return "NotDecoherent";
    case Errc::not_medium_decoherent: return "NotMediumDecoherent";
    case Errc::not_strongly_decoherent: return "NotStronglyDecoherent";
    case Errc::impure_state: return "ImpureState";
    case Errc::subspaces_not_orthogonal: return "SubspacesNotOrthogonal";
    case Errc::verification_failed: return "VerificationFailed";
    case Errc::not_converged: return "NotConverged";
    case Errc::non_unitary: return "NonUnitary";
    case Errc::invalid_model: return "InvalidModel";
    case Errc::parse_error: return "ParseError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

  // Construction-time contract violations (bad operators, families, sets).
  bool is_validation() const noexcept {
    switch (code_) {
      case Errc::dimension_mismatch:
      case Errc::invalid_operator:
      case Errc::not_hermitian:
      case Errc::not_projector:
      case Errc::invalid_density_matrix:
      case Errc::invalid_state:
      case Errc::completeness_violation:
      case Errc::exclusivity_violation:
      case Errc::non_commuting_simultaneous:
      case Errc::invalid_history_set:
      case Errc::invalid_index:
      case Errc::invalid_partition:
      case Errc::non_monotone_times:
      case Errc::time_out_of_range:
      case Errc::non_unitary:
      case Errc::invalid_model:
        return true;
      default:
        return false;
    }
  }

 private:
  Errc code_;
};

}  // namespace dhist
