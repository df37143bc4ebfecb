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

// Builds library objects from the plain descriptions the oracles use.

#pragma once

#include <vector>

#include "dhist/dhist.hpp"
#include "oracles.hpp"

namespace support {

inline dhist::HistorySet make_set(const std::vector<oracle::Family>& fams, const dhist::Matrix& h,
                                  double t0, const dhist::Matrix& rho) {
  std::vector<dhist::ScheduledFamily> out;
  for (const auto& f : fams) {
    std::vector<dhist::Projector> ps;
    for (const auto& p : f.projectors) ps.emplace_back(p);
    out.push_back(dhist::make_family(f.time, std::move(ps)));
  }
  return dhist::HistorySet(dhist::HermitianOperator(h), t0, dhist::DensityMatrix(rho), std::move(out));
}

inline dhist::HistorySet make_pure_set(const std::vector<oracle::Family>& fams, const dhist::Matrix& h,
                                       double t0, const dhist::Vector& psi) {
  std::vector<dhist::ScheduledFamily> out;
  for (const auto& f : fams) {
    std::vector<dhist::Projector> ps;
    for (const auto& p : f.projectors) ps.emplace_back(p);
    out.push_back(dhist::make_family(f.time, std::move(ps)));
  }
  return dhist::HistorySet(dhist::HermitianOperator(h), t0,
                           dhist::DensityMatrix::from_state(dhist::StateVector::normalized(psi)), std::move(out));
}

// Random set description: n_times families on a d-dimensional space.
struct RandomCase {
  std::vector<oracle::Family> families;
  oracle::Mat h;
  oracle::Mat rho;
  oracle::Vec psi;  // set when pure
  bool pure = false;
};

inline RandomCase random_case(oracle::Gen& g, Eigen::Index d, std::size_t n_times) {
  RandomCase c;
  c.h = g.hermitian(d);
  c.pure = g.uniform() < 0.5;
  if (c.pure) {
    c.psi = g.unit(d);
    c.rho = c.psi * c.psi.adjoint();
  } else {
    c.rho = g.density(d, false);
  }
  double t = 0.0;
  for (std::size_t k = 0; k < n_times; ++k) {
    t += 0.2 + g.uniform();
    const std::size_t groups = 1 + g.below(static_cast<std::size_t>(std::min<Eigen::Index>(d, 4)));
    c.families.push_back({t, g.family(d, groups)});
  }
  return c;
}

inline dhist::HistorySet build(const RandomCase& c) {
  return c.pure ? make_pure_set(c.families, c.h, 0.0, c.psi) : make_set(c.families, c.h, 0.0, c.rho);
}

}  // namespace support
