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

// Seeded property checks over generated history sets.  Every expected value
// comes from the literal-loop oracles or from an algebraic identity.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dhist/dhist.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using namespace dhist;

constexpr int kCases = 200;

// Heisenberg projectors are groupings of one random basis, so every pair of
// them commutes whatever H does between the times.
support::RandomCase commuting_case(oracle::Gen& g, Index d, std::size_t n_times, bool pure) {
  support::RandomCase c;
  c.h = g.hermitian(d);
  c.pure = pure;
  if (pure) {
    c.psi = g.unit(d);
    c.rho = c.psi * c.psi.adjoint();
  } else {
    c.rho = g.density(d, false);
  }
  const oracle::Mat basis = g.unitary(d);
  double t = 0.0;
  for (std::size_t k = 0; k < n_times; ++k) {
    t += 0.2 + g.uniform();
    const std::size_t groups = 1 + g.below(static_cast<std::size_t>(d));
    std::vector<oracle::Mat> ps(groups, oracle::Mat::Zero(d, d));
    for (Index i = 0; i < d; ++i) {
      const std::size_t b = static_cast<std::size_t>(i) < groups ? static_cast<std::size_t>(i) : g.below(groups);
      ps[b] += basis.col(i) * basis.col(i).adjoint();
    }
    const oracle::Mat u = oracle::propagator(c.h, t);
    for (auto& p : ps) p = u * p * u.adjoint();  // Schrödinger picture
    c.families.push_back({t, ps});
  }
  return c;
}

// Random assignment of histories to blocks, every block nonempty.
HistoryPartition random_partition(oracle::Gen& g, const HistorySet& hs) {
  const auto hist = hs.histories();
  const std::size_t n_blocks = 1 + g.below(hist.size());
  HistoryPartition p;
  p.blocks.resize(n_blocks);
  for (std::size_t i = 0; i < hist.size(); ++i) {
    p.blocks[i < n_blocks ? i : g.below(n_blocks)].push_back(hist[i]);
  }
  return p;
}

std::vector<FamilyPartition> random_family_partitions(oracle::Gen& g, const HistorySet& hs) {
  std::vector<FamilyPartition> parts;
  for (const auto& f : hs.families()) {
    const std::size_t n = f.size();
    const std::size_t n_blocks = 1 + g.below(n);
    FamilyPartition p;
    p.blocks.resize(n_blocks);
    for (std::size_t a = 0; a < n; ++a) p.blocks[a < n_blocks ? a : g.below(n_blocks)].push_back(a);
    parts.push_back(p);
  }
  return parts;
}

double hermiticity(const oracle::Mat& d) { return oracle::max_abs(d - d.adjoint()); }

}  // namespace

TEST(Property, FunctionalAxiomsAndOracleAgreement) {
  oracle::Gen g(2001);
  for (int n = 0; n < kCases; ++n) {
    const Index d = 2 + static_cast<Index>(g.below(7));
    const auto c = support::random_case(g, d, 1 + g.below(3));
    const HistorySet hs = support::build(c);
    const Matrix lib = decoherence_matrix(hs).entries;
    const oracle::Mat ref = oracle::decoherence(c.families, c.h, 0.0, c.rho);
    ASSERT_LE(oracle::max_abs(lib - ref), 1e-10) << "case " << n;
    EXPECT_LE(hermiticity(lib), 1e-10);
    EXPECT_GE(lib.diagonal().real().minCoeff(), -1e-10);
    EXPECT_LE(std::abs(lib.sum() - cplx(1.0, 0.0)), 1e-9);
  }
}

TEST(Property, SuperpositionForHistoryPartitions) {
  oracle::Gen g(2002);
  for (int n = 0; n < kCases; ++n) {
    const auto c = support::random_case(g, 2 + static_cast<Index>(g.below(4)), 1 + g.below(3));
    const HistorySet hs = support::build(c);
    const oracle::Mat fine = oracle::decoherence(c.families, c.h, 0.0, c.rho);
    const HistoryPartition p = random_partition(g, hs);
    const Matrix coarse = decoherence_matrix(coarse_grain(hs, p)).entries;
    const Index nb = static_cast<Index>(p.blocks.size());
    oracle::Mat summed = oracle::Mat::Zero(nb, nb);
    for (Index i = 0; i < nb; ++i) {
      for (Index j = 0; j < nb; ++j) {
        for (const auto& a : p.blocks[static_cast<std::size_t>(i)]) {
          for (const auto& b : p.blocks[static_cast<std::size_t>(j)]) {
            summed(i, j) += fine(static_cast<Index>(hs.position(a)), static_cast<Index>(hs.position(b)));
          }
        }
      }
    }
    EXPECT_LE(oracle::max_abs(coarse - summed), 1e-10) << "case " << n;
  }
}

TEST(Property, SuperpositionForFamilyPartitions) {
  oracle::Gen g(2003);
  for (int n = 0; n < kCases; ++n) {
    const auto c = support::random_case(g, 2 + static_cast<Index>(g.below(4)), 1 + g.below(3));
    const HistorySet hs = support::build(c);
    const auto parts = random_family_partitions(g, hs);
    // Oracle: sum projectors block by block and evaluate the literal functional.
    std::vector<oracle::Family> merged;
    for (std::size_t k = 0; k < c.families.size(); ++k) {
      oracle::Family f{c.families[k].time, {}};
      for (const auto& block : parts[k].blocks) {
        oracle::Mat s = oracle::Mat::Zero(hs.dim(), hs.dim());
        for (std::size_t a : block) s += c.families[k].projectors[a];
        f.projectors.push_back(s);
      }
      merged.push_back(f);
    }
    const oracle::Mat ref = oracle::decoherence(merged, c.h, 0.0, c.rho);
    EXPECT_LE(oracle::max_abs(decoherence_matrix(coarse_grain(hs, parts)).entries - ref), 1e-10) << "case " << n;
    const SumRuleReport r = check_sum_rules(hs, parts);
    EXPECT_LE(r.superposition_deviation, 1e-10);
  }
}

TEST(Property, SingleTimeSetsAreMedium) {
  oracle::Gen g(2004);
  for (int n = 0; n < kCases; ++n) {
    const auto c = support::random_case(g, 2 + static_cast<Index>(g.below(7)), 1);
    const DecoherenceReport r = classify(decoherence_matrix(support::build(c)));
    EXPECT_EQ(r.level, DecoherenceLevel::medium) << "case " << n << " violation " << r.max_medium_violation;
  }
}

TEST(Property, ClassifyMatchesDefinition) {
  oracle::Gen g(2005);
  for (int n = 0; n < kCases; ++n) {
    const auto c = support::random_case(g, 2 + static_cast<Index>(g.below(4)), 1 + g.below(3));
    const oracle::Mat d = oracle::decoherence(c.families, c.h, 0.0, c.rho);
    double weak = 0.0, medium = 0.0;
    for (Index i = 0; i < d.rows(); ++i) {
      for (Index j = 0; j < d.cols(); ++j) {
        if (i == j) continue;
        weak = std::max(weak, std::abs(d(i, j).real()));
        medium = std::max(medium, std::abs(d(i, j)));
      }
    }
    const double tol = std::pow(10.0, -1.0 - 8.0 * g.uniform());
    const DecoherenceReport r = classify(d, tol);
    EXPECT_LE(r.max_weak_violation, r.max_medium_violation);
    EXPECT_NEAR(r.max_weak_violation, weak, 1e-15);
    EXPECT_NEAR(r.max_medium_violation, medium, 1e-15);
    const DecoherenceLevel expected =
        medium <= tol ? DecoherenceLevel::medium : (weak <= tol ? DecoherenceLevel::weak : DecoherenceLevel::none);
    EXPECT_EQ(r.level, expected) << "case " << n;
  }
}

TEST(Property, ImplicationChainHasNoViolations) {
  oracle::Gen g(2006);
  int strong_seen = 0;
  for (int n = 0; n < kCases; ++n) {
    const Index d = 2 + static_cast<Index>(g.below(4));
    const bool commuting = n % 2 == 0;
    const auto c = commuting ? commuting_case(g, d, 1 + g.below(3), g.uniform() < 0.5)
                             : support::random_case(g, d, 1 + g.below(3));
    const HistorySet hs = support::build(c);
    const ImplicationReport r = implication_chain_report(hs);
    EXPECT_TRUE(r.monotone) << "case " << n;
    if (r.strong.value_or(false)) {
      ++strong_seen;
      EXPECT_TRUE(r.medium) << "case " << n;
    }
    if (r.medium) {
      EXPECT_TRUE(r.weak) << "case " << n;
    }
    // Commuting Heisenberg projectors decohere for every state.
    if (commuting) {
      EXPECT_TRUE(r.medium) << "case " << n;
    }
  }
  EXPECT_GT(strong_seen, kCases / 4);
}

TEST(Property, CommutingFamiliesAreStrongWithChainRecords) {
  oracle::Gen g(2007);
  for (int n = 0; n < 60; ++n) {
    const auto c = commuting_case(g, 2 + static_cast<Index>(g.below(4)), 1 + g.below(3), false);
    const HistorySet hs = support::build(c);
    const RecordSet rs = extract_records_impure(hs);
    const StrongReport s = check_strong(hs, rs);
    EXPECT_TRUE(s.strong) << "case " << n;
    EXPECT_LE(s.residual, 1e-10);
  }
}

TEST(Property, PureRecordsSatisfyRecordEquation) {
  oracle::Gen g(2008);
  for (int n = 0; n < 100; ++n) {
    const Index d = 2 + static_cast<Index>(g.below(5));
    const auto c = commuting_case(g, d, 1 + g.below(3), true);
    const HistorySet hs = support::build(c);
    const auto policy = n % 2 ? ComplementPolicy::to_first : ComplementPolicy::to_vanishing;
    const RecordSet rs = extract_records_pure(hs, nullptr, RecordOptions{tol::decoherence, policy});
    oracle::Mat sum = oracle::Mat::Zero(d, d);
    for (std::size_t a = 0; a < rs.projectors.size(); ++a) {
      const oracle::Mat& ra = rs.projectors[a].matrix();
      sum += ra;
      EXPECT_LE(oracle::max_abs(ra * ra - ra), 1e-9);
      for (std::size_t b = a + 1; b < rs.projectors.size(); ++b) {
        EXPECT_LE(oracle::max_abs(ra * rs.projectors[b].matrix()), 1e-9);
      }
    }
    EXPECT_LE(oracle::max_abs(sum - oracle::Mat::Identity(d, d)), 1e-9);
    const auto chains = oracle::chains(c.families, c.h, 0.0);
    for (std::size_t a = 0; a < chains.size(); ++a) {
      EXPECT_LE(((chains[a] - rs.projectors[a].matrix()) * c.psi).norm(), 1e-9) << "case " << n;
    }
  }
}

TEST(Property, RefineToFullIsFullAndKeepsProbabilities) {
  oracle::Gen g(2009);
  for (int n = 0; n < 40; ++n) {
    const auto c = commuting_case(g, 2 + static_cast<Index>(g.below(4)), 1 + g.below(2), true);
    const HistorySet hs = support::build(c);
    const HistorySet full = refine_to_full(hs);
    ASSERT_EQ(full.families().size(), hs.families().size() + 1);
    EXPECT_TRUE(is_full(full).full) << "case " << n;
    // Original probabilities are the sums over the appended family's index.
    const std::vector<double> p0 = probabilities(decoherence_matrix(hs)).p;
    const std::vector<double> p1 = probabilities(decoherence_matrix(full)).p;
    const std::size_t m = full.families().back().size();
    for (std::size_t i = 0; i < p0.size(); ++i) {
      double s = 0.0;
      for (std::size_t r = 0; r < m; ++r) s += p1[i * m + r];
      EXPECT_NEAR(s, p0[i], 1e-10) << "case " << n;
    }
  }
}

TEST(Property, RepeatEmbedsFunctional) {
  oracle::Gen g(2010);
  for (int n = 0; n < 100; ++n) {
    const auto c = support::random_case(g, 2 + static_cast<Index>(g.below(4)), 2 + g.below(2));
    const HistorySet hs = support::build(c);
    const double t1 = hs.families().front().time(), tn = hs.families().back().time();
    const double t_new = t1 + g.uniform() * (tn - t1);
    const HistorySet more = interpolate_repeat(hs, t_new);
    // The inserted family follows the latest family at or before t_new.
    std::size_t src = 0;
    for (std::size_t k = 0; k < hs.families().size(); ++k) {
      if (hs.families()[k].time() <= t_new) src = k;
    }
    const Matrix d0 = decoherence_matrix(hs).entries;
    const Matrix d1 = decoherence_matrix(more).entries;
    const auto fine = more.histories();
    auto reduce = [&](const HistoryIndex& h, bool& consistent) {
      std::vector<std::size_t> a = h.alphas;
      consistent = a[src] == a[src + 1];
      a.erase(a.begin() + static_cast<long>(src) + 1);
      return HistoryIndex{a};
    };
    double worst = 0.0;
    for (const auto& x : fine) {
      for (const auto& y : fine) {
        bool cx = false, cy = false;
        const HistoryIndex rx = reduce(x, cx), ry = reduce(y, cy);
        const cplx expected = cx && cy ? d0(static_cast<Index>(hs.position(rx)), static_cast<Index>(hs.position(ry)))
                                       : cplx(0.0, 0.0);
        worst = std::max(worst, std::abs(
            d1(static_cast<Index>(more.position(x)), static_cast<Index>(more.position(y))) - expected));
      }
    }
    EXPECT_LE(worst, 1e-12) << "case " << n;
  }
}

TEST(Property, TransportLeavesFunctionalInvariant) {
  oracle::Gen g(2011);
  for (int n = 0; n < 100; ++n) {
    const auto c = support::random_case(g, 2 + static_cast<Index>(g.below(4)), 1 + g.below(3));
    const HistorySet hs = support::build(c);
    const Matrix u = g.unitary(hs.dim());
    const Matrix d0 = decoherence_matrix(hs).entries;
    for (auto mode : {TransportMode::full, TransportMode::histories}) {
      const HistorySet moved = unitary_transport(hs, u, mode);
      EXPECT_LE(max_abs(Matrix(decoherence_matrix(moved).entries - d0)), 1e-10) << "case " << n;
      EXPECT_NEAR(entropy(moved.rho()), entropy(hs.rho()), 1e-9);
    }
  }
}

TEST(Property, FormalProbabilitiesSumToOne) {
  oracle::Gen g(2012);
  for (int n = 0; n < kCases; ++n) {
    const auto c = support::random_case(g, 2 + static_cast<Index>(g.below(7)), 1 + g.below(3));
    const HistorySet hs = support::build(c);
    const std::vector<double> q = formal_probabilities(hs);
    const std::vector<double> ref = oracle::formal_probabilities(c.families, hs.dim());
    double sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      EXPECT_NEAR(q[i], ref[i], 1e-12);
      EXPECT_GE(q[i], -1e-15);
      sum += q[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-10) << "case " << n;
    EXPECT_NEAR(s_hat(hs), oracle::shannon(ref), 1e-10);
  }
}

TEST(Property, MaxentEntropyBoundsAndConvergence) {
  oracle::Gen g(2013);
  for (int n = 0; n < 40; ++n) {
    const Index d = 2 + static_cast<Index>(g.below(4));
    const auto c = support::random_case(g, d, 1 + g.below(2));
    const HistorySet hs = support::build(c);
    const ClassicalityReport r = classicality_report(hs);
    ASSERT_TRUE(r.solver.converged) << "case " << n;
    EXPECT_LE(r.solver.final_residual, 1e-8);
    EXPECT_LE(r.solver.iterations, 10000u);
    EXPECT_GE(r.s_maxent, oracle::von_neumann(c.rho) - 1e-6) << "case " << n;
    EXPECT_LE(r.s_maxent, std::log(static_cast<double>(d)) + 1e-9);
  }
}

TEST(Property, MaxentDecreasesUnderFineGraining) {
  oracle::Gen g(2014);
  for (int n = 0; n < 30; ++n) {
    const auto c = support::random_case(g, 2 + static_cast<Index>(g.below(3)), 1 + g.below(2));
    const HistorySet fine = support::build(c);
    const HistorySet coarse = coarse_grain(fine, random_family_partitions(g, fine));
    const double s_fine = maxent(build_constraints(fine)).entropy;
    const double s_coarse = maxent(build_constraints(coarse)).entropy;
    EXPECT_GE(s_coarse, s_fine - 1e-7) << "case " << n;
  }
}
