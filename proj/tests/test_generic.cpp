#include <catch2/catch_amalgamated.hpp>

#include "qchan/generic.hpp"
#include "support/fixtures.hpp"
#include "support/test_util.hpp"

using namespace qchan;
using qtest::dist;

namespace {

/// Block-diagonal family diag(A_i, B_i): reducible by construction.
KrausFamily block_diag_family(int d1, int d2, int atoms, qchan::RngStream& rng) {
  const int k = d1 + d2;
  std::vector<ComplexMatrix> ops;
  for (int t = 0; t < atoms; ++t) {
    ComplexMatrix m(k, k);
    const auto a = qtest::random_matrix(d1, rng);
    const auto b = qtest::random_matrix(d2, rng);
    for (int i = 0; i < d1; ++i)
      for (int j = 0; j < d1; ++j) m(i, j) = a(i, j);
    for (int i = 0; i < d2; ++i)
      for (int j = 0; j < d2; ++j) m(d1 + i, d1 + j) = b(i, j);
    ops.push_back(std::move(m));
  }
  return family_from_ops(ops);
}

bool spans_first_coords(const SubspaceBasis& sub, int d) {
  // All basis mass within the first d coordinates.
  double off = 0.0;
  for (int j = 0; j < sub.basis.cols(); ++j)
    for (int i = d; i < sub.basis.rows(); ++i) off += std::norm(sub.basis(i, j));
  return sub.subspace_dim() <= d && off < 1e-16;
}

}  // namespace

TEST_CASE("invariant_subspace_search on fixtures") {
  qchan::warning_handler() = [](const std::string&) {};
  const auto shift = qtest::fix_shift(1e-3);
  const auto subs = invariant_subspace_search(shift.family());
  REQUIRE(subs.size() == 1);
  CHECK(subs[0].subspace_dim() == 1);
  CHECK(spans_first_coords(subs[0], 1));  // span{e1}
  CHECK(subs[0].invariance_residual <= 1e-9);
  qchan::warning_handler() = nullptr;

  CHECK(invariant_subspace_search(qtest::fix_mc().family()).empty());
  CHECK(invariant_subspace_search(qtest::fix_4proj().family()).empty());
}

TEST_CASE("invariant_subspace_search on block-diagonal families") {
  RngStream rng(401);
  for (auto [d1, d2] : {std::pair{1, 2}, std::pair{2, 2}, std::pair{2, 1}}) {
    const auto fam = block_diag_family(d1, d2, 2, rng);
    const auto subs = invariant_subspace_search(fam);
    REQUIRE_FALSE(subs.empty());
    double scale = 0.0;
    for (const auto& p : fam.pairs) scale = std::max(scale, op_norm(p.op));
    bool found_first = false, found_second = false;
    for (const auto& s : subs) {
      CHECK(s.invariance_residual <= 1e-9 * scale);
      if (spans_first_coords(s, d1)) found_first = true;
      double mass_low = 0.0;
      for (int j = 0; j < s.basis.cols(); ++j)
        for (int i = 0; i < d1; ++i) mass_low += std::norm(s.basis(i, j));
      if (mass_low < 1e-16 && s.subspace_dim() <= d2) found_second = true;
    }
    CHECK(found_first);
    CHECK(found_second);
  }
}

TEST_CASE("phi_erg_classify") {
  CHECK(phi_erg_classify(qtest::fix_mc().family()).classification == PhiErgClass::Irreducible);

  qchan::warning_handler() = [](const std::string&) {};
  const auto shift_rep = phi_erg_classify(qtest::fix_shift(1e-3).family());
  CHECK(shift_rep.classification == PhiErgClass::PhiErg);
  REQUIRE(shift_rep.minimal_subspaces.size() == 1);
  CHECK(spans_first_coords(shift_rep.minimal_subspaces[0], 1));
  qchan::warning_handler() = nullptr;

  // Two invariant lines.
  ComplexMatrix e11(2, 2), e22(2, 2);
  e11(0, 0) = 1.0;
  e22(1, 1) = 1.0;
  const auto two_lines = phi_erg_classify(family_from_ops({e11, e22}).pairs.empty()
                                              ? family_from_ops({e11, e22})
                                              : family_from_ops({e11, e22}));
  CHECK(two_lines.classification == PhiErgClass::NotPhiErg);
  CHECK(two_lines.minimal_subspaces.size() >= 2);
}

TEST_CASE("distinct_spectrum_perturbation basics") {
  // Identity has a single repeated eigenvalue.
  const auto fam = family_from_ops({ComplexMatrix::identity(2)});
  const auto out = distinct_spectrum_perturbation(fam, 0, 0.1);
  const auto ev = dense_eigenvalues(out.pairs[0].op);
  CHECK(std::abs(ev[0] - ev[1]) > 1e-12);
  CHECK(std::abs(ev[0]) > 1e-12);
  CHECK(std::abs(ev[1]) > 1e-12);
  CHECK(hs_norm(out.pairs[0].op - fam.pairs[0].op) < 0.05);

  // Nilpotent Jordan block: both eigenvalues zero before the perturbation.
  ComplexMatrix nil(2, 2);
  nil(0, 1) = 1.0;
  const auto fam2 = family_from_ops({nil});
  const auto out2 = distinct_spectrum_perturbation(fam2, 0, 0.2);
  const auto ev2 = dense_eigenvalues(out2.pairs[0].op);
  CHECK(std::abs(ev2[0] - ev2[1]) > 1e-12);
  CHECK(std::abs(ev2[0]) > 1e-12);
  CHECK(std::abs(ev2[1]) > 1e-12);
  CHECK(hs_norm(out2.pairs[0].op - nil) < 0.1);

  // Already distinct: the contract still holds (and the operator may be
  // returned unchanged).
  ComplexMatrix d(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  const auto fam3 = family_from_ops({d});
  const auto out3 = distinct_spectrum_perturbation(fam3, 0, 0.1);
  const auto ev3 = dense_eigenvalues(out3.pairs[0].op);
  CHECK(std::abs(ev3[0] - ev3[1]) > 1e-12);
  CHECK(hs_norm(out3.pairs[0].op - d) < 0.05);
}

TEST_CASE("distinct_spectrum_perturbation on random matrices against the dense oracle") {
  RngStream rng(409);
  for (int t = 0; t < 12; ++t) {
    const int k = 2 + (t % 3);
    // Engineer repeated spectra: block scalar matrices.
    ComplexMatrix m = qtest::random_matrix(k, rng);
    if (t % 2 == 0) m = ComplexMatrix::identity(k) * Complex(0.3, 0.4);
    const auto fam = family_from_ops({m});
    const double eps = 0.05 + 0.1 * rng.uniform();
    const auto out = distinct_spectrum_perturbation(fam, 0, eps);
    const auto ev = dense_eigenvalues(out.pairs[0].op);
    for (size_t a = 0; a < ev.size(); ++a) {
      CHECK(std::abs(ev[a]) > 1e-12);
      for (size_t b = a + 1; b < ev.size(); ++b) CHECK(std::abs(ev[a] - ev[b]) > 1e-12);
    }
    CHECK(hs_norm(out.pairs[0].op - m) < 0.5 * eps);
  }
}

TEST_CASE("irreducible_perturbation on the two-line family") {
  ComplexMatrix e11(2, 2), e22(2, 2);
  e11(0, 0) = 1.0;
  e22(1, 1) = 1.0;
  const auto fam = family_from_ops({e11, e22});
  const auto res = irreducible_perturbation(fam, 0.1);
  CHECK(res.certified);
  CHECK(res.distance < 0.1);
  CHECK(phi_erg_classify(res.family).classification == PhiErgClass::Irreducible);
}

TEST_CASE("irreducible_perturbation leaves irreducible input unchanged") {
  const auto fam = qtest::fix_mc().family();
  const auto res = irreducible_perturbation(fam, 0.1);
  CHECK(res.certified);
  CHECK(res.distance == 0.0);
  for (size_t i = 0; i < fam.size(); ++i)
    CHECK(dist(res.family.pairs[i].op, fam.pairs[i].op) == 0.0);
}

TEST_CASE("irreducible_perturbation on the shift fixture") {
  qchan::warning_handler() = [](const std::string&) {};
  const auto fam = qtest::fix_shift(2e-2).family();
  const auto res = irreducible_perturbation(fam, 0.05);
  CHECK(res.certified);
  CHECK(res.distance < 0.05);
  qchan::warning_handler() = nullptr;
}

TEST_CASE("irreducible_perturbation property on random block-diagonal families") {
  RngStream rng(419);
  const std::pair<int, int> splits[] = {{1, 1}, {1, 2}, {2, 2}};
  for (const auto& [d1, d2] : splits) {
    for (int t = 0; t < 4; ++t) {
      const auto fam = block_diag_family(d1, d2, 2, rng);
      REQUIRE(phi_erg_classify(fam).classification != PhiErgClass::Irreducible);
      const double eps = 0.02 + 0.1 * rng.uniform();
      const auto res = irreducible_perturbation(fam, eps);
      CHECK(res.certified);
      CHECK(res.distance <= eps);
    }
  }
}

TEST_CASE("irreducible_perturbation rejects single-atom families") {
  const auto fam = family_from_ops({ComplexMatrix::identity(2)});
  CHECK_THROWS_AS(irreducible_perturbation(fam, 0.1), std::invalid_argument);
}

TEST_CASE("openness smoke test: small perturbations keep irreducibility") {
  RngStream rng(421);
  const Channel certified[] = {qtest::random_irreducible_stochastic(2, 3, rng),
                               qtest::random_irreducible_raw(3, 3, rng)};
  for (const auto& ch : certified) {
    const int k = ch.dim();
    for (int t = 0; t < 20; ++t) {
      KrausFamily fam = ch.family();
      for (auto& p : fam.pairs)
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j)
            p.op(i, j) += Complex(rng.normal(), rng.normal()) * 1e-8;
      CHECK(irreducibility_report(Channel(fam)).verdict == Verdict::Irreducible);
    }
  }
}
