#include <catch2/catch_amalgamated.hpp>

#include "qchan/measure.hpp"
#include "support/test_util.hpp"

using namespace qchan;
using qtest::dist;

namespace {

/// sum_i w_i K_i^dagger K_i, the stochasticity matrix.
ComplexMatrix dual_identity(const KrausFamily& fam) {
  ComplexMatrix s(fam.dim, fam.dim);
  for (const auto& p : fam.pairs) s += (adjoint(p.op) * p.op) * p.weight;
  return s;
}

struct SilenceWarnings {
  std::function<void(const std::string&)> saved;
  SilenceWarnings() : saved(warning_handler()) {
    warning_handler() = [](const std::string&) {};
  }
  ~SilenceWarnings() { warning_handler() = saved; }
};

}  // namespace

TEST_CASE("build_family identity and mass bookkeeping") {
  PriorMeasure mu;
  mu.dim = 2;
  mu.atoms.push_back({1.0, ComplexMatrix::identity(2)});
  const auto fam = build_family(mu, IdentityMap{});
  REQUIRE(fam.size() == 1);
  CHECK(dist(fam.pairs[0].op, ComplexMatrix::identity(2)) == 0.0);
  CHECK(fam.measure_mass == 1.0);
  CHECK(fam.square_integrability() == Catch::Approx(2.0));
}

TEST_CASE("build_family conjugation by unitary") {
  RngStream rng(5);
  const auto u = qtest::random_unitary(3, rng);
  PriorMeasure mu;
  mu.dim = 3;
  for (int t = 0; t < 4; ++t) mu.atoms.push_back({0.5 + rng.uniform(), qtest::random_matrix(3, rng)});
  const auto fam = build_family(mu, ConjugationByUnitary{u});
  for (size_t i = 0; i < fam.size(); ++i)
    CHECK(dist(fam.pairs[i].op, u * mu.atoms[i].point * adjoint(u)) < 1e-13);

  // When sum w v^dagger v = Id, the conjugated family stays stochastic.
  ComplexMatrix s(3, 3);
  for (const auto& a : mu.atoms) s += (adjoint(a.point) * a.point) * a.weight;
  const auto si = hermitian_inv_sqrt(hermitize(s));
  PriorMeasure mu2;
  mu2.dim = 3;
  for (const auto& a : mu.atoms) mu2.atoms.push_back({a.weight, a.point * si});
  const auto fam2 = build_family(mu2, ConjugationByUnitary{u});
  CHECK(dist(dual_identity(fam2), ComplexMatrix::identity(3)) < 1e-10);

  const auto not_unitary = qtest::random_matrix(3, rng);
  CHECK_THROWS_AS(build_family(mu, ConjugationByUnitary{not_unitary}), std::invalid_argument);
}

TEST_CASE("from_markov_chain reproduces the 2x2 layout") {
  const std::vector<std::vector<double>> p{{0.5, 0.3}, {0.5, 0.7}};
  const auto [mu, fam] = from_markov_chain(p);
  REQUIRE(fam.size() == 4);
  CHECK(std::abs(fam.pairs[0].op(0, 0) - Complex(std::sqrt(0.5))) < 1e-15);
  CHECK(std::abs(fam.pairs[1].op(0, 1) - Complex(std::sqrt(0.3))) < 1e-15);
  CHECK(std::abs(fam.pairs[2].op(1, 0) - Complex(std::sqrt(0.5))) < 1e-15);
  CHECK(std::abs(fam.pairs[3].op(1, 1) - Complex(std::sqrt(0.7))) < 1e-15);
  CHECK(fam.measure_mass == Catch::Approx(4.0));
  CHECK(dist(dual_identity(fam), ComplexMatrix::identity(2)) < 1e-12);
}

TEST_CASE("from_markov_chain prunes zero atoms for P = Id") {
  SilenceWarnings quiet;
  const std::vector<std::vector<double>> p{{1.0, 0.0}, {0.0, 1.0}};
  const auto [mu, fam] = from_markov_chain(p);
  CHECK(fam.size() == 2);          // two zero atoms pruned
  CHECK(fam.measure_mass == 4.0);  // mass carried verbatim
}

TEST_CASE("from_markov_chain validates stochasticity") {
  CHECK_THROWS_AS(from_markov_chain({{0.5, 0.3}, {0.6, 0.7}}), std::invalid_argument);
  CHECK_THROWS_AS(from_markov_chain({{1.2, 0.3}, {-0.2, 0.7}}), std::invalid_argument);
}

TEST_CASE("from_markov_chain stochastic for random P") {
  RngStream rng(7);
  for (int d : {2, 3, 4}) {
    for (int t = 0; t < 33; ++t) {
      std::vector<std::vector<double>> p(d, std::vector<double>(d));
      for (int j = 0; j < d; ++j) {
        double col = 0.0;
        for (int i = 0; i < d; ++i) {
          p[i][j] = 0.05 + rng.uniform();
          col += p[i][j];
        }
        for (int i = 0; i < d; ++i) p[i][j] /= col;
      }
      const auto [mu, fam] = from_markov_chain(p);
      CHECK(dist(dual_identity(fam), ComplexMatrix::identity(d)) < 1e-12);
    }
  }
}

TEST_CASE("doubly stochastic circulant at d = 3") {
  const std::vector<std::vector<double>> p{{0.2, 0.5, 0.3}, {0.3, 0.2, 0.5}, {0.5, 0.3, 0.2}};
  const auto [mu, fam] = from_markov_chain(p);
  CHECK(fam.size() == 9);
  // Direct sum of K^dagger K equals the identity.
  CHECK(dist(dual_identity(fam), ComplexMatrix::identity(3)) < 1e-12);
}

TEST_CASE("gaussian rotation quadrature") {
  SilenceWarnings quiet;
  const auto [mu, fam] = from_gaussian_rotation(40, 32);

  // Total mass approximates the density's mass 1/2.
  CHECK(mu.total_mass() == Catch::Approx(0.5).margin(1e-9));

  // Stochasticity of the continuous channel carried by the quadrature.
  CHECK(dist(dual_identity(fam), ComplexMatrix::identity(2)) < 1e-6);

  // Quadrature order: doubling the grid shrinks the defect by >= 4x
  // (or both are already at the accuracy floor).
  const auto [mu2, fam2] = from_gaussian_rotation(80, 64);
  const double e1 = dist(dual_identity(fam), ComplexMatrix::identity(2));
  const double e2 = dist(dual_identity(fam2), ComplexMatrix::identity(2));
  CHECK((e2 <= e1 / 4.0 || e1 < 1e-12));

  CHECK_THROWS_AS(from_gaussian_rotation(4, 32), std::invalid_argument);
}

TEST_CASE("gaussian rotation channel action on trace-1 matrices") {
  SilenceWarnings quiet;
  const auto [mu, fam] = from_gaussian_rotation(40, 32);
  RngStream rng(17);
  for (int t = 0; t < 10; ++t) {
    ComplexMatrix rho = qtest::random_matrix(2, rng);
    rho(1, 1) = Complex(1.0, 0.0) - rho(0, 0);  // trace 1, not necessarily hermitian
    ComplexMatrix img(2, 2);
    for (const auto& p : fam.pairs) img += (p.op * rho * adjoint(p.op)) * p.weight;
    // Image is [[1/2, (b-c)/2], [(c-b)/2, 1/2]].
    const Complex b = rho(0, 1), c = rho(1, 0);
    CHECK(std::abs(img(0, 0) - Complex(0.5)) < 1e-6);
    CHECK(std::abs(img(1, 1) - Complex(0.5)) < 1e-6);
    CHECK(std::abs(img(0, 1) - 0.5 * (b - c)) < 1e-6);
    CHECK(std::abs(img(1, 0) - 0.5 * (c - b)) < 1e-6);
  }
}

TEST_CASE("truncate_infinite_family on the shift-to-e1 family") {
  SilenceWarnings quiet;
  TruncationReport rep;
  TruncationOptions opts;
  opts.throw_on_cap = false;
  const auto mu = truncate_infinite_family(example1_generator(), 1e-4, opts, &rep);
  CHECK(rep.tolerance_met);
  CHECK(rep.kept <= opts.max_atoms);

  // Renormalized truncation is exactly stochastic.
  const auto fam = build_family(mu, IdentityMap{});
  CHECK(dist(dual_identity(fam), ComplexMatrix::identity(2)) < 1e-12);

  // Image of any density is |e1><e1|.
  RngStream rng(13);
  for (int t = 0; t < 5; ++t) {
    const auto rho = qtest::random_density(2, rng);
    ComplexMatrix img(2, 2);
    for (const auto& p : fam.pairs) img += (p.op * rho * adjoint(p.op)) * p.weight;
    ComplexMatrix e11(2, 2);
    e11(0, 0) = 1.0;
    CHECK(dist(img, e11) < 1e-8);
  }
}

TEST_CASE("truncate_infinite_family single unitary atom is an identity operation") {
  AtomGenerator gen;
  gen.atom = [](size_t) { return MatrixAtom{1.0, ComplexMatrix::identity(2)}; };
  gen.tail_bound = [](size_t) { return 0.0; };
  const auto mu = truncate_infinite_family(gen, 1e-8);
  REQUIRE(mu.atoms.size() == 1);
  CHECK(dist(mu.atoms[0].point, ComplexMatrix::identity(2)) < 1e-14);
}

TEST_CASE("truncate_infinite_family kept count matches the analytic tail bound") {
  // Harmonic-squared generator: w_n |V_n|^2 = 1/n^2, tail bound 1/N.
  AtomGenerator gen;
  gen.atom = [](size_t n) {
    ComplexMatrix v(2, 2);
    v(0, 0) = 1.0 / static_cast<double>(n);
    v(1, 1) = 1.0 / static_cast<double>(n);
    return MatrixAtom{1.0, std::move(v)};  // |V_n|^2 = 2/n^2; bound shape is what matters
  };
  gen.tail_bound = [](size_t n) { return 1.0 / static_cast<double>(n); };
  TruncationReport rep;
  const double tol = 1e-3;
  (void)truncate_infinite_family(gen, tol, {}, &rep);
  CHECK(rep.kept == static_cast<size_t>(std::ceil(1.0 / tol)));
}

TEST_CASE("truncate_infinite_family cap semantics") {
  AtomGenerator gen = example1_generator();
  TruncationOptions opts;
  opts.max_atoms = 100;
  CHECK_THROWS_AS(truncate_infinite_family(gen, 1e-8, opts), std::runtime_error);

  SilenceWarnings quiet;
  opts.throw_on_cap = false;
  TruncationReport rep;
  const auto mu = truncate_infinite_family(gen, 1e-8, opts, &rep);
  CHECK_FALSE(rep.tolerance_met);
  CHECK(mu.atoms.size() == 100);
  const auto fam = build_family(mu, IdentityMap{});
  CHECK(dist(dual_identity(fam), ComplexMatrix::identity(2)) < 1e-12);  // still exact
}

TEST_CASE("build_family preserves total reported mass") {
  RngStream rng(19);
  PriorMeasure mu;
  mu.dim = 2;
  double mass = 0.0;
  for (int t = 0; t < 6; ++t) {
    const double w = 0.1 + rng.uniform();
    mass += w;
    mu.atoms.push_back({w, qtest::random_matrix(2, rng)});
  }
  const auto fam = build_family(mu, IdentityMap{});
  CHECK(fam.measure_mass == Catch::Approx(mass).epsilon(0.0).margin(0.0));
}
