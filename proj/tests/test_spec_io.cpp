#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "qchan/spec_io.hpp"
#include "support/fixtures.hpp"
#include "support/test_util.hpp"

using namespace qchan;

namespace {

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool matrices_bit_equal(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (size_t i = 0; i < a.data().size(); ++i) {
    if (!bit_equal(a.data()[i].real(), b.data()[i].real())) return false;
    if (!bit_equal(a.data()[i].imag(), b.data()[i].imag())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("matrix json round trip is bit exact") {
  RngStream rng(501);
  for (int t = 0; t < 20; ++t) {
    const int k = 1 + (t % 4);
    ComplexMatrix m(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        m(i, j) = Complex(rng.normal() / 3.0, rng.normal() * 1e-7);
    m(0, 0) = Complex(0.1, 1.0 / 3.0);  // classic awkward decimals

    const Json j = matrix_to_json(m);
    const std::string dumped = j.dump();
    const Json parsed = Json::parse(dumped);
    const ComplexMatrix back = matrix_from_json(parsed, k);
    CHECK(matrices_bit_equal(m, back));
  }
}

TEST_CASE("channel spec round trip with explicit atoms") {
  RngStream rng(503);
  ChannelSpec spec;
  spec.dim = 3;
  for (int i = 0; i < 4; ++i)
    spec.channel.measure.atoms.push_back({0.25 + rng.uniform(), qtest::random_matrix(3, rng)});
  spec.channel.lmap = ConjugationByUnitary{qtest::random_unitary(3, rng)};

  const std::string once = channel_spec_to_json(spec).dump(2);
  const ChannelSpec reparsed = channel_spec_from_json(Json::parse(once));
  const std::string twice = channel_spec_to_json(reparsed).dump(2);
  CHECK(once == twice);

  REQUIRE(reparsed.channel.measure.atoms.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(bit_equal(reparsed.channel.measure.atoms[i].weight,
                    spec.channel.measure.atoms[i].weight));
    CHECK(matrices_bit_equal(reparsed.channel.measure.atoms[i].point,
                             spec.channel.measure.atoms[i].point));
  }
}

TEST_CASE("generator specs round trip and build") {
  ChannelSpec spec;
  spec.dim = 2;
  spec.channel.measure.markov_chain = MarkovGeneratorSpec{{{0.5, 0.3}, {0.5, 0.7}}};

  const Json j = channel_spec_to_json(spec);
  const ChannelSpec back = channel_spec_from_json(j);
  REQUIRE(back.channel.measure.markov_chain.has_value());
  CHECK(back.channel.measure.markov_chain->p == spec.channel.measure.markov_chain->p);

  const auto built = build_block(back.dim, back.channel);
  const auto direct = from_markov_chain({{0.5, 0.3}, {0.5, 0.7}});
  REQUIRE(built.family.size() == direct.second.size());
  for (size_t i = 0; i < built.family.size(); ++i)
    CHECK(matrices_bit_equal(built.family.pairs[i].op, direct.second.pairs[i].op));

  ChannelSpec gspec;
  gspec.dim = 2;
  gspec.channel.measure.gaussian_rotation = GaussianGeneratorSpec{16, 16};
  const ChannelSpec gback = channel_spec_from_json(channel_spec_to_json(gspec));
  CHECK(gback.channel.measure.gaussian_rotation->n_r == 16);
  const auto gbuilt = build_block(gback.dim, gback.channel);
  CHECK(gbuilt.family.measure_mass == Catch::Approx(0.5).margin(1e-9));

  qchan::warning_handler() = [](const std::string&) {};
  ChannelSpec espec;
  espec.dim = 2;
  espec.channel.measure.example1_truncated = Example1GeneratorSpec{1e-3};
  const auto ebuilt = build_block(espec.dim, espec.channel);
  CHECK(ebuilt.family.size() > 100);
  qchan::warning_handler() = nullptr;
}

TEST_CASE("lmap variants round trip") {
  RngStream rng(509);
  const int k = 2;

  const LMapSpec variants[] = {
      IdentityMap{},
      ConjugationByUnitary{qtest::random_unitary(k, rng)},
      TableMap{{qtest::random_matrix(k, rng), qtest::random_matrix(k, rng)}},
      ScaledShiftMap{{0.25, 0.75}, 1},
  };
  for (const auto& l : variants) {
    const Json j = lmap_to_json(l);
    const LMapSpec back = lmap_from_json(j, k);
    CHECK(lmap_to_json(back).dump() == j.dump());
  }
}

TEST_CASE("hamiltonian block") {
  ChannelSpec spec;
  spec.dim = 2;
  spec.channel.measure.markov_chain = MarkovGeneratorSpec{{{0.5, 0.3}, {0.5, 0.7}}};
  ChannelBlock h;
  h.measure.markov_chain = MarkovGeneratorSpec{{{0.6, 0.2}, {0.4, 0.8}}};
  spec.hamiltonian = std::move(h);

  const ChannelSpec back = channel_spec_from_json(channel_spec_to_json(spec));
  REQUIRE(back.hamiltonian.has_value());
  const auto built = build_block(back.dim, *back.hamiltonian);
  CHECK(built.family.size() == 4);
}

TEST_CASE("spec validation errors") {
  CHECK_THROWS(channel_spec_from_json(Json::parse(R"({"measure": {"atoms": []}})")));
  CHECK_THROWS(channel_spec_from_json(Json::parse(R"({"dim": 2, "measure": {}})")));
  CHECK_THROWS(channel_spec_from_json(
      Json::parse(R"({"dim": 2, "measure": {"generator": {"bogus": {}}}})")));
  CHECK_THROWS(channel_spec_from_json(Json::parse(
      R"({"dim": 2, "measure": {"atoms": [{"weight": 1.0, "matrix": {"re": [[1,0],[0,1],[0,0]]}}]}})")));

  // Wrong-dim generator.
  ChannelSpec spec;
  spec.dim = 3;
  spec.channel.measure.gaussian_rotation = GaussianGeneratorSpec{16, 16};
  CHECK_THROWS_AS(build_block(spec.dim, spec.channel), std::invalid_argument);
}

TEST_CASE("spec_from_family reproduces the family") {
  RngStream rng(521);
  const auto fam = qtest::random_stochastic_family(2, 3, rng);
  const ChannelSpec spec = spec_from_family(fam);
  const auto rebuilt = build_block(spec.dim, spec.channel);
  REQUIRE(rebuilt.family.size() == fam.size());
  for (size_t i = 0; i < fam.size(); ++i) {
    CHECK(matrices_bit_equal(rebuilt.family.pairs[i].op, fam.pairs[i].op));
    CHECK(matrices_bit_equal(rebuilt.family.pairs[i].point, fam.pairs[i].point));
  }
}
