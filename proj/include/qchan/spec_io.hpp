#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qchan/measure.hpp"

namespace qchan {

using Json = nlohmann::json;

// --- Matrices ---------------------------------------------------------------

/// Matrices travel as separate real/imaginary row-major arrays; values are
/// emitted with full round-trip precision.
inline Json matrix_to_json(const ComplexMatrix& m) {
  Json re = Json::array(), im = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json rrow = Json::array(), irow = Json::array();
    for (int j = 0; j < m.cols(); ++j) {
      rrow.push_back(m(i, j).real());
      irow.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rrow));
    im.push_back(std::move(irow));
  }
  return Json{{"re", std::move(re)}, {"im", std::move(im)}};
}

inline ComplexMatrix matrix_from_json(const Json& j, int expected_dim = -1) {
  if (!j.is_object() || !j.contains("re"))
    throw std::invalid_argument("matrix: expected an object with re/im arrays");
  const auto& re = j.at("re");
  const int rows = static_cast<int>(re.size());
  if (rows == 0) throw std::invalid_argument("matrix: empty");
  const int cols = static_cast<int>(re.at(0).size());
  if (expected_dim > 0 && (rows != expected_dim || cols != expected_dim))
    throw std::invalid_argument("matrix: expected dim " + std::to_string(expected_dim));
  const bool has_im = j.contains("im");
  ComplexMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(re.at(i).size()) != cols)
      throw std::invalid_argument("matrix: ragged re rows");
    for (int c = 0; c < cols; ++c) {
      const double real = re.at(i).at(c).get<double>();
      const double imag = has_im ? j.at("im").at(i).at(c).get<double>() : 0.0;
      m(i, c) = Complex(real, imag);
    }
  }
  return m;
}

// --- Channel specs ------------------------------------------------------------

struct MarkovGeneratorSpec {
  std::vector<std::vector<double>> p;
};

struct GaussianGeneratorSpec {
  int n_r = 40;
  int n_theta = 32;
};

struct Example1GeneratorSpec {
  double mass_tol = 1e-8;
};

/// Either explicit atoms or one of the named generators.
struct MeasureSpec {
  std::vector<MatrixAtom> atoms;
  std::optional<MarkovGeneratorSpec> markov_chain;
  std::optional<GaussianGeneratorSpec> gaussian_rotation;
  std::optional<Example1GeneratorSpec> example1_truncated;

  bool is_generator() const {
    return markov_chain.has_value() || gaussian_rotation.has_value() ||
           example1_truncated.has_value();
  }
};

struct ChannelBlock {
  MeasureSpec measure;
  LMapSpec lmap = IdentityMap{};
};

struct ChannelSpec {
  int dim = 0;
  ChannelBlock channel;
  std::optional<ChannelBlock> hamiltonian;
};

inline Json measure_to_json(const MeasureSpec& ms) {
  Json j;
  if (ms.markov_chain) {
    j["generator"] = Json{{"markov_chain", Json{{"p", ms.markov_chain->p}}}};
  } else if (ms.gaussian_rotation) {
    j["generator"] = Json{{"gaussian_rotation", Json{{"n_r", ms.gaussian_rotation->n_r},
                                                     {"n_theta", ms.gaussian_rotation->n_theta}}}};
  } else if (ms.example1_truncated) {
    j["generator"] =
        Json{{"example1_truncated", Json{{"mass_tol", ms.example1_truncated->mass_tol}}}};
  } else {
    Json atoms = Json::array();
    for (const auto& a : ms.atoms)
      atoms.push_back(Json{{"weight", a.weight}, {"matrix", matrix_to_json(a.point)}});
    j["atoms"] = std::move(atoms);
  }
  return j;
}

inline MeasureSpec measure_from_json(const Json& j, int dim) {
  MeasureSpec ms;
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    if (g.contains("markov_chain")) {
      MarkovGeneratorSpec mg;
      mg.p = g.at("markov_chain").at("p").get<std::vector<std::vector<double>>>();
      ms.markov_chain = std::move(mg);
    } else if (g.contains("gaussian_rotation")) {
      GaussianGeneratorSpec gg;
      gg.n_r = g.at("gaussian_rotation").at("n_r").get<int>();
      gg.n_theta = g.at("gaussian_rotation").at("n_theta").get<int>();
      ms.gaussian_rotation = gg;
    } else if (g.contains("example1_truncated")) {
      Example1GeneratorSpec eg;
      eg.mass_tol = g.at("example1_truncated").at("mass_tol").get<double>();
      ms.example1_truncated = eg;
    } else {
      throw std::invalid_argument("measure: unknown generator");
    }
    return ms;
  }
  if (!j.contains("atoms")) throw std::invalid_argument("measure: need atoms or generator");
  for (const auto& a : j.at("atoms"))
    ms.atoms.push_back({a.at("weight").get<double>(), matrix_from_json(a.at("matrix"), dim)});
  if (ms.atoms.empty()) throw std::invalid_argument("measure: empty atom list");
  return ms;
}

inline Json lmap_to_json(const LMapSpec& l) {
  if (std::holds_alternative<IdentityMap>(l)) return Json{{"identity", Json::object()}};
  if (const auto* c = std::get_if<ConjugationByUnitary>(&l))
    return Json{{"conjugation", matrix_to_json(c->u)}};
  if (const auto* t = std::get_if<TableMap>(&l)) {
    Json ops = Json::array();
    for (const auto& op : t->ops) ops.push_back(matrix_to_json(op));
    return Json{{"table", std::move(ops)}};
  }
  const auto& ss = std::get<ScaledShiftMap>(l);
  return Json{{"scaled_shift", Json{{"phi", ss.phi}, {"special_atom", ss.special_atom}}}};
}

inline LMapSpec lmap_from_json(const Json& j, int dim) {
  if (j.contains("identity")) return IdentityMap{};
  if (j.contains("conjugation")) return ConjugationByUnitary{matrix_from_json(j.at("conjugation"), dim)};
  if (j.contains("table")) {
    TableMap t;
    for (const auto& op : j.at("table")) t.ops.push_back(matrix_from_json(op, dim));
    return t;
  }
  if (j.contains("scaled_shift")) {
    ScaledShiftMap ss;
    ss.phi = j.at("scaled_shift").at("phi").get<std::vector<double>>();
    ss.special_atom = j.at("scaled_shift").at("special_atom").get<int>();
    return ss;
  }
  throw std::invalid_argument("lmap: expected identity | conjugation | table | scaled_shift");
}

inline Json channel_spec_to_json(const ChannelSpec& spec) {
  Json j;
  j["dim"] = spec.dim;
  j["measure"] = measure_to_json(spec.channel.measure);
  j["lmap"] = lmap_to_json(spec.channel.lmap);
  if (spec.hamiltonian) {
    j["hamiltonian"] = Json{{"measure", measure_to_json(spec.hamiltonian->measure)},
                            {"lmap", lmap_to_json(spec.hamiltonian->lmap)}};
  }
  return j;
}

inline ChannelSpec channel_spec_from_json(const Json& j) {
  ChannelSpec spec;
  spec.dim = j.at("dim").get<int>();
  if (spec.dim < 1) throw std::invalid_argument("spec: dim must be positive");
  spec.channel.measure = measure_from_json(j.at("measure"), spec.dim);
  spec.channel.lmap = j.contains("lmap") ? lmap_from_json(j.at("lmap"), spec.dim) : IdentityMap{};
  if (j.contains("hamiltonian")) {
    ChannelBlock h;
    h.measure = measure_from_json(j.at("hamiltonian").at("measure"), spec.dim);
    h.lmap = j.at("hamiltonian").contains("lmap")
                 ? lmap_from_json(j.at("hamiltonian").at("lmap"), spec.dim)
                 : IdentityMap{};
    spec.hamiltonian = std::move(h);
  }
  return spec;
}

// --- Realization ------------------------------------------------------------

struct BuiltChannel {
  PriorMeasure measure;
  KrausFamily family;
};

/// Realizes a measure/lmap block as a concrete Kraus family. Generator-based
/// measures are materialized first; the lmap then acts on their atoms.
inline BuiltChannel build_block(int dim, const ChannelBlock& block) {
  PriorMeasure mu;
  if (block.measure.markov_chain) {
    const auto& p = block.measure.markov_chain->p;
    if (static_cast<int>(p.size()) != dim)
      throw std::invalid_argument("markov_chain generator: matrix size must match dim");
    mu = from_markov_chain(p).first;
  } else if (block.measure.gaussian_rotation) {
    if (dim != 2)
      throw std::invalid_argument("gaussian_rotation generator: dim must be 2");
    mu = from_gaussian_rotation(block.measure.gaussian_rotation->n_r,
                                block.measure.gaussian_rotation->n_theta)
             .first;
  } else if (block.measure.example1_truncated) {
    if (dim != 2) throw std::invalid_argument("example1_truncated generator: dim must be 2");
    TruncationOptions opts;
    opts.throw_on_cap = false;  // capped truncations stay exactly stochastic
    TruncationReport rep;
    mu = truncate_infinite_family(example1_generator(),
                                  block.measure.example1_truncated->mass_tol, opts, &rep);
    if (!rep.tolerance_met)
      warn("example1_truncated: requested mass_tol unreachable within the atom cap; achieved " +
           std::to_string(rep.tail_bound));
  } else {
    mu.dim = dim;
    mu.atoms = block.measure.atoms;
  }
  KrausFamily fam = build_family(mu, block.lmap);
  return {std::move(mu), std::move(fam)};
}

inline ChannelSpec load_channel_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file: " + path);
  Json j;
  in >> j;
  return channel_spec_from_json(j);
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

/// Spec for a bare family (explicit atoms + table operators); used when
/// emitting derived families such as maximizers or perturbations.
inline ChannelSpec spec_from_family(const KrausFamily& fam) {
  ChannelSpec spec;
  spec.dim = fam.dim;
  for (const auto& p : fam.pairs) spec.channel.measure.atoms.push_back({p.weight, p.point});
  TableMap t;
  for (const auto& p : fam.pairs) t.ops.push_back(p.op);
  spec.channel.lmap = std::move(t);
  return spec;
}

}  // namespace qchan
