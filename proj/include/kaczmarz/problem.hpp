#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/linear_system.hpp"
#include "kaczmarz/matrix_market.hpp"
#include "kaczmarz/rng.hpp"

namespace kaczmarz {

using AnySystem = std::variant<LinearSystem<DenseMatrix>, LinearSystem<CsrMatrix>>;

// Synthetic test matrices: entries i.i.d. uniform on [t, 1]. Raising t toward
// 1 makes the rows more coherent.
struct SyntheticSpec {
  std::size_t m = 100;
  std::size_t n = 100;
  double t = 0.5;
  std::uint64_t seed = 0;
};

struct Provenance {
  enum class Kind { Synthetic, MatrixMarket };
  Kind kind = Kind::Synthetic;
  std::string path;       // MatrixMarket only
  SyntheticSpec spec;     // Synthetic only
};

// A system together with the planted solution it was built from; consistency
// b = A x_star_gen holds by construction.
struct ProblemBundle {
  AnySystem sys;
  std::vector<double> x_star_gen;
  Provenance provenance;

  std::size_t rows() const {
    return std::visit([](const auto& s) { return s.rows(); }, sys);
  }
  std::size_t cols() const {
    return std::visit([](const auto& s) { return s.cols(); }, sys);
  }
};

// Dense storage pays off for small or nearly full matrices; CSR otherwise.
inline bool prefer_dense(std::size_t cols, double density) {
  return density > 0.25 || cols <= 64;
}

inline std::vector<double> planted_solution(std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  return x;
}

// A ~ Uniform[t,1]^{m x n} filled row-major, then x* ~ N(0, I), then
// b = A x*. One seed produces one bit-identical problem on every platform.
inline ProblemBundle generate_synthetic(const SyntheticSpec& spec) {
  if (spec.m < 1 || spec.n < 1)
    throw ConfigError("synthetic problem needs m, n >= 1");
  if (spec.t < 0.0 || spec.t >= 1.0)
    throw ConfigError("synthetic t must lie in [0, 1)");
  Rng rng(spec.seed);
  DenseMatrix a(spec.m, spec.n);
  for (double& v : a.data()) v = spec.t + (1.0 - spec.t) * rng.uniform01();
  std::vector<double> x = planted_solution(spec.n, rng);
  std::vector<double> b(spec.m);
  a.matvec(x, b);
  Provenance prov;
  prov.kind = Provenance::Kind::Synthetic;
  prov.spec = spec;
  return {AnySystem(LinearSystem<DenseMatrix>(std::move(a), std::move(b))),
          std::move(x), std::move(prov)};
}

// Loads a MatrixMarket coefficient matrix and plants a consistent right-hand
// side (the experimental protocol keeps only A and sets b = A x*).
inline ProblemBundle load_matrix_market_problem(
    const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file " + path.string());
  MmDocument doc = parse_matrix_market(in);
  Rng rng(seed);
  std::vector<double> x = planted_solution(doc.cols, rng);
  Provenance prov;
  prov.kind = Provenance::Kind::MatrixMarket;
  prov.path = path.string();

  CsrMatrix csr = to_csr(doc);
  std::vector<double> b(doc.rows);
  if (prefer_dense(doc.cols, csr.density())) {
    DenseMatrix a = csr.to_dense();
    a.matvec(x, b);
    return {AnySystem(LinearSystem<DenseMatrix>(std::move(a), std::move(b))),
            std::move(x), std::move(prov)};
  }
  csr.matvec(x, b);
  return {AnySystem(LinearSystem<CsrMatrix>(std::move(csr), std::move(b))),
          std::move(x), std::move(prov)};
}

}  // namespace kaczmarz
