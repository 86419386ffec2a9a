#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mpsenc/targets.hpp"
#include "test_util.hpp"

using namespace mpsenc;
using namespace mpsenc::targets;

namespace {

TargetSpec fn(Family f, std::size_t n) {
  TargetSpec s;
  s.function.family = f;
  s.n_qubits = n;
  return s;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mpsenc_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("grid includes both endpoints at every resolution") {
  for (std::size_t n : {2, 3, 8, 16, 32}) {
    const std::uint64_t last = (std::uint64_t{1} << n) - 1;
    CHECK(grid_point(-1.0, 1.0, n, 0) == -1.0);
    CHECK(grid_point(-1.0, 1.0, n, last) == doctest::Approx(1.0).epsilon(1e-15));
  }
  // Shared endpoints between n and n+1 give identical raw function values.
  Function f({Family::Gaussian}, -1.0, 1.0);
  CHECK(f(grid_point(-1, 1, 6, 0)) == f(grid_point(-1, 1, 7, 0)));
  CHECK(f(grid_point(-1, 1, 6, 63)) == doctest::Approx(f(grid_point(-1, 1, 7, 127))).epsilon(1e-15));
}

TEST_CASE("Heaviside on n=4 is zero then 1/sqrt(8)") {
  auto v = discretise(fn(Family::Heaviside, 4));
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(v[i]) == 0.0);
  for (std::size_t i = 8; i < 16; ++i) CHECK(v[i].real() == doctest::Approx(1.0 / std::sqrt(8.0)));
}

TEST_CASE("Heaviside on n=16 has an exact chi=1 representation") {
  auto m = target_mps(fn(Family::Heaviside, 16), 0);
  CHECK(m.max_bond() == 1);
}

TEST_CASE("Linear on n=3 is proportional to the grid") {
  auto v = discretise(fn(Family::Linear, 3));
  double nrm = 0.0;
  for (int j = 0; j < 8; ++j) nrm += std::pow(-1.0 + 2.0 * j / 7.0, 2);
  nrm = std::sqrt(nrm);
  for (int j = 0; j < 8; ++j) {
    CHECK(v[static_cast<std::size_t>(j)].real() == doctest::Approx((-1.0 + 2.0 * j / 7.0) / nrm));
    CHECK(v[static_cast<std::size_t>(j)].imag() == 0.0);
  }
  CHECK(v[1].real() / v[0].real() == doctest::Approx(5.0 / 7.0));
}

TEST_CASE("zero-norm and non-finite targets are rejected") {
  TargetSpec s = fn(Family::Polynomial, 5);
  s.function.coeffs = {0.0, 0.0};
  CHECK_THROWS_AS(discretise(s), InvalidTarget);
  TargetSpec big = fn(Family::Linear, 25);
  CHECK_THROWS_AS(discretise(big), CapacityError);
  TargetSpec dom = fn(Family::Linear, 4);
  dom.domain_min = 1.0;
  dom.domain_max = 0.0;
  CHECK_THROWS_AS(discretise(dom), InvalidParameter);
  TargetSpec lg = fn(Family::LogShifted, 4);
  lg.function.epsilon = -1.0;  // log of a negative number at x = -1
  CHECK_THROWS_AS(discretise(lg), InvalidTarget);
}

TEST_CASE("sine and linear targets are exactly chi=2") {
  for (std::size_t n : {4, 8, 12, 16, 20}) {
    auto m = target_mps(fn(Family::Sine, n), 0);
    CHECK(m.max_bond() == 2);
    auto t = tn::truncate(m, 2);
    CHECK(t.truncation_error < 1e-9);
  }
  CHECK(target_mps(fn(Family::Linear, 12), 0).max_bond() == 2);
  CHECK(target_mps(fn(Family::HockeyStick, 12), 0).max_bond() == 2);
}

TEST_CASE("root function chi=2 fidelity") {
  auto m = target_mps(fn(Family::Root, 16), 0);
  const double f = tn::fidelity(m, tn::truncate(m, 2).mps);
  CHECK(f == doctest::Approx(0.99998).epsilon(2e-4));
}

TEST_CASE("Gaussian truncation curve is monotone and matches the dense oracle") {
  TargetSpec s = fn(Family::Gaussian, 8);
  s.function.sigma = 0.3;
  auto v = discretise(s);
  auto m = target_mps(s, 0);
  double prev = 1.0;
  for (std::size_t chi = 1; chi <= 8; ++chi) {
    const double eps = 1.0 - tn::fidelity(m, tn::truncate(m, chi, 0.0).mps);
    const double oracle = 1.0 - testutil::overlap_sq(v, testutil::dense_tt_truncation(v, 8, chi));
    CHECK(std::abs(eps - oracle) < 1e-9);
    CHECK(eps <= prev + 1e-12);
    prev = eps;
  }
  // A sharply peaked Gaussian needs more bond dimension than a broad one.
  s.n_qubits = 12;
  auto eps2 = [&](double sigma) {
    s.function.sigma = sigma;
    auto g = target_mps(s, 0);
    return 1.0 - tn::fidelity(g, tn::truncate(g, 2).mps);
  };
  CHECK(eps2(0.02) > eps2(0.3));
}

TEST_CASE("every family evaluates to finite values on its grid") {
  for (int i = 0; i <= static_cast<int>(Family::HockeyStick); ++i) {
    TargetSpec s = fn(static_cast<Family>(i), 10);
    s.function.coeffs = {0.5, -1.0, 2.0};
    s.function.seed = 3;
    CAPTURE(family_name(s.function.family));
    auto v = discretise(s);
    double nrm = 0.0;
    for (auto z : v) {
      CHECK(std::isfinite(z.real()));
      nrm += std::norm(z);
    }
    CHECK(nrm == doctest::Approx(1.0));
    CHECK(parse_family(family_name(s.function.family)) == s.function.family);
  }
  CHECK_THROWS_AS(parse_family("nope"), InvalidParameter);
}

TEST_CASE("seeded families are reproducible and seed-sensitive") {
  for (Family f : {Family::UniformRootsPoly, Family::CubicSpline, Family::PiecewisePoly,
                   Family::PiecewiseChebyshev}) {
    TargetSpec s = fn(f, 10);
    s.function.seed = 11;
    auto a = discretise(s), b = discretise(s);
    CHECK(a == b);
    s.function.seed = 12;
    auto c = discretise(s);
    CHECK(a != c);
  }
}

TEST_CASE("continuous piecewise polynomials join at interval boundaries") {
  FunctionFamily fam;
  fam.family = Family::PiecewisePoly;
  fam.intervals = 5;
  fam.degree = 3;
  fam.seed = 4;
  fam.discontinuous = false;
  Function f(fam, -1.0, 1.0);
  for (int i = 1; i < 5; ++i) {
    const double x = -1.0 + 0.4 * i;
    CHECK(f(x - 1e-9) == doctest::Approx(f(x + 1e-9)).epsilon(1e-6));
  }
  fam.discontinuous = true;
  Function g(fam, -1.0, 1.0);
  int jumps = 0;
  for (int i = 1; i < 5; ++i) {
    const double x = -1.0 + 0.4 * i;
    if (std::abs(g(x - 1e-9) - g(x + 1e-9)) > 1e-3) ++jumps;
  }
  CHECK(jumps > 0);
}

TEST_CASE("random MPS") {
  auto a = random_mps(8, 4, 9), b = random_mps(8, 4, 9);
  for (std::size_t k = 0; k < 8; ++k) CHECK(a.core(k).data == b.core(k).data);
  CHECK(a.max_bond() == 4);
  CHECK(tn::isometry_residual(a, tn::Canonical::left()) < 1e-12);
  CHECK(a.norm() == doctest::Approx(1.0));
  auto p = random_mps(6, 1, 2);
  for (std::size_t bnd = 1; bnd < 6; ++bnd) CHECK(tn::schmidt_spectrum(p, bnd).entropy == doctest::Approx(0.0));
  auto c = random_mps(8, 4, 9, true);
  bool has_imag = false;
  for (const auto& core : c.cores())
    for (auto z : core.data) has_imag = has_imag || std::abs(z.imag()) > 1e-12;
  CHECK(has_imag);
}

TEST_CASE("image ingestion") {
  SUBCASE("2x2 PGM") {
    auto path = temp_file("toy.pgm");
    {
      std::ofstream f(path, std::ios::binary);
      f << "P5\n# comment\n2 2\n255\n";
      const unsigned char px[4] = {0, 255, 255, 0};
      f.write(reinterpret_cast<const char*>(px), 4);
    }
    auto spec = ingest_image(path.string(), ImageFormat::Pgm);
    CHECK(spec.n_qubits == 2);
    auto v = image_vector(spec.image);
    CHECK(std::abs(v[0]) == 0.0);
    CHECK(v[1].real() == doctest::Approx(M_SQRT1_2));
    CHECK(v[2].real() == doctest::Approx(M_SQRT1_2));
    CHECK(std::abs(v[3]) == 0.0);
  }
  SUBCASE("CSV basis image is a product state") {
    auto path = temp_file("basis.csv");
    {
      std::ofstream f(path);
      for (int r = 0; r < 128; ++r) {
        for (int c = 0; c < 128; ++c) f << (c ? "," : "") << ((r == 37 && c == 90) ? 1 : 0);
        f << "\n";
      }
    }
    auto spec = ingest_image(path.string(), ImageFormat::Csv);
    CHECK(spec.n_qubits == 14);
    auto m = target_mps(spec, 0);
    CHECK(m.max_bond() == 1);
    CHECK(std::abs(m.amplitude(37 * 128 + 90)) == doctest::Approx(1.0));
  }
  SUBCASE("CSV in 0..255 is rescaled") {
    auto path = temp_file("scaled.csv");
    {
      std::ofstream f(path);
      f << "0,255\n51,102\n";
    }
    auto img = read_image(path.string(), ImageFormat::Csv);
    CHECK(img.pixels[1] == doctest::Approx(1.0));
    CHECK(img.pixels[2] == doctest::Approx(0.2));
  }
  SUBCASE("raw bytes") {
    auto path = temp_file("img.raw");
    {
      std::ofstream f(path, std::ios::binary);
      for (int i = 0; i < 16; ++i) f.put(static_cast<char>(i * 10));
    }
    auto img = read_image(path.string(), ImageFormat::RawU8);
    CHECK(img.width == 4);
    CHECK(img.pixels[15] == doctest::Approx(150.0 / 255.0));
  }
  SUBCASE("errors") {
    auto bad = temp_file("bad.pgm");
    {
      std::ofstream f(bad, std::ios::binary);
      f << "P2\n2 2\n255\n0 0 0 0\n";
    }
    CHECK_THROWS_AS(read_image(bad.string(), ImageFormat::Pgm), FormatError);
    auto odd = temp_file("odd.pgm");
    {
      std::ofstream f(odd, std::ios::binary);
      f << "P5\n3 3\n255\n";
      for (int i = 0; i < 9; ++i) f.put('a');
    }
    CHECK_THROWS_AS(read_image(odd.string(), ImageFormat::Pgm), ShapeError);
    auto ragged = temp_file("ragged.csv");
    {
      std::ofstream f(ragged);
      f << "0,1\n1\n";
    }
    CHECK_THROWS_AS(read_image(ragged.string(), ImageFormat::Csv), FormatError);
    CHECK_THROWS_AS(read_image("/nonexistent/x.pgm", ImageFormat::Pgm), FormatError);
  }
  SUBCASE("exact image MPS reproduces the normalised pixels") {
    auto img = synthetic_chest_image(32);
    auto path = temp_file("synth.pgm");
    write_pgm(path.string(), img);
    auto spec = ingest_image(path.string(), ImageFormat::Pgm);
    auto v = image_vector(spec.image);
    auto m = target_mps(spec, 0, 0.0);
    auto d = m.to_dense();
    const Complex ph = std::conj(d[0]) / std::abs(d[0]);
    double err = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) err = std::max(err, std::abs(d[i] * ph - v[i]));
    CHECK(err < 1e-9);
  }
}

TEST_CASE("synthetic image is deterministic and compressible") {
  auto a = synthetic_chest_image(128), b = synthetic_chest_image(128);
  CHECK(a.pixels == b.pixels);
  for (double p : a.pixels) CHECK((p >= 0.0 && p <= 1.0));
  auto m = tn::mps_from_statevector(image_vector(a));
  CHECK(tn::fidelity(m, tn::truncate(m, 32).mps) >= 0.999);
}

TEST_CASE("tensor cross interpolation") {
  SUBCASE("rank-one exponential") {
    auto r = tci_build([](double x) { return std::exp(x); }, -1, 1, 32, 1, 1e-12, 1);
    CHECK(r.mps.max_bond() == 1);
    CHECK(r.est_error < 1e-12);
    CHECK(r.samples_used < 1000);
    CHECK(r.samples_used <= r.total_evaluations);
  }
  SUBCASE("cosine at chi=2") {
    auto r = tci_build([](double x) { return std::cos(M_PI * x); }, -1, 1, 32, 2, 1e-12, 2);
    CHECK(r.est_error < 1e-10);
    CHECK(r.mps.max_bond() <= 2);
  }
  SUBCASE("constant function") {
    auto r = tci_build([](double) { return 0.7; }, -1, 1, 20, 4, 1e-12, 3);
    CHECK(r.mps.max_bond() == 1);
    CHECK(r.est_error <= 1e-14);
  }
  SUBCASE("agrees with dense truncation within a factor of ten") {
    for (double sigma : {0.3, 0.1}) {
      for (std::size_t chi : {2, 3, 4}) {
        TargetSpec s = fn(Family::Gaussian, 12);
        s.function.sigma = sigma;
        Function f(s.function, -1, 1);
        auto r = tci_build(std::ref(f), -1, 1, 12, chi, 1e-12, 5);
        auto m = target_mps(s, 0, 0.0);
        const double dense = std::sqrt(std::max(0.0, 1.0 - tn::fidelity(m, tn::truncate(m, chi, 0.0).mps)));
        CAPTURE(sigma);
        CAPTURE(chi);
        CHECK(r.est_error <= 10.0 * dense + 1e-13);
        // The interpolant is also close to the target as a state.
        CHECK(1.0 - tn::fidelity(m, r.mps) <= 100.0 * dense * dense + 1e-12);
      }
    }
  }
  SUBCASE("deterministic") {
    auto f = [](double x) { return std::exp(-x * x / 0.18); };
    auto a = tci_build(f, -1, 1, 24, 6, 1e-12, 7);
    auto b = tci_build(f, -1, 1, 24, 6, 1e-12, 7);
    CHECK(a.est_error == b.est_error);
    CHECK(a.samples_used == b.samples_used);
  }
  SUBCASE("parameter errors") {
    auto f = [](double x) { return x; };
    CHECK_THROWS_AS(tci_build(f, -1, 1, 1, 2, 1e-12, 0), InvalidParameter);
    CHECK_THROWS_AS(tci_build(f, -1, 1, 8, 0, 1e-12, 0), InvalidParameter);
    CHECK_THROWS_AS(tci_build(f, 1, -1, 8, 2, 1e-12, 0), InvalidParameter);
  }
}

TEST_CASE("key=value target configuration") {
  auto kv = parse_key_values(
      "# demo\nkind = function\nfamily = gaussian\nsigma = 0.1\nn_qubits = 10\n"
      "domain_min=-2\ndomain_max = 2 # trailing\n");
  auto spec = target_from_config(kv);
  CHECK(spec.function.family == Family::Gaussian);
  CHECK(spec.function.sigma == 0.1);
  CHECK(spec.n_qubits == 10);
  CHECK(spec.domain_min == -2.0);
  CHECK(spec.domain_max == 2.0);

  auto poly = target_from_config(parse_key_values("family=polynomial\ncoeffs=1, 0, -2\nn_qubits=4\n"));
  CHECK(poly.function.coeffs == std::vector<double>{1.0, 0.0, -2.0});

  CHECK_THROWS_AS(parse_key_values("novalue\n"), InvalidParameter);
  CHECK_THROWS_AS(parse_key_values("a=1\na=2\n"), InvalidParameter);
  CHECK_THROWS_AS(target_from_config(parse_key_values("family=gaussian\nsigma=abc\nn_qubits=3")),
                  InvalidParameter);
  CHECK_THROWS_AS(target_from_config(parse_key_values("family=gaussian")), InvalidParameter);
  CHECK_THROWS_AS(target_from_config(parse_key_values("kind=image")), InvalidParameter);
}
