#include <doctest.h>

#include <random>

#include "oracle/enumerate.hpp"
#include "rarhsmm/model.hpp"

using namespace rarhsmm;

namespace {

ModelParams paper_shaped_model() {
  ModelParams m;
  m.K = 2;
  m.p = 2;
  m.D = 3;
  m.sample_rate = 50.0;
  m.pi = Vector(2);
  m.pi << 1.0, 0.0;
  m.A = Matrix(2, 2);
  m.A << 0.5, 0.5, 1.0, 0.0;
  Vector lam(3);
  lam << 0.2, 0.3, 0.5;
  Vector a(2);
  a << 0.4, -0.1;
  m.regimes = {{a, 1.0, 4.0, lam}, {a, 0.5, 9.0, lam}};
  return m;
}

bool mentions(const ValidationResult& r, const std::string& text) {
  for (const auto& v : r.violations)
    if (v.message.find(text) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("validate_model accepts the two-regime spindle initialization") {
  CHECK(validate_model(paper_shaped_model()).ok());
}

TEST_CASE("validate_model reports simplex and scale violations as data") {
  ModelParams m = paper_shaped_model();
  m.pi << 0.5, 0.6;
  auto r = validate_model(m);
  REQUIRE_FALSE(r.ok());
  CHECK(mentions(r, "pi sums to 1.1"));

  m = paper_shaped_model();
  m.regimes[1].sigma = 0.0;
  r = validate_model(m);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].field == "regimes[1].sigma");
  CHECK(r.violations[0].message == "sigma must be > 0");
  CHECK(r.violations[0].observed == 0.0);
}

TEST_CASE("every single-field perturbation is rejected") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams base = oracle::random_model(rng, 3, 2, 4);
    REQUIRE(validate_model(base).ok());

    std::vector<std::function<void(ModelParams&)>> perturbations = {
        [](ModelParams& m) { m.K = 0; },
        [](ModelParams& m) { m.p = -1; },
        [](ModelParams& m) { m.D = 0; },
        [](ModelParams& m) { m.sample_rate = 0.0; },
        [](ModelParams& m) { m.pi[0] += 1e-9; },
        [](ModelParams& m) { m.pi[1] = -m.pi[1]; },
        [](ModelParams& m) { m.pi.conservativeResize(2); },
        [](ModelParams& m) { m.A(1, 2) += 1e-6; },
        [](ModelParams& m) { m.A(2, 0) = std::nan(""); },
        [](ModelParams& m) { m.A.conservativeResize(3, 2); },
        [](ModelParams& m) { m.regimes.pop_back(); },
        [](ModelParams& m) { m.regimes[0].a.conservativeResize(1); },
        [](ModelParams& m) { m.regimes[1].a[0] = INFINITY; },
        [](ModelParams& m) { m.regimes[2].sigma = -1.0; },
        [](ModelParams& m) { m.regimes[0].nu = 0.0; },
        [](ModelParams& m) { m.regimes[1].lambda[3] += 0.01; },
        [](ModelParams& m) { m.regimes[2].lambda.conservativeResize(3); },
    };
    for (std::size_t i = 0; i < perturbations.size(); ++i) {
      ModelParams m = base;
      perturbations[i](m);
      CHECK_MESSAGE(!validate_model(m).ok(), "perturbation " << i << " accepted");
    }
  }
}

TEST_CASE("simplex tolerance is 1e-12") {
  ModelParams m = paper_shaped_model();
  m.regimes[0].lambda[0] += 5e-13;
  CHECK(validate_model(m).ok());
  m.regimes[0].lambda[0] += 1e-12;
  CHECK_FALSE(validate_model(m).ok());
}

TEST_CASE("serialization round-trips bit-exactly") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 1 + trial % 3;
    const ModelParams m = oracle::random_model(rng, K, trial % 4, 1 + trial % 6);
    const ModelParams back = deserialize_model(serialize_model(m));
    CHECK(back == m);
  }

  ModelParams minimal;
  minimal.K = 1;
  minimal.p = 0;
  minimal.D = 1;
  minimal.sample_rate = 1.0;
  minimal.pi = Vector::Ones(1);
  minimal.A = Matrix::Ones(1, 1);
  minimal.regimes = {{Vector(0), 0.1 + 0.2, 1.0 / 3.0, Vector::Ones(1)}};
  CHECK(deserialize_model(serialize_model(minimal)) == minimal);
}

TEST_CASE("deserialization names the offending field") {
  std::string doc = serialize_model(paper_shaped_model());
  const auto at = doc.find("\"nu\"");
  REQUIRE(at != std::string::npos);
  doc.replace(at, 4, "\"xx\"");
  try {
    deserialize_model(doc);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("\"nu\"") != std::string::npos);
  }
  CHECK_THROWS_AS(deserialize_model("{not json"), ParseError);
  CHECK_THROWS_AS(deserialize_model(R"({"K": 1.5})"), ParseError);
}

TEST_CASE("validate_path enforces counter dynamics") {
  HiddenPath ok{{0, 0, 1, 1, 1}, {2, 1, 3, 2, 1}, std::nullopt};
  CHECK(validate_path(ok, 2, 3).ok());

  HiddenPath switched{{0, 1, 1}, {2, 1, 1}, std::nullopt};
  CHECK_FALSE(validate_path(switched, 2, 3).ok());

  HiddenPath skipped{{0, 0}, {3, 1}, std::nullopt};
  CHECK_FALSE(validate_path(skipped, 2, 3).ok());

  HiddenPath too_long{{0, 0, 0, 0}, {4, 3, 2, 1}, std::nullopt};
  CHECK_FALSE(validate_path(too_long, 2, 3).ok());
  CHECK(validate_path(too_long, 2, 3, 1).ok());  // first sample is context
}

TEST_CASE("validate_sequence rejects short or non-finite data") {
  CHECK_THROWS_AS(validate_sequence({{1.0, 2.0}, 50.0}, 2), DataError);
  CHECK_THROWS_AS(validate_sequence({{1.0, NAN, 2.0}, 50.0}, 0), DataError);
  CHECK_NOTHROW(validate_sequence({{1.0, 2.0, 3.0}, 50.0}, 2));
}
