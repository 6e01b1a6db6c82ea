#include <doctest.h>

#include <array>
#include <thread>

#include "bdpre/env.hpp"
#include "bdpre/error.hpp"
#include "bdpre/rng.hpp"
#include "testing.hpp"

using namespace bdpre;
using bdpre::testing::one_atom;

namespace {

EnvironmentLaw coin(double p = 0.5) {
  return EnvironmentLaw(1, {Atom{p, SiteRates(1.0, {2.0})}, Atom{1.0 - p, SiteRates(3.0, {4.0})}});
}

}  // namespace

TEST_CASE("SiteRates validates and stores the total rate") {
  const SiteRates s(4.0, {1.0, 1.0});
  CHECK(s.total_rate() == 6.0);
  CHECK(s.mu(2) == 1.0);
  CHECK_THROWS_AS(SiteRates(-1.0, {1.0}), Error);
  CHECK_THROWS_AS(SiteRates(1.0, {}), Error);
  CHECK_THROWS_AS(SiteRates(1.0, {std::nan("")}), Error);
  CHECK_THROWS_AS(SiteRates(1.0, {INFINITY}), Error);
}

TEST_CASE("EnvironmentLaw invariants") {
  CHECK_THROWS_AS(EnvironmentLaw(1, {}), Error);
  CHECK_THROWS_AS(EnvironmentLaw(2, {Atom{1.0, SiteRates(1.0, {1.0})}}), Error);
  CHECK_THROWS_AS(EnvironmentLaw(1, {Atom{0.5, SiteRates(1.0, {1.0})}}), Error);
  CHECK_THROWS_AS(EnvironmentLaw(1, {Atom{-0.5, SiteRates(1.0, {1.0})}, Atom{1.5, SiteRates(1.0, {1.0})}}), Error);
  CHECK_NOTHROW(EnvironmentLaw(1, {Atom{0.25, SiteRates(1.0, {1.0})}, Atom{0.75, SiteRates(1.0, {1.0})}}));
}

TEST_CASE("sample_site: one-atom law always returns the atom") {
  const auto law = one_atom(2.0, {1.0});
  for (std::uint64_t seed : {0ULL, 7ULL, 123456789ULL}) {
    CHECK(sample_site(law, seed, 5) == SiteRates(2.0, {1.0}));
  }
}

TEST_CASE("sample_site: two-atom frequencies within the binomial band") {
  const auto law = coin();
  int first = 0;
  for (std::int64_t i = 0; i < 10'000; ++i) first += sample_site_atom(law, 42, i) == 0 ? 1 : 0;
  const double freq = first / 10'000.0;
  CHECK(freq >= 0.47);
  CHECK(freq <= 0.53);
}

TEST_CASE("sample_site is a pure function of (law, seed, index)") {
  const auto law = coin();
  const auto& a = sample_site(law, 99, -3);
  const auto& b = sample_site(law, 99, -3);
  CHECK(a == b);
  CHECK(sample_site_atom(law, 99, -3) == sample_site_atom(law, 99, -3));
}

TEST_CASE("adjacent sites are independent") {
  const double p = 0.3;
  const auto law = coin(p);
  constexpr int n = 10'000;
  std::array<std::array<int, 2>, 2> joint{};
  for (std::int64_t i = 0; i < n; ++i) {
    ++joint[sample_site_atom(law, 2024, 2 * i)][sample_site_atom(law, 2024, 2 * i + 1)];
  }
  const std::array<double, 2> w{p, 1.0 - p};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double expected = w[a] * w[b];
      const double freq = joint[a][b] / static_cast<double>(n);
      CHECK(std::abs(freq - expected) <= bdpre::testing::binomial_band(expected, n, 4.0));
    }
  }
}

TEST_CASE("check_conditions examples") {
  SUBCASE("zero total rate violates C1") {
    const auto r = check_conditions(one_atom(0.0, {0.0}));
    CHECK_FALSE(r.c1);
    CHECK_FALSE(r.ok());
    CHECK_FALSE(r.violations.empty());
  }
  SUBCASE("positive lambda and mu^L satisfy everything") {
    const auto r = check_conditions(one_atom(4.0, {1.0, 1.0}));
    CHECK(r.c1);
    CHECK(r.c2);
    CHECK(r.c3);
    CHECK(r.violations.empty());
    CHECK_FALSE(r.notes.empty());
  }
  SUBCASE("an atom with mu^L = 0 violates C3") {
    const EnvironmentLaw law(2, {Atom{0.5, SiteRates(1.0, {1.0, 0.0})}, Atom{0.5, SiteRates(1.0, {1.0, 1.0})}});
    const auto r = check_conditions(law);
    CHECK(r.c1);
    CHECK(r.c2);
    CHECK_FALSE(r.c3);
    CHECK(r.violations.size() == 1);
  }
  SUBCASE("lambda = 0 violates C3") {
    CHECK_FALSE(check_conditions(one_atom(0.0, {1.0})).c3);
  }
  SUBCASE("zero-weight atoms are outside the support") {
    const EnvironmentLaw law(1, {Atom{0.0, SiteRates(0.0, {0.0})}, Atom{1.0, SiteRates(1.0, {1.0})}});
    CHECK(check_conditions(law).ok());
  }
}

TEST_CASE("check_conditions: ok() iff violations empty, and removing a violator never adds a violation") {
  Rng rng(0xc0ffee);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = 1 + static_cast<std::size_t>(rng() % 3);
    const std::size_t n_atoms = 2 + static_cast<std::size_t>(rng() % 3);
    std::vector<Atom> atoms;
    for (std::size_t a = 0; a < n_atoms; ++a) {
      auto rate = [&] { return rng.uniform() < 0.25 ? 0.0 : 1.0 + rng.uniform(); };
      std::vector<double> mu(L);
      for (auto& m : mu) m = rate();
      atoms.push_back(Atom{1.0 / static_cast<double>(n_atoms), SiteRates(rate(), mu)});
    }
    const EnvironmentLaw law(L, atoms);
    const auto full = check_conditions(law);
    CHECK(full.ok() == full.violations.empty());
    for (std::size_t drop = 0; drop < n_atoms; ++drop) {
      std::vector<Atom> kept;
      for (std::size_t a = 0; a < n_atoms; ++a) {
        if (a != drop) kept.push_back(Atom{1.0 / static_cast<double>(n_atoms - 1), atoms[a].rates});
      }
      const auto sub = check_conditions(EnvironmentLaw(L, kept));
      CHECK((sub.c1 || !full.c1));
      CHECK((sub.c2 || !full.c2));
      CHECK((sub.c3 || !full.c3));
    }
  }
}

TEST_CASE("window examples") {
  const auto law = one_atom(2.0, {1.0});
  auto w = window(law, 5, -5, 5);
  CHECK(w.lo() == -5);
  CHECK(w.hi() == 5);
  for (std::int64_t i = -5; i <= 5; ++i) CHECK(w.site(i) == SiteRates(2.0, {1.0}));

  const auto mixed = coin();
  auto a = window(mixed, 77, -5, 5);
  std::vector<std::size_t> before;
  for (std::int64_t i = -5; i <= 5; ++i) before.push_back(a.atom_at(i));
  a.extend(-100, 5);
  CHECK(a.lo() == -100);
  for (std::int64_t i = -5; i <= 5; ++i) CHECK(a.atom_at(i) == before[static_cast<std::size_t>(i + 5)]);

  auto b = window(mixed, 77, 0, 300);
  for (std::int64_t i = -100; i <= 300; ++i) CHECK(a.atom_at(i) == b.atom_at(i));
  for (std::int64_t i = -100; i <= 300; ++i) CHECK(a.atom_at(i) == sample_site_atom(mixed, 77, i));
}

TEST_CASE("window growth limits") {
  const auto law = coin();
  CHECK_THROWS_AS(window(law, 1, 3, 2), Error);
  try {
    auto w = window(law, 1, 0, 0);
    w.site(kMaxSiteIndex + 1);
    FAIL("expected WindowOverflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowOverflow);
  }
  EnvironmentWindow capped(law, 1, 0, 0, 1000);
  CHECK_NOTHROW(capped.site(-1000));
  try {
    capped.site(-1001);
    FAIL("expected WindowOverflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowOverflow);
  }
}

TEST_CASE("concurrent growth realizes the same values as sequential growth") {
  const auto law = coin(0.4);
  EnvironmentWindow shared(law, 11, 0, 0);
  std::vector<std::size_t> left(5000);
  std::vector<std::size_t> right(5000);
  {
    std::jthread t1([&] {
      for (std::int64_t i = 0; i < 5000; ++i) left[static_cast<std::size_t>(i)] = shared.atom_at(-i);
    });
    std::jthread t2([&] {
      for (std::int64_t i = 0; i < 5000; ++i) right[static_cast<std::size_t>(i)] = shared.atom_at(i);
    });
  }
  for (std::int64_t i = 0; i < 5000; ++i) {
    CHECK(left[static_cast<std::size_t>(i)] == sample_site_atom(law, 11, -i));
    CHECK(right[static_cast<std::size_t>(i)] == sample_site_atom(law, 11, i));
  }
}

TEST_CASE("law JSON parsing") {
  const auto j = nlohmann::json::parse(R"({"L": 2, "atoms": [
      {"weight": 0.5, "lambda": 4, "mu": [1, 1]},
      {"weight": 0.5000000001, "lambda": 6, "mu": [1, 2]}]})");
  const auto law = law_from_json(j);
  CHECK(law.jump_bound() == 2);
  CHECK(law.atoms().size() == 2);
  CHECK(law.rates(1) == SiteRates(6.0, {1.0, 2.0}));
  CHECK(law_from_json(to_json(law)).atoms().size() == 2);

  auto expect_config_error = [](const char* text) {
    try {
      law_from_json(nlohmann::json::parse(text));
      FAIL("expected ConfigError for " << text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
    }
  };
  expect_config_error(R"({"L": 1, "atoms": [{"weight": 0.9, "lambda": 1, "mu": [1]}]})");
  expect_config_error(R"({"L": 2, "atoms": [{"weight": 1, "lambda": 1, "mu": [1]}]})");
  expect_config_error(R"({"L": 1, "atoms": [{"weight": 1, "lambda": 1, "mu": [1], "extra": 3}]})");
  expect_config_error(R"({"L": 0, "atoms": []})");
  expect_config_error(R"({"atoms": []})");
}
