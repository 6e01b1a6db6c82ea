#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bdpre/analysis.hpp"
#include "bdpre/branching.hpp"
#include "bdpre/cli.hpp"
#include "bdpre/env.hpp"
#include "bdpre/error.hpp"
#include "bdpre/matrices.hpp"
#include "bdpre/simulate.hpp"

namespace py = pybind11;
using namespace py::literals;

namespace {

bdpre::EnvironmentLaw law_from_string(const std::string& text) {
  return bdpre::law_from_json(nlohmann::json::parse(text));
}

py::dict decomposition_dict(const bdpre::DecompositionReport& r) {
  return py::dict("ks_stat"_a = r.ks_stat, "ks_critical"_a = r.ks_critical, "mean_direct"_a = r.mean_direct,
                  "se_direct"_a = r.se_direct, "mean_reconstructed"_a = r.mean_reconstructed,
                  "se_reconstructed"_a = r.se_reconstructed, "censored_direct"_a = r.censored_direct,
                  "censored_reconstructed"_a = r.censored_reconstructed, "passed"_a = r.pass);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Birth-and-death processes with bounded downward jumps in random environment";
  m.attr("__version__") = std::string(bdpre::kVersion);

  py::register_exception<bdpre::Error>(m, "Error");

  py::class_<bdpre::SiteRates>(m, "SiteRates")
      .def(py::init<double, std::vector<double>>(), "lam"_a, "mu"_a)
      .def_property_readonly("lam", &bdpre::SiteRates::lambda)
      .def_property_readonly("mu", &bdpre::SiteRates::mu_vector)
      .def_property_readonly("total_rate", &bdpre::SiteRates::total_rate)
      .def("__eq__", [](const bdpre::SiteRates& a, const bdpre::SiteRates& b) { return a == b; })
      .def("__repr__", [](const bdpre::SiteRates& s) {
        return "SiteRates(lam=" + std::to_string(s.lambda()) + ", L=" + std::to_string(s.jump_bound()) + ")";
      });

  py::class_<bdpre::EnvironmentLaw>(m, "EnvironmentLaw")
      .def(py::init([](std::size_t L, const std::vector<std::pair<double, bdpre::SiteRates>>& atoms) {
             std::vector<bdpre::Atom> list;
             for (const auto& [w, s] : atoms) list.push_back({w, s});
             return bdpre::EnvironmentLaw(L, std::move(list));
           }),
           "L"_a, "atoms"_a)
      .def_static("single", &bdpre::EnvironmentLaw::single)
      .def_static("from_json", &law_from_string, "text"_a)
      .def("to_json", [](const bdpre::EnvironmentLaw& law) { return bdpre::to_json(law).dump(); })
      .def_property_readonly("L", &bdpre::EnvironmentLaw::jump_bound);

  m.def("sample_site", &bdpre::sample_site, "law"_a, "seed"_a, "index"_a, py::return_value_policy::copy);
  m.def(
      "check_conditions",
      [](const bdpre::EnvironmentLaw& law) {
        const auto r = bdpre::check_conditions(law);
        return py::dict("c1"_a = r.c1, "c2"_a = r.c2, "c3"_a = r.c3, "violations"_a = r.violations);
      },
      "law"_a);

  py::class_<bdpre::EnvironmentWindow>(m, "EnvironmentWindow")
      .def(py::init([](const bdpre::EnvironmentLaw& law, std::uint64_t seed, std::int64_t lo, std::int64_t hi) {
             return std::make_unique<bdpre::EnvironmentWindow>(law, seed, lo, hi);
           }),
           "law"_a, "seed"_a, "lo"_a, "hi"_a)
      .def("site", &bdpre::EnvironmentWindow::site, "i"_a, py::return_value_policy::copy)
      .def("extend", &bdpre::EnvironmentWindow::extend, "lo"_a, "hi"_a)
      .def_property_readonly("lo", &bdpre::EnvironmentWindow::lo)
      .def_property_readonly("hi", &bdpre::EnvironmentWindow::hi);

  m.def("build_M", &bdpre::build_M, "site"_a);
  m.def("build_B", &bdpre::build_B, "site"_a);
  m.def("build_B_inv", &bdpre::build_B_inv, "site"_a);
  m.def(
      "lambda_conjugacy_residual",
      [](const std::vector<bdpre::SiteRates>& sites) { return bdpre::lambda_conjugacy_residual(sites); }, "sites"_a);
  m.def("spectral_radius", [](const bdpre::Matrix& mat) { return bdpre::spectral_radius(mat); }, "m"_a);
  m.def(
      "lyapunov_top",
      [](const bdpre::EnvironmentLaw& law, std::int64_t steps, std::int64_t replicas, std::int64_t burn_in,
         std::uint64_t seed, unsigned threads) {
        py::gil_scoped_release release;
        const auto e = bdpre::lyapunov_top(law, {steps, replicas, burn_in, threads}, seed);
        return std::make_pair(e.gamma_top, e.std_error);
      },
      "law"_a, "steps"_a = 100'000, "replicas"_a = 8, "burn_in"_a = 1'000, "seed"_a = 1, "threads"_a = 1,
      "Returns (gamma_top, std_error).");
  m.def(
      "classify_recurrence",
      [](double gamma_top, double std_error, double tolerance) {
        bdpre::LyapunovEstimate e;
        e.gamma_top = gamma_top;
        e.std_error = std_error;
        return std::string(bdpre::to_string(bdpre::classify_recurrence(e, tolerance).verdict));
      },
      "gamma_top"_a, "std_error"_a, "tolerance"_a);

  m.def(
      "first_passage_times",
      [](bdpre::EnvironmentWindow& w, std::int64_t n, std::size_t replicas, std::uint64_t seed,
         std::int64_t step_cap, unsigned threads) {
        std::vector<bdpre::PassageTime> times;
        {
          py::gil_scoped_release release;
          times = bdpre::first_passage_times(w, n, replicas, seed, step_cap, threads);
        }
        std::vector<std::pair<double, bool>> out;
        for (const auto& t : times) out.emplace_back(t.time, t.censored);
        return out;
      },
      "window"_a, "n"_a, "replicas"_a, "seed"_a, "step_cap"_a = bdpre::kDefaultStepCap, "threads"_a = 1,
      "Returns a list of (time, censored).");
  m.def(
      "walk_to",
      [](bdpre::EnvironmentWindow& w, std::int64_t target, std::uint64_t seed, std::int64_t step_cap) {
        auto rng = bdpre::Rng::stream(seed, bdpre::Purpose::Walk);
        return bdpre::simulate_walk(w, 0, bdpre::StopRule::hit_state(target), rng, step_cap).states;
      },
      "window"_a, "target"_a, "seed"_a, "step_cap"_a = bdpre::kDefaultStepCap,
      "Embedded walk from 0 until it first hits target.");
  m.def(
      "crossing_counts",
      [](const std::vector<std::int64_t>& states, std::size_t L) {
        const auto c = bdpre::crossing_counts(states, L);
        py::dict out;
        for (std::int64_t i = -1; i >= c.depth; --i) out[py::int_(i)] = c.at(i);
        return out;
      },
      "states"_a, "L"_a, "Maps i < 0 to U_i.");

  m.def(
      "offspring_sample",
      [](const bdpre::SiteRates& site, std::size_t parent_type, std::uint64_t seed) {
        auto rng = bdpre::Rng::stream(seed, bdpre::Purpose::Branching);
        return bdpre::offspring_sample(site, parent_type, rng);
      },
      "site"_a, "parent_type"_a, "seed"_a);
  m.def(
      "offspring_pmf",
      [](const bdpre::SiteRates& site, std::size_t parent_type, const std::vector<std::uint64_t>& u) {
        return bdpre::offspring_pmf(site, parent_type, u);
      },
      "site"_a, "parent_type"_a, "u"_a);
  m.def("mean_matrix", &bdpre::mean_matrix, "site"_a);
  m.def(
      "simulate_branching",
      [](bdpre::EnvironmentWindow& w, std::int64_t generation_cap, std::uint64_t seed) {
        auto rng = bdpre::Rng::stream(seed, bdpre::Purpose::Branching);
        const auto r = bdpre::simulate_branching(w, generation_cap, rng);
        return std::make_pair(r.generations, r.censored);
      },
      "window"_a, "generation_cap"_a = bdpre::kDefaultGenerationCap, "seed"_a = 1,
      "Returns (generations, censored); generations[k] = U_{-k}.");

  m.def(
      "quenched_mean_T1",
      [](bdpre::EnvironmentWindow& w, std::int64_t max_terms, double rel_tol) {
        const auto s = bdpre::quenched_mean_T1(w, max_terms, rel_tol);
        return py::dict("value"_a = s.value, "terms_used"_a = s.terms_used, "tail_estimate"_a = s.tail_estimate,
                        "converged"_a = s.converged, "diverging"_a = s.diverging);
      },
      "window"_a, "max_terms"_a = bdpre::kDefaultMaxTerms, "rel_tol"_a = 1e-10);
  m.def(
      "annealed_ET1",
      [](const bdpre::EnvironmentLaw& law, std::int64_t n_env, std::int64_t max_terms, double rel_tol,
         std::uint64_t seed, unsigned threads) {
        py::gil_scoped_release release;
        const auto a = bdpre::annealed_ET1(law, n_env, max_terms, rel_tol, seed, threads);
        return std::make_tuple(a.value, a.std_error, a.diverging);
      },
      "law"_a, "n_env"_a = 32, "max_terms"_a = bdpre::kDefaultMaxTerms, "rel_tol"_a = 1e-10, "seed"_a = 1,
      "threads"_a = 1, "Returns (value, std_error, diverging).");
  m.def(
      "compare_decomposition",
      [](const bdpre::EnvironmentLaw& law, std::int64_t n_samples, std::uint64_t seed, unsigned threads) {
        bdpre::DecompositionOptions options;
        options.threads = threads;
        bdpre::DecompositionReport r;
        {
          py::gil_scoped_release release;
          r = bdpre::compare_decomposition(law, n_samples, seed, options);
        }
        return decomposition_dict(r);
      },
      "law"_a, "n_samples"_a, "seed"_a = 1, "threads"_a = 1);
  m.def(
      "ks_two_sample",
      [](const std::vector<double>& a, const std::vector<double>& b) { return bdpre::ks_two_sample(a, b); }, "a"_a,
      "b"_a);

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_json, unsigned threads, bool dump_paths) {
        const auto config = nlohmann::json::parse(config_json);
        bdpre::CommandOutput out;
        {
          py::gil_scoped_release release;
          out = bdpre::run_command(command, config, threads, dump_paths);
        }
        return py::make_tuple(out.exit_code, out.report.is_null() ? std::string() : out.report.dump(), out.error,
                              out.path_dump);
      },
      "command"_a, "config_json"_a, "threads"_a = 1, "dump_paths"_a = false,
      "Returns (exit_code, report_json, error, path_dump_csv).");
}
