#include <memory>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fxlab/caption.hpp"
#include "fxlab/clustering.hpp"
#include "fxlab/config.hpp"
#include "fxlab/diffusion.hpp"
#include "fxlab/errors.hpp"
#include "fxlab/gaussian_mixture.hpp"
#include "fxlab/guidance.hpp"
#include "fxlab/io.hpp"
#include "fxlab/metrics.hpp"
#include "fxlab/pipeline.hpp"

namespace py = pybind11;
using namespace fxlab;

namespace {

SimilarityFn similarity(const std::string& name, double bandwidth, int dim) {
  SimilaritySpec spec;
  spec.name = name;
  spec.bandwidth = bandwidth;
  return make_similarity(spec, dim);
}

py::dict method_dict(const MethodResult& m) {
  py::dict d;
  d["name"] = m.spec.name;
  d["guidance"] = m.spec.guidance.describe();
  d["samples"] = m.samples;
  d["extracted"] = m.extraction.points;
  d["indices"] = m.extraction.indices;
  d["phi"] = m.extraction.cliques.phi;
  d["AS"] = m.metrics.as;
  d["taus"] = m.metrics.taus;
  d["A_ESR"] = m.metrics.a_esr;
  return d;
}

}  // namespace

PYBIND11_MODULE(_fxlab, m) {
  m.doc() = "Desk-scale fine-tuning data extraction lab";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_static("linear_default", &NoiseSchedule::linear_default, py::arg("num_steps") = 100)
      .def_property_readonly("num_steps", &NoiseSchedule::num_steps)
      .def("beta", &NoiseSchedule::beta)
      .def("alpha_bar", &NoiseSchedule::alpha_bar);

  py::class_<GaussianMixture>(m, "GaussianMixture")
      .def(py::init<Vector, Matrix, Matrix>(), py::arg("weights"), py::arg("means"),
           py::arg("variances"))
      .def_static("single", &GaussianMixture::single)
      .def("score", &GaussianMixture::score)
      .def("mean", &GaussianMixture::mean)
      .def("covariance", &GaussianMixture::covariance);
  m.def("geometric_interpolate", &geometric_interpolate, py::arg("p"), py::arg("q"),
        py::arg("lam"));

  m.def("model_guidance_eps",
        py::overload_cast<const Matrix&, const Matrix&, double>(&model_guidance_eps),
        py::arg("eps_ft"), py::arg("eps_pre"), py::arg("w"));
  m.def("cfg_eps", py::overload_cast<const Matrix&, const Matrix&, double>(&cfg_eps),
        py::arg("eps_cond"), py::arg("eps_uncond"), py::arg("w_prime"));
  m.def("finextract_eps",
        py::overload_cast<const Matrix&, const Matrix&, double, double>(&finextract_eps),
        py::arg("eps_ft_cond"), py::arg("eps_pre_uncond"), py::arg("w_prime"), py::arg("k"));

  m.def(
      "sample_finextract_analytic",
      [](const GaussianMixture& p, const GaussianMixture& q, double lam, double w_prime, double k,
         int n, std::uint64_t seed) {
        const auto schedule = NoiseSchedule::linear_default();
        auto pre = std::make_shared<AnalyticDenoiser>(p, schedule);
        auto ft = std::make_shared<ConditionRouter>(
            pre, std::make_shared<GeometricBlendDenoiser>(p, q, lam, schedule));
        const auto guided =
            make_guided_denoiser(pre, ft, GuidanceConfig::finextract({1}, w_prime, k));
        return ancestral_sample(*guided, schedule, n, std::nullopt, seed).points;
      },
      "FineXtract sampling from the analytic pair (p, p^(1-lam) q^lam).", py::arg("p"),
      py::arg("q"), py::arg("lam"), py::arg("w_prime"), py::arg("k") = 0.0, py::arg("n") = 1000,
      py::arg("seed") = 0);

  m.def("maximal_cliques",
        [](const Matrix& sims, double phi) {
          return enumerate_maximal_cliques(SimilarityGraph(sims), phi).cliques;
        },
        py::arg("sims"), py::arg("phi"));
  m.def(
      "extract",
      [](const Matrix& samples, int n0, const std::string& sim, double bandwidth,
         std::optional<std::uint64_t> max_expansions) {
        ClusteringConfig cfg;
        if (max_expansions) cfg.budget = EnumerationBudget{max_expansions, std::nullopt};
        const auto r = extract(samples, n0, similarity(sim, bandwidth, static_cast<int>(samples.cols())), cfg);
        py::dict d;
        d["points"] = r.points;
        d["indices"] = r.indices;
        d["cliques"] = r.cliques.cliques;
        d["phi"] = r.cliques.phi;
        d["truncated"] = r.cliques.truncated;
        return d;
      },
      py::arg("samples"), py::arg("n0"), py::arg("similarity") = "rbf",
      py::arg("bandwidth") = 0.5, py::arg("max_expansions") = std::nullopt);

  m.def(
      "average_similarity",
      [](const Matrix& train, const Matrix& extracted, const std::string& sim, double bw) {
        return average_similarity(train, extracted, similarity(sim, bw, static_cast<int>(train.cols())));
      },
      py::arg("train"), py::arg("extracted"), py::arg("similarity") = "rbf",
      py::arg("bandwidth") = 0.5);
  m.def(
      "a_esr",
      [](const Matrix& train, const Matrix& extracted, double tau, const std::string& sim,
         double bw) {
        return a_esr(train, extracted, similarity(sim, bw, static_cast<int>(train.cols())), tau);
      },
      py::arg("train"), py::arg("extracted"), py::arg("tau"), py::arg("similarity") = "rbf",
      py::arg("bandwidth") = 0.5);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readonly("seed", &ExperimentConfig::seed)
      .def_readonly("run_id", &ExperimentConfig::run_id)
      .def_readonly("generation_count", &ExperimentConfig::generation_count)
      .def_readonly("targets", &ExperimentConfig::targets)
      .def_property_readonly("n0", &ExperimentConfig::n0)
      .def("echo", &ExperimentConfig::echo);
  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &parse_config, py::arg("text"), py::arg("base_dir"));
  m.def(
      "run_pipeline",
      [](const ExperimentConfig& cfg) {
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg);
        }
        if (r.failure) {
          py::dict f;
          f["stage"] = r.failure->stage;
          f["cause"] = r.failure->cause;
          f["exit_code"] = r.failure->exit_code;
          py::dict d;
          d["failure"] = f;
          return d;
        }
        py::list methods;
        for (const auto& mr : r.methods) methods.append(method_dict(mr));
        py::dict d;
        d["run_id"] = r.run_id;
        d["methods"] = methods;
        d["failure"] = py::none();
        return d;
      },
      "pretrain -> finetune -> sample, extract and score every method.", py::arg("config"));

  m.def("read_samples", &read_samples, py::arg("path"));
  m.def("write_samples", &write_samples, py::arg("path"), py::arg("points"));

  m.def(
      "caption_attack",
      [](const std::filesystem::path& pre, const std::filesystem::path& post, int num_tokens,
         int iterations, int restarts, std::uint64_t seed, const std::string& method) {
        CaptionAttackConfig cfg;
        cfg.method = method;
        cfg.prompt.num_tokens = num_tokens;
        cfg.prompt.iterations = iterations;
        cfg.prompt.restarts = restarts;
        cfg.prompt.seed = seed;
        const auto r =
            run_caption_attack(load_checkpoint(pre).model, load_checkpoint(post).model, cfg);
        py::dict d;
        d["status"] = r.status;
        d["message"] = r.message;
        d["tokens"] = r.tokens;
        d["objective"] = r.objective;
        return d;
      },
      py::arg("pre"), py::arg("post"), py::arg("num_tokens") = 1, py::arg("iterations") = 1000,
      py::arg("restarts") = 8, py::arg("seed") = 0, py::arg("method") = "hard_prompt");
}
