#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "kcmp/attack.hpp"
#include "kcmp/baselines.hpp"
#include "kcmp/bench.hpp"
#include "kcmp/calibration.hpp"
#include "kcmp/error.hpp"
#include "kcmp/simulation.hpp"
#include "kcmp/stats.hpp"

namespace py = pybind11;
using namespace kcmp;

namespace {

ScoreSet to_score_set(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw InvalidInput("scores and labels differ in length");
  ScoreSet s{"py", {}};
  for (std::size_t i = 0; i < scores.size(); ++i) s.entries.push_back({std::to_string(i), scores[i], labels[i]});
  return s;
}

baselines::InferenceTrace trace_from_logprobs(const std::vector<double>& logprobs) {
  baselines::InferenceTrace t{"py", "desp", {}};
  for (double lp : logprobs) t.tokens.push_back({"", lp, {{"", std::exp(lp)}}});
  return t;
}

}  // namespace

PYBIND11_MODULE(_kcmp, m) {
  m.doc() = "Membership auditing toolkit: metrics, scorers and the simulator";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);

  m.def("auc", [](const std::vector<double>& pos, const std::vector<double>& neg) { return auc(pos, neg); },
        py::arg("positives"), py::arg("negatives"), "Mann-Whitney AUC with half credit for ties.");

  m.def(
      "roc_curve",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        const auto c = roc_curve(to_score_set(scores, labels));
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : c.points) pts.emplace_back(p.fpr, p.tpr);
        return py::make_tuple(pts, c.auc);
      },
      py::arg("scores"), py::arg("labels"), "Returns ([(fpr, tpr), ...], auc).");

  m.def(
      "set_level_accuracy",
      [](const std::vector<double>& scores, const std::vector<int>& labels, int k, int trials, std::uint64_t seed) {
        Rng rng(seed);
        return set_level_eval(to_score_set(scores, labels), k, trials, rng).accuracy;
      },
      py::arg("scores"), py::arg("labels"), py::arg("k"), py::arg("trials") = 2000, py::arg("seed") = 0);

  m.def("match_answer", &match_answer, py::arg("answer"), py::arg("candidates"));
  m.def("filter_score", [](double u, const std::vector<double>& rs) { return filter_score(u, rs); }, py::arg("u"),
        py::arg("rs"));

  m.def("perplexity_score", [](const std::vector<double>& lps) { return baselines::perplexity_score(trace_from_logprobs(lps)); },
        py::arg("logprobs"));
  m.def("min_k_score",
        [](const std::vector<double>& lps, double k) { return baselines::min_k_score(trace_from_logprobs(lps), k); },
        py::arg("logprobs"), py::arg("k_percent"));
  m.def("renyi_entropy", [](const std::vector<double>& p, double alpha) { return baselines::renyi_entropy(p, alpha); },
        py::arg("dist"), py::arg("alpha"));
  m.def("kl_divergence",
        [](const std::vector<double>& p, const std::vector<double>& q) { return baselines::kl_divergence(p, q); },
        py::arg("p"), py::arg("q"));
  m.def("rouge_l_f1", &baselines::rouge_l_f1, py::arg("reference"), py::arg("candidate"));

  m.def(
      "cost_estimate",
      [](double probes, int repeats, std::uint64_t images, const std::string& model) {
        const auto e = cost_estimate(probes, repeats, images, default_price_table().find(model));
        py::dict d;
        d["queries_per_image"] = e.queries_per_image;
        d["total_queries"] = e.total_queries;
        d["total_cost"] = e.total_cost;
        return d;
      },
      py::arg("avg_probes"), py::arg("repeats") = 4, py::arg("images") = 1000, py::arg("model") = "Claude-3.7");

  m.def(
      "simulate",
      [](std::size_t n_members, std::size_t n_nonmembers, double p_member, double p_nonmember, std::uint64_t seed,
         int top_n, int repeats) {
        SimulationOptions opt;
        opt.sim.p_member = p_member;
        opt.sim.p_nonmember = p_nonmember;
        opt.sim.seed = seed;
        opt.attack.seed = seed;
        opt.attack.top_n = top_n <= 0 ? kSelectAll : static_cast<std::size_t>(top_n);
        opt.attack.repeats = repeats;
        const auto samples = synthesize_benchmark(n_members, n_nonmembers, seed);
        opt.sim.members = labeled_members(samples);
        SimulationRun run;
        {
          py::gil_scoped_release release;
          run = run_simulation(samples, opt);
        }
        py::list rows;
        for (const auto& e : run.outcome.scores.entries) {
          py::dict d;
          d["sample_id"] = e.sample_id;
          d["score"] = e.score;
          d["label"] = e.label.value_or(-1);
          rows.append(d);
        }
        return rows;
      },
      py::arg("n_members"), py::arg("n_nonmembers"), py::arg("p_member") = 0.7, py::arg("p_nonmember") = 0.25,
      py::arg("seed") = 0, py::arg("top_n") = 5, py::arg("repeats") = 4,
      "Full pipeline against simulated models; top_n <= 0 keeps every probe.");
}
