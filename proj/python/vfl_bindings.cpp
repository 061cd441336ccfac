// Python surface: config echo, in-memory training runs, the artifact-tree
// runner, the privacy accountant and the per-sample z solve. Matrices cross
// the boundary as nested lists — the scales this module targets (smoke
// tests, notebook-sized experiments) don't justify a numpy dependency.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <atomic>
#include <stdexcept>

#include "vfl/config.hpp"
#include "vfl/harness.hpp"
#include "vfl/matrix.hpp"
#include "vfl/metrics.hpp"
#include "vfl/privacy.hpp"
#include "vfl/zsolve.hpp"

namespace py = pybind11;

namespace {

using namespace vfl;

Matrix to_matrix(const std::vector<std::vector<double>>& rows, const char* name) {
  if (rows.empty()) throw std::invalid_argument(std::string(name) + ": empty matrix");
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols)
      throw std::invalid_argument(std::string(name) + ": ragged rows");
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<std::vector<double>> from_matrix(const Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows, std::vector<double>(m.cols));
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) rows[i][j] = m(i, j);
  return rows;
}

ExperimentConfig singleton_config(const std::string& text) {
  ExperimentConfig config = parse_config_text(text);
  std::vector<GridPoint> grid = expand_grid(config);
  if (grid.size() > 1)
    throw std::invalid_argument(
        "config expands to " + std::to_string(grid.size()) +
        " hyperparameter grid points; run_training takes exactly one (use run_experiment "
        "for grids)");
  return grid[0].config;
}

py::dict run_result_dict(const RunResult& result) {
  py::dict out;
  py::list metrics;
  for (const RoundMetrics& row : result.metrics) {
    py::dict r;
    r["round"] = row.round;
    r["train_loss"] = row.train_loss;
    r["val_acc"] = row.val_acc;
    r["test_acc"] = row.test_acc;
    r["admm_loss"] = row.admm_loss;
    r["constraint_residual"] = row.constraint_residual;
    r["bytes_up"] = row.bytes_up;
    r["bytes_down"] = row.bytes_down;
    r["epsilon"] = row.epsilon;
    metrics.append(r);
  }
  out["metrics"] = metrics;
  out["metrics_csv"] = metrics_csv_string(result.metrics);
  out["ledger_json"] = result.ledger_json;
  py::list heads;
  for (const Matrix& head : result.heads) heads.append(from_matrix(head));
  out["heads"] = heads;
  py::list importance;
  for (const auto& [client, norm] : head_importance(result.heads))
    importance.append(py::make_tuple(client, norm));
  out["importance"] = importance;
  out["rounds_run"] = result.rounds_run;
  out["total_rounds"] = result.total_rounds;
  out["stopped_early"] = result.stopped_early;
  out["sigma"] = result.sigma;
  out["epsilon"] = result.epsilon;
  out["label_epsilon"] = result.label_epsilon;
  out["error"] = result.error;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Vertical federated learning simulator core";
  m.attr("__version__") = "0.1.0";

  m.def(
      "effective_config",
      [](const std::string& text) { return effective_config_string(parse_config_text(text)); },
      py::arg("config_text"),
      "Parses a key=value config and returns the fully resolved echo (every applicable key, "
      "defaults included). Raises ValueError on unknown keys or bad values.");

  m.def(
      "run_training",
      [](const std::string& config_text, std::optional<std::uint64_t> seed) {
        ExperimentConfig config = singleton_config(config_text);
        std::uint64_t s = seed.value_or(config.seeds[0]);
        RunResult result;
        {
          py::gil_scoped_release release;
          VerticalDataset data = build_dataset(config, s);
          result = run_training(config, data, s);
        }
        return run_result_dict(result);
      },
      py::arg("config_text"), py::arg("seed") = py::none(),
      "Runs one training configuration in memory and returns a dict with the metric rows, "
      "the byte-exact communication ledger (JSON string), the trained per-client heads and "
      "their importance ranking, and the privacy spend. A failed round comes back in "
      "result['error'] with partial metrics intact.");

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::string& out_dir) {
        ExperimentConfig config = parse_config_text(config_text);
        py::gil_scoped_release release;
        run_experiment(config, out_dir);
      },
      py::arg("config_text"), py::arg("out_dir"),
      "Runs the full grid x seed experiment tree to out_dir (effective.conf, per-seed "
      "metrics.csv / ledger.json / checkpoint.bin, summary.json). Raises RuntimeError after "
      "flushing partial artifacts if a seed fails.");

  m.def(
      "rdp_epsilon",
      [](std::size_t rounds, double sigma, double delta) {
        RdpResult r = rdp_epsilon(rounds, sigma, delta);
        py::dict out;
        out["epsilon"] = r.epsilon;
        out["alpha"] = r.alpha;
        return out;
      },
      py::arg("rounds"), py::arg("sigma"), py::arg("delta") = 1e-5,
      "(epsilon, delta) spend of `rounds` Gaussian releases at noise multiplier sigma, via "
      "the RDP accountant; returns the minimizing order alpha alongside.");

  m.def("calibrate_sigma", &calibrate_sigma, py::arg("rounds"), py::arg("target_epsilon"),
        py::arg("delta") = 1e-5,
        "Smallest noise multiplier whose accountant spend lands within 0.1% under "
        "target_epsilon for the given round budget.");

  m.def("label_dp_epsilon", &label_dp_epsilon, py::arg("lam"),
        "Label-DP epsilon of the Laplace one-hot mechanism at scale lam (2*sqrt(2)/lam).");

  m.def(
      "update_z",
      [](const std::vector<int>& labels, const std::vector<std::vector<double>>& lambda,
         const std::vector<std::vector<double>>& pred,
         const std::vector<std::vector<double>>& z_init, double rho) {
        Matrix result = update_z(labels, to_matrix(lambda, "lambda"), to_matrix(pred, "pred"),
                                 to_matrix(z_init, "z_init"), rho);
        return from_matrix(result);
      },
      py::arg("labels"), py::arg("lambda"), py::arg("pred"), py::arg("z_init"), py::arg("rho"),
      "Row-wise minimizer of CE(z, y) - lambda^T z + (rho/2)||pred - z||^2, damped Newton "
      "with a guarded gradient fallback.");
}
