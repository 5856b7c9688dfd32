#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "gfn/discrete_oracle.hpp"
#include "gfn/evaluation.hpp"
#include "gfn/trainer.hpp"

namespace {

int cmd_train(const std::string& config_path, const std::string& preset_name, int seed,
              const std::string& out_dir) {
  gfn::ExperimentConfig cfg;
  if (!preset_name.empty())
    cfg = gfn::preset(preset_name);
  else
    cfg = gfn::load_config(config_path);
  if (seed >= 0) cfg.seed = static_cast<unsigned>(seed);
  if (!out_dir.empty()) cfg.out_dir = out_dir;

  gfn::TrainResult res = gfn::run_experiment(cfg);
  if (res.aborted_nan) {
    std::cerr << "training aborted on NaN loss after " << res.completed_iters << " iterations; "
              << "last good checkpoint in " << res.out_dir << "\n";
    return 1;
  }
  std::cout << "iterations " << res.completed_iters << "\n"
            << "final loss " << res.final_loss << "\n"
            << "log Z " << res.log_z << "\n";
  if (res.final_jsd >= 0.0) std::cout << "final JSD " << res.final_jsd << "\n";
  if (res.logz_evaluated)
    std::cout << "B " << res.final_b << "\nB_RW " << res.final_b_rw << "\n";
  std::cout << "artifacts in " << res.out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& metric, int samples, int res,
             unsigned seed) {
  gfn::ExperimentConfig cfg;
  auto env = gfn::load_checkpoint(checkpoint, cfg);
  if (metric == "jsd") {
    std::mt19937_64 rng(seed);
    int n = samples > 0 ? samples : cfg.jsd_samples;
    int r = res > 0 ? res : cfg.jsd_grid_res;
    auto rep = gfn::jsd_vs_target(*env, n, r, rng);
    std::cout << "jsd " << rep.jsd << " samples " << rep.n_samples << " grid " << rep.grid_res
              << "\n";
    return 0;
  }
  if (metric == "logz") {
    std::mt19937_64 rng(seed);
    int k = samples > 0 ? samples : cfg.logz_samples;
    auto rep = gfn::logz_bounds(*env, k, rng);
    std::cout << "B " << rep.B << " B_RW " << rep.B_RW << " K " << rep.K << " skipped "
              << rep.skipped << "\n";
    return 0;
  }
  std::cerr << "unknown metric: " << metric << "\n";
  return 2;
}

int cmd_oracle(const std::string& dag_path, const std::string& check) {
  gfn::PointedDag dag = gfn::load_dag(dag_path);
  // exact flow from the uniform backward policy over each state's parents
  gfn::Mat support = gfn::Mat::Zero(dag.n, dag.n);
  for (auto [a, b] : dag.edges)
    if (b != dag.sink()) support(b, a) = 1.0;
  for (int j = 0; j < dag.n; ++j) {
    double s = support.row(j).sum();
    if (s > 0.0) support.row(j) /= s;
  }
  gfn::DiscreteFlow flow = gfn::flow_from_backward(dag, support);
  gfn::ResidualReport rep = gfn::check_conditions(dag, flow);

  constexpr double kTol = 1e-10;
  bool ok = true;
  auto report = [&](const std::string& name, double v) {
    std::cout << name << " residual " << v << (v <= kTol ? " ok" : " FAIL") << "\n";
    if (v > kTol) ok = false;
  };
  if (check == "fm" || check == "all") report("fm", rep.fm);
  if (check == "db" || check == "all") report("db", rep.db);
  if (check == "tb" || check == "all") report("tb", rep.tb);
  if (check == "all") {
    report("rm", rep.rm);
    report("pb-total", rep.pb_total);
  }
  std::cout << "Z " << flow.z << "\n";
  return ok ? 0 : 1;
}

int cmd_export_grid(const std::string& checkpoint, int res, int samples, const std::string& out,
                    unsigned seed) {
  gfn::ExperimentConfig cfg;
  auto env = gfn::load_checkpoint(checkpoint, cfg);
  std::mt19937_64 rng(seed);
  gfn::export_density_grid(*env, out, res, samples, rng);
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous GFlowNet trainer and evaluation harness"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run a training experiment");
  std::string config_path, preset_name, out_dir;
  int seed = -1;
  train->add_option("--config", config_path, "config JSON path");
  train->add_option("--preset", preset_name, "named preset (see --list in docs)");
  train->add_option("--seed", seed, "seed override");
  train->add_option("--out", out_dir, "output directory override");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint, metric = "jsd";
  int eval_samples = 0, eval_res = 0;
  unsigned eval_seed = 12345;
  eval->add_option("--checkpoint", checkpoint, "path to checkpoint.bin")->required();
  eval->add_option("--metric", metric, "jsd or logz")->required();
  eval->add_option("--samples", eval_samples, "sample count override");
  eval->add_option("--res", eval_res, "grid resolution override");
  eval->add_option("--seed", eval_seed, "evaluation seed");

  auto* oracle = app.add_subcommand("oracle", "check balance conditions on a DAG");
  std::string dag_path, check = "all";
  oracle->add_option("--dag", dag_path, "DAG text file")->required();
  oracle->add_option("--check", check, "fm, db, tb, or all")->required();

  auto* export_grid = app.add_subcommand("export-grid", "export a KDE density grid");
  std::string eg_checkpoint, eg_out = "density_grid.csv";
  int eg_res = 200, eg_samples = 20000;
  unsigned eg_seed = 12345;
  export_grid->add_option("--checkpoint", eg_checkpoint, "path to checkpoint.bin")->required();
  export_grid->add_option("--res", eg_res, "grid resolution")->required();
  export_grid->add_option("--samples", eg_samples, "rollout sample count");
  export_grid->add_option("--out", eg_out, "output CSV path");
  export_grid->add_option("--seed", eg_seed, "sampling seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (config_path.empty() && preset_name.empty()) {
        std::cerr << "train: provide --config or --preset\n";
        return 2;
      }
      return cmd_train(config_path, preset_name, seed, out_dir);
    }
    if (eval->parsed()) return cmd_eval(checkpoint, metric, eval_samples, eval_res, eval_seed);
    if (oracle->parsed()) return cmd_oracle(dag_path, check);
    if (export_grid->parsed())
      return cmd_export_grid(eg_checkpoint, eg_res, eg_samples, eg_out, eg_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
