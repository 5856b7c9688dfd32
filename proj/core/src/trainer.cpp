#include "gfn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gfn/evaluation.hpp"
#include "gfn/objectives.hpp"

namespace gfn {

namespace fs = std::filesystem;

std::unique_ptr<Environment> make_env(const ExperimentConfig& cfg) {
  if (cfg.env == "grid") {
    GridConfig g = cfg.grid;
    g.init_seed = cfg.seed;
    return std::make_unique<QuarterDiscEnv>(g);
  }
  if (cfg.env == "euclid") {
    SdeConfig s = cfg.sde;
    s.init_seed = cfg.seed;
    return std::make_unique<EuclidEnv>(s);
  }
  if (cfg.env == "torus") {
    TorusConfig t = cfg.torus;
    t.init_seed = cfg.seed;
    return std::make_unique<TorusEnv>(t);
  }
  throw std::runtime_error("unknown env: " + cfg.env);
}

namespace {
Var build_loss(const ExperimentConfig& cfg, Environment& env, Tape& tape,
               const std::map<std::string, Var>& lv, const std::vector<Trajectory>& batch) {
  if (cfg.objective == "db-rm" || cfg.objective == "fm-rm") {
    auto* grid = dynamic_cast<QuarterDiscEnv*>(&env);
    if (grid == nullptr)
      throw std::runtime_error(cfg.objective + " is only available on the grid environment");
    return cfg.objective == "db-rm" ? grid->db_rm_loss(tape, lv, batch, cfg.alpha)
                                    : grid->fm_rm_loss(tape, lv, batch, cfg.alpha, cfg.fm_quad_nodes);
  }
  TrajectoryBatchTerms terms = env.eval_batch(tape, lv, batch);
  if (cfg.objective == "tb") return tb_loss(tape, lv.at("log_z"), terms);
  if (cfg.objective == "reverse-kl") return reverse_kl_surrogate(tape, terms).loss;
  if (cfg.objective == "forward-kl") return forward_kl_loss(tape, terms).loss;
  throw std::runtime_error("unknown objective: " + cfg.objective);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}
}  // namespace

void export_density_grid(Environment& env, const std::string& csv_path, int res, int n_samples,
                         std::mt19937_64& rng) {
  DomainSpec dom = env.domain();
  if (dom.lo.size() != 2 || !dom.bounded)
    throw std::runtime_error("export_density_grid: 2-D bounded domains only");
  Mat samples = model_samples(env, n_samples, rng);
  KdeModel kde = KdeModel::fit(samples, dom.torus);
  Vec gx(res), gy(res);
  for (int i = 0; i < res; ++i) {
    double f = (i + 0.5) / res;
    gx(i) = dom.lo(0) + f * (dom.hi(0) - dom.lo(0));
    gy(i) = dom.lo(1) + f * (dom.hi(1) - dom.lo(1));
  }
  Mat density = kde.score_grid(gx, gy);  // (x index, y index)
  double cell = ((dom.hi(0) - dom.lo(0)) / res) * ((dom.hi(1) - dom.lo(1)) / res);
  density /= density.sum() * cell;  // normalize the Riemann integral to 1
  std::ofstream f(csv_path);
  if (!f) throw std::runtime_error("cannot write density grid: " + csv_path);
  f << std::setprecision(12);
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) f << (ix ? "," : "") << density(ix, iy);
    f << "\n";
  }
}

TrainResult run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  auto env = make_env(cfg);
  env->params().set_lr_mult("log_z", cfg.logz_lr_mult);
  std::mt19937_64 rng(cfg.seed + 1);

  std::ofstream metrics(cfg.out_dir + "/metrics.csv");
  metrics << "iteration,loss,log_z,jsd,B,B_RW,wall_clock_s,skipped\n";
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  TrainResult res;
  res.out_dir = cfg.out_dir;
  long total_skipped = 0;
  double last_loss = 0.0;

  for (int iter = 0; iter < cfg.iters; ++iter) {
    double eps = cfg.eps0;
    if (cfg.iters > 1) eps += (cfg.eps1 - cfg.eps0) * iter / (cfg.iters - 1);
    auto rollouts = env->rollout_batch(cfg.batch, eps, rng);
    BatchFilter filt = filter_finite_reward(rollouts);
    total_skipped += filt.skipped;
    if (filt.kept.empty()) continue;

    Tape tape;
    auto lv = env->params().leaves(tape);
    Var loss = build_loss(cfg, *env, tape, lv, filt.kept);
    last_loss = tape.scalar(loss);
    if (std::isnan(last_loss)) {
      res.aborted_nan = true;
      env->params().save(cfg.out_dir + "/checkpoint.bin");  // last good parameters
      std::ofstream(cfg.out_dir + "/abort.txt") << "nan loss at iteration " << iter
                                                << "; last good iteration " << iter - 1 << "\n";
      break;
    }
    tape.backward(loss);
    double lr = cfg.lr;
    if (cfg.lr_decay_every > 0)
      lr *= std::pow(cfg.lr_decay, static_cast<double>(iter / cfg.lr_decay_every));
    env->params().apply_gradients(tape, lv, lr);
    res.completed_iters = iter + 1;

    bool last = (iter + 1 == cfg.iters);
    bool metrics_due = cfg.eval_every > 0 && ((iter + 1) % cfg.eval_every == 0 || last);
    if (!metrics_due) continue;

    std::string jsd_field, b_field, brw_field;
    if (cfg.jsd_every > 0 && (iter + 1) % cfg.jsd_every == 0 && !last) {
      std::mt19937_64 eval_rng(cfg.seed + 2);
      jsd_field = fmt(jsd_vs_target(*env, cfg.jsd_samples, cfg.jsd_grid_res, eval_rng).jsd);
    }
    if (cfg.logz_every > 0 && (iter + 1) % cfg.logz_every == 0 && !last) {
      std::mt19937_64 eval_rng(cfg.seed + 3);
      auto rep = logz_bounds(*env, cfg.logz_samples, eval_rng);
      b_field = fmt(rep.B);
      brw_field = fmt(rep.B_RW);
    }
    if (last) {
      // final evaluation: JSD for the 2-D bounded envs, log-Z bounds otherwise
      if (cfg.env == "grid" || cfg.env == "torus") {
        std::mt19937_64 eval_rng(cfg.seed + 2);
        res.final_jsd = jsd_vs_target(*env, cfg.jsd_samples, cfg.jsd_grid_res, eval_rng).jsd;
        jsd_field = fmt(res.final_jsd);
      } else {
        std::mt19937_64 eval_rng(cfg.seed + 3);
        auto rep = logz_bounds(*env, cfg.logz_samples, eval_rng);
        res.final_b = rep.B;
        res.final_b_rw = rep.B_RW;
        res.logz_evaluated = true;
        b_field = fmt(rep.B);
        brw_field = fmt(rep.B_RW);
      }
    }
    metrics << (iter + 1) << "," << fmt(last_loss) << ","
            << fmt(env->params().at("log_z")(0, 0)) << "," << jsd_field << "," << b_field << ","
            << brw_field << "," << fmt(elapsed()) << "," << total_skipped << "\n";
    metrics.flush();
  }

  res.final_loss = last_loss;
  res.log_z = env->params().at("log_z")(0, 0);
  if (!res.aborted_nan) env->params().save(cfg.out_dir + "/checkpoint.bin");
  save_config(cfg, cfg.out_dir + "/config.json");
  if (!res.aborted_nan && (cfg.env == "grid" || cfg.env == "torus")) {
    std::mt19937_64 grid_rng(cfg.seed + 4);
    export_density_grid(*env, cfg.out_dir + "/density_grid.csv", cfg.jsd_grid_res,
                        std::min(cfg.jsd_samples, 20000), grid_rng);
  }
  return res;
}

std::unique_ptr<Environment> load_checkpoint(const std::string& checkpoint_path,
                                             ExperimentConfig& cfg_out) {
  fs::path dir = fs::path(checkpoint_path).parent_path();
  cfg_out = load_config((dir / "config.json").string());
  auto env = make_env(cfg_out);
  env->params().load(checkpoint_path);
  return env;
}

}  // namespace gfn
