#include "gfn/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gfn {

using json = nlohmann::ordered_json;

namespace {
json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["env"] = c.env;
  j["objective"] = c.objective;
  j["alpha"] = c.alpha;
  j["fm_quad_nodes"] = c.fm_quad_nodes;
  j["grid"] = {{"rho", c.grid.rho},
               {"hidden", c.grid.hidden},
               {"hidden_layers", c.grid.hidden_layers},
               {"learned_pb", c.grid.learned_pb},
               {"source_components", c.grid.source_components},
               {"angle_components", c.grid.angle_components}};
  j["sde"] = {{"T", c.sde.T},
              {"sigma", c.sde.sigma},
              {"d", c.sde.d},
              {"target", c.sde.target == SdeTarget::NineGaussians ? "nine-gaussians" : "funnel"},
              {"hidden", c.sde.hidden},
              {"fourier_dim", c.sde.fourier_dim}};
  j["torus"] = {{"T", c.torus.T},
                {"hidden", c.torus.hidden},
                {"hidden_layers", c.torus.hidden_layers},
                {"components", c.torus.components},
                {"freqs", c.torus.freqs}};
  j["lr"] = c.lr;
  j["logz_lr_mult"] = c.logz_lr_mult;
  j["lr_decay"] = c.lr_decay;
  j["lr_decay_every"] = c.lr_decay_every;
  j["batch"] = c.batch;
  j["iters"] = c.iters;
  j["eps0"] = c.eps0;
  j["eps1"] = c.eps1;
  j["eval_every"] = c.eval_every;
  j["jsd_every"] = c.jsd_every;
  j["jsd_samples"] = c.jsd_samples;
  j["jsd_grid_res"] = c.jsd_grid_res;
  j["logz_every"] = c.logz_every;
  j["logz_samples"] = c.logz_samples;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  return j;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  c.env = j.value("env", c.env);
  c.objective = j.value("objective", c.objective);
  c.alpha = j.value("alpha", c.alpha);
  c.fm_quad_nodes = j.value("fm_quad_nodes", c.fm_quad_nodes);
  if (j.contains("grid")) {
    const json& g = j["grid"];
    c.grid.rho = g.value("rho", c.grid.rho);
    c.grid.hidden = g.value("hidden", c.grid.hidden);
    c.grid.hidden_layers = g.value("hidden_layers", c.grid.hidden_layers);
    c.grid.learned_pb = g.value("learned_pb", c.grid.learned_pb);
    c.grid.source_components = g.value("source_components", c.grid.source_components);
    c.grid.angle_components = g.value("angle_components", c.grid.angle_components);
  }
  if (j.contains("sde")) {
    const json& s = j["sde"];
    c.sde.T = s.value("T", c.sde.T);
    c.sde.sigma = s.value("sigma", c.sde.sigma);
    c.sde.d = s.value("d", c.sde.d);
    std::string target = s.value("target", std::string("nine-gaussians"));
    if (target == "nine-gaussians")
      c.sde.target = SdeTarget::NineGaussians;
    else if (target == "funnel")
      c.sde.target = SdeTarget::Funnel;
    else
      throw std::runtime_error("unknown sde target: " + target);
    c.sde.hidden = s.value("hidden", c.sde.hidden);
    c.sde.fourier_dim = s.value("fourier_dim", c.sde.fourier_dim);
  }
  if (j.contains("torus")) {
    const json& t = j["torus"];
    c.torus.T = t.value("T", c.torus.T);
    c.torus.hidden = t.value("hidden", c.torus.hidden);
    c.torus.hidden_layers = t.value("hidden_layers", c.torus.hidden_layers);
    c.torus.components = t.value("components", c.torus.components);
    c.torus.freqs = t.value("freqs", c.torus.freqs);
  }
  c.lr = j.value("lr", c.lr);
  c.logz_lr_mult = j.value("logz_lr_mult", c.logz_lr_mult);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.lr_decay_every = j.value("lr_decay_every", c.lr_decay_every);
  c.batch = j.value("batch", c.batch);
  c.iters = j.value("iters", c.iters);
  c.eps0 = j.value("eps0", c.eps0);
  c.eps1 = j.value("eps1", c.eps1);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.jsd_every = j.value("jsd_every", c.jsd_every);
  c.jsd_samples = j.value("jsd_samples", c.jsd_samples);
  c.jsd_grid_res = j.value("jsd_grid_res", c.jsd_grid_res);
  c.logz_every = j.value("logz_every", c.logz_every);
  c.logz_samples = j.value("logz_samples", c.logz_samples);
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (c.env != "grid" && c.env != "euclid" && c.env != "torus")
    throw std::runtime_error("unknown env: " + c.env);
  if (c.objective != "tb" && c.objective != "db-rm" && c.objective != "fm-rm" &&
      c.objective != "reverse-kl" && c.objective != "forward-kl")
    throw std::runtime_error("unknown objective: " + c.objective);
  return c;
}
}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  return from_json(json::parse(text));
}

std::string config_to_json_text(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_json_text(ss.str());
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write config: " + path);
  f << config_to_json_text(cfg) << "\n";
}

namespace {
ExperimentConfig grid_base(double rho) {
  ExperimentConfig c;
  c.env = "grid";
  c.grid.rho = rho;
  c.lr = 1e-3;
  c.logz_lr_mult = 10.0;
  c.lr_decay = 0.5;
  c.lr_decay_every = 2500;
  c.batch = 128;
  c.iters = 20000;
  c.eval_every = 500;
  c.jsd_every = 0;
  c.logz_samples = 2000;
  return c;
}

ExperimentConfig euclid_base() {
  ExperimentConfig c;
  c.env = "euclid";
  c.objective = "tb";
  c.lr = 1e-2;
  c.logz_lr_mult = 10.0;  // log Z at 1e-1
  c.batch = 300;
  c.iters = 1500;
  c.eval_every = 100;
  c.logz_samples = 2000;
  return c;
}
}  // namespace

std::vector<std::string> preset_names() {
  return {"grid-tb-rho025",  "grid-db-rho025", "grid-fm-rho025", "grid-tb-rho01",
          "grid-db-rho01",   "euclid-9g-offpolicy-tb", "euclid-9g-onpolicy-tb",
          "euclid-funnel-smoke", "torus-r6-tb"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "grid-tb-rho025") {
    c = grid_base(0.25);
    c.objective = "tb";
  } else if (name == "grid-db-rho025") {
    c = grid_base(0.25);
    c.objective = "db-rm";
  } else if (name == "grid-fm-rho025") {
    c = grid_base(0.25);
    c.objective = "fm-rm";
  } else if (name == "grid-tb-rho01") {
    c = grid_base(0.1);
    c.objective = "tb";
  } else if (name == "grid-db-rho01") {
    c = grid_base(0.1);
    c.objective = "db-rm";
  } else if (name == "euclid-9g-offpolicy-tb") {
    c = euclid_base();
    c.sde.target = SdeTarget::NineGaussians;
    c.sde.d = 2;
    c.sde.sigma = 5.0;
    c.eps0 = 0.1;
    c.eps1 = 0.0;
  } else if (name == "euclid-9g-onpolicy-tb") {
    c = euclid_base();
    c.sde.target = SdeTarget::NineGaussians;
    c.sde.d = 2;
    c.sde.sigma = 5.0;
  } else if (name == "euclid-funnel-smoke") {
    c = euclid_base();
    c.sde.target = SdeTarget::Funnel;
    c.sde.d = 10;
    c.sde.sigma = 1.0;
    c.sde.T = 32;
    c.iters = 500;
    c.eps0 = 0.1;
    c.eps1 = 0.0;
    c.logz_samples = 6000;
  } else if (name == "torus-r6-tb") {
    c.env = "torus";
    c.objective = "tb";
    c.lr = 1e-5;
    c.logz_lr_mult = 1000.0;  // log Z at 1e-2
    c.batch = 100;
    c.iters = 5000;
    c.eval_every = 250;
    c.jsd_every = 0;
  } else {
    throw std::runtime_error("unknown preset: " + name);
  }
  c.name = name;
  return c;
}

}  // namespace gfn
