// Experiment command line: curriculum runs across methods and seeds, the
// per-stage transfer audit, and small artifact utilities (heatmaps, barycenter
// interpolation, contextual metric tables).
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradient/curriculum.hpp"
#include "gradient/curriculum_embed.hpp"
#include "gradient/io.hpp"
#include "gradient/maze.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gradient;

namespace {

// ---------------------------------------------------------------------------
// Configuration parsing (fail-closed: unknown keys are rejected).
// ---------------------------------------------------------------------------

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
}

void reject_unknown_keys(const json& obj, const std::string& where,
                         const std::vector<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw std::invalid_argument(where + ": unknown key \"" + it.key() + "\"");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

struct DistributionSpec {
  std::string type;  // maze: goal_distance_band | uniform | cells
                     // goal field: ring | points
  int band_min = 0, band_max = 0;
  std::vector<std::pair<int, int>> cells;
  Matrix points;
  Vector weights;  // empty -> uniform
};

DistributionSpec parse_distribution(const json& j, const std::string& where) {
  require_object(j, where);
  DistributionSpec d;
  d.type = j.at("type").get<std::string>();
  if (d.type == "goal_distance_band") {
    reject_unknown_keys(j, where, {"type", "min", "max"});
    d.band_min = j.at("min").get<int>();
    d.band_max = j.at("max").get<int>();
    if (d.band_min < 0 || d.band_max < d.band_min)
      throw std::invalid_argument(where + ": band requires 0 <= min <= max");
  } else if (d.type == "uniform") {
    reject_unknown_keys(j, where, {"type"});
  } else if (d.type == "cells") {
    reject_unknown_keys(j, where, {"type", "cells"});
    for (const auto& rc : j.at("cells")) {
      if (!rc.is_array() || rc.size() != 2)
        throw std::invalid_argument(where + ": each cell must be [row, col]");
      d.cells.emplace_back(rc[0].get<int>(), rc[1].get<int>());
    }
    if (d.cells.empty()) throw std::invalid_argument(where + ": empty cell list");
  } else if (d.type == "ring") {
    reject_unknown_keys(j, where, {"type", "center", "radius", "count"});
    const auto& c = j.at("center");
    if (!c.is_array() || c.size() != 2)
      throw std::invalid_argument(where + ": center must be [x, y]");
    double cx = c[0].get<double>(), cy = c[1].get<double>();
    double r = j.at("radius").get<double>();
    int n = j.at("count").get<int>();
    if (r <= 0.0 || n < 1) throw std::invalid_argument(where + ": positive radius/count");
    d.points.resize(n, 2);
    for (int i = 0; i < n; ++i) {
      double a = 2.0 * M_PI * i / n;
      d.points.row(i) << cx + r * std::cos(a), cy + r * std::sin(a);
    }
  } else if (d.type == "points") {
    reject_unknown_keys(j, where, {"type", "points", "weights"});
    const auto& pts = j.at("points");
    if (!pts.is_array() || pts.empty())
      throw std::invalid_argument(where + ": nonempty points array required");
    d.points.resize(pts.size(), 2);
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!pts[i].is_array() || pts[i].size() != 2)
        throw std::invalid_argument(where + ": each point must be [x, y]");
      d.points(i, 0) = pts[i][0].get<double>();
      d.points(i, 1) = pts[i][1].get<double>();
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      if (w.size() != pts.size())
        throw std::invalid_argument(where + ": weight/point count mismatch");
      d.weights.resize(w.size());
      for (size_t i = 0; i < w.size(); ++i) d.weights[i] = w[i].get<double>();
    }
  } else {
    throw std::invalid_argument(where + ": unknown distribution type \"" + d.type + "\"");
  }
  return d;
}

struct ExperimentConfig {
  std::string env_kind;  // maze | goal_field
  std::string layout_path;
  std::string preset;  // goal field preset
  double gamma = 0.99;
  DistributionSpec source, target;
  std::vector<std::string> methods;
  CurriculumConfig curriculum;
  LearnerConfig learner;
  EmbedTrainConfig embed;
  double model_bandwidth = 0.0, model_ridge = 1e-6;
  int model_buffer = 1000, min_model_samples = 50, pool_size = 256;
  std::vector<unsigned long> seeds;
  std::string output_dir;
  std::vector<double> delta_alphas;  // audit sweep; empty -> curriculum value
};

const std::vector<std::string> kMazeMethods = {"gradient", "linear", "domain_randomization",
                                               "no_curriculum"};

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  json j = json::parse(in);
  require_object(j, "config");
  reject_unknown_keys(j, "config",
                      {"schema_version", "environment", "source", "target", "method",
                       "curriculum", "learner", "embed", "seeds", "output_dir", "delta_alphas"});
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
    throw std::invalid_argument("config: schema_version 1 required");

  ExperimentConfig cfg;
  const json& env = j.at("environment");
  require_object(env, "environment");
  cfg.env_kind = env.at("kind").get<std::string>();
  if (cfg.env_kind == "maze") {
    reject_unknown_keys(env, "environment", {"kind", "layout", "gamma"});
    cfg.layout_path = env.at("layout").get<std::string>();
    cfg.gamma = get_or(env, "gamma", 0.99);
  } else if (cfg.env_kind == "goal_field") {
    reject_unknown_keys(env, "environment", {"kind", "preset"});
    cfg.preset = env.at("preset").get<std::string>();
    if (cfg.preset != "u_corridor")
      throw std::invalid_argument("environment: unknown goal field preset \"" + cfg.preset + "\"");
  } else {
    throw std::invalid_argument("environment: kind must be maze or goal_field");
  }

  cfg.source = parse_distribution(j.at("source"), "source");
  cfg.target = parse_distribution(j.at("target"), "target");

  const json& m = j.at("method");
  if (m.is_string()) {
    cfg.methods.push_back(m.get<std::string>());
  } else if (m.is_array()) {
    for (const auto& e : m) cfg.methods.push_back(e.get<std::string>());
  } else {
    throw std::invalid_argument("method: string or array of strings required");
  }
  if (cfg.methods.empty()) throw std::invalid_argument("method: at least one required");
  for (const auto& name : cfg.methods) {
    bool maze_method =
        std::find(kMazeMethods.begin(), kMazeMethods.end(), name) != kMazeMethods.end();
    if (name == "gradient_embedded") {
      if (cfg.env_kind != "goal_field")
        throw std::invalid_argument("method gradient_embedded requires a goal_field environment");
    } else if (maze_method) {
      if (cfg.env_kind != "maze")
        throw std::invalid_argument("method " + name + " requires a maze environment");
    } else {
      throw std::invalid_argument("method: unknown method \"" + name + "\"");
    }
  }
  for (size_t a = 0; a < cfg.methods.size(); ++a)
    for (size_t b = a + 1; b < cfg.methods.size(); ++b)
      if (cfg.methods[a] == cfg.methods[b])
        throw std::invalid_argument("method: duplicate method \"" + cfg.methods[a] + "\"");

  if (j.contains("curriculum")) {
    const json& c = j.at("curriculum");
    require_object(c, "curriculum");
    reject_unknown_keys(c, "curriculum",
                        {"delta_alpha", "reward_threshold", "max_stages", "max_rounds_per_stage",
                         "eval_episodes", "eval_every_steps", "reset_exploration_each_stage",
                         "barycenter_epsilon"});
    cfg.curriculum.delta_alpha = get_or(c, "delta_alpha", cfg.curriculum.delta_alpha);
    cfg.curriculum.reward_threshold =
        get_or(c, "reward_threshold", cfg.curriculum.reward_threshold);
    cfg.curriculum.max_stages = get_or(c, "max_stages", cfg.curriculum.max_stages);
    cfg.curriculum.max_rounds_per_stage =
        get_or(c, "max_rounds_per_stage", cfg.curriculum.max_rounds_per_stage);
    cfg.curriculum.eval_episodes = get_or(c, "eval_episodes", cfg.curriculum.eval_episodes);
    cfg.curriculum.eval_every_steps =
        get_or(c, "eval_every_steps", cfg.curriculum.eval_every_steps);
    cfg.curriculum.reset_exploration_each_stage =
        get_or(c, "reset_exploration_each_stage", cfg.curriculum.reset_exploration_each_stage);
    cfg.curriculum.barycenter.epsilon =
        get_or(c, "barycenter_epsilon", cfg.curriculum.barycenter.epsilon);
  }
  cfg.curriculum.validate();

  if (j.contains("learner")) {
    const json& l = j.at("learner");
    require_object(l, "learner");
    reject_unknown_keys(l, "learner",
                        {"learning_rate", "epsilon_start", "epsilon_end",
                         "epsilon_decay_episodes", "episodes_per_round", "max_episode_steps"});
    cfg.learner.learning_rate = get_or(l, "learning_rate", cfg.learner.learning_rate);
    cfg.learner.epsilon_start = get_or(l, "epsilon_start", cfg.learner.epsilon_start);
    cfg.learner.epsilon_end = get_or(l, "epsilon_end", cfg.learner.epsilon_end);
    cfg.learner.epsilon_decay_episodes =
        get_or(l, "epsilon_decay_episodes", cfg.learner.epsilon_decay_episodes);
    cfg.learner.episodes_per_round =
        get_or(l, "episodes_per_round", cfg.learner.episodes_per_round);
    cfg.learner.max_episode_steps =
        get_or(l, "max_episode_steps", cfg.learner.max_episode_steps);
  }
  cfg.learner.validate();

  if (j.contains("embed")) {
    const json& e = j.at("embed");
    require_object(e, "embed");
    reject_unknown_keys(e, "embed",
                        {"lambda", "learning_rate", "epochs", "batch_size", "n_pairs", "hidden",
                         "latent_dim", "seed", "model_buffer", "min_model_samples", "pool_size",
                         "model_bandwidth", "model_ridge"});
    cfg.embed.lambda = get_or(e, "lambda", cfg.embed.lambda);
    cfg.embed.learning_rate = get_or(e, "learning_rate", cfg.embed.learning_rate);
    cfg.embed.epochs = get_or(e, "epochs", cfg.embed.epochs);
    cfg.embed.batch_size = get_or(e, "batch_size", cfg.embed.batch_size);
    cfg.embed.n_pairs = get_or(e, "n_pairs", cfg.embed.n_pairs);
    cfg.embed.hidden = get_or(e, "hidden", cfg.embed.hidden);
    cfg.embed.latent_dim = get_or(e, "latent_dim", cfg.embed.latent_dim);
    cfg.embed.seed = get_or(e, "seed", cfg.embed.seed);
    cfg.model_buffer = get_or(e, "model_buffer", cfg.model_buffer);
    cfg.min_model_samples = get_or(e, "min_model_samples", cfg.min_model_samples);
    cfg.pool_size = get_or(e, "pool_size", cfg.pool_size);
    cfg.model_bandwidth = get_or(e, "model_bandwidth", cfg.model_bandwidth);
    cfg.model_ridge = get_or(e, "model_ridge", cfg.model_ridge);
  }

  for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<unsigned long>());
  if (cfg.seeds.empty()) throw std::invalid_argument("seeds: at least one required");
  for (size_t a = 0; a < cfg.seeds.size(); ++a)
    for (size_t b = a + 1; b < cfg.seeds.size(); ++b)
      if (cfg.seeds[a] == cfg.seeds[b])
        throw std::invalid_argument("seeds: duplicate seed " + std::to_string(cfg.seeds[a]));

  cfg.output_dir = j.at("output_dir").get<std::string>();
  if (cfg.output_dir.empty()) throw std::invalid_argument("output_dir: nonempty path required");

  if (j.contains("delta_alphas")) {
    for (const auto& d : j.at("delta_alphas")) cfg.delta_alphas.push_back(d.get<double>());
    for (double d : cfg.delta_alphas)
      if (d <= 0.0 || d > 1.0)
        throw std::invalid_argument("delta_alphas: values in (0,1] required");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Maze helpers.
// ---------------------------------------------------------------------------

Categorical maze_distribution(const MazeCMDP& m, const DistributionSpec& spec,
                              const std::string& where) {
  Vector w = Vector::Zero(m.cmdp.n_contexts);
  if (spec.type == "uniform") {
    w.setOnes();
  } else if (spec.type == "goal_distance_band") {
    std::vector<int> dist = maze_goal_distances(m);
    for (int c = 0; c < m.cmdp.n_contexts; ++c) {
      int d = dist[m.cmdp.initial_state(c)];
      if (d >= spec.band_min && d <= spec.band_max) w[c] = 1.0;
    }
  } else if (spec.type == "cells") {
    for (auto [r, cc] : spec.cells) {
      if (r < 0 || r >= m.layout.height || cc < 0 || cc >= m.layout.width)
        throw std::invalid_argument(where + ": cell outside the layout");
      int state = m.cell_state[r * m.layout.width + cc];
      int ctx = -1;
      for (int c = 0; c < m.cmdp.n_contexts; ++c)
        if (m.cmdp.initial_state(c) == state) ctx = c;
      if (state < 0 || ctx < 0)
        throw std::invalid_argument(where + ": cell is not a start context");
      w[ctx] += 1.0;
    }
  } else {
    throw std::invalid_argument(where + ": distribution type not valid for a maze");
  }
  double total = w.sum();
  if (total <= 0.0) throw std::invalid_argument(where + ": empty support on this layout");
  return Categorical(w / total);
}

Particles particle_distribution(const DistributionSpec& spec, const std::string& where) {
  if (spec.type != "ring" && spec.type != "points")
    throw std::invalid_argument(where + ": distribution type not valid for a goal field");
  if (spec.weights.size() > 0) return Particles(spec.points, spec.weights);
  return Particles(spec.points);
}

/// Contextual ground metric of the reference maze: the exact deterministic
/// bisimulation metric under the optimal policy, restricted to start contexts.
CostMatrix maze_context_cost(const MazeCMDP& m) {
  DistanceTable full =
      exact_metric_deterministic(m.cmdp, value_iteration(m.cmdp).policy, m.cmdp.gamma);
  Matrix sub(m.cmdp.n_contexts, m.cmdp.n_contexts);
  for (int i = 0; i < m.cmdp.n_contexts; ++i)
    for (int j = 0; j < m.cmdp.n_contexts; ++j)
      sub(i, j) = full.values(m.cmdp.initial_state(i), m.cmdp.initial_state(j));
  return CostMatrix(std::move(sub));
}

/// Context coordinate rows (row, col) matching the context ordering.
Matrix maze_context_coords(const MazeCMDP& m) {
  Matrix coords(m.cmdp.n_contexts, 2);
  for (int c = 0; c < m.cmdp.n_contexts; ++c) {
    int cell = m.state_cell[m.cmdp.initial_state(c)];
    coords(c, 0) = cell / m.layout.width;
    coords(c, 1) = cell % m.layout.width;
  }
  return coords;
}

CurriculumMethod method_from_name(const std::string& name) {
  for (CurriculumMethod m : {CurriculumMethod::Gradient, CurriculumMethod::Linear,
                             CurriculumMethod::DomainRandomization,
                             CurriculumMethod::NoCurriculum})
    if (name == method_name(m)) return m;
  throw std::invalid_argument("unknown maze method " + name);
}

std::string stage_file(int k, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "stage_%03d.%s", k, ext);
  return buf;
}

// ---------------------------------------------------------------------------
// Run subcommand.
// ---------------------------------------------------------------------------

struct JobResult {
  std::vector<CurvePoint> curve;
  long ttt = kNotReached;
  std::vector<fs::path> files;  // relative to the output root
  bool failed = false;
  std::string error;
};

/// Executes fn(i) for i in [0, n) on a bounded worker pool.
void parallel_for(int n, const std::function<void(int)>& fn) {
  unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), n));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

/// Step-function resample of a learning curve at time t (carry the last
/// evaluation forward; carry the first one back before any evaluation).
double curve_value_at(const std::vector<CurvePoint>& curve, long t) {
  double v = curve.front().eval_return;
  for (const CurvePoint& p : curve) {
    if (p.env_steps > t) break;
    v = p.eval_return;
  }
  return v;
}

long median_time(std::vector<long> ttts) {
  auto later = [](long a, long b) {
    unsigned long ua = a == kNotReached ? ~0UL : static_cast<unsigned long>(a);
    unsigned long ub = b == kNotReached ? ~0UL : static_cast<unsigned long>(b);
    return ua < ub;
  };
  std::sort(ttts.begin(), ttts.end(), later);
  return ttts[(ttts.size() - 1) / 2];
}

int run_experiment(const std::string& config_path) {
  ExperimentConfig cfg = parse_config(config_path);
  fs::path root(cfg.output_dir);
  fs::create_directories(root);

  const int n_methods = static_cast<int>(cfg.methods.size());
  const int n_seeds = static_cast<int>(cfg.seeds.size());
  std::vector<JobResult> results(n_methods * n_seeds);

  if (cfg.env_kind == "maze") {
    MazeCMDP maze = maze_from_layout(MazeLayout::load(cfg.layout_path), cfg.gamma);
    Categorical mu = maze_distribution(maze, cfg.source, "source");
    Categorical nu = maze_distribution(maze, cfg.target, "target");
    bool needs_cost = false;
    for (const auto& name : cfg.methods)
      if (name == "gradient") needs_cost = true;
    CostMatrix cost = needs_cost ? maze_context_cost(maze) : CostMatrix(Matrix::Zero(1, 1));
    Matrix coords = maze_context_coords(maze);

    parallel_for(n_methods * n_seeds, [&](int idx) {
      JobResult& out = results[idx];
      const std::string& mname = cfg.methods[idx / n_seeds];
      unsigned long seed = cfg.seeds[idx % n_seeds];
      fs::path rel = fs::path(mname) / std::to_string(seed);
      try {
        Rng rng(seed);
        CurriculumResult res = curriculum_run(maze.cmdp, mu, nu, method_from_name(mname),
                                              cfg.curriculum, cfg.learner, cost, rng);
        out.curve = res.trace.curve;
        out.ttt = time_to_threshold(res.trace.curve, cfg.curriculum.reward_threshold);
        io::write_text_file(root / rel / "curve.csv", io::curve_csv(res.trace.curve));
        out.files.push_back(rel / "curve.csv");
        io::write_text_file(root / rel / "stages.csv", io::stages_csv(res.trace));
        out.files.push_back(rel / "stages.csv");
        for (size_t k = 0; k < res.trace.stages.size(); ++k) {
          const Categorical& rho = res.trace.stages[k].distribution;
          fs::path csv = rel / stage_file(static_cast<int>(k), "csv");
          io::write_text_file(root / csv, io::distribution_csv(coords, rho.weights));
          out.files.push_back(csv);
          fs::path pgm = rel / stage_file(static_cast<int>(k), "pgm");
          io::write_text_file(root / pgm, io::maze_heatmap_pgm(maze, rho));
          out.files.push_back(pgm);
        }
      } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
      }
    });
  } else {
    GoalField field = GoalField::u_corridor();
    Particles mu = particle_distribution(cfg.source, "source");
    Particles nu = particle_distribution(cfg.target, "target");
    EmbeddedCurriculumConfig ecfg;
    ecfg.base = cfg.curriculum;
    ecfg.embed = cfg.embed;
    ecfg.model_buffer = cfg.model_buffer;
    ecfg.min_model_samples = cfg.min_model_samples;
    ecfg.pool_size = cfg.pool_size;
    ecfg.model_bandwidth = cfg.model_bandwidth;
    ecfg.model_ridge = cfg.model_ridge;

    parallel_for(n_methods * n_seeds, [&](int idx) {
      JobResult& out = results[idx];
      const std::string& mname = cfg.methods[idx / n_seeds];
      unsigned long seed = cfg.seeds[idx % n_seeds];
      fs::path rel = fs::path(mname) / std::to_string(seed);
      try {
        Rng rng(seed);
        EmbedCurriculumResult res = gradient_with_embedding(field, mu, nu, ecfg, cfg.learner, rng);
        out.curve = res.trace.curve;
        out.ttt = time_to_threshold(res.trace.curve, cfg.curriculum.reward_threshold);
        io::write_text_file(root / rel / "curve.csv", io::curve_csv(res.trace.curve));
        out.files.push_back(rel / "curve.csv");
        io::write_text_file(root / rel / "stages.csv", io::embed_stages_csv(res.trace));
        out.files.push_back(rel / "stages.csv");
        for (size_t k = 0; k < res.trace.stages.size(); ++k) {
          fs::path csv = rel / stage_file(static_cast<int>(k), "csv");
          io::write_text_file(root / csv,
                              io::distribution_csv(res.trace.stages[k].distribution));
          out.files.push_back(csv);
        }
      } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
      }
    });
  }

  // Aggregation (after the full barrier above).
  std::vector<fs::path> all_files;
  std::ostringstream agg, ttt;
  agg << "method,env_steps,eval_return_mean,eval_return_std\n";
  ttt << "method,seed,time_to_threshold\n";
  bool any_failed = false;
  for (int mi = 0; mi < n_methods; ++mi) {
    std::vector<const JobResult*> ok;
    std::vector<long> ttts;
    for (int si = 0; si < n_seeds; ++si) {
      const JobResult& r = results[mi * n_seeds + si];
      if (r.failed) {
        any_failed = true;
        std::cerr << "run failed: method=" << cfg.methods[mi] << " seed=" << cfg.seeds[si]
                  << ": " << r.error << "\n";
        continue;
      }
      for (const auto& f : r.files) all_files.push_back(f);
      if (!r.curve.empty()) ok.push_back(&r);
      ttts.push_back(r.ttt);
      ttt << cfg.methods[mi] << "," << cfg.seeds[si] << "," << r.ttt << "\n";
    }
    if (!ttts.empty())
      ttt << cfg.methods[mi] << ",median," << median_time(ttts) << "\n";
    if (ok.empty()) continue;
    long horizon = 0;
    for (const JobResult* r : ok) horizon = std::max(horizon, r->curve.back().env_steps);
    const long step = cfg.curriculum.eval_every_steps;
    for (long t = step; t <= horizon + step - 1; t += step) {
      long tt = std::min(t, horizon);
      double mean = 0.0;
      for (const JobResult* r : ok) mean += curve_value_at(r->curve, tt);
      mean /= ok.size();
      double var = 0.0;
      for (const JobResult* r : ok) {
        double d = curve_value_at(r->curve, tt) - mean;
        var += d * d;
      }
      agg << cfg.methods[mi] << "," << tt << "," << io::format_double(mean) << ","
          << io::format_double(std::sqrt(var / ok.size())) << "\n";
      if (tt == horizon) break;
    }
  }
  io::write_text_file(root / "aggregate.csv", agg.str());
  all_files.push_back("aggregate.csv");
  io::write_text_file(root / "time_to_threshold.csv", ttt.str());
  all_files.push_back("time_to_threshold.csv");
  io::write_text_file(root / "manifest.txt", io::manifest(root, all_files));
  return any_failed ? 2 : 0;
}

// ---------------------------------------------------------------------------
// Audit subcommand.
// ---------------------------------------------------------------------------

int run_audit(const std::string& config_path) {
  ExperimentConfig cfg = parse_config(config_path);
  if (cfg.env_kind != "maze")
    throw std::invalid_argument("audit: a discrete maze environment is required");
  MazeCMDP maze = maze_from_layout(MazeLayout::load(cfg.layout_path), cfg.gamma);
  Categorical mu = maze_distribution(maze, cfg.source, "source");
  Categorical nu = maze_distribution(maze, cfg.target, "target");
  CostMatrix cost = maze_context_cost(maze);

  std::vector<double> sweep =
      cfg.delta_alphas.empty() ? std::vector<double>{cfg.curriculum.delta_alpha}
                               : cfg.delta_alphas;
  fs::path root = fs::path(cfg.output_dir) / "audit";
  std::vector<fs::path> files;
  for (double da : sweep) {
    int n_stages = static_cast<int>(std::ceil(1.0 / da - 1e-12)) + 1;
    std::vector<Categorical> stages;
    for (int k = 0; k < n_stages; ++k)
      stages.push_back(gradient_stage_distribution(mu, nu, std::min(k * da, 1.0), cost,
                                                   cfg.curriculum.barycenter));
    std::vector<AuditRow> rows = transfer_gap_audit(maze.cmdp, stages, cost);
    std::ostringstream tag;  // short form (%g-style) keeps filenames readable
    tag << da;
    fs::path name = "audit_dalpha_" + tag.str() + ".csv";
    io::write_text_file(root / name, io::audit_csv(rows, da));
    files.push_back(name);
  }
  io::write_text_file(root / "manifest.txt", io::manifest(root, files));
  return 0;
}

// ---------------------------------------------------------------------------
// Utility subcommands.
// ---------------------------------------------------------------------------

int render_heatmap(const std::string& dist_path, const std::string& layout_path,
                   std::string out_path) {
  MazeCMDP maze = maze_from_layout(MazeLayout::load(layout_path), 0.99);
  auto [coords, weights] = io::read_distribution_csv(dist_path);
  if (coords.rows() != maze.cmdp.n_contexts || coords.cols() != 2)
    throw std::invalid_argument("heatmap: distribution rows must match the layout contexts");
  Matrix expect = maze_context_coords(maze);
  if ((coords - expect).cwiseAbs().maxCoeff() > 0.0)
    throw std::invalid_argument("heatmap: distribution coordinates do not match the layout");
  Categorical rho(weights);
  if (out_path.empty()) out_path = fs::path(dist_path).replace_extension(".pgm").string();
  io::write_text_file(out_path, io::maze_heatmap_pgm(maze, rho));
  return 0;
}

int interpolate_barycenter(const std::string& mu_path, const std::string& nu_path, double alpha,
                           const std::string& metric_name, const std::string& out_path) {
  auto [mp, mw] = io::read_distribution_csv(mu_path);
  auto [np, nw] = io::read_distribution_csv(nu_path);
  Particles mu(mp, mw), nu(np, nw);
  ContextMetric metric;
  if (metric_name == "sq_l2") {
    metric = [](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
      return (a - b).squaredNorm();
    };
  } else if (metric_name == "l2") {
    metric = [](const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
      return (a - b).norm();
    };
  } else {
    throw std::invalid_argument("barycenter: metric must be l2 or sq_l2");
  }
  Particles rho = barycenter_free_support(mu, nu, alpha, metric);
  std::string csv = io::distribution_csv(rho);
  if (out_path.empty())
    std::cout << csv;
  else
    io::write_text_file(out_path, csv);
  return 0;
}

int metric_table(const std::string& layout_path, const std::string& policy_name, double gamma,
                 const std::string& out_path) {
  MazeCMDP maze = maze_from_layout(MazeLayout::load(layout_path), gamma);
  DistanceTable table;
  if (policy_name == "optimal") {
    table = exact_metric_deterministic(maze.cmdp, value_iteration(maze.cmdp).policy, gamma);
  } else if (policy_name == "random") {
    table = pi_contextual_distance(maze.cmdp,
                                   Policy::uniform(maze.cmdp.n_states, maze.cmdp.n_actions),
                                   gamma);
  } else {
    throw std::invalid_argument("metric: policy must be optimal or random");
  }
  std::string csv = io::distance_table_csv(table);
  if (out_path.empty())
    std::cout << csv;
  else
    io::write_text_file(out_path, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curriculum experiment runner"};
  app.require_subcommand(1);

  std::string config_path, dist_path, layout_path, out_path;
  std::string mu_path, nu_path, metric_name = "sq_l2", policy_name = "optimal";
  double alpha = 0.5, gamma = 0.99;

  CLI::App* run = app.add_subcommand("run", "execute a configured experiment");
  run->add_option("config", config_path, "JSON experiment configuration")->required();

  CLI::App* audit = app.add_subcommand("audit", "per-stage transfer audit");
  audit->add_option("config", config_path, "JSON experiment configuration")->required();

  CLI::App* heat = app.add_subcommand("heatmap", "render a context distribution as PGM");
  heat->add_option("dist", dist_path, "distribution CSV")->required();
  heat->add_option("layout", layout_path, "maze layout file")->required();
  heat->add_option("-o,--output", out_path, "output PGM path");

  CLI::App* bary = app.add_subcommand("barycenter", "free-support interpolation of two clouds");
  bary->add_option("mu", mu_path, "source cloud CSV")->required();
  bary->add_option("nu", nu_path, "target cloud CSV")->required();
  bary->add_option("--alpha", alpha, "interpolation parameter in [0,1]")->required();
  bary->add_option("--metric", metric_name, "ground metric: l2 or sq_l2");
  bary->add_option("-o,--output", out_path, "output CSV path (default stdout)");

  CLI::App* met = app.add_subcommand("metric", "contextual distance table for a maze layout");
  met->add_option("layout", layout_path, "maze layout file")->required();
  met->add_option("--policy", policy_name, "policy: optimal or random");
  met->add_option("--gamma", gamma, "discount factor");
  met->add_option("-o,--output", out_path, "output CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return run_experiment(config_path);
    if (audit->parsed()) return run_audit(config_path);
    if (heat->parsed()) return render_heatmap(dist_path, layout_path, out_path);
    if (bary->parsed()) {
      if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("barycenter: alpha in [0,1] required");
      return interpolate_barycenter(mu_path, nu_path, alpha, metric_name, out_path);
    }
    if (met->parsed()) return metric_table(layout_path, policy_name, gamma, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
