#include "dem/scenarios_io.hpp"

#include "dem/analytic.hpp"
#include "dem/verlet_integrator.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace dem {

using json = nlohmann::json;

RunConfig default_config(ScenarioName name) {
  RunConfig c;
  c.scenario = default_spec(name);
  c.vi.alpha = c.scenario.alpha;
  c.vi.h = c.scenario.time_step();
  if (name == ScenarioName::box) {
    c.trajectory_every = 2000;
    c.diagnostics_every = 100;
  }
  return c;
}

void validate(const RunConfig& c) {
  try {
    validate(c.scenario);
  } catch (const InvalidSystem& e) {
    throw ConfigError(e.what());
  }
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.steps >= 0, "steps must be >= 0");
  require(c.trajectory_every >= 1, "trajectory_every must be >= 1");
  require(c.diagnostics_every >= 1, "diagnostics_every must be >= 1");
  require(c.vi.newton_tol > 0, "newton_tol must be > 0");
  require(c.vi.newton_max >= 1, "newton_max must be >= 1");
  require(c.vi.residual_tol > 0, "residual_tol must be > 0");
  require(c.vi.cg.tolerance > 0, "cg_tol must be > 0");
  require(c.vi.cg.max_iterations >= 0, "cg_max_iter must be >= 0");
  require(c.skin > 0, "skin must be > 0");
  require(!c.output_dir.empty(), "output_dir must not be empty");
}

namespace {

std::string forcing_name(ForcingMode f) { return f == ForcingMode::folded ? "folded" : "momentum"; }

// Line and column (1-based) of a byte offset.
std::pair<int, int> locate(const std::string& text, std::size_t byte) {
  int line = 1, column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "scenario",  "dy",          "gamma",         "velocity",    "gap",          "k_bond",
      "n_particles", "box_width", "seed",          "kd_mg",       "gravity",      "integrator",
      "alpha",     "h_fraction",  "duration",      "steps",       "collisions",   "trajectory_every",
      "diagnostics_every", "newton_tol", "newton_max", "residual_tol", "cg_tol",   "cg_max_iter",
      "jacobi",    "exact_hessian", "forcing",     "skin",        "output_dir"};
  return keys;
}

template <typename T>
T get(const json& doc, const std::string& key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' has the wrong type");
  }
}

real get_number(const json& doc, const std::string& key, real fallback) {
  if (doc.contains(key) && !doc.at(key).is_number()) throw ConfigError("key '" + key + "' must be a number");
  return get<real>(doc, key, fallback);
}

template <typename Int>
Int get_integer(const json& doc, const std::string& key, Int fallback) {
  if (doc.contains(key) && !doc.at(key).is_number_integer())
    throw ConfigError("key '" + key + "' must be an integer");
  if (doc.contains(key) && std::is_unsigned_v<Int> && !doc.at(key).is_number_unsigned())
    throw ConfigError("key '" + key + "' must be a non-negative integer");
  return get<Int>(doc, key, fallback);
}

bool get_bool(const json& doc, const std::string& key, bool fallback) {
  if (doc.contains(key) && !doc.at(key).is_boolean()) throw ConfigError("key '" + key + "' must be a boolean");
  return get<bool>(doc, key, fallback);
}

std::string get_string(const json& doc, const std::string& key, const std::string& fallback) {
  if (doc.contains(key) && !doc.at(key).is_string()) throw ConfigError("key '" + key + "' must be a string");
  return get<std::string>(doc, key, fallback);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, column] = locate(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError("parse error at line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                      e.what());
  }
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!known_keys().contains(key)) throw ConfigError("unknown key '" + key + "'");
  }
  if (!doc.contains("scenario")) throw ConfigError("missing required key 'scenario'");

  ScenarioName name;
  try {
    name = scenario_from_string(get_string(doc, "scenario", ""));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("key 'scenario': ") + e.what());
  }
  RunConfig c = default_config(name);
  ScenarioSpec& s = c.scenario;

  s.dy = get_number(doc, "dy", s.dy);
  s.gamma = get_number(doc, "gamma", s.gamma);
  s.velocity = get_number(doc, "velocity", s.velocity);
  s.gap = get_number(doc, "gap", s.gap);
  s.n_particles = get_integer<int>(doc, "n_particles", s.n_particles);
  s.box_width = get_number(doc, "box_width", s.box_width);
  s.seed = get_integer<std::uint64_t>(doc, "seed", s.seed);
  s.kd_mg = get_number(doc, "kd_mg", s.kd_mg);
  s.gravity = get_bool(doc, "gravity", s.gravity);
  s.alpha = get_number(doc, "alpha", s.alpha);
  s.h_fraction = get_number(doc, "h_fraction", s.h_fraction);
  s.collisions = get_integer<int>(doc, "collisions", s.collisions);

  // Defaults derived from other keys follow those keys.
  const bool bonded = name == ScenarioName::bonded;
  s.bond_stiffness = get_number(doc, "k_bond", bonded ? s.k_n() / 4 : s.bond_stiffness);
  real duration = s.duration;
  if (name == ScenarioName::impact && s.velocity > 0) duration = s.diameter() / s.velocity + s.contact_time();
  s.duration = get_number(doc, "duration", duration);

  try {
    s.integrator = integrator_from_string(get_string(doc, "integrator", to_string(s.integrator)));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("key 'integrator': ") + e.what());
  }
  const std::string forcing = get_string(doc, "forcing", forcing_name(c.vi.forcing));
  if (forcing == "folded") {
    c.vi.forcing = ForcingMode::folded;
  } else if (forcing == "momentum") {
    c.vi.forcing = ForcingMode::momentum;
  } else {
    throw ConfigError("key 'forcing': expected folded or momentum, got '" + forcing + "'");
  }

  c.steps = get_integer<long>(doc, "steps", c.steps);
  c.trajectory_every = get_integer<int>(doc, "trajectory_every", c.trajectory_every);
  c.diagnostics_every = get_integer<int>(doc, "diagnostics_every", c.diagnostics_every);
  c.vi.newton_tol = get_number(doc, "newton_tol", c.vi.newton_tol);
  c.vi.newton_max = get_integer<int>(doc, "newton_max", c.vi.newton_max);
  c.vi.residual_tol = get_number(doc, "residual_tol", c.vi.residual_tol);
  c.vi.cg.tolerance = get_number(doc, "cg_tol", c.vi.cg.tolerance);
  c.vi.cg.max_iterations = get_integer<int>(doc, "cg_max_iter", c.vi.cg.max_iterations);
  c.vi.cg.jacobi = get_bool(doc, "jacobi", c.vi.cg.jacobi);
  c.vi.exact_hessian = get_bool(doc, "exact_hessian", c.vi.exact_hessian);
  c.skin = get_number(doc, "skin", c.skin);
  c.output_dir = get_string(doc, "output_dir", c.output_dir);

  validate(c);
  c.vi.alpha = s.alpha;
  c.vi.h = s.time_step();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("file not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string render_config(const RunConfig& c) {
  const ScenarioSpec& s = c.scenario;
  json doc = {{"scenario", to_string(s.name)},
              {"dy", s.dy},
              {"gamma", s.gamma},
              {"velocity", s.velocity},
              {"gap", s.gap},
              {"k_bond", s.bond_stiffness},
              {"n_particles", s.n_particles},
              {"box_width", s.box_width},
              {"seed", s.seed},
              {"kd_mg", s.kd_mg},
              {"gravity", s.gravity},
              {"integrator", to_string(s.integrator)},
              {"alpha", s.alpha},
              {"h_fraction", s.h_fraction},
              {"duration", s.duration},
              {"steps", c.steps},
              {"collisions", s.collisions},
              {"trajectory_every", c.trajectory_every},
              {"diagnostics_every", c.diagnostics_every},
              {"newton_tol", c.vi.newton_tol},
              {"newton_max", c.vi.newton_max},
              {"residual_tol", c.vi.residual_tol},
              {"cg_tol", c.vi.cg.tolerance},
              {"cg_max_iter", c.vi.cg.max_iterations},
              {"jacobi", c.vi.cg.jacobi},
              {"exact_hessian", c.vi.exact_hessian},
              {"forcing", forcing_name(c.vi.forcing)},
              {"skin", c.skin},
              {"output_dir", c.output_dir}};
  return doc.dump(2) + "\n";
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  const ScenarioSpec& x = a.scenario;
  const ScenarioSpec& y = b.scenario;
  const bool spec_equal = x.name == y.name && x.dy == y.dy && x.gap == y.gap && x.box_width == y.box_width &&
                          x.n_particles == y.n_particles && x.kd_mg == y.kd_mg && x.gamma == y.gamma &&
                          x.velocity == y.velocity && x.bond_stiffness == y.bond_stiffness &&
                          x.gravity == y.gravity && x.seed == y.seed && x.integrator == y.integrator &&
                          x.alpha == y.alpha && x.h_fraction == y.h_fraction && x.duration == y.duration &&
                          x.collisions == y.collisions;
  const VIConfig& u = a.vi;
  const VIConfig& w = b.vi;
  const bool vi_equal = u.alpha == w.alpha && u.h == w.h && u.newton_tol == w.newton_tol &&
                        u.newton_max == w.newton_max && u.residual_tol == w.residual_tol &&
                        u.freeze_after == w.freeze_after && u.exact_hessian == w.exact_hessian &&
                        u.forcing == w.forcing && u.cg.tolerance == w.cg.tolerance &&
                        u.cg.max_iterations == w.cg.max_iterations && u.cg.jacobi == w.cg.jacobi;
  return spec_equal && vi_equal && a.skin == b.skin && a.steps == b.steps &&
         a.trajectory_every == b.trajectory_every && a.diagnostics_every == b.diagnostics_every &&
         a.output_dir == b.output_dir;
}

Simulation::Simulation(Scenario scenario, IntegratorKind integrator, const VIConfig& vi, real skin)
    : scenario_(std::move(scenario)), integrator_(integrator), vi_(vi), detector_(skin) {
  validate(vi_);
  state_ = pack_state(scenario_.system);
}

namespace {

VIConfig vi_for(const RunConfig& config) {
  VIConfig vi = config.vi;
  vi.alpha = config.scenario.alpha;
  vi.h = config.scenario.time_step();
  return vi;
}

}  // namespace

Simulation::Simulation(const RunConfig& config)
    : Simulation(build_scenario(config.scenario), config.scenario.integrator, vi_for(config), config.skin) {}

void Simulation::step() {
  const ParticleSystem& sys = scenario_.system;
  if (integrator_ == IntegratorKind::vi) {
    VIStep next = vi_step(state_, sys, scenario_.params, vi_, detector_);
    state_ = std::move(next.state);
    report_ = next.report;
  } else {
    VerletStep next = verlet_step(state_, vi_.h, sys, scenario_.params, detector_);
    state_ = std::move(next.state);
    report_ = StepReport{};
    report_.contacts = next.contacts;
  }
}

ParticleSystem Simulation::current() const { return unpack_state(state_, scenario_.system); }

ContactSet Simulation::contacts() {
  const ParticleSystem& sys = scenario_.system;
  const Vector qdot = assemble_mass_matrix(sys).solve(state_.p);
  return detector_.detect(sys, state_.q, qdot);
}

FrameStats Simulation::stats() {
  FrameStats s = frame_stats(current(), contacts(), scenario_.params, state_.t);
  s.newton_iterations = report_.newton_iterations;
  s.cg_iterations = report_.cg_iterations;
  return s;
}

Vec3 Simulation::momentum() const {
  Vec3 total = Vec3::Zero();
  for (int i = 0; i < scenario_.system.size(); ++i) total += translation(state_.p, i);
  return total;
}

void CollisionCounter::update(const ContactSet& contacts) {
  std::vector<ContactId> now;
  for (const ContactKinematics& c : contacts)
    if (c.id.kind == ContactKind::wall && c.overlap > 0) now.push_back(c.id);
  for (const ContactId& id : active_)
    if (std::find(now.begin(), now.end(), id) == now.end()) ++completed_;
  active_ = std::move(now);
}

namespace {

TrajectoryFrame snapshot(const Simulation& sim) { return {sim.time(), sim.current().particles}; }

long step_count(const RunConfig& config) {
  if (config.steps > 0) return config.steps;
  const real ratio = config.scenario.duration / config.scenario.time_step();
  return std::max<long>(1, static_cast<long>(std::ceil(ratio - 1e-9 * ratio)));
}

}  // namespace

RunResult simulate(const RunConfig& config) {
  validate(config);
  Simulation sim(config);
  RunResult result;
  CollisionCounter counter;
  const long n = step_count(config);
  const int target = config.scenario.collisions;
  const bool count = config.scenario.name == ScenarioName::walls || target > 0;

  result.trajectory.push_back(snapshot(sim));
  result.diagnostics.push_back(sim.stats());
  long k = 0;
  while (k < n && !(target > 0 && counter.completed() >= target)) {
    sim.step();
    ++k;
    const StepReport& r = sim.last_report();
    if (r.residual_limit > 0) result.max_residual_ratio = std::max(result.max_residual_ratio, r.residual / r.residual_limit);
    if (count) counter.update(sim.contacts());
    const bool last = k == n || (target > 0 && counter.completed() >= target);
    if (k % config.trajectory_every == 0 || last) result.trajectory.push_back(snapshot(sim));
    if (k % config.diagnostics_every == 0 || last) result.diagnostics.push_back(sim.stats());
  }
  result.steps = k;
  result.collisions = counter.completed();
  result.final_system = sim.current();
  return result;
}

namespace {

void put(std::ostream& out, real x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  out.write(buf, end - buf);
}

void put_vec(std::ostream& out, const Vec3& v) {
  for (int c = 0; c < 3; ++c) {
    out << ',';
    put(out, v[c]);
  }
}

real take(const std::string& field) {
  real x = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
  if (ec != std::errc() || ptr != field.data() + field.size()) throw Error("malformed number '" + field + "'");
  return x;
}

void check(std::ostream& out) {
  if (!out) throw Error("write failed");
}

}  // namespace

void write_trajectory(std::ostream& out, const std::vector<TrajectoryFrame>& frames) {
  out << "t,id,x,y,z,vx,vy,vz,wx,wy,wz\n";
  for (const TrajectoryFrame& f : frames) {
    for (std::size_t i = 0; i < f.particles.size(); ++i) {
      const Particle& p = f.particles[i];
      put(out, f.t);
      out << ',' << i;
      put_vec(out, p.position);
      put_vec(out, p.velocity);
      put_vec(out, p.angular_velocity);
      out << '\n';
    }
  }
  check(out);
}

std::vector<TrajectoryFrame> read_trajectory(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,id,x,y,z,vx,vy,vz,wx,wy,wz") throw Error("missing trajectory header");
  std::vector<TrajectoryFrame> frames;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream row(line);
    for (std::string field; std::getline(row, field, ',');) fields.push_back(field);
    if (fields.size() != 11) throw Error("trajectory row has " + std::to_string(fields.size()) + " fields");
    const real t = take(fields[0]);
    const auto id = static_cast<std::size_t>(take(fields[1]));
    if (frames.empty() || frames.back().t != t || frames.back().particles.size() != id) {
      if (id != 0) throw Error("trajectory rows out of order");
      frames.push_back({t, {}});
    }
    Particle p;
    p.position = Vec3(take(fields[2]), take(fields[3]), take(fields[4]));
    p.velocity = Vec3(take(fields[5]), take(fields[6]), take(fields[7]));
    p.angular_velocity = Vec3(take(fields[8]), take(fields[9]), take(fields[10]));
    frames.back().particles.push_back(p);
  }
  return frames;
}

void write_diagnostics(std::ostream& out, const std::vector<FrameStats>& stats) {
  out << "t,KT,KR,V_contact,V_grav,E_total,px,py,pz,Kbar,dv,newton_iters,cg_iters\n";
  for (const FrameStats& s : stats) {
    put(out, s.t);
    for (real x : {s.kinetic_translational, s.kinetic_rotational, s.contact_potential, s.gravitational_potential,
                   s.total_energy}) {
      out << ',';
      put(out, x);
    }
    put_vec(out, s.momentum);
    out << ',';
    put(out, s.mean_kinetic);
    out << ',';
    put(out, s.velocity_fluctuation);
    out << ',' << s.newton_iterations << ',' << s.cg_iterations << '\n';
  }
  check(out);
}

RunResult run(const RunConfig& config) {
  validate(config);
  const std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  // Fail on an unwritable directory before the simulation, not after.
  std::ofstream config_out = open("config.json");
  config_out << render_config(config);
  check(config_out);

  RunResult result = simulate(config);
  std::ofstream trajectory = open("trajectory.csv");
  write_trajectory(trajectory, result.trajectory);
  std::ofstream diagnostics = open("diagnostics.csv");
  write_diagnostics(diagnostics, result.diagnostics);
  return result;
}

CompareReport compare(const RunConfig& config) {
  RunConfig vi = config;
  vi.scenario.integrator = IntegratorKind::vi;
  vi.scenario.collisions = 0;  // same number of steps for both
  vi.diagnostics_every = 1;
  RunConfig verlet = vi;
  verlet.scenario.integrator = IntegratorKind::verlet;
  const RunResult a = simulate(vi);
  const RunResult b = simulate(verlet);

  CompareReport report;
  report.steps = a.steps;
  real peak = 0, worst = 0;
  for (std::size_t k = 0; k < a.diagnostics.size(); ++k) {
    peak = std::max(peak, a.diagnostics[k].kinetic_translational);
    worst = std::max(worst, std::abs(a.diagnostics[k].kinetic_translational - b.diagnostics[k].kinetic_translational));
  }
  report.max_kinetic_difference = peak > 0 ? worst / peak : worst;
  for (int i = 0; i < a.final_system.size(); ++i) {
    const Particle& x = a.final_system.particles[i];
    const Particle& y = b.final_system.particles[i];
    report.final_position_difference = std::max(report.final_position_difference, (x.position - y.position).norm());
    report.final_velocity_difference = std::max(report.final_velocity_difference, (x.velocity - y.velocity).norm());
  }
  return report;
}

real log_log_slope(const std::vector<real>& x, const std::vector<real>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("slope fit needs at least two matching points");
  real mx = 0, my = 0;
  const auto n = static_cast<real>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw Error("slope fit needs positive data");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  real sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const real dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (!(sxx > 0)) throw Error("slope fit needs distinct abscissae");
  return sxy / sxx;
}

ConvergenceStudy convergence_study(real alpha, real gamma, const std::vector<real>& fractions, ForcingMode forcing) {
  ConvergenceStudy study;
  study.alpha = alpha;
  study.fractions = fractions;
  for (real fraction : fractions) {
    ScenarioSpec spec = default_spec(ScenarioName::impact);
    spec.gamma = gamma;
    spec.alpha = alpha;
    spec.h_fraction = fraction;
    Scenario scenario = build_scenario(spec);
    // start exactly at contact onset
    const real d = spec.diameter();
    scenario.system.particles[0].position.x() = d / 2;
    scenario.system.particles[1].position.x() = -d / 2;

    VIConfig vi;
    vi.alpha = alpha;
    vi.h = spec.time_step();
    vi.forcing = forcing;
    Simulation sim(scenario, IntegratorKind::vi, vi);
    const long n = std::lround(0.75 * fraction);
    if (std::abs(0.75 * fraction - static_cast<real>(n)) > 1e-9)
      throw Error("convergence fractions must be multiples of 4");
    for (long k = 0; k < n; ++k) sim.step();

    analytic::ImpactParams<real> oracle;
    oracle.d = d;
    oracle.m = spec.mass();
    oracle.k_n = spec.k_n();
    oracle.gamma = gamma;
    oracle.v = spec.velocity;
    const real exact = analytic::impact_velocity(static_cast<real>(n) * vi.h, oracle);
    const real numeric = sim.current().particles[0].velocity.x();
    study.step_sizes.push_back(vi.h);
    study.errors.push_back(std::abs(numeric - exact));
  }
  study.slope = log_log_slope(study.step_sizes, study.errors);
  return study;
}

}  // namespace dem
