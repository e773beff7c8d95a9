#include "biascal/config.hpp"

#include "biascal/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace biascal {

namespace {

using json = nlohmann::ordered_json;

class Object {
 public:
  Object(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Object() = default;
  Object(const Object&) = delete;
  Object& operator=(const Object&) = delete;

  [[nodiscard]] const std::string& where() const { return where_; }
  [[nodiscard]] std::string path(const std::string& key) const { return where_ + "." + key; }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& at(const std::string& key) {
    const json* v = find(key);
    if (!v) throw ConfigError(where_ + ": missing key '" + key + "'");
    return *v;
  }
  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return find(key) ? number(key) : fallback; }
  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return find(key) ? string(key) : fallback;
  }
  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(path(key) + ": expected true or false");
    return v->get<bool>();
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
      throw ConfigError(path(key) + ": expected a non-negative integer");
    return v->get<std::uint64_t>();
  }
  std::vector<double> numbers(const std::string& key) {
    const json* v = find(key);
    if (!v) return {};
    if (!v->is_array()) throw ConfigError(path(key) + ": expected a list of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) throw ConfigError(path(key) + ": expected a list of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  void done() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

Points unique_rows(const Points& p, bool sorted) {
  std::vector<std::vector<double>> rows;
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    std::vector<double> r(p.row(i).data(), p.row(i).data() + p.cols());
    if (seen.insert(r).second) rows.push_back(std::move(r));
  }
  if (sorted) rows.assign(seen.begin(), seen.end());
  Points out(static_cast<Eigen::Index>(rows.size()), p.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index k = 0; k < p.cols(); ++k) out(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  return out;
}

// A 1-D grid {"start", "stop", "step"}; nodes are start + (stop - start)·k/count.
Points grid_points(const json& j, const std::string& where) {
  Object o(j, where);
  const double a = o.number("start");
  const double b = o.number("stop");
  const double h = o.number("step");
  o.done();
  if (!(h > 0.0) || !(b >= a)) throw ConfigError(where + ": need step > 0 and stop >= start");
  const auto n = static_cast<Eigen::Index>(std::llround((b - a) / h));
  Points p(n + 1, 1);
  for (Eigen::Index k = 0; k <= n; ++k) p(k, 0) = n == 0 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(n);
  return p;
}

// A list of coordinates: [[x0, x1], ...], a flat list for 1-D, or a grid object.
Points parse_points(const json& j, const std::string& where, Eigen::Index dim) {
  if (j.is_object()) {
    Object o(j, where);
    Points p = grid_points(o.at("grid"), where + ".grid");
    o.done();
    if (dim != 1) throw ConfigError(where + ": grids are one-dimensional");
    return p;
  }
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty list of coordinates");
  Points p(static_cast<Eigen::Index>(j.size()), dim);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const auto r = static_cast<Eigen::Index>(i);
    if (e.is_number() && dim == 1) {
      p(r, 0) = e.get<double>();
    } else if (e.is_array() && static_cast<Eigen::Index>(e.size()) == dim) {
      for (Eigen::Index k = 0; k < dim; ++k) {
        if (!e[static_cast<std::size_t>(k)].is_number()) throw ConfigError(where + ": coordinates must be numbers");
        p(r, k) = e[static_cast<std::size_t>(k)].get<double>();
      }
    } else {
      throw ConfigError(where + ": coordinate " + std::to_string(i) + " must have " + std::to_string(dim) +
                        " component(s)");
    }
  }
  return p;
}

Prior parse_prior(const json& j, const std::string& where, const std::string& default_name) {
  Object o(j, where);
  Prior p;
  p.name = o.string("name", default_name);
  const std::string type = o.string("type");
  if (type == "normal") {
    p.distribution = NormalPrior{o.number("mu"), o.number("sigma")};
  } else if (type == "lognormal") {
    p.distribution = LogNormalPrior{o.number("mu"), o.number("sigma")};
  } else if (type == "uniform") {
    p.distribution = UniformPrior{o.number("a"), o.number("b")};
  } else {
    throw ConfigError(where + ".type: unknown prior '" + type + "' (normal, lognormal, uniform)");
  }
  o.done();
  p.validate();
  return p;
}

Kernel parse_kernel_at(const json& j, const std::string& where, const Points& training, const AffineScaling& scaling) {
  Object o(j, where);
  if (j.size() != 1) throw ConfigError(where + ": a kernel node has exactly one key");
  const std::string kind = j.begin().key();
  const json& body = o.at(kind);
  const std::string here = where + "." + kind;
  Kernel out = Kernel::constant(0.0);
  if (kind == "sum" || kind == "product") {
    if (!body.is_array() || body.size() < 2) throw ConfigError(here + ": expected a list of at least two kernels");
    out = parse_kernel_at(body[0], here + "[0]", training, scaling);
    for (std::size_t i = 1; i < body.size(); ++i) {
      Kernel next = parse_kernel_at(body[i], here + "[" + std::to_string(i) + "]", training, scaling);
      out = kind == "sum" ? out + next : out * next;
    }
  } else if (kind == "constant") {
    if (body.is_object() && body.contains("value") && !body.contains("free") && body.size() == 1) {
      out = Kernel::constant(parse_hyperparameter(body.at("value"), here + ".value"));
    } else {
      out = Kernel::constant(parse_hyperparameter(body, here));
    }
  } else if (kind == "matern32" || kind == "rbf") {
    Object b(body, here);
    const Hyperparameter amp = parse_hyperparameter(b.at("amplitude"), here + ".amplitude");
    const Hyperparameter len = parse_hyperparameter(b.at("lengthscale"), here + ".lengthscale");
    b.done();
    out = kind == "matern32" ? Kernel::matern32(amp, len) : Kernel::rbf(amp, len);
  } else if (kind == "white_noise") {
    Object b(body, here);
    out = Kernel::white_noise(parse_hyperparameter(b.at("variance"), here + ".variance"));
    b.done();
  } else if (kind == "heteroscedastic") {
    Object b(body, here);
    Points anchors;
    const json* a = b.find("anchors");
    if (!a || (a->is_string() && a->get<std::string>() == "training")) {
      anchors = unique_rows(training, false);
    } else {
      anchors = scaling.apply(parse_points(*a, here + ".anchors", training.cols()));
    }
    std::vector<Hyperparameter> lv;
    const json& lj = b.at("log_variance");
    if (lj.is_array()) {
      if (static_cast<Eigen::Index>(lj.size()) != anchors.rows())
        throw ConfigError(here + ".log_variance: one entry per anchor required");
      for (std::size_t i = 0; i < lj.size(); ++i)
        lv.push_back(parse_hyperparameter(lj[i], here + ".log_variance[" + std::to_string(i) + "]"));
    } else {
      lv.assign(static_cast<std::size_t>(anchors.rows()), parse_hyperparameter(lj, here + ".log_variance"));
    }
    Hyperparameter bw(0.0);
    if (const json* bj = b.find("bandwidth")) bw = parse_hyperparameter(*bj, here + ".bandwidth");
    b.done();
    out = Kernel::heteroscedastic(std::move(anchors), std::move(lv), bw);
  } else {
    throw ConfigError(where + ": unknown kernel '" + kind + "'");
  }
  o.done();
  return out;
}


Dataset load_dataset(const json& j, const std::filesystem::path& base) {
  if (j.is_string()) return io::read_dataset(base / j.get<std::string>());
  Object o(j, "dataset");
  Dataset d;
  if (const json* g = o.find("generate")) {
    Object go(*g, "dataset.generate");
    const std::string name = go.string("name");
    const std::uint64_t seed = go.count("seed", 0);
    go.done();
    d = generate(name, seed);
  } else {
    d = io::read_dataset(base / o.string("path"));
  }
  d.sigma_meas = o.number("sigma_meas", d.sigma_meas);
  o.done();
  d.validate();
  return d;
}

}  // namespace

Hyperparameter parse_hyperparameter(const json& j, const std::string& where) {
  if (j.is_number()) return Hyperparameter(j.get<double>());
  Object o(j, where);
  const double v = o.number("value");
  const bool free = o.boolean("free", false);
  Hyperparameter h(v);
  if (const json* b = o.find("bounds")) {
    if (!b->is_array() || b->size() != 2 || !(*b)[0].is_number() || !(*b)[1].is_number())
      throw ConfigError(where + ".bounds: expected [lo, hi]");
    h.lo = (*b)[0].get<double>();
    h.hi = (*b)[1].get<double>();
  } else if (free) {
    throw ConfigError(where + ": free hyperparameters need bounds");
  }
  h.free = free;
  o.done();
  if (free && !(h.lo < h.hi && h.lo <= v && v <= h.hi))
    throw ConfigError(where + ": bounds must satisfy lo < hi and lo <= value <= hi");
  return h;
}

Kernel parse_kernel(const json& j, const Points& scaled_training_inputs, const AffineScaling& scaling) {
  Kernel k = parse_kernel_at(j, "bias.kernel", scaled_training_inputs, scaling);
  validate(k);
  return k;
}

PreparedRun prepare_run(const json& config, const std::filesystem::path& base_dir) {
  PreparedRun run;
  run.config = config;
  Object top(config, "config");

  const Method method = parse_method(top.string("method"));
  run.calibration.method = method;
  run.calibration.model = top.string("model");
  run.model = make_model(run.calibration.model);
  const ForwardModel& model = *run.model;
  run.data = load_dataset(top.at("dataset"), base_dir);

  // priors
  {
    const json& pj = top.at("priors");
    if (!pj.is_array()) throw ConfigError("config.priors: expected a list");
    const auto names = model.parameter_names();
    if (pj.size() != names.size())
      throw ConfigError("config.priors: model '" + model.name() + "' has " + std::to_string(names.size()) +
                        " parameter(s)");
    for (std::size_t i = 0; i < pj.size(); ++i) {
      Prior p = parse_prior(pj[i], "config.priors[" + std::to_string(i) + "]", names[i]);
      if (p.name != names[i])
        throw ConfigError("config.priors[" + std::to_string(i) + "]: expected parameter '" + names[i] + "'");
      run.calibration.priors.push_back(std::move(p));
    }
  }

  // measurement noise
  if (const json* nj = top.find("noise")) {
    Object o(*nj, "config.noise");
    const std::string type = o.string("type", "prescribed");
    if (type == "latent") {
      run.calibration.noise_prior = parse_prior(o.at("prior"), "config.noise.prior", "sigma");
    } else if (type == "prescribed") {
      run.data.sigma_meas = o.number("sigma", run.data.sigma_meas);
    } else {
      throw ConfigError("config.noise.type: expected 'prescribed' or 'latent'");
    }
    o.done();
  }

  // scaling
  bool unit_box = false;
  double residual_factor = 1.0;
  if (const json* sj = top.find("scaling")) {
    Object o(*sj, "config.scaling");
    const std::string inputs = o.string("inputs", "none");
    if (inputs != "none" && inputs != "unit_box") throw ConfigError("config.scaling.inputs: expected none or unit_box");
    unit_box = inputs == "unit_box";
    residual_factor = o.number("residual_factor", 1.0);
    o.done();
    if (!(residual_factor > 0.0)) throw ConfigError("config.scaling.residual_factor: must be positive");
  }

  // bias
  bool extended = false;
  const json* bj = top.find("bias");
  if (bj) {
    Object b(*bj, "config.bias");
    extended = b.boolean("extended", false);
    ResidualSetup& setup = run.calibration.residual;
    setup.extended = extended;
    setup.residual_scale = residual_factor;
    const Points raw = raw_bias_inputs(run.data, extended);
    if (unit_box) setup.scaling = AffineScaling::unit_box(raw);
    const Points scaled = setup.scaling.apply(raw);

    BiasSpec spec(BiasModel(parse_kernel(b.at("kernel"), scaled, setup.scaling)));
    BiasModel& m = spec.model;
    if (const json* mj = b.find("mean")) m.mean = parse_hyperparameter(*mj, "config.bias.mean");
    m.jitter = b.number("jitter", 0.0);
    m.noise_sd = run.data.sigma_meas;
    m.orthogonal = method == Method::ogp;
    const json* aj = b.find("anchors");
    if (m.orthogonal) {
      if (!aj || (aj->is_string() && aj->get<std::string>() == "training"))
        m.anchors = unique_rows(raw, false);
      else
        m.anchors = parse_points(*aj, "config.bias.anchors", raw.cols());
      spec.fd_steps = b.numbers("fd_steps");
      if (spec.fd_steps.empty()) throw ConfigError("config.bias.fd_steps: required for ogp");
    } else {
      (void)b.find("fd_steps");
      if (aj) throw ConfigError("config.bias.anchors: only used by method ogp");
    }
    if (const json* hj = b.find("hyperpriors")) {
      Object h(*hj, "config.bias.hyperpriors");
      std::set<std::string> known;
      for (const auto& p : free_parameters(m)) known.insert(p.name);
      for (const auto& [name, v] : hj->items()) {
        if (!known.count(name)) throw ConfigError("config.bias.hyperpriors: '" + name + "' is not a free parameter");
        Object e(h.at(name), "config.bias.hyperpriors." + name);
        m.hyperpriors[name] = {e.number("mu"), e.number("sigma")};
        e.done();
      }
      h.done();
    }
    spec.fit.restarts = b.count("restarts", spec.fit.restarts);
    b.done();
    if (method == Method::nobias) throw ConfigError("config.bias: method nobias takes no bias block");
    run.calibration.bias = std::move(spec);
  } else if (method != Method::nobias) {
    throw ConfigError("config: method " + to_string(method) + " requires a bias block");
  } else if (unit_box || residual_factor != 1.0) {
    throw ConfigError("config.scaling: only applies to koh and ogp");
  }

  // mcmc
  if (const json* mj = top.find("mcmc")) {
    Object o(*mj, "config.mcmc");
    McmcSettings& s = run.calibration.mcmc;
    s.steps = o.count("steps", s.steps);
    s.burn_in = o.count("burn_in", s.burn_in);
    s.chains = o.count("chains", s.chains);
    s.seed = o.count("seed", s.seed);
    if (const json* seeds = o.find("seeds")) {
      if (!seeds->is_array()) throw ConfigError("config.mcmc.seeds: expected a list");
      for (const auto& e : *seeds) {
        if (!e.is_number_unsigned()) throw ConfigError("config.mcmc.seeds: expected non-negative integers");
        s.seeds.push_back(e.get<std::uint64_t>());
      }
    }
    s.proposal_sd = o.numbers("proposal_sd");
    s.init = o.numbers("init");
    o.done();
  }

  // band grid
  {
    Points gx = unique_rows(run.data.x, true);
    Points geta;
    if (extended) geta = unique_rows(run.data.eta, true);
    if (const json* gj = top.find("band")) {
      Object o(*gj, "config.band");
      if (const json* xj = o.find("x")) gx = parse_points(*xj, "config.band.x", run.data.x.cols());
      if (const json* ej = o.find("eta")) {
        if (!extended) throw ConfigError("config.band.eta: only used by extended runs");
        geta = parse_points(*ej, "config.band.eta", run.data.eta.cols());
      }
      run.calibration.band_samples = o.count("samples", run.calibration.band_samples);
      o.done();
    }
    if (!extended) {
      run.grid.x = gx;
      run.grid.eta = Points(gx.rows(), 0);
    } else {
      const Eigen::Index n = gx.rows() * geta.rows();
      run.grid.x.resize(n, gx.cols());
      run.grid.eta.resize(n, geta.cols());
      Eigen::Index r = 0;
      for (Eigen::Index e = 0; e < geta.rows(); ++e)
        for (Eigen::Index i = 0; i < gx.rows(); ++i, ++r) {
          run.grid.x.row(r) = gx.row(i);
          run.grid.eta.row(r) = geta.row(e);
        }
    }
  }

  run.output_dir = base_dir / top.string("output_dir", "out");
  top.done();
  run.calibration.validate(model, run.data);
  return run;
}

PreparedRun load_run(const std::filesystem::path& config_file) {
  if (!std::filesystem::exists(config_file)) throw ConfigError("config file not found: " + config_file.string());
  json j;
  try {
    j = json::parse(io::read_text(config_file));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(config_file.string() + ": " + e.what());
  }
  return prepare_run(j, config_file.parent_path().empty() ? std::filesystem::path(".") : config_file.parent_path());
}

json benchmark_config(const std::string& name, Method method, std::uint64_t seed, bool extended) {
  const auto free = [](double v, double lo, double hi) { return json{{"value", v}, {"free", true}, {"bounds", {lo, hi}}}; };
  json c;
  c["method"] = to_string(method);
  c["model"] = name;
  c["dataset"] = {{"generate", {{"name", name}, {"seed", seed}}}};
  json mcmc = {{"chains", 2}, {"seed", seed}};
  json bias;
  if (name == "pedagogical") {
    c["priors"] = json::array({{{"name", "theta"}, {"type", "normal"}, {"mu", 2.5}, {"sigma", 1.5}}});
    mcmc["steps"] = 1000;
    mcmc["burn_in"] = 100;
    bias["kernel"] = {{"matern32", {{"amplitude", free(1.0, 1e-6, 1e3)}, {"lengthscale", 0.5 / std::numbers::sqrt3}}}};
    if (method == Method::ogp) {
      bias["anchors"] = {{"grid", {{"start", 0.0}, {"stop", 1.0}, {"step", 0.05}}}};
      bias["fd_steps"] = {1e-3};
    }
    c["band"] = {{"x", {{"grid", {{"start", 0.0}, {"stop", 1.0}, {"step", 0.01}}}}}};
  } else if (name == "beam") {
    c["priors"] = json::array({{{"name", "E"}, {"type", "normal"}, {"mu", 35e9}, {"sigma", 5e9}}});
    mcmc["steps"] = 500;
    mcmc["burn_in"] = 100;
    if (method == Method::nobias) {
      c["noise"] = {{"type", "latent"},
                    {"prior", {{"name", "sigma"}, {"type", "uniform"}, {"a", 0.0}, {"b", 0.8}}}};
      mcmc["proposal_sd"] = {5e8, 0.005};
      mcmc["steps"] = 5000;
      mcmc["burn_in"] = 5000;
    }
    bias["kernel"] = {
        {"sum",
         {{{"product", {{{"constant", free(1e-2, 1e-10, 1e2)}}, {{"matern32", {{"amplitude", 1.0}, {"lengthscale", 20.0}}}}}}},
          {{"white_noise", {{"variance", 1e-24}}}},
          {{"heteroscedastic", {{"anchors", "training"}, {"log_variance", free(-18.0, -40.0, 0.0)}}}}}}};
    if (method == Method::ogp) {
      bias["anchors"] = {10.0, 20.0, 30.0, 40.0, 50.0};
      bias["fd_steps"] = {1e9};
    }
    c["band"] = {{"x", {{"grid", {{"start", 0.0}, {"stop", 50.0}, {"step", 1.0}}}}}};
  } else if (name == "influence") {
    c["priors"] = json::array({{{"name", "E"}, {"type", "lognormal"}, {"mu", 24.3}, {"sigma", 0.2}}});
    mcmc["steps"] = 1000;
    mcmc["burn_in"] = 200;
    bias["kernel"] = {{"product",
                       {{{"constant", free(1.0, 1e-8, 1e8)}},
                        {{"matern32", {{"amplitude", 1.0}, {"lengthscale", 5.0 / std::numbers::sqrt3}}}}}}};
    bias["extended"] = extended;
    if (method == Method::ogp) {
      bias["anchors"] = "training";
      bias["fd_steps"] = {1e8};
    }
    if (method != Method::nobias) c["scaling"] = {{"inputs", "unit_box"}, {"residual_factor", 100.0}};
  } else {
    throw ConfigError("unknown benchmark '" + name + "' (pedagogical, beam, influence)");
  }
  if (extended && (name != "influence" || method == Method::nobias))
    throw ConfigError("benchmark: --extended applies to influence with koh or ogp");
  if (method != Method::nobias) c["bias"] = bias;
  c["mcmc"] = mcmc;
  c["output_dir"] = "out";
  return c;
}

}  // namespace biascal
