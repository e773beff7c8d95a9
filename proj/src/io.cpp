#include "biascal/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace biascal::io {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse number '" + s + "'");
  }
}

std::vector<std::vector<std::string>> read_rows(const std::string& text, std::vector<std::string>& header) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv: missing header");
  header = split(trim(line), ',');
  for (auto& h : header) h = trim(h);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != header.size()) throw ConfigError("csv: row has " + std::to_string(cells.size()) + " cells");
    for (auto& c : cells) c = trim(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

void append_row(std::string& out, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  out += '\n';
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << content;
  if (!os) throw ConfigError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string chain_csv(const Chain& chain) {
  std::string out = "step";
  for (const auto& n : chain.names) out += "," + n;
  out += ",log_posterior\n";
  for (Eigen::Index i = 0; i < chain.samples.rows(); ++i) {
    out += std::to_string(i);
    for (Eigen::Index k = 0; k < chain.samples.cols(); ++k) out += "," + format_double(chain.samples(i, k));
    out += "," + format_double(chain.log_posterior[i]) + "\n";
  }
  return out;
}

Chain parse_chain_csv(const std::string& text) {
  std::vector<std::string> header;
  const auto rows = read_rows(text, header);
  if (header.size() < 3 || header.front() != "step" || header.back() != "log_posterior")
    throw ConfigError("chain csv: expected columns step, parameters..., log_posterior");
  Chain c;
  c.names.assign(header.begin() + 1, header.end() - 1);
  const auto t = static_cast<Eigen::Index>(c.names.size());
  c.samples.resize(static_cast<Eigen::Index>(rows.size()), t);
  c.log_posterior.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < t; ++k)
      c.samples(r, k) = parse_double(rows[i][static_cast<std::size_t>(k + 1)], "chain csv");
    c.log_posterior[r] = parse_double(rows[i].back(), "chain csv");
  }
  return c;
}

nlohmann::ordered_json summary_json(const PosteriorSummary& summary) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < summary.names.size(); ++i) {
    const auto& r = summary.rows[i];
    j[summary.names[i]] = {{"mean", r.mean},       {"sd", r.sd},           {"hdi_3", r.hdi_3},
                           {"hdi_97", r.hdi_97},   {"mcse_mean", r.mcse_mean}, {"mcse_sd", r.mcse_sd},
                           {"r_hat", r.r_hat}};
  }
  return j;
}

PosteriorSummary parse_summary_json(const nlohmann::ordered_json& j) {
  PosteriorSummary s;
  for (const auto& [name, r] : j.items()) {
    s.names.push_back(name);
    s.rows.push_back({r.at("mean").get<double>(), r.at("sd").get<double>(), r.at("hdi_3").get<double>(),
                      r.at("hdi_97").get<double>(), r.at("mcse_mean").get<double>(), r.at("mcse_sd").get<double>(),
                      r.at("r_hat").get<double>()});
  }
  return s;
}

std::string band_csv(const PredictiveBand& band) {
  std::string out;
  for (Eigen::Index k = 0; k < band.x.cols(); ++k) out += band.x.cols() == 1 ? "x," : "x" + std::to_string(k) + ",";
  for (Eigen::Index k = 0; k < band.eta.cols(); ++k)
    out += band.eta.cols() == 1 ? "eta," : "eta" + std::to_string(k) + ",";
  out += "mean,sd\n";
  for (Eigen::Index i = 0; i < band.x.rows(); ++i) {
    std::vector<double> v;
    for (Eigen::Index k = 0; k < band.x.cols(); ++k) v.push_back(band.x(i, k));
    for (Eigen::Index k = 0; k < band.eta.cols(); ++k) v.push_back(band.eta(i, k));
    v.push_back(band.mean[i]);
    v.push_back(band.sd[i]);
    append_row(out, v);
  }
  return out;
}

std::string dataset_csv(const Dataset& data) {
  std::string out = "series_id";
  for (Eigen::Index k = 0; k < data.x.cols(); ++k) out += data.x.cols() == 1 ? ",x" : ",x" + std::to_string(k);
  for (Eigen::Index k = 0; k < data.eta.cols(); ++k)
    out += data.eta.cols() == 1 ? ",eta" : ",eta" + std::to_string(k);
  out += ",y\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out += std::to_string(data.series[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k < data.x.cols(); ++k) out += "," + format_double(data.x(i, k));
    for (Eigen::Index k = 0; k < data.eta.cols(); ++k) out += "," + format_double(data.eta(i, k));
    out += "," + format_double(data.y[i]) + "\n";
  }
  return out;
}

nlohmann::ordered_json dataset_sidecar(const Dataset& data) {
  nlohmann::ordered_json j;
  j["generator"] = data.generator;
  j["seed"] = data.seed;
  j["sigma_meas"] = data.sigma_meas;
  j["true_parameters"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : data.true_parameters) j["true_parameters"][k] = v;
  return j;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

void write_dataset(const std::filesystem::path& csv, const Dataset& data) {
  write_text(csv, dataset_csv(data));
  write_text(sidecar_path(csv), dataset_sidecar(data).dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& csv) {
  std::vector<std::string> header;
  const auto rows = read_rows(read_text(csv), header);
  if (header.size() < 3 || header.front() != "series_id" || header.back() != "y")
    throw ConfigError(csv.string() + ": expected columns series_id, x..., [eta...], y");
  std::vector<std::size_t> xs;
  std::vector<std::size_t> etas;
  for (std::size_t k = 1; k + 1 < header.size(); ++k) {
    if (header[k].rfind("eta", 0) == 0)
      etas.push_back(k);
    else if (header[k].rfind("x", 0) == 0)
      xs.push_back(k);
    else
      throw ConfigError(csv.string() + ": unknown column '" + header[k] + "'");
  }
  if (xs.empty()) throw ConfigError(csv.string() + ": no x column");
  Dataset d;
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.x.resize(n, static_cast<Eigen::Index>(xs.size()));
  d.eta.resize(n, static_cast<Eigen::Index>(etas.size()));
  d.y.resize(n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    d.series.push_back(static_cast<int>(parse_double(rows[i][0], csv.string())));
    for (std::size_t k = 0; k < xs.size(); ++k)
      d.x(r, static_cast<Eigen::Index>(k)) = parse_double(rows[i][xs[k]], csv.string());
    for (std::size_t k = 0; k < etas.size(); ++k)
      d.eta(r, static_cast<Eigen::Index>(k)) = parse_double(rows[i][etas[k]], csv.string());
    d.y[r] = parse_double(rows[i].back(), csv.string());
  }
  const auto side = sidecar_path(csv);
  if (std::filesystem::exists(side)) {
    try {
      const auto j = nlohmann::json::parse(read_text(side));
      d.generator = j.value("generator", "");
      d.seed = j.value("seed", std::uint64_t{0});
      d.sigma_meas = j.value("sigma_meas", 0.0);
      if (j.contains("true_parameters"))
        for (const auto& [k, v] : j["true_parameters"].items()) d.true_parameters[k] = v.get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(side.string() + ": " + e.what());
    }
  }
  d.validate();
  return d;
}

}  // namespace biascal::io
