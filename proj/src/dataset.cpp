#include "mppf/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mppf/error.hpp"

namespace mppf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view text, double& out) {
  const std::string buf(trim(text));
  if (buf.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && errno != ERANGE;
}

double meta_double(std::size_t line, const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!parse_double(value, v)) throw ParseError(line, "bad value for '" + key + "'");
  return v;
}

}  // namespace

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

void MarkedDataset::validate() const {
  if (horizon_T <= 0) throw ValidationError("dataset horizon T must be positive");
  double previous = 0.0;
  for (std::size_t k = 0; k < events.size(); ++k) {
    const double s = events[k].time;
    if (!std::isfinite(s) || !std::isfinite(events[k].mark)) {
      throw ValidationError("event " + std::to_string(k + 1) + " is not finite");
    }
    if (!(s > previous)) {
      throw ValidationError("event times must be strictly increasing and positive (event " +
                            std::to_string(k + 1) + ")");
    }
    if (s > static_cast<double>(horizon_T)) {
      throw ValidationError("event " + std::to_string(k + 1) + " beyond horizon T");
    }
    previous = s;
  }
}

long MarkedDataset::count_upto(double t) const {
  auto it = std::upper_bound(events.begin(), events.end(), t,
                             [](double v, const MarkedEvent& e) { return v < e.time; });
  return static_cast<long>(it - events.begin());
}

GeneratedData generate_dataset(const ModelSpec& spec, long horizon_T, int data_level,
                               std::uint64_t seed) {
  spec.validate();
  if (horizon_T <= 0) throw ConfigError("horizon T must be positive");
  const ModelKernel model(spec);
  const SeedKey key(seed);
  const long n = steps_per_unit(data_level);
  const double dt = step_size(data_level);
  const double sqrt_sigma = std::sqrt(spec.theta.theta_Sigma);

  GeneratedData out;
  out.dataset.horizon_T = horizon_T;
  out.dataset.meta = DatasetMeta{spec, data_level, seed};
  out.truth.reserve(horizon_T);

  double x0 = spec.x_star;
  for (long p = 0; p < horizon_T; ++p) {
    RandomStream dyn(key, Purpose::Dynamics, static_cast<std::uint32_t>(data_level), 0,
                     static_cast<std::uint64_t>(p));
    UnitPath path = euler_unit(spec, data_level, p, x0, dyn);

    RandomStream obs(key, Purpose::Observation, static_cast<std::uint32_t>(data_level), 0,
                     static_cast<std::uint64_t>(p));
    for (long k = 0; k < n; ++k) {
      const double xl = path.states[k];
      const double xr = path.states[k + 1];
      // |x| along a linear segment is convex, so the endpoint max bounds it.
      const double bound = (1.0 + 1e-6) * std::max(model.intensity(xl), model.intensity(xr));
      if (!(bound > 0.0)) continue;
      const double t_left = static_cast<double>(p) + static_cast<double>(k) * dt;
      double offset = 0.0;
      for (;;) {
        offset += -std::log(obs.uniform()) / bound;
        if (offset >= dt) break;
        const double xs = xl + (xr - xl) * (offset / dt);
        if (obs.uniform() * bound < model.intensity(xs)) {
          const double s = t_left + offset;
          if (!out.dataset.events.empty() && !(s > out.dataset.events.back().time)) continue;
          const double y = model.mark_mean(xs) + sqrt_sigma * obs.normal();
          out.dataset.events.push_back({s, y});
        }
      }
    }
    x0 = path.end();
    out.truth.push_back(std::move(path));
  }
  out.dataset.validate();
  return out;
}

void write_dataset(const MarkedDataset& ds, std::ostream& out) {
  const ModelSpec& m = ds.meta.model;
  out << "# model_id=" << to_string(m.model_id) << '\n';
  out << "# x_star=" << format_real(m.x_star) << '\n';
  out << "# theta_b=" << format_real(m.theta.theta_b) << '\n';
  out << "# theta_lambda=" << format_real(m.theta.theta_lambda) << '\n';
  out << "# theta_Sigma=" << format_real(m.theta.theta_Sigma) << '\n';
  for (const auto& [name, value] : m.theta.fixed_params) {
    out << "# fixed." << name << '=' << format_real(value) << '\n';
  }
  if (m.clip.enabled) {
    out << "# clip_lo=" << format_real(m.clip.lo) << '\n';
    out << "# clip_hi=" << format_real(m.clip.hi) << '\n';
  }
  out << "# T=" << ds.horizon_T << '\n';
  out << "# data_level=" << ds.meta.data_level << '\n';
  out << "# seed=" << ds.meta.seed << '\n';
  for (const MarkedEvent& e : ds.events) {
    out << format_real(e.time) << ',' << format_real(e.mark) << '\n';
  }
}

void write_dataset(const MarkedDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_dataset(ds, out);
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

MarkedDataset read_dataset(std::istream& in) {
  MarkedDataset ds;
  ModelSpec& m = ds.meta.model;
  m.theta.fixed_params.clear();
  bool have_T = false;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string key(trim(body.substr(0, eq)));
      const std::string value(trim(body.substr(eq + 1)));
      if (key == "model_id") {
        try {
          m.model_id = parse_model_id(value);
        } catch (const ConfigError& e) {
          throw ParseError(line_no, e.what());
        }
      } else if (key == "x_star") {
        m.x_star = meta_double(line_no, key, value);
      } else if (key == "theta_b") {
        m.theta.theta_b = meta_double(line_no, key, value);
      } else if (key == "theta_lambda") {
        m.theta.theta_lambda = meta_double(line_no, key, value);
      } else if (key == "theta_Sigma") {
        m.theta.theta_Sigma = meta_double(line_no, key, value);
      } else if (key.rfind("fixed.", 0) == 0) {
        m.theta.fixed_params[key.substr(6)] = meta_double(line_no, key, value);
      } else if (key == "clip_lo") {
        m.clip.enabled = true;
        m.clip.lo = meta_double(line_no, key, value);
      } else if (key == "clip_hi") {
        m.clip.enabled = true;
        m.clip.hi = meta_double(line_no, key, value);
      } else if (key == "T") {
        const double v = meta_double(line_no, key, value);
        if (v != std::floor(v) || v <= 0) throw ParseError(line_no, "T must be a positive integer");
        ds.horizon_T = static_cast<long>(v);
        have_T = true;
      } else if (key == "data_level") {
        ds.meta.data_level = static_cast<int>(meta_double(line_no, key, value));
      } else if (key == "seed") {
        std::uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
        if (ec != std::errc() || ptr != value.data() + value.size()) {
          throw ParseError(line_no, "bad value for 'seed'");
        }
        ds.meta.seed = seed;
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError(line_no, "expected 's,y'");
    MarkedEvent e;
    if (!parse_double(line.substr(0, comma), e.time) ||
        !parse_double(line.substr(comma + 1), e.mark)) {
      throw ParseError(line_no, "expected two real numbers 's,y'");
    }
    ds.events.push_back(e);
  }
  if (!have_T) throw ParseError(line_no, "missing '# T=...' header");
  ds.validate();
  return ds;
}

MarkedDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

void write_truth(const std::vector<UnitPath>& truth, std::ostream& out) {
  out << "t,x\n";
  bool first = true;
  for (const UnitPath& path : truth) {
    const double dt = step_size(path.level);
    for (std::size_t k = first ? 0 : 1; k < path.states.size(); ++k) {
      const double t = static_cast<double>(path.start_time) + static_cast<double>(k) * dt;
      out << format_real(t) << ',' << format_real(path.states[k]) << '\n';
    }
    first = false;
  }
}

}  // namespace mppf
