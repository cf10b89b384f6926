#include "acm/spec_io.hpp"

#include <set>

#include "json.hpp"

#include "acm/error.hpp"

namespace acm {

using json = nlohmann::json;

namespace {

json parse(const std::string& text) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) fail(ErrorCode::InvalidArgument, "simulation spec must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidArgument, std::string("simulation spec is not valid JSON: ") + e.what());
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) fail(ErrorCode::InvalidArgument, where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::InvalidArgument, where + ": key '" + key + "' has the wrong type");
  }
}

Eigen::MatrixXd matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(ErrorCode::InvalidArgument, where + ": expected a matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
  if (cols == 0) fail(ErrorCode::InvalidArgument, where + ": expected a matrix");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      fail(ErrorCode::InvalidArgument, where + ": ragged matrix rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) {
        fail(ErrorCode::InvalidArgument, where + ": matrix entries must be numbers");
      }
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

json to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

ArSpec ar_from(const json& j) {
  const std::string where = "ar spec";
  check_keys(j, {"kind", "subject", "lag", "samples", "epochs_per_class", "sessions", "sample_rate",
                 "seed", "classes"},
             where);
  ArSpec spec;
  read(j, "subject", spec.subject, where);
  read(j, "lag", spec.lag, where);
  read(j, "samples", spec.samples, where);
  read(j, "epochs_per_class", spec.epochs_per_class, where);
  read(j, "sessions", spec.sessions, where);
  read(j, "sample_rate", spec.sample_rate, where);
  read(j, "seed", spec.seed, where);
  if (!j.contains("classes") || !j["classes"].is_array() || j["classes"].empty()) {
    fail(ErrorCode::InvalidArgument, where + ": 'classes' must be a non-empty array");
  }
  for (const auto& jc : j["classes"]) {
    const std::string cw = where + " class";
    if (!jc.is_object()) fail(ErrorCode::InvalidArgument, cw + ": expected an object");
    check_keys(jc, {"name", "coefficients", "innovation"}, cw);
    ArClassSpec c;
    read(jc, "name", c.name, cw);
    if (!jc.contains("innovation")) fail(ErrorCode::InvalidArgument, cw + ": missing 'innovation'");
    c.innovation = matrix(jc["innovation"], cw + " innovation");
    if (jc.contains("coefficients")) {
      if (!jc["coefficients"].is_array()) {
        fail(ErrorCode::InvalidArgument, cw + ": 'coefficients' must be a list of matrices");
      }
      for (const auto& m : jc["coefficients"]) c.coefficients.push_back(matrix(m, cw + " coefficient"));
    }
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

ArSpec equal_lag0_from(const json& j) {
  const std::string where = "equal_lag0 spec";
  check_keys(j, {"kind", "subject", "channels", "coef", "samples", "epochs_per_class", "sessions",
                 "sample_rate", "seed"},
             where);
  int channels = 4, samples = 512, epochs = 100, sessions = 1;
  double coef = 0.9, rate = 250.0;
  std::uint64_t seed = 0;
  std::string subject = "sim";
  read(j, "channels", channels, where);
  read(j, "coef", coef, where);
  read(j, "samples", samples, where);
  read(j, "epochs_per_class", epochs, where);
  read(j, "sessions", sessions, where);
  read(j, "sample_rate", rate, where);
  read(j, "seed", seed, where);
  read(j, "subject", subject, where);
  ArSpec spec = equal_lag0_two_class_spec(channels, coef, samples, epochs, seed);
  spec.sessions = sessions;
  spec.sample_rate = rate;
  spec.subject = subject;
  return spec;
}

SineSpec sine_from(const json& j) {
  const std::string where = "sine spec";
  check_keys(j, {"kind", "subject", "channels", "samples", "epochs_per_class", "n_classes",
                 "sessions", "period", "noise", "sample_rate", "seed"},
             where);
  SineSpec spec;
  read(j, "subject", spec.subject, where);
  read(j, "channels", spec.channels, where);
  read(j, "samples", spec.samples, where);
  read(j, "epochs_per_class", spec.epochs_per_class, where);
  read(j, "n_classes", spec.n_classes, where);
  read(j, "sessions", spec.sessions, where);
  read(j, "period", spec.period, where);
  read(j, "noise", spec.noise, where);
  read(j, "sample_rate", spec.sample_rate, where);
  read(j, "seed", spec.seed, where);
  return spec;
}

std::string kind_of(const json& j) {
  std::string kind = "ar";
  read(j, "kind", kind, "simulation spec");
  return kind;
}

}  // namespace

ArSpec ar_spec_from_json(const std::string& text) {
  const json j = parse(text);
  const std::string kind = kind_of(j);
  if (kind == "ar") return ar_from(j);
  if (kind == "equal_lag0") return equal_lag0_from(j);
  fail(ErrorCode::InvalidArgument, "'" + kind + "' is not an AR simulation kind");
}

SineSpec sine_spec_from_json(const std::string& text) {
  const json j = parse(text);
  if (kind_of(j) != "sine") fail(ErrorCode::InvalidArgument, "expected kind 'sine'");
  return sine_from(j);
}

EpochSet simulate_from_json(const std::string& text, unsigned workers) {
  const json j = parse(text);
  const std::string kind = kind_of(j);
  if (kind == "sine") return generate_sine_dataset(sine_from(j));
  if (kind == "ar") return generate_ar_dataset(ar_from(j), workers);
  if (kind == "equal_lag0") return generate_ar_dataset(equal_lag0_from(j), workers);
  fail(ErrorCode::InvalidArgument,
       "unknown simulation kind '" + kind + "' (expected ar, equal_lag0 or sine)");
}

std::string ar_spec_to_json(const ArSpec& spec) {
  json j;
  j["kind"] = "ar";
  j["subject"] = spec.subject;
  j["lag"] = spec.lag;
  j["samples"] = spec.samples;
  j["epochs_per_class"] = spec.epochs_per_class;
  j["sessions"] = spec.sessions;
  j["sample_rate"] = spec.sample_rate;
  j["seed"] = spec.seed;
  json classes = json::array();
  for (const auto& c : spec.classes) {
    json coefs = json::array();
    for (const auto& a : c.coefficients) coefs.push_back(to_json(a));
    classes.push_back({{"name", c.name}, {"coefficients", coefs}, {"innovation", to_json(c.innovation)}});
  }
  j["classes"] = std::move(classes);
  return j.dump(2) + "\n";
}

}  // namespace acm
