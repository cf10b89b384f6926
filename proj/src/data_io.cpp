#include "acm/data_io.hpp"

#include <bit>
#include <complex>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Eigenvalues>
#include "json.hpp"

#include "acm/error.hpp"
#include "acm/parallel.hpp"
#include "acm/random.hpp"

namespace acm {

using json = nlohmann::ordered_json;

Eigen::Index EpochSet::channels() const {
  for (const auto& s : sessions)
    if (!s.epochs.empty()) return s.epochs.front().channels();
  return 0;
}

Eigen::Index EpochSet::samples() const {
  for (const auto& s : sessions)
    if (!s.epochs.empty()) return s.epochs.front().samples();
  return 0;
}

std::size_t EpochSet::total_epochs() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.epochs.size();
  return n;
}

void EpochSet::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::InvalidArgument, "EpochSet: " + msg); };
  if (sessions.empty()) bad("no sessions");
  if (classes.empty()) bad("no class names");
  if (!(sample_rate > 0.0)) bad("sample_rate must be positive");
  const Eigen::Index d = channels();
  const Eigen::Index t = samples();
  for (const auto& s : sessions) {
    if (s.epochs.empty()) bad("session '" + s.id + "' is empty");
    if (s.epochs.size() != s.labels.size()) bad("session '" + s.id + "' label count mismatch");
    for (std::size_t i = 0; i < s.epochs.size(); ++i) {
      const Epoch& e = s.epochs[i];
      if (e.channels() != d || e.samples() != t) bad("session '" + s.id + "' epoch shape differs");
      if (e.samples() < 2) bad("epochs need at least 2 samples");
      if (e.sample_rate != sample_rate) bad("epoch sample rate differs from set");
      if (!e.data.allFinite()) bad("session '" + s.id + "' has non-finite samples");
      if (s.labels[i] < 0 || s.labels[i] >= static_cast<int>(classes.size())) {
        bad("session '" + s.id + "' has label out of range");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Container

namespace {

void put_f64le(std::string& buf, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  buf.append(bytes, 8);
}

double get_f64le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

[[noreturn]] void format_error(std::size_t offset, const std::string& msg) {
  std::ostringstream os;
  os << "format error at byte offset " << offset << ": " << msg;
  fail(ErrorCode::FormatError, os.str());
}

}  // namespace

void write_epochset(const EpochSet& set, std::ostream& out) {
  set.validate();
  json manifest;
  manifest["format"] = kContainerFormat;
  manifest["version"] = kContainerVersion;
  manifest["subject"] = set.subject;
  manifest["classes"] = set.classes;
  manifest["sample_rate"] = set.sample_rate;
  json sessions = json::array();
  for (const auto& s : set.sessions) {
    sessions.push_back(json{{"id", s.id}, {"n_epochs", s.epochs.size()}, {"labels", s.labels}});
  }
  manifest["sessions"] = std::move(sessions);
  manifest["d"] = set.channels();
  manifest["T"] = set.samples();
  manifest["dtype"] = "f64le";
  manifest["order"] = "epoch-major row-major";
  out << manifest.dump() << '\n';

  std::string buf;
  for (const auto& s : set.sessions) {
    for (const auto& e : s.epochs) {
      buf.clear();
      buf.reserve(static_cast<std::size_t>(e.data.size()) * 8);
      for (Eigen::Index r = 0; r < e.data.rows(); ++r)
        for (Eigen::Index c = 0; c < e.data.cols(); ++c) put_f64le(buf, e.data(r, c));
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
  }
  if (!out) fail(ErrorCode::IoError, "write failed");
}

void write_epochset(const EpochSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  write_epochset(set, out);
  out.flush();
  if (!out) fail(ErrorCode::IoError, "write to '" + path + "' failed");
}

EpochSet read_epochset(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) format_error(0, "missing manifest line");
  if (in.eof()) format_error(header.size(), "manifest line is not terminated by newline");
  const std::size_t payload_start = header.size() + 1;

  json manifest;
  try {
    manifest = json::parse(header);
  } catch (const json::parse_error& e) {
    format_error(e.byte, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!manifest.is_object()) format_error(0, "manifest must be a JSON object");

  EpochSet set;
  std::size_t d = 0, t = 0;
  std::vector<std::size_t> counts;
  try {
    if (manifest.at("format").get<std::string>() != kContainerFormat) {
      format_error(0, "unknown format tag '" + manifest.at("format").get<std::string>() + "'");
    }
    const int version = manifest.at("version").get<int>();
    if (version != kContainerVersion) {
      fail(ErrorCode::VersionUnsupported,
           "container version " + std::to_string(version) + " is not supported (expected " +
               std::to_string(kContainerVersion) + ")");
    }
    if (manifest.at("dtype").get<std::string>() != "f64le") format_error(0, "dtype must be f64le");
    if (manifest.at("order").get<std::string>() != "epoch-major row-major") {
      format_error(0, "order must be 'epoch-major row-major'");
    }
    set.subject = manifest.at("subject").get<std::string>();
    set.classes = manifest.at("classes").get<std::vector<std::string>>();
    set.sample_rate = manifest.at("sample_rate").get<double>();
    d = manifest.at("d").get<std::size_t>();
    t = manifest.at("T").get<std::size_t>();
    for (const auto& s : manifest.at("sessions")) {
      Session session;
      session.id = s.at("id").get<std::string>();
      session.labels = s.at("labels").get<std::vector<int>>();
      const auto n = s.at("n_epochs").get<std::size_t>();
      if (session.labels.size() != n) {
        format_error(0, "session '" + session.id + "' declares " + std::to_string(n) +
                            " epochs but lists " + std::to_string(session.labels.size()) +
                            " labels");
      }
      counts.push_back(n);
      set.sessions.push_back(std::move(session));
    }
  } catch (const json::exception& e) {
    format_error(0, std::string("manifest field error: ") + e.what());
  }
  if (d == 0 || t < 2) format_error(0, "d must be >= 1 and T >= 2");

  const std::size_t epoch_bytes = d * t * 8;
  std::vector<unsigned char> buf(epoch_bytes);
  std::size_t offset = payload_start;
  for (std::size_t si = 0; si < set.sessions.size(); ++si) {
    Session& session = set.sessions[si];
    for (std::size_t ei = 0; ei < counts[si]; ++ei) {
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(epoch_bytes));
      const auto got = static_cast<std::size_t>(in.gcount());
      if (got != epoch_bytes) {
        format_error(offset + got, "payload truncated in session '" + session.id + "' epoch " +
                                       std::to_string(ei) + " (expected " +
                                       std::to_string(epoch_bytes) + " bytes, found " +
                                       std::to_string(got) + ")");
      }
      Epoch e;
      e.sample_rate = set.sample_rate;
      e.data.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(t));
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < t; ++c)
          e.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              get_f64le(buf.data() + 8 * (r * t + c));
      session.epochs.push_back(std::move(e));
      offset += epoch_bytes;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    format_error(offset, "trailing bytes after the declared payload");
  }
  try {
    set.validate();
  } catch (const Error& e) {
    format_error(payload_start, e.what());
  }
  return set;
}

EpochSet read_epochset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_epochset(in);
}

std::string epoch_to_csv(const Epoch& epoch) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index r = 0; r < epoch.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < epoch.data.cols(); ++c) {
      if (c) os << ',';
      os << epoch.data(r, c);
    }
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Butterworth band-pass

std::vector<SecondOrderSection> butterworth_bandpass(int order, double low_hz, double high_hz,
                                                     double sample_rate) {
  if (order < 1) fail(ErrorCode::InvalidBand, "filter order must be >= 1");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate / 2.0)) {
    std::ostringstream os;
    os << "band [" << low_hz << ", " << high_hz << "] Hz must satisfy 0 < low < high < "
       << sample_rate / 2.0 << " Hz";
    fail(ErrorCode::InvalidBand, os.str());
  }
  using cd = std::complex<double>;
  const double fs2 = 2.0 * sample_rate;
  const double wl = fs2 * std::tan(M_PI * low_hz / sample_rate);
  const double wh = fs2 * std::tan(M_PI * high_hz / sample_rate);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  // Analog prototype poles -> band-pass poles -> z-plane.
  std::vector<cd> zpoles;
  cd gain_den = 1.0;
  for (int k = 0; k < order; ++k) {
    const cd p = std::polar(1.0, M_PI * (2.0 * k + order + 1) / (2.0 * order));
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0sq);
    for (const cd s : {half + root, half - root}) {
      zpoles.push_back((fs2 + s) / (fs2 - s));
      gain_den *= (fs2 - s);
    }
  }
  // N zeros at s = 0 map to z = 1, N zeros at infinity map to z = -1.
  const double gain = std::real(std::pow(bw * fs2, order) / gain_den);

  // Pair conjugates: upper-half-plane poles with their mirror, real poles in twos.
  std::vector<std::pair<cd, cd>> pairs;
  std::vector<double> reals;
  for (const cd& z : zpoles) {
    if (std::abs(z.imag()) < 1e-14 * std::max(1.0, std::abs(z))) {
      reals.push_back(z.real());
    } else if (z.imag() > 0.0) {
      pairs.emplace_back(z, std::conj(z));
    }
  }
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) pairs.emplace_back(reals[i], reals[i + 1]);

  std::vector<SecondOrderSection> sos;
  for (const auto& [p1, p2] : pairs) {
    SecondOrderSection s{1.0, 0.0, -1.0, std::real(-(p1 + p2)), std::real(p1 * p2)};
    sos.push_back(s);
  }
  sos.front().b0 *= gain;
  sos.front().b1 *= gain;
  sos.front().b2 *= gain;
  return sos;
}

namespace {

// Transposed direct form II state for one section.
struct SectionState {
  double z1 = 0.0, z2 = 0.0;
};

// Steady-state state for a unit step, scaled later by the first input.
std::vector<SectionState> step_state(const std::vector<SecondOrderSection>& sos) {
  std::vector<SectionState> zi;
  double in_level = 1.0;
  for (const auto& s : sos) {
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double y = dc * in_level;
    SectionState st;
    st.z2 = s.b2 * in_level - s.a2 * y;
    st.z1 = s.b1 * in_level - s.a1 * y + st.z2;
    zi.push_back(st);
    in_level = y;
  }
  return zi;
}

void run_sos(const std::vector<SecondOrderSection>& sos, std::vector<SectionState> state,
             Eigen::Ref<Eigen::VectorXd> x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = x(i);
    for (std::size_t k = 0; k < sos.size(); ++k) {
      const auto& s = sos[k];
      auto& st = state[k];
      const double y = s.b0 * v + st.z1;
      st.z1 = s.b1 * v - s.a1 * y + st.z2;
      st.z2 = s.b2 * v - s.a2 * y;
      v = y;
    }
    x(i) = v;
  }
}

std::vector<SectionState> scaled(const std::vector<SectionState>& zi, double level) {
  std::vector<SectionState> out = zi;
  for (auto& s : out) {
    s.z1 *= level;
    s.z2 *= level;
  }
  return out;
}

}  // namespace

Epoch bandpass(const Epoch& x, double low_hz, double high_hz) {
  constexpr int kOrder = 4;
  const auto sos = butterworth_bandpass(kOrder, low_hz, high_hz, x.sample_rate);
  // Three times the length of the equivalent transfer-function polynomial.
  const Eigen::Index pad = 3 * (2 * kOrder + 1);
  const Eigen::Index t = x.samples();
  if (t <= pad) {
    fail(ErrorCode::InvalidEpoch, "bandpass: epoch of " + std::to_string(t) +
                                      " samples is too short for padding of " +
                                      std::to_string(pad));
  }
  if (!x.data.allFinite()) fail(ErrorCode::InvalidEpoch, "bandpass: epoch contains NaN or Inf");
  const auto zi = step_state(sos);

  Epoch out;
  out.sample_rate = x.sample_rate;
  out.data.resize(x.channels(), t);
  Eigen::VectorXd ext(t + 2 * pad);
  for (Eigen::Index ch = 0; ch < x.channels(); ++ch) {
    const auto row = x.data.row(ch);
    const double first = row(0);
    const double last = row(t - 1);
    for (Eigen::Index i = 0; i < pad; ++i) {
      ext(i) = 2.0 * first - row(pad - i);
      ext(pad + t + i) = 2.0 * last - row(t - 2 - i);
    }
    ext.segment(pad, t) = row.transpose();

    run_sos(sos, scaled(zi, ext(0)), ext);
    ext.reverseInPlace();
    run_sos(sos, scaled(zi, ext(0)), ext);
    ext.reverseInPlace();
    out.data.row(ch) = ext.segment(pad, t).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// AR generator

double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& coefficients) {
  if (coefficients.empty()) return 0.0;
  const Eigen::Index d = coefficients.front().rows();
  const Eigen::Index p = static_cast<Eigen::Index>(coefficients.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(d * p, d * p);
  for (Eigen::Index i = 0; i < p; ++i) companion.block(0, i * d, d, d) = coefficients[i];
  if (p > 1) companion.bottomLeftCorner(d * (p - 1), d * (p - 1)).setIdentity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

void check_spec(const ArSpec& spec) {
  auto unstable = [](const std::string& msg) { fail(ErrorCode::UnstableSpec, msg); };
  if (spec.classes.empty()) fail(ErrorCode::InvalidArgument, "ArSpec: no classes");
  if (spec.lag < 1) fail(ErrorCode::InvalidArgument, "ArSpec: lag must be >= 1");
  if (spec.samples < 2) fail(ErrorCode::InvalidArgument, "ArSpec: samples must be >= 2");
  if (spec.epochs_per_class < 1) fail(ErrorCode::InvalidArgument, "ArSpec: epochs_per_class must be >= 1");
  if (spec.sessions < 1) fail(ErrorCode::InvalidArgument, "ArSpec: sessions must be >= 1");
  if (!(spec.sample_rate > 0.0)) fail(ErrorCode::InvalidArgument, "ArSpec: sample_rate must be positive");
  const Eigen::Index d = spec.classes.front().innovation.rows();
  for (const auto& c : spec.classes) {
    if (c.innovation.rows() != d || c.innovation.cols() != d || d < 1) {
      fail(ErrorCode::InvalidArgument, "ArSpec: class '" + c.name + "' innovation shape mismatch");
    }
    for (const auto& a : c.coefficients) {
      if (a.rows() != d || a.cols() != d) {
        fail(ErrorCode::InvalidArgument, "ArSpec: class '" + c.name + "' coefficient shape mismatch");
      }
    }
    const double rho = companion_spectral_radius(c.coefficients);
    if (!(rho < 1.0)) {
      std::ostringstream os;
      os << "class '" << c.name << "' is not stationary: companion spectral radius " << rho
         << " >= 1";
      unstable(os.str());
    }
    try {
      SpdMatrix check(c.innovation);
    } catch (const Error&) {
      unstable("class '" + c.name + "' innovation covariance is not SPD");
    }
  }
}

Epoch simulate_epoch(const ArSpec& spec, const ArClassSpec& cls, const Eigen::MatrixXd& chol,
                     std::uint64_t key) {
  Rng rng(key);
  const Eigen::Index d = cls.innovation.rows();
  const int p = static_cast<int>(cls.coefficients.size());
  const Eigen::Index burn = 10L * p * spec.lag;
  const Eigen::Index total = burn + spec.samples;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(d, total);
  Eigen::VectorXd z(d);
  for (Eigen::Index t = 0; t < total; ++t) {
    for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
    Eigen::VectorXd v = chol * z;
    for (int k = 1; k <= p; ++k) {
      const Eigen::Index src = t - static_cast<Eigen::Index>(k) * spec.lag;
      if (src >= 0) v += cls.coefficients[k - 1] * x.col(src);
    }
    x.col(t) = v;
  }
  Epoch e;
  e.sample_rate = spec.sample_rate;
  e.data = x.rightCols(spec.samples);
  return e;
}

}  // namespace

EpochSet generate_ar_dataset(const ArSpec& spec, unsigned workers) {
  check_spec(spec);
  std::vector<Eigen::MatrixXd> chols;
  for (const auto& c : spec.classes) chols.emplace_back(Eigen::LLT<Eigen::MatrixXd>(c.innovation).matrixL());

  EpochSet set;
  set.subject = spec.subject;
  set.sample_rate = spec.sample_rate;
  for (const auto& c : spec.classes) set.classes.push_back(c.name);
  const std::size_t n_classes = spec.classes.size();
  const std::size_t per_session = n_classes * static_cast<std::size_t>(spec.epochs_per_class);
  for (int s = 0; s < spec.sessions; ++s) {
    Session session;
    session.id = "session_" + std::to_string(s);
    session.epochs.resize(per_session);
    session.labels.resize(per_session);
    parallel_for(per_session, workers, [&](std::size_t i) {
      const std::size_t cls = i % n_classes;
      session.labels[i] = static_cast<int>(cls);
      session.epochs[i] = simulate_epoch(spec, spec.classes[cls], chols[cls],
                                         substream_key(spec.seed, static_cast<std::uint64_t>(s), i));
    });
    set.sessions.push_back(std::move(session));
  }
  return set;
}

Eigen::MatrixXd ar1_innovation_for(const Eigen::MatrixXd& a, const Eigen::MatrixXd& gamma0) {
  Eigen::MatrixXd u = gamma0 - a * gamma0 * a.transpose();
  return 0.5 * (u + u.transpose());
}

ArSpec equal_lag0_two_class_spec(int channels, double coef, int samples, int epochs_per_class,
                                 std::uint64_t seed) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(channels, channels);
  // Block-diagonal planar rotations by 90 degrees; odd leftover channel keeps -coef.
  Eigen::MatrixXd rot = Eigen::MatrixXd::Zero(channels, channels);
  for (int i = 0; i + 1 < channels; i += 2) {
    rot(i, i + 1) = -1.0;
    rot(i + 1, i) = 1.0;
  }
  if (channels % 2 == 1) rot(channels - 1, channels - 1) = -1.0;

  ArSpec spec;
  spec.samples = samples;
  spec.epochs_per_class = epochs_per_class;
  spec.seed = seed;
  const Eigen::MatrixXd a0 = coef * eye;
  const Eigen::MatrixXd a1 = coef * rot;
  spec.classes.push_back(ArClassSpec{"smooth", {a0}, ar1_innovation_for(a0, eye)});
  spec.classes.push_back(ArClassSpec{"rotating", {a1}, ar1_innovation_for(a1, eye)});
  return spec;
}

EpochSet generate_sine_dataset(const SineSpec& spec) {
  if (spec.channels < 1 || spec.samples < 2 || spec.epochs_per_class < 1 || spec.n_classes < 1 ||
      spec.sessions < 1 || !(spec.period > 0.0) || spec.noise < 0.0) {
    fail(ErrorCode::InvalidArgument, "SineSpec: invalid configuration");
  }
  EpochSet set;
  set.subject = spec.subject;
  set.sample_rate = spec.sample_rate;
  for (int c = 0; c < spec.n_classes; ++c) set.classes.push_back("class_" + std::to_string(c));
  const std::size_t per_session = static_cast<std::size_t>(spec.n_classes) * spec.epochs_per_class;
  for (int s = 0; s < spec.sessions; ++s) {
    Session session;
    session.id = "session_" + std::to_string(s);
    for (std::size_t i = 0; i < per_session; ++i) {
      Rng rng(substream_key(spec.seed, static_cast<std::uint64_t>(s), i));
      Epoch e;
      e.sample_rate = spec.sample_rate;
      e.data.resize(spec.channels, spec.samples);
      for (int ch = 0; ch < spec.channels; ++ch) {
        const double phase = 2.0 * M_PI * rng.uniform();
        for (int t = 0; t < spec.samples; ++t) {
          e.data(ch, t) = std::sin(2.0 * M_PI * t / spec.period + phase) + spec.noise * rng.normal();
        }
      }
      session.epochs.push_back(std::move(e));
      session.labels.push_back(static_cast<int>(i % spec.n_classes));
    }
    set.sessions.push_back(std::move(session));
  }
  return set;
}

}  // namespace acm
