#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acm/covariance.hpp"

namespace acm {

struct Session {
  std::string id;
  std::vector<Epoch> epochs;
  std::vector<int> labels;  // indices into EpochSet::classes
};

// Labeled epochs of one subject, grouped by recording session. All epochs
// share channel count, length and sample rate.
struct EpochSet {
  std::string subject;
  std::vector<std::string> classes;
  double sample_rate = 0.0;
  std::vector<Session> sessions;

  Eigen::Index channels() const;
  Eigen::Index samples() const;
  std::size_t total_epochs() const;

  // Throws InvalidArgument describing the first broken invariant.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Container format
//
// Line 1: UTF-8 JSON manifest terminated by '\n':
//   {"format":"acm-epochs","version":1,"subject":...,"classes":[...],
//    "sample_rate":...,"sessions":[{"id":...,"n_epochs":...,"labels":[...]}],
//    "d":...,"T":...,"dtype":"f64le","order":"epoch-major row-major"}
// Then total_epochs * d * T little-endian float64 values, sessions in manifest
// order, each epoch stored row by row (channel-major).

inline constexpr const char* kContainerFormat = "acm-epochs";
inline constexpr int kContainerVersion = 1;

void write_epochset(const EpochSet& set, const std::string& path);
void write_epochset(const EpochSet& set, std::ostream& out);
EpochSet read_epochset(const std::string& path);
EpochSet read_epochset(std::istream& in);

// Channel rows, sample columns, round-trip precision.
std::string epoch_to_csv(const Epoch& epoch);

// ---------------------------------------------------------------------------
// Preprocessing

struct SecondOrderSection {
  double b0, b1, b2;
  double a1, a2;  // a0 == 1
};

// Digital Butterworth band-pass with a prototype of the given order (the
// resulting filter has 2*order poles), bilinear transform with prewarping.
std::vector<SecondOrderSection> butterworth_bandpass(int order, double low_hz, double high_hz,
                                                     double sample_rate);

// Zero-phase forward-backward filtering of every channel with a 4th-order
// Butterworth band-pass. Ends are extended by odd reflection before filtering
// and the extension is discarded afterwards.
Epoch bandpass(const Epoch& x, double low_hz, double high_hz);

// ---------------------------------------------------------------------------
// Synthetic AR data

struct ArClassSpec {
  std::string name;
  std::vector<Eigen::MatrixXd> coefficients;  // A_1..A_p
  Eigen::MatrixXd innovation;                 // U, SPD
};

struct ArSpec {
  std::string subject = "sim";
  std::vector<ArClassSpec> classes;
  int lag = 1;  // generator lag between AR taps
  int samples = 512;
  int epochs_per_class = 50;
  int sessions = 1;
  double sample_rate = 250.0;
  std::uint64_t seed = 0;
};

// Spectral radius of the companion matrix of A_1..A_p.
double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& coefficients);

// Simulates X_t = sum_i A_i X_{t - i*lag} + e_t, e_t ~ N(0, U), from a zero
// history, dropping 10 * p * lag burn-in samples. Each epoch draws from its
// own substream keyed by (seed, session, epoch), so output does not depend
// on generation order. Epoch i of a session has class i % n_classes.
EpochSet generate_ar_dataset(const ArSpec& spec, unsigned workers = 1);

// Innovation covariance making an AR(1) process with coefficient `a`
// stationary at lag-0 covariance `gamma0`: U = gamma0 - a gamma0 a^T.
Eigen::MatrixXd ar1_innovation_for(const Eigen::MatrixXd& a, const Eigen::MatrixXd& gamma0);

// Two AR(1) classes sharing lag-0 covariance I but with A = +coef*I and a
// scaled rotation respectively. Plain covariances cannot tell them apart;
// lagged blocks can.
ArSpec equal_lag0_two_class_spec(int channels, double coef, int samples, int epochs_per_class,
                                 std::uint64_t seed);

struct SineSpec {
  std::string subject = "sine";
  int channels = 2;
  int samples = 1024;
  int epochs_per_class = 4;
  int n_classes = 1;
  int sessions = 1;
  double period = 64.0;  // samples
  double noise = 0.0;    // std of additive Gaussian noise
  double sample_rate = 250.0;
  std::uint64_t seed = 0;
};

// Unit-amplitude sines with a random phase per channel and epoch.
EpochSet generate_sine_dataset(const SineSpec& spec);

}  // namespace acm
