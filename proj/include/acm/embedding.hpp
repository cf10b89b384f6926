#pragma once

#include <span>
#include <string>
#include <vector>

#include "acm/covariance.hpp"
#include "acm/data_io.hpp"

namespace acm {

using EpochRefs = std::vector<const Epoch*>;

EpochRefs all_epochs(const EpochSet& set);

// MI in nats between x_t and x_{t+lag} for lag = 0..max_lag, from a
// bins x bins joint histogram over the series range. Each sample is shared
// linearly between its two nearest bin centres.
std::vector<double> average_mutual_information(std::span<const double> series, int max_lag,
                                               int bins = 16);

struct TauSelection {
  int tau = 1;
  std::vector<double> curve;  // summed MI, index = lag
  bool no_local_minimum = false;
};

// First strict local minimum (lag >= 1) of the MI curve summed over every
// channel of every epoch; falls back to the argmin and sets the flag.
TauSelection select_tau_ami(const EpochRefs& epochs, int max_lag = 50, int bins = 16);
TauSelection select_tau_ami(const EpochSet& set, int max_lag = 50, int bins = 16);

struct CaoOptions {
  int max_dim = 10;
  double threshold = 0.05;
  int theiler = 0;  // neighbours with |i - j| <= theiler are ignored
};

struct DimensionSelection {
  int dimension = 1;
  std::vector<double> e;   // E(d), d = 1..max_dim+1 (index 0 is d = 1)
  std::vector<double> e1;  // E1(d) = E(d+1)/E(d), d = 1..max_dim
  bool saturation_failure = false;
};

// Cao's averaged false-neighbour statistic with Chebyshev distances. The E(d)
// curves of all series are summed before E1 is formed.
DimensionSelection cao_embedding_dimension(const EpochRefs& epochs, int tau,
                                           const CaoOptions& options = {});
DimensionSelection cao_embedding_dimension(const EpochSet& set, int tau,
                                           const CaoOptions& options = {});

struct MdopOptions {
  int max_cycles = 10;
  double fnn_threshold = 0.05;
  int max_lag = 10;
  int theiler = 1;
  double fnn_ratio = 10.0;  // a neighbour is false when |new coord gap| / dist exceeds this
};

struct MdopCycle {
  int lag = 0;                // delay of the coordinate added in this cycle
  std::vector<double> beta;   // summed beta statistic, index = candidate lag - 1
  double fnn = 0.0;           // false-neighbour fraction after adding it
};

struct EmbeddingEstimate {
  int tau = 1;
  int dimension = 1;
  std::string method;
  bool flagged = false;
  std::string flag;

  // Diagnostics; which ones are filled depends on the method.
  std::vector<double> ami_curve;
  std::vector<double> e1_curve;
  std::vector<MdopCycle> cycles;

  AugmentedParams params() const { return AugmentedParams{dimension, tau}; }
};

// Iterative embedding: each cycle appends the delayed coordinate whose
// directional-derivative statistic is largest, and stops once the
// false-neighbour fraction caused by the new coordinate is below the
// threshold. D is the number of cycles; tau is the rounded mean of the lags
// kept in the final embedding.
EmbeddingEstimate mdop_unified(const EpochRefs& epochs, const MdopOptions& options = {});
EmbeddingEstimate mdop_unified(const EpochSet& set, const MdopOptions& options = {});

struct AmiCaoOptions {
  int max_lag = 50;
  int bins = 16;
  CaoOptions cao;
};

// AMI for tau, then Cao for D at that tau.
EmbeddingEstimate ami_cao(const EpochRefs& epochs, const AmiCaoOptions& options = {});
EmbeddingEstimate ami_cao(const EpochSet& set, const AmiCaoOptions& options = {});

// "lag,value" rows starting at `first_index`.
std::string curve_to_csv(std::span<const double> values, int first_index,
                         const std::string& index_name = "lag");

}  // namespace acm
