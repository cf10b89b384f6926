#include "acm/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "acm/error.hpp"

namespace acm {
namespace {

// Row `ch` of an epoch as a contiguous copy.
std::vector<double> channel(const Epoch& e, Eigen::Index ch) {
  std::vector<double> out(static_cast<std::size_t>(e.samples()));
  for (Eigen::Index t = 0; t < e.samples(); ++t) out[t] = e.data(ch, t);
  return out;
}

void require_nonempty(const EpochRefs& epochs, const char* what) {
  if (epochs.empty()) fail(ErrorCode::EmptyInput, std::string(what) + ": no epochs");
}

void require_representable(const EpochRefs& epochs, const EmbeddingEstimate& est) {
  const AugmentedParams p = est.params();
  for (const Epoch* e : epochs) {
    if (!p.valid_for(e->samples())) {
      std::ostringstream os;
      os << est.method << ": estimate (order " << p.order << ", lag " << p.lag
         << ") does not fit epochs of " << e->samples() << " samples";
      fail(ErrorCode::TooShort, os.str());
    }
  }
}

}  // namespace

EpochRefs all_epochs(const EpochSet& set) {
  EpochRefs out;
  for (const auto& s : set.sessions)
    for (const auto& e : s.epochs) out.push_back(&e);
  return out;
}

// ---------------------------------------------------------------------------
// Average mutual information

std::vector<double> average_mutual_information(std::span<const double> series, int max_lag,
                                               int bins) {
  if (max_lag < 0 || bins < 2) fail(ErrorCode::InvalidArgument, "AMI: need max_lag >= 0, bins >= 2");
  const std::size_t n = series.size();
  if (n <= static_cast<std::size_t>(max_lag) + 10) {
    std::ostringstream os;
    os << "AMI: series of length " << n << " is too short for max_lag " << max_lag;
    fail(ErrorCode::TooShort, os.str());
  }
  const auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) fail(ErrorCode::ConstantSeries, "AMI: series is constant");

  // Linear (cloud-in-cell) assignment: each value splits its unit weight
  // between the two nearest bin centres, so the curve varies smoothly with
  // the data instead of jumping at bin edges.
  std::vector<int> cell(n);
  std::vector<double> frac(n);
  const double width = (hi - lo) / bins;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (series[i] - lo) / width - 0.5;
    const double f = std::floor(u);
    int c = static_cast<int>(f);
    double w = u - f;
    if (c < 0) {
      c = 0;
      w = 0.0;
    } else if (c >= bins - 1) {
      c = bins - 1;
      w = 0.0;
    }
    cell[i] = c;
    frac[i] = w;
  }

  std::vector<double> mi(static_cast<std::size_t>(max_lag) + 1, 0.0);
  const std::size_t stride = static_cast<std::size_t>(bins) + 1;
  std::vector<double> joint(stride * stride);
  std::vector<double> pa(bins), pb(bins);
  for (int lag = 0; lag <= max_lag; ++lag) {
    std::fill(joint.begin(), joint.end(), 0.0);
    const std::size_t pairs = n - lag;
    for (std::size_t t = 0; t < pairs; ++t) {
      const std::size_t a = cell[t], b = cell[t + lag];
      const double fa = frac[t], fb = frac[t + lag];
      joint[a * stride + b] += (1.0 - fa) * (1.0 - fb);
      joint[a * stride + b + 1] += (1.0 - fa) * fb;
      joint[(a + 1) * stride + b] += fa * (1.0 - fb);
      joint[(a + 1) * stride + b + 1] += fa * fb;
    }
    std::fill(pa.begin(), pa.end(), 0.0);
    std::fill(pb.begin(), pb.end(), 0.0);
    for (int i = 0; i < bins; ++i) {
      for (int j = 0; j < bins; ++j) {
        const double c = joint[i * stride + j] / static_cast<double>(pairs);
        joint[i * stride + j] = c;
        pa[i] += c;
        pb[j] += c;
      }
    }
    double sum = 0.0;
    for (int i = 0; i < bins; ++i)
      for (int j = 0; j < bins; ++j) {
        const double c = joint[i * stride + j];
        if (c > 0.0) sum += c * std::log(c / (pa[i] * pb[j]));
      }
    mi[lag] = std::max(0.0, sum);
  }
  return mi;
}

TauSelection select_tau_ami(const EpochRefs& epochs, int max_lag, int bins) {
  require_nonempty(epochs, "select_tau_ami");
  if (max_lag < 2) fail(ErrorCode::InvalidArgument, "select_tau_ami: max_lag must be >= 2");
  TauSelection out;
  out.curve.assign(static_cast<std::size_t>(max_lag) + 1, 0.0);
  for (const Epoch* e : epochs) {
    for (Eigen::Index ch = 0; ch < e->channels(); ++ch) {
      const auto x = channel(*e, ch);
      const auto mi = average_mutual_information(x, max_lag, bins);
      for (std::size_t k = 0; k < mi.size(); ++k) out.curve[k] += mi[k];
    }
  }
  for (int lag = 1; lag < max_lag; ++lag) {
    if (out.curve[lag] < out.curve[lag - 1] && out.curve[lag] < out.curve[lag + 1]) {
      out.tau = lag;
      return out;
    }
  }
  out.no_local_minimum = true;
  out.tau = static_cast<int>(std::min_element(out.curve.begin() + 1, out.curve.end()) -
                             out.curve.begin());
  return out;
}

TauSelection select_tau_ami(const EpochSet& set, int max_lag, int bins) {
  return select_tau_ami(all_epochs(set), max_lag, bins);
}

// ---------------------------------------------------------------------------
// Cao

namespace {

// Distances at or below this are treated as repeats of the same state
// (exactly periodic inputs revisit points up to rounding).
double duplicate_floor(const std::vector<double>& x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return 1e-9 * (*hi - *lo);
}

// Sum over points of a(i, d) for d = 1..max_dim+1, plus the point counts.
void cao_accumulate(const std::vector<double>& x, int tau, const CaoOptions& opt,
                    std::vector<double>& sums, std::vector<double>& counts) {
  const long n = static_cast<long>(x.size());
  const double floor = duplicate_floor(x);
  for (int d = 1; d <= opt.max_dim + 1; ++d) {
    // Points with a (d+1)-th coordinate available.
    const long m = n - static_cast<long>(d) * tau;
    double total = 0.0;
    long used = 0;
    for (long i = 0; i < m; ++i) {
      double best = std::numeric_limits<double>::infinity();
      long best_j = -1;
      for (long j = 0; j < m; ++j) {
        if (std::labs(i - j) <= opt.theiler) continue;
        double dist = 0.0;
        for (int k = 0; k < d && dist < best; ++k) {
          dist = std::max(dist, std::abs(x[i + k * tau] - x[j + k * tau]));
        }
        if (dist > floor && dist < best) {
          best = dist;
          best_j = j;
        }
      }
      if (best_j < 0) continue;
      const double extra = std::abs(x[i + static_cast<long>(d) * tau] -
                                    x[best_j + static_cast<long>(d) * tau]);
      total += std::max(best, extra) / best;
      ++used;
    }
    sums[d - 1] += total;
    counts[d - 1] += static_cast<double>(used);
  }
}

}  // namespace

DimensionSelection cao_embedding_dimension(const EpochRefs& epochs, int tau,
                                           const CaoOptions& options) {
  require_nonempty(epochs, "cao_embedding_dimension");
  if (tau < 1 || options.max_dim < 2 || !(options.threshold > 0.0)) {
    fail(ErrorCode::InvalidArgument, "cao_embedding_dimension: need tau >= 1, max_dim >= 2, threshold > 0");
  }
  std::vector<double> sums(static_cast<std::size_t>(options.max_dim) + 1, 0.0);
  std::vector<double> counts(sums.size(), 0.0);
  for (const Epoch* e : epochs) {
    const long needed = static_cast<long>(options.max_dim + 1) * tau + 10;
    if (e->samples() <= needed) {
      std::ostringstream os;
      os << "cao_embedding_dimension: epochs of " << e->samples()
         << " samples are too short for max_dim " << options.max_dim << " at tau " << tau;
      fail(ErrorCode::TooShort, os.str());
    }
    for (Eigen::Index ch = 0; ch < e->channels(); ++ch) {
      const auto x = channel(*e, ch);
      const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
      if (!(*hi > *lo)) fail(ErrorCode::ConstantSeries, "cao_embedding_dimension: constant series");
      cao_accumulate(x, tau, options, sums, counts);
    }
  }

  DimensionSelection out;
  for (std::size_t k = 0; k < sums.size(); ++k) {
    out.e.push_back(counts[k] > 0.0 ? sums[k] / counts[k] : 0.0);
  }
  for (int d = 1; d <= options.max_dim; ++d) out.e1.push_back(out.e[d] / out.e[d - 1]);
  auto near_one = [&](int d) { return std::abs(out.e1[d - 1] - 1.0) < options.threshold; };
  for (int d = 1; d < options.max_dim; ++d) {
    if (near_one(d) && near_one(d + 1)) {
      out.dimension = d;
      return out;
    }
  }
  out.dimension = options.max_dim;
  out.saturation_failure = true;
  return out;
}

DimensionSelection cao_embedding_dimension(const EpochSet& set, int tau, const CaoOptions& options) {
  return cao_embedding_dimension(all_epochs(set), tau, options);
}

// ---------------------------------------------------------------------------
// MDOP

namespace {

struct Neighbour {
  long index = -1;
  double dist = 0.0;
};

// Euclidean nearest neighbours of the points t in [start, n) of the delay
// embedding with coordinates x(t - l), l in lags.
std::vector<Neighbour> nearest_neighbours(const std::vector<double>& x,
                                          const std::vector<int>& lags, long start, int theiler) {
  const long n = static_cast<long>(x.size());
  const double floor = duplicate_floor(x);
  const double floor2 = floor * floor;
  std::vector<Neighbour> nn(static_cast<std::size_t>(n - start));
  for (long i = start; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    long best_j = -1;
    for (long j = start; j < n; ++j) {
      if (std::labs(i - j) <= theiler) continue;
      double d2 = 0.0;
      for (int l : lags) {
        const double diff = x[i - l] - x[j - l];
        d2 += diff * diff;
        if (d2 >= best) break;
      }
      if (d2 > floor2 && d2 < best) {
        best = d2;
        best_j = j;
      }
    }
    nn[i - start] = Neighbour{best_j, std::sqrt(best)};
  }
  return nn;
}

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

}  // namespace

EmbeddingEstimate mdop_unified(const EpochRefs& epochs, const MdopOptions& options) {
  require_nonempty(epochs, "mdop_unified");
  if (options.max_cycles < 1 || options.max_lag < 1 || !(options.fnn_threshold > 0.0)) {
    fail(ErrorCode::InvalidArgument, "mdop_unified: need max_cycles >= 1, max_lag >= 1, threshold > 0");
  }
  std::vector<std::vector<double>> series;
  for (const Epoch* e : epochs) {
    const long needed = static_cast<long>(options.max_cycles + 1) * options.max_lag + 10;
    if (e->samples() <= needed) {
      std::ostringstream os;
      os << "mdop_unified: epochs of " << e->samples() << " samples are too short for "
         << options.max_cycles << " cycles at max_lag " << options.max_lag;
      fail(ErrorCode::TooShort, os.str());
    }
    for (Eigen::Index ch = 0; ch < e->channels(); ++ch) {
      series.push_back(channel(*e, ch));
      const auto [lo, hi] = std::minmax_element(series.back().begin(), series.back().end());
      if (!(*hi > *lo)) fail(ErrorCode::ConstantSeries, "mdop_unified: constant series");
    }
  }

  EmbeddingEstimate out;
  out.method = "mdop";
  std::vector<int> lags{0};
  bool terminated = false;
  for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
    const int current_max = *std::max_element(lags.begin(), lags.end());
    const long start = current_max + options.max_lag;

    MdopCycle info;
    info.beta.assign(static_cast<std::size_t>(options.max_lag), 0.0);
    std::vector<std::vector<Neighbour>> neighbours;
    for (const auto& x : series) {
      neighbours.push_back(nearest_neighbours(x, lags, start, options.theiler));
      const auto& nn = neighbours.back();
      for (int cand = 1; cand <= options.max_lag; ++cand) {
        double sum = 0.0;
        long used = 0;
        for (std::size_t k = 0; k < nn.size(); ++k) {
          if (nn[k].index < 0) continue;
          const long i = start + static_cast<long>(k);
          const double gap = std::abs(x[i - cand] - x[nn[k].index - cand]);
          if (gap > 0.0) {
            sum += std::log10(gap / nn[k].dist);
            ++used;
          }
        }
        if (used > 0) info.beta[cand - 1] += sum / static_cast<double>(used);
      }
    }

    int chosen = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int cand = 1; cand <= options.max_lag; ++cand) {
      if (std::find(lags.begin(), lags.end(), cand) != lags.end()) continue;
      if (info.beta[cand - 1] > best) {
        best = info.beta[cand - 1];
        chosen = cand;
      }
    }
    if (chosen < 0) break;  // every candidate lag is already in use
    info.lag = chosen;

    double false_count = 0.0;
    double total = 0.0;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const auto& x = series[s];
      const auto& nn = neighbours[s];
      for (std::size_t k = 0; k < nn.size(); ++k) {
        if (nn[k].index < 0) continue;
        const long i = start + static_cast<long>(k);
        const double gap = std::abs(x[i - chosen] - x[nn[k].index - chosen]);
        total += 1.0;
        if (gap / nn[k].dist > options.fnn_ratio) false_count += 1.0;
      }
    }
    info.fnn = total > 0.0 ? false_count / total : 0.0;
    out.cycles.push_back(std::move(info));
    lags.push_back(chosen);
    if (out.cycles.back().fnn < options.fnn_threshold) {
      terminated = true;
      break;
    }
  }

  const int cycles = static_cast<int>(out.cycles.size());
  out.dimension = std::max(1, cycles);
  // The coordinate added in the terminating cycle is not kept.
  const int kept = std::max(1, cycles - 1);
  double mean = 0.0;
  for (int k = 0; k < kept; ++k) mean += out.cycles[k].lag;
  mean /= kept;
  out.tau = static_cast<int>(std::max(1L, round_half_up(mean)));
  if (!terminated) {
    out.flagged = true;
    out.flag = "NoTermination: false-neighbour fraction stayed above threshold for " +
               std::to_string(cycles) + " cycles";
  }
  require_representable(epochs, out);
  return out;
}

EmbeddingEstimate mdop_unified(const EpochSet& set, const MdopOptions& options) {
  return mdop_unified(all_epochs(set), options);
}

// ---------------------------------------------------------------------------

EmbeddingEstimate ami_cao(const EpochRefs& epochs, const AmiCaoOptions& options) {
  EmbeddingEstimate out;
  out.method = "ami_cao";
  const TauSelection tau = select_tau_ami(epochs, options.max_lag, options.bins);
  const DimensionSelection dim = cao_embedding_dimension(epochs, tau.tau, options.cao);
  out.tau = tau.tau;
  out.dimension = dim.dimension;
  out.ami_curve = tau.curve;
  out.e1_curve = dim.e1;
  std::vector<std::string> flags;
  if (tau.no_local_minimum) flags.push_back("AMI has no local minimum in range; argmin used");
  if (dim.saturation_failure) flags.push_back("Cao E1 did not saturate; max_dim returned");
  out.flagged = !flags.empty();
  for (std::size_t i = 0; i < flags.size(); ++i) out.flag += (i ? "; " : "") + flags[i];
  require_representable(epochs, out);
  return out;
}

EmbeddingEstimate ami_cao(const EpochSet& set, const AmiCaoOptions& options) {
  return ami_cao(all_epochs(set), options);
}

std::string curve_to_csv(std::span<const double> values, int first_index,
                         const std::string& index_name) {
  std::ostringstream os;
  os.precision(17);
  os << index_name << ",value\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << first_index + static_cast<int>(i) << ',' << values[i] << '\n';
  }
  return os.str();
}

}  // namespace acm
