#pragma once

// Continuous-time Markov availability model of the monitoring system.
//
// States (1-based, as used in rate tables and reports):
//    1 normal operation              7 cloud hardware failure
//    2 pump hardware defect          8 pump software failure
//    3 cloud connection failure      9 pump hardware failure
//    4 pump<->controller delivery   10 cloud component failure
//    5 power supply failure         11 pump component failure
//    6 cloud software failure       12 system failure
//
// Probabilities evolve by the forward equations dp/dt = Q^T p, where Q is the
// generator assembled from the failure (lambda) and recovery (mu) rates.

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medguard::reliability {

inline constexpr int kStateCount = 12;
inline constexpr int kNormalState = 1;

/// Directed transition between 1-based states.
struct Edge {
  int from = 0;
  int to = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class RateKind { failure, recovery };

/// The 15 failure edges and 10 recovery edges of the model graph.
std::span<const Edge> failure_edges() noexcept;
std::span<const Edge> recovery_edges() noexcept;
std::optional<RateKind> edge_kind(int from, int to) noexcept;

class RateTable {
 public:
  /// Throws Error{unknown_edge} if (from,to) is not a failure edge, and
  /// Error{negative_rate} for rate < 0 or non-finite.
  void set_failure(int from, int to, double rate);
  void set_recovery(int from, int to, double rate);
  void set(RateKind kind, int from, int to, double rate);

  /// Zero for edges never set.
  double rate(int from, int to) const noexcept;
  bool is_set(int from, int to) const noexcept;

  /// Graph edges with no rate supplied; build_generator() treats them as 0.
  std::vector<Edge> defaulted_edges() const;

  const std::map<Edge, double>& rates() const noexcept { return rates_; }

  /// Unit the rates are expressed in ("hour" unless the file says otherwise).
  std::string time_unit = "hour";

  /// Appendix rate table; lambda(5,11) is deliberately left unset.
  static RateTable table_one();

  /// Lines: `lambda <i> <j> <value>`, `mu <i> <j> <value>`, `unit <name>`;
  /// '#' starts a comment. Errors carry the line number.
  static RateTable parse(std::string_view text);
  static RateTable load(const std::string& path);
  std::string serialize() const;

 private:
  std::map<Edge, double> rates_;
};

/// Row-major square matrix; just enough linear algebra for n <= a few dozen.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * n_ + c]; }

  DenseMatrix transposed() const;
  DenseMatrix operator*(const DenseMatrix& rhs) const;
  std::vector<double> operator*(std::span<const double> v) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

class CtmcModel {
 public:
  /// Validates the generator: finite, off-diagonals >= 0, rows sum to 0
  /// within 1e-12 * max|q|. Throws Error{invalid_argument}.
  static CtmcModel from_generator(DenseMatrix q);

  /// 0-based (from, to, rate) triples; the diagonal is filled in.
  struct Transition {
    std::size_t from;
    std::size_t to;
    double rate;
  };
  static CtmcModel from_transitions(std::size_t states, std::span<const Transition> transitions);

  std::size_t size() const noexcept { return q_.size(); }
  const DenseMatrix& generator() const noexcept { return q_; }
  double max_exit_rate() const noexcept;

  /// dp/dt = Q^T p
  void derivative(std::span<const double> p, std::span<double> out) const;

 private:
  explicit CtmcModel(DenseMatrix q) : q_(std::move(q)), qt_(q_.transposed()) {}

  DenseMatrix q_;
  DenseMatrix qt_;
};

/// 12-state generator; throws Error{unknown_edge} / Error{negative_rate}.
CtmcModel build_generator(const RateTable& rates);

struct StateDistribution {
  std::vector<double> p;
  double t = 0.0;

  static StateDistribution unit(std::size_t n, std::size_t state_index = 0);
  static StateDistribution uniform(std::size_t n);
};

/// Throws Error{invalid_argument} unless every p_i is in [0,1] and the sum is
/// 1 within 1e-9.
void check_distribution(const StateDistribution& d);

struct TransientOptions {
  double horizon = 1.0;
  double step = 0.01;
  /// Keep every k-th step in the returned trajectory (0 keeps only endpoints).
  std::size_t record_every = 1;
  bool check_convergence = true;
  double conservation_tolerance = 1e-9;
  double positivity_tolerance = 1e-12;
  double convergence_tolerance = 1e-8;
};

struct Trajectory {
  std::vector<StateDistribution> samples;  // always includes t=0 and the horizon
  std::size_t steps = 0;
  double step = 0.0;                        // uniform step actually used
  double max_conservation_error = 0.0;      // max over every step of |sum p - 1|
  double min_probability = 0.0;             // min over every step of min_i p_i
  std::optional<double> convergence_delta;  // max-norm endpoint change under step halving

  const StateDistribution& final() const { return samples.back(); }
};

using StepObserver = std::function<void(const StateDistribution&)>;

/// Classic fixed-step fourth-order Runge-Kutta on dp/dt = Q^T p. The step is
/// shrunk to horizon / ceil(horizon / step) so the grid hits the horizon.
/// Throws Error{step_too_large} when conservation, positivity or the
/// step-halving check fails its tolerance, and Error{invalid_argument} for a
/// bad p0, step or horizon. The observer, if given, sees every step.
Trajectory solve_transient(const CtmcModel& model, const StateDistribution& p0, const TransientOptions& options,
                           const StepObserver& observer = {});

/// One-step RK4 propagator for a linear system: I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24.
DenseMatrix rk4_propagator(const CtmcModel& model, double step);

/// Same RK4 scheme as solve_transient, advanced n steps at once by binary
/// powers of the one-step propagator. Cost is logarithmic in the step count,
/// which makes horizons of 1e9 practical.
StateDistribution transient_endpoint(const CtmcModel& model, const StateDistribution& p0, double horizon, double step);

/// Strong connectivity over strictly positive rates.
bool is_irreducible(const CtmcModel& model);

/// Solves Q^T p = 0 with one balance row replaced by sum(p) = 1, by Gaussian
/// elimination with partial pivoting. Throws Error{singular_system} for a
/// reducible chain, a numerically singular system, or a balance residual
/// above 1e-10 after refinement.
StateDistribution steady_state(const CtmcModel& model);

/// max_i |(Q^T p)_i|
double balance_residual(const CtmcModel& model, std::span<const double> p);

/// Probability of the normal state.
double availability(const StateDistribution& d);

/// Published 12-state distribution the model is compared against.
const std::array<double, kStateCount>& reference_distribution() noexcept;

struct ReferenceComparison {
  double target = 0.0;
  double band = 0.0;
  std::optional<double> t_star;                 // first time availability enters [target-band, target+band]
  std::optional<StateDistribution> at_t_star;
  StateDistribution steady;
  double search_horizon = 0.0;
};

/// Locates the first time transient availability from e1 enters the band
/// around the reference availability (doubling search, then bisection on the
/// step count) and solves the steady state for side-by-side reporting.
ReferenceComparison compare_with_reference(const CtmcModel& model, double step = 0.25, double band = 0.005,
                                           double max_horizon = 1e12);

}  // namespace medguard::reliability
