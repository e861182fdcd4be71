#include "medguard/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "medguard/error.hpp"

namespace medguard::reliability {
namespace {

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::size_t step_count(double horizon, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(Errc::invalid_argument, "step must be positive and finite");
  if (!(horizon >= step) || !std::isfinite(horizon)) throw Error(Errc::invalid_argument, "horizon must be >= step");
  const double n = std::ceil(horizon / step * (1.0 - 1e-12));
  if (n > 1e15) throw Error(Errc::invalid_argument, "too many steps");
  return static_cast<std::size_t>(std::max(1.0, n));
}

void check_size(const CtmcModel& model, const StateDistribution& p) {
  if (p.p.size() != model.size()) throw Error(Errc::invalid_argument, "distribution size does not match the model");
}

}  // namespace

// ---- dense matrix --------------------------------------------------------------

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(n_);
  for (std::size_t r = 0; r < n_; ++r) {
    for (std::size_t c = 0; c < n_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

DenseMatrix DenseMatrix::operator*(const DenseMatrix& rhs) const {
  DenseMatrix out(n_);
  for (std::size_t r = 0; r < n_; ++r) {
    for (std::size_t k = 0; k < n_; ++k) {
      const double a = (*this)(r, k);
      if (a == 0.0) continue;
      for (std::size_t c = 0; c < n_; ++c) out(r, c) += a * rhs(k, c);
    }
  }
  return out;
}

std::vector<double> DenseMatrix::operator*(std::span<const double> v) const {
  std::vector<double> out(n_, 0.0);
  for (std::size_t r = 0; r < n_; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n_; ++c) acc += (*this)(r, c) * v[c];
    out[r] = acc;
  }
  return out;
}

// ---- model ---------------------------------------------------------------------

CtmcModel CtmcModel::from_generator(DenseMatrix q) {
  const std::size_t n = q.size();
  if (n == 0) throw Error(Errc::invalid_argument, "empty generator");
  double scale = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (!std::isfinite(q(r, c))) throw Error(Errc::invalid_argument, "non-finite generator entry");
      if (r != c && q(r, c) < 0.0) throw Error(Errc::negative_rate, "negative off-diagonal generator entry");
      scale = std::max(scale, std::abs(q(r, c)));
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < n; ++c) row += q(r, c);
    if (std::abs(row) > 1e-12 * std::max(scale, 1.0)) {
      throw Error(Errc::invalid_argument, "generator row " + std::to_string(r) + " does not sum to zero");
    }
  }
  return CtmcModel(std::move(q));
}

CtmcModel CtmcModel::from_transitions(std::size_t states, std::span<const Transition> transitions) {
  DenseMatrix q(states);
  for (const auto& t : transitions) {
    if (t.from >= states || t.to >= states || t.from == t.to) {
      throw Error(Errc::unknown_edge, "transition " + std::to_string(t.from) + "->" + std::to_string(t.to));
    }
    if (!std::isfinite(t.rate) || t.rate < 0.0) throw Error(Errc::negative_rate, "transition rate must be >= 0");
    q(t.from, t.to) += t.rate;
  }
  for (std::size_t r = 0; r < states; ++r) {
    double out = 0.0;
    for (std::size_t c = 0; c < states; ++c) {
      if (c != r) out += q(r, c);
    }
    q(r, r) = -out;
  }
  return from_generator(std::move(q));
}

double CtmcModel::max_exit_rate() const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m = std::max(m, -q_(i, i));
  return m;
}

void CtmcModel::derivative(std::span<const double> p, std::span<double> out) const {
  const std::size_t n = size();
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += qt_(r, c) * p[c];
    out[r] = acc;
  }
}

CtmcModel build_generator(const RateTable& rates) {
  std::vector<CtmcModel::Transition> transitions;
  for (const auto& [edge, rate] : rates.rates()) {
    if (!edge_kind(edge.from, edge.to)) throw Error(Errc::unknown_edge, "rate on a non-edge");
    if (!std::isfinite(rate) || rate < 0.0) throw Error(Errc::negative_rate, "negative rate");
    if (rate == 0.0) continue;
    transitions.push_back({static_cast<std::size_t>(edge.from - 1), static_cast<std::size_t>(edge.to - 1), rate});
  }
  return CtmcModel::from_transitions(kStateCount, transitions);
}

// ---- distributions -------------------------------------------------------------

StateDistribution StateDistribution::unit(std::size_t n, std::size_t state_index) {
  StateDistribution d;
  d.p.assign(n, 0.0);
  d.p.at(state_index) = 1.0;
  return d;
}

StateDistribution StateDistribution::uniform(std::size_t n) {
  StateDistribution d;
  d.p.assign(n, 1.0 / static_cast<double>(n));
  return d;
}

void check_distribution(const StateDistribution& d) {
  if (d.p.empty()) throw Error(Errc::invalid_argument, "empty distribution");
  for (double v : d.p) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::invalid_argument, "probability outside [0,1]");
  }
  if (std::abs(sum(d.p) - 1.0) > 1e-9) throw Error(Errc::invalid_argument, "probabilities do not sum to 1");
}

double availability(const StateDistribution& d) {
  if (d.p.empty()) throw Error(Errc::invalid_argument, "empty distribution");
  return d.p.front();
}

// ---- transient -----------------------------------------------------------------

DenseMatrix rk4_propagator(const CtmcModel& model, double step) {
  const std::size_t n = model.size();
  DenseMatrix a = model.generator().transposed();
  DenseMatrix ha(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) ha(r, c) = step * a(r, c);
  }
  // Horner form of the degree-4 Taylor polynomial.
  DenseMatrix m = DenseMatrix::identity(n);
  for (double divisor : {4.0, 3.0, 2.0, 1.0}) {
    DenseMatrix next = ha * m;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) next(r, c) /= divisor;
    }
    for (std::size_t i = 0; i < n; ++i) next(i, i) += 1.0;
    m = std::move(next);
  }
  return m;
}

namespace {

/// p <- M^count p using cached binary powers of M.
class PropagatorPowers {
 public:
  explicit PropagatorPowers(DenseMatrix one_step) { powers_.push_back(std::move(one_step)); }

  std::vector<double> apply(std::vector<double> p, std::uint64_t count) {
    for (std::size_t bit = 0; count != 0; ++bit, count >>= 1) {
      if (count & 1) p = power(bit) * std::span<const double>(p);
    }
    return p;
  }

 private:
  const DenseMatrix& power(std::size_t bit) {
    while (powers_.size() <= bit) powers_.push_back(powers_.back() * powers_.back());
    return powers_[bit];
  }

  std::vector<DenseMatrix> powers_;
};

}  // namespace

StateDistribution transient_endpoint(const CtmcModel& model, const StateDistribution& p0, double horizon, double step) {
  check_size(model, p0);
  check_distribution(p0);
  const std::size_t n = step_count(horizon, step);
  PropagatorPowers powers(rk4_propagator(model, horizon / static_cast<double>(n)));
  StateDistribution out;
  out.p = powers.apply(p0.p, n);
  out.t = p0.t + horizon;
  return out;
}

Trajectory solve_transient(const CtmcModel& model, const StateDistribution& p0, const TransientOptions& options,
                           const StepObserver& observer) {
  check_size(model, p0);
  check_distribution(p0);
  const std::size_t steps = step_count(options.horizon, options.step);
  const double h = options.horizon / static_cast<double>(steps);
  const std::size_t n = model.size();

  Trajectory traj;
  traj.steps = steps;
  traj.step = h;
  traj.min_probability = *std::min_element(p0.p.begin(), p0.p.end());
  traj.max_conservation_error = std::abs(sum(p0.p) - 1.0);

  StateDistribution cur = p0;
  traj.samples.push_back(cur);
  if (observer) observer(cur);

  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (std::size_t s = 1; s <= steps; ++s) {
    model.derivative(cur.p, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = cur.p[i] + 0.5 * h * k1[i];
    model.derivative(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = cur.p[i] + 0.5 * h * k2[i];
    model.derivative(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = cur.p[i] + h * k3[i];
    model.derivative(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) cur.p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    cur.t = p0.t + static_cast<double>(s) * h;

    const double drift = std::abs(sum(cur.p) - 1.0);
    const double low = *std::min_element(cur.p.begin(), cur.p.end());
    traj.max_conservation_error = std::max(traj.max_conservation_error, drift);
    traj.min_probability = std::min(traj.min_probability, low);
    if (drift > options.conservation_tolerance) {
      throw Error(Errc::step_too_large, "probability mass drifted by " + std::to_string(drift) + " at t=" +
                                            std::to_string(cur.t) + "; use a smaller step");
    }
    if (low < -options.positivity_tolerance) {
      throw Error(Errc::step_too_large, "negative probability " + std::to_string(low) + " at t=" +
                                            std::to_string(cur.t) + "; use a smaller step");
    }

    if (observer) observer(cur);
    if (s == steps || (options.record_every != 0 && s % options.record_every == 0)) traj.samples.push_back(cur);
  }

  if (options.check_convergence) {
    const StateDistribution halved = transient_endpoint(model, p0, options.horizon, h / 2.0);
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(halved.p[i] - cur.p[i]));
    traj.convergence_delta = delta;
    if (delta >= options.convergence_tolerance) {
      throw Error(Errc::step_too_large, "halving the step moved the endpoint by " + std::to_string(delta) +
                                            "; use a smaller step");
    }
  }
  return traj;
}

// ---- steady state --------------------------------------------------------------

bool is_irreducible(const CtmcModel& model) {
  const std::size_t n = model.size();
  const auto& q = model.generator();
  auto reaches_all = [&](bool forward) {
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> queue{0};
    seen[0] = true;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v = 0; v < n; ++v) {
        const double rate = forward ? q(u, v) : q(v, u);
        if (v != u && rate > 0.0 && !seen[v]) {
          seen[v] = true;
          queue.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  };
  return reaches_all(true) && reaches_all(false);
}

double balance_residual(const CtmcModel& model, std::span<const double> p) {
  std::vector<double> r(model.size());
  model.derivative(p, r);
  double m = 0.0;
  for (double v : r) m = std::max(m, std::abs(v));
  return m;
}

namespace {

/// Solves a x = b in place by Gaussian elimination with partial pivoting.
std::vector<double> gauss_solve(DenseMatrix a, std::vector<double> b) {
  const std::size_t n = a.size();
  double scale = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) scale = std::max(scale, std::abs(a(r, c)));
  }
  const double tiny = std::numeric_limits<double>::epsilon() * scale * static_cast<double>(n) * 1e-6;

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (std::abs(a(pivot, col)) <= tiny) throw Error(Errc::singular_system, "zero pivot in column " + std::to_string(col));
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(pivot, c));
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a(i, c) * x[c];
    x[i] = acc / a(i, i);
  }
  return x;
}

}  // namespace

StateDistribution steady_state(const CtmcModel& model) {
  const std::size_t n = model.size();
  if (!is_irreducible(model)) throw Error(Errc::singular_system, "chain is reducible; no unique steady state");

  DenseMatrix a = model.generator().transposed();
  for (std::size_t c = 0; c < n; ++c) a(n - 1, c) = 1.0;
  std::vector<double> b(n, 0.0);
  b[n - 1] = 1.0;

  std::vector<double> x = gauss_solve(a, b);

  // One round of iterative refinement on the augmented system.
  std::vector<double> r = b;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < n; ++c) r[i] -= a(i, c) * x[c];
  }
  const std::vector<double> dx = gauss_solve(a, r);
  for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];

  const double residual = balance_residual(model, x);
  if (!(residual < 1e-10)) {
    throw Error(Errc::singular_system, "balance residual " + std::to_string(residual) + " exceeds 1e-10");
  }
  for (double& v : x) {
    if (v < 0.0 && v > -1e-15) v = 0.0;
  }
  StateDistribution d;
  d.p = std::move(x);
  d.t = std::numeric_limits<double>::infinity();
  return d;
}

// ---- reference comparison ------------------------------------------------------

const std::array<double, kStateCount>& reference_distribution() noexcept {
  static constexpr std::array<double, kStateCount> kReference = {
      0.9925712, 0.0002091, 0.0005966, 0.002998966, 0.00009805, 1.09e-06,
      2.99e-05,  0.0019989, 0.00049866, 4.24e-07,   0.0009958,  3.00e-07,
  };
  return kReference;
}

ReferenceComparison compare_with_reference(const CtmcModel& model, double step, double band, double max_horizon) {
  if (model.size() != kStateCount) throw Error(Errc::invalid_argument, "reference comparison needs the 12-state model");
  if (!(step > 0.0)) throw Error(Errc::invalid_argument, "step must be positive");

  ReferenceComparison out;
  out.target = reference_distribution().front();
  out.band = band;
  out.search_horizon = max_horizon;
  out.steady = steady_state(model);

  const StateDistribution e1 = StateDistribution::unit(kStateCount);
  PropagatorPowers powers(rk4_propagator(model, step));
  auto p1_at = [&](std::uint64_t n) { return powers.apply(e1.p, n); };
  const double upper = out.target + band;

  std::uint64_t hi = 1;
  std::vector<double> at_hi = p1_at(hi);
  while (at_hi.front() > upper) {
    if (static_cast<double>(hi) * 2.0 * step > max_horizon) return out;
    hi *= 2;
    at_hi = p1_at(hi);
  }
  std::uint64_t lo = hi / 2;  // availability still above the band at lo (or lo == 0)
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    auto at_mid = p1_at(mid);
    if (at_mid.front() > upper) {
      lo = mid;
    } else {
      hi = mid;
      at_hi = std::move(at_mid);
    }
  }
  if (at_hi.front() < out.target - band) return out;

  StateDistribution d;
  d.p = std::move(at_hi);
  d.t = static_cast<double>(hi) * step;
  out.t_star = d.t;
  out.at_t_star = std::move(d);
  return out;
}

}  // namespace medguard::reliability
