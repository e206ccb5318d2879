#include "mfabsde/time_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mfabsde {

namespace {

int exact_multiple(double x, double dt, const char* what) {
  const double q = x / dt;
  const int n = static_cast<int>(std::lround(q));
  if (std::abs(q - n) > 1e-9)
    throw std::invalid_argument(std::string(what) +
                                " is not an integer multiple of dt");
  return n;
}

}  // namespace

TimeGrid::TimeGrid(double T, double K, double dt) : T_(T), K_(K), dt_(dt) {
  if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: T must be positive");
  if (K < 0.0) throw std::invalid_argument("TimeGrid: K must be nonnegative");
  if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
  nT_ = exact_multiple(T, dt, "T");
  nK_ = K == 0.0 ? 0 : exact_multiple(K, dt, "K");
  if (nT_ < 1) throw std::invalid_argument("TimeGrid: T < dt");
}

int TimeGrid::index_of(double t, bool* rounded) const {
  const double q = t / dt_;
  const int i = static_cast<int>(std::lround(q));
  if (rounded) *rounded = std::abs(q - i) > 1e-9;
  if (i < 0 || i >= node_count())
    throw std::out_of_range("TimeGrid: time outside [0, T+K]");
  return i;
}

DelaySpec constant_delays(double delta, double zeta) {
  return DelaySpec{[delta](double) { return delta; },
                   [zeta](double) { return zeta; }};
}

int shift_index(int i, const std::function<double(double)>& shift,
                const TimeGrid& grid, bool* rounded) {
  const double t = grid.time(i);
  const double s = shift(t);
  if (s < 0.0) throw std::invalid_argument("shift_index: negative shift");
  const double target = t + s;
  if (target > grid.end() + 1e-9 * grid.dt())
    throw std::out_of_range("shift_index: t + shift(t) beyond T+K");
  return grid.index_of(std::min(target, grid.end()), rounded);
}

DelayValidation validate_delays(const DelaySpec& spec, const TimeGrid& grid) {
  DelayValidation out;
  const int nT = grid.horizon_index();
  const double dt = grid.dt();

  double L = 0.0;
  bool have_L = true;
  for (const auto* shift : {&spec.delta, &spec.zeta}) {
    // Condition (i) and the change-of-variables slope in one pass.
    double prev = 0.0;
    for (int i = 0; i <= nT; ++i) {
      const double t = grid.time(i);
      const double s = (*shift)(t);
      if (s < 0.0)
        throw std::invalid_argument("validate_delays: negative delay");
      const double target = t + s;
      if (target > grid.end() + 1e-9 * dt)
        throw std::out_of_range(
            "validate_delays: condition (i) violated, t + shift(t) > T+K");
      bool r = false;
      grid.index_of(std::min(target, grid.end()), &r);
      if (r) out.rounding_warning = true;
      if (i > 0) {
        const double slope = target - prev;  // forward difference of t+shift
        if (slope <= 0.0)
          have_L = false;
        else
          L = std::max(L, dt / slope);
      }
      prev = target;
    }
  }

  if (have_L) {
    out.L = L;
  } else if (spec.user_L >= 0.0) {
    out.L = spec.user_L;
  } else {
    throw std::invalid_argument(
        "validate_delays: shift map not strictly increasing and no user L "
        "supplied; condition (ii) unverifiable");
  }
  return out;
}

}  // namespace mfabsde
