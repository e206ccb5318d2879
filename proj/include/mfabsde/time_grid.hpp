#pragma once

#include <functional>
#include <vector>

namespace mfabsde {

// Uniform discretization of [0, T+K]. T and T+K are exact nodes.
class TimeGrid {
 public:
  TimeGrid() : TimeGrid(1.0, 0.0, 1.0) {}
  TimeGrid(double T, double K, double dt);

  double horizon() const { return T_; }
  double anticipation() const { return K_; }
  double dt() const { return dt_; }
  int horizon_index() const { return nT_; }
  int node_count() const { return nT_ + nK_ + 1; }
  int cell_count() const { return node_count() - 1; }
  double time(int i) const { return i * dt_; }
  double end() const { return T_ + K_; }

  // Nearest node; `rounded` is set when t is not a node up to 1e-9*dt.
  int index_of(double t, bool* rounded = nullptr) const;

 private:
  double T_, K_, dt_;
  int nT_, nK_;
};

struct DelaySpec {
  std::function<double(double)> delta;
  std::function<double(double)> zeta;
  // Fallback change-of-variables constant when the shift maps are not
  // strictly increasing on the grid; < 0 means "not supplied".
  double user_L = -1.0;
};

DelaySpec constant_delays(double delta, double zeta);

struct DelayValidation {
  double L = 1.0;
  bool rounding_warning = false;
};

// Checks t+delta(t) <= T+K (and likewise zeta) at every node t <= T, then
// certifies the substitution constant L for strictly increasing shift maps
// as max over nodes of dt / forward-difference of t+shift(t).
DelayValidation validate_delays(const DelaySpec& spec, const TimeGrid& grid);

// Index of the node nearest t_i + shift(t_i); throws past T+K.
int shift_index(int i, const std::function<double(double)>& shift,
                const TimeGrid& grid, bool* rounded = nullptr);

}  // namespace mfabsde
