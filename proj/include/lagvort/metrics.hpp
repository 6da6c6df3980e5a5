#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lagvort/flow.hpp"
#include "lagvort/vorticity.hpp"

namespace lagvort {

// A simulated solution: the flow history together with the initial data it transports.
struct Solution {
  const FlowHistory* history = nullptr;
  VorticitySpec spec;
};

// Cell centers (i + 1/2) s, (j + 1/2) s of the global lattice of spacing s that fall in the box
// and in the closed domain. Windows built on the same spacing share nodes.
struct QuadratureGrid {
  double spacing = 0.0;
  std::vector<Vec2> points;

  static QuadratureGrid lattice(const Box& box, double spacing, const Domain& domain);
  double cell_area() const { return spacing * spacing; }
  std::size_t size() const { return points.size(); }
};

// Box that contains the support of omega(., t): the initial support grown by the distance the
// fastest particle can cover, plus 2h.
Box solution_window(const Solution& sol, double t);
// Grid over the union of the solutions' windows at time t.
QuadratureGrid solution_grid(std::span<const Solution> sols, double t, double spacing);

// omega(x, t) at the grid nodes. Nodes farther from every particle than three times the largest
// nearest-neighbor spacing of the snapshot are outside the transported support and get 0.
std::vector<double> solution_on_grid(const Solution& sol, const QuadratureGrid& grid, double t);

// (sum_i |a_i - b_i|^p s^2)^(1/p).
double grid_lp(std::span<const double> a, std::span<const double> b, double p, double cell_area);

// || omega1(t) - omega2(t) ||_{L^p} by grid quadrature at the given spacing.
double lp_distance(const Solution& a, const Solution& b, double p, double t, double spacing);
// || omega(t) ||_{L^p}.
double lp_norm(const Solution& sol, double p, double t, double spacing);

using ScalarField = std::function<double(Vec2)>;

// int omega(x, t) f(x) dx by grid quadrature.
double weak_pairing(const Solution& sol, const ScalarField& f, double t, double spacing);

// Space-time test function with its gradient and time derivative.
struct TestFunction {
  std::function<double(Vec2, double)> value;
  std::function<Vec2(Vec2, double)> gradient;
  std::function<double(Vec2, double)> time_derivative;
};
TestFunction gaussian_test_function(Vec2 center, double width);

// | int_{t1}^{t2} int omega (phi_t + u . grad phi) dx dt - [int omega phi]_{t1}^{t2} | with the
// trapezoidal rule over every `stride`-th snapshot and velocities from the particles.
double weakform_residual(const Solution& sol, const TestFunction& phi, double t1, double t2, double spacing,
                         int stride = 1);

// Labels of the common grid used for eta, with quadrature weights.
struct EtaTracers {
  std::vector<Vec2> points;
  std::vector<double> weights;
  double normalization = 1.0;  // divide the weighted sum by this
};
// Disk: every cell center of the disk, normalized by the weight sum (|Omega|). Plane: the
// lattice nodes inside either support with equal weights, an unnormalized mean.
EtaTracers eta_tracers(const Domain& domain, const VorticitySpec& a, const VorticitySpec& b, double spacing);

// Mean of |X1_{t,r}(x) - X2_{t,r}(x)| over the tracers.
double eta(const FlowHistory& h1, const FlowHistory& h2, double t, double r, const EtaTracers& tracers);

// eta(t, r) for every t, r in `times`; rows follow t, columns r.
std::vector<std::vector<double>> eta_table(const FlowHistory& h1, const FlowHistory& h2, std::span<const double> times,
                                           const EtaTracers& tracers);

struct StabilityBound {
  double C = 0.0;
  double T = 0.0;
  double M = 0.0;  // ||omega_0^1||_inf
  double z = 0.0;  // ||omega_0^1 - omega_0^2||_{L^1}
};

struct BoundValue {
  double value = 0.0;
  bool applicable = false;
};

// e^{1-a} (CTz)^a with a = exp(-C|r|M); applicable when CTz < e^{1 - exp(CTM)}.
BoundValue osgood_eta_bound(const StabilityBound& b, double r);
// CTz + CTM phi(e (CTz)^{exp(-CTM)}).
double phi_T_M(const StabilityBound& b);
// e^{1-a} Phi^a with a = exp(-C|t-r|M); applicable when Phi < e^{1 - exp(2CTM)}.
BoundValue eta_two_time_bound(const StabilityBound& b, double t, double r);

// Area of the symmetric difference of two disks of radius r at distance d.
double disk_symmetric_difference(double r, double d);

struct LogLipschitzEstimate {
  double max_ratio = 0.0;  // max |u(x) - u(y)| / (||omega_0||_inf phi(|x - y|))
  double max_speed_ratio = 0.0;  // max |u(x)| / ||omega_0||_inf
  std::size_t pairs = 0;
};

// Random pairs in the domain with log-uniform separations on [s_min, s_max].
LogLipschitzEstimate log_lipschitz_ratio(const Solution& sol, double t, std::size_t pairs, double s_min, double s_max,
                                         std::uint64_t seed = 5);

struct HolderFit {
  double alpha = 1.0;
  std::size_t pairs = 0;
  double octaves = 0.0;
};

// Least-squares slope of log|X_t(x) - X_t(y)| against log|x - y|. Separations are log-uniform
// on [s_min, s_max]; s_min must be at least the grid scale h and the range at least 3 octaves.
HolderFit holder_exponent(const FlowHistory& history, double t, std::size_t pairs, double s_min, double s_max,
                          std::uint64_t seed = 11);

}  // namespace lagvort
