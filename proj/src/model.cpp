#include "cnls/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cnls {

namespace {

bool all_finite(const Eigen::VectorXd& v) {
  return v.allFinite();
}

double power_term(double c, double p, double x) {
  return c * std::pow(std::abs(x), p) / p;
}

double power_grad(double c, double p, double x) {
  if (x == 0.0) return 0.0;
  return c * std::pow(std::abs(x), p - 2.0) * x;
}

double power_hess(double c, double p, double x) {
  if (x == 0.0) return 0.0;  // continuous extension for p in (2, 3)
  return c * (p - 1.0) * std::pow(std::abs(x), p - 2.0);
}

}  // namespace

void validate_potentials(const PotentialSet& pots, int n_interior) {
  auto check_len = [&](const Eigen::VectorXd& v, const char* name) {
    if (v.size() != n_interior) {
      std::ostringstream os;
      os << "potentials: " << name << " has length " << v.size()
         << ", expected " << n_interior;
      throw std::invalid_argument(os.str());
    }
    if (!all_finite(v)) {
      std::ostringstream os;
      os << "potentials: " << name << " has a non-finite nodal value";
      throw std::invalid_argument(os.str());
    }
  };
  check_len(pots.b1, "b1");
  check_len(pots.b2, "b2");
  check_len(pots.V1, "V1");
  check_len(pots.V2, "V2");
  check_len(pots.gamma, "gamma");
  if (!(pots.b1_floor > 0.0) || !(pots.b2_floor > 0.0))
    throw std::invalid_argument("potentials: floors must be positive");
  if (pots.b1.minCoeff() < pots.b1_floor)
    throw std::invalid_argument("potentials: b1 drops below its floor");
  if (pots.b2.minCoeff() < pots.b2_floor)
    throw std::invalid_argument("potentials: b2 drops below its floor");
}

double critical_exponent(int dimension) {
  if (dimension > 2) return 2.0 * dimension / (dimension - 2.0);
  return std::numeric_limits<double>::infinity();
}

Nonlinearity make_quartic_coupled() {
  Nonlinearity nl;
  nl.kind = NonlinearityKind::QuarticCoupled;
  nl.theta = 1.0;
  nl.p_growth = 4.0;
  return nl;
}

Nonlinearity make_power_sum(Eigen::VectorXd c1, Eigen::VectorXd c2, double p1,
                            double p2) {
  Nonlinearity nl;
  nl.kind = NonlinearityKind::PowerSum;
  nl.c1 = std::move(c1);
  nl.c2 = std::move(c2);
  nl.p1 = p1;
  nl.p2 = p2;
  nl.theta = 1.0;
  nl.p_growth = std::max(p1, p2);
  return nl;
}

Nonlinearity make_quadratic_custom() {
  Nonlinearity nl;
  nl.kind = NonlinearityKind::Custom;
  nl.theta = 1.0;
  nl.p_growth = 2.5;  // nominal; the checker is what flags this family
  nl.custom_W = [](int, double t, double s) { return t * t + s * s; };
  nl.custom_gradW = [](int, double t, double s) {
    return std::pair<double, double>{2.0 * t, 2.0 * s};
  };
  return nl;
}

void validate_nonlinearity(const Nonlinearity& nl, int dimension,
                           int n_interior) {
  const double pstar = critical_exponent(dimension);
  switch (nl.kind) {
    case NonlinearityKind::PowerSum:
      if (nl.c1.size() != n_interior || nl.c2.size() != n_interior)
        throw std::invalid_argument("nonlinearity: c1/c2 length mismatch");
      if (nl.c1.minCoeff() <= 0.0 || nl.c2.minCoeff() <= 0.0)
        throw std::invalid_argument("nonlinearity: c1/c2 must be positive");
      if (!(nl.p1 > 2.0 && nl.p1 < pstar && nl.p2 > 2.0 && nl.p2 < pstar))
        throw std::invalid_argument(
            "nonlinearity: exponents must lie in (2, 2N/(N-2))");
      break;
    case NonlinearityKind::QuarticCoupled:
      if (dimension > 3)
        throw std::invalid_argument(
            "nonlinearity: quartic coupling needs dimension <= 3");
      break;
    case NonlinearityKind::Custom:
      if (!nl.custom_W || !nl.custom_gradW)
        throw std::invalid_argument("nonlinearity: custom callbacks missing");
      if (!(nl.theta >= 1.0))
        throw std::invalid_argument(
            "nonlinearity: custom family needs an explicit theta >= 1");
      break;
  }
  if (!(nl.theta >= 1.0))
    throw std::invalid_argument("nonlinearity: theta must be >= 1");
  if (!(nl.p_growth > 2.0 && nl.p_growth < pstar))
    throw std::invalid_argument(
        "nonlinearity: growth exponent must lie in (2, 2N/(N-2))");
}

double eval_W(const Nonlinearity& nl, int x_index, double t, double s) {
  switch (nl.kind) {
    case NonlinearityKind::PowerSum:
      return power_term(nl.c1[x_index], nl.p1, t) +
             power_term(nl.c2[x_index], nl.p2, s);
    case NonlinearityKind::QuarticCoupled: {
      const double q = t * t + s * s;
      return 0.25 * q * q;
    }
    case NonlinearityKind::Custom:
      return nl.custom_W(x_index, t, s);
  }
  return 0.0;
}

std::pair<double, double> eval_gradW(const Nonlinearity& nl, int x_index,
                                     double t, double s) {
  switch (nl.kind) {
    case NonlinearityKind::PowerSum:
      return {power_grad(nl.c1[x_index], nl.p1, t),
              power_grad(nl.c2[x_index], nl.p2, s)};
    case NonlinearityKind::QuarticCoupled:
      return {t * t * t + t * s * s, s * s * s + t * t * s};
    case NonlinearityKind::Custom:
      return nl.custom_gradW(x_index, t, s);
  }
  return {0.0, 0.0};
}

std::array<double, 3> eval_hessW(const Nonlinearity& nl, int x_index, double t,
                                 double s) {
  switch (nl.kind) {
    case NonlinearityKind::PowerSum:
      return {power_hess(nl.c1[x_index], nl.p1, t), 0.0,
              power_hess(nl.c2[x_index], nl.p2, s)};
    case NonlinearityKind::QuarticCoupled:
      return {3.0 * t * t + s * s, 2.0 * t * s, 3.0 * s * s + t * t};
    case NonlinearityKind::Custom: {
      const double scale = std::max(1.0, std::max(std::abs(t), std::abs(s)));
      const double eps = 1e-6 * scale;
      auto [tp_t, tp_s] = nl.custom_gradW(x_index, t + eps, s);
      auto [tm_t, tm_s] = nl.custom_gradW(x_index, t - eps, s);
      auto [sp_t, sp_s] = nl.custom_gradW(x_index, t, s + eps);
      auto [sm_t, sm_s] = nl.custom_gradW(x_index, t, s - eps);
      const double wtt = (tp_t - tm_t) / (2.0 * eps);
      const double wss = (sp_s - sm_s) / (2.0 * eps);
      const double wts =
          0.5 * ((sp_t - sm_t) / (2.0 * eps) + (tp_s - tm_s) / (2.0 * eps));
      return {wtt, wts, wss};
    }
  }
  return {0.0, 0.0, 0.0};
}

double eval_calW(const Nonlinearity& nl, int x_index, double t, double s) {
  auto [wt, ws] = eval_gradW(nl, x_index, t, s);
  return wt * t + ws * s - 2.0 * eval_W(nl, x_index, t, s);
}

bool HypothesisReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const HypothesisCheck& c) { return c.passed; });
}

const HypothesisCheck* HypothesisReport::find(const std::string& id) const {
  for (const auto& c : checks)
    if (c.id == id) return &c;
  return nullptr;
}

HypothesisReport check_hypotheses(const ProblemSpec& spec, const Grid& grid,
                                  const SamplingPlan& plan) {
  HypothesisReport report;
  const PotentialSet& pots = spec.potentials;
  const Nonlinearity& nl = spec.nonlinearity;
  const int n = grid.n_interior;

  std::vector<int> x_samples;
  const int nx = std::max(1, std::min(plan.n_x_samples, n));
  for (int k = 0; k < nx; ++k) x_samples.push_back(k * (n - 1) / std::max(1, nx - 1));

  std::vector<double> radii;
  {
    const double lo = std::log(plan.radius_min), hi = std::log(plan.radius_max);
    for (int k = 0; k < plan.n_radii; ++k)
      radii.push_back(std::exp(lo + (hi - lo) * k / (plan.n_radii - 1)));
  }
  std::vector<std::pair<double, double>> rays;
  for (int k = 0; k < plan.n_rays; ++k) {
    const double phi = 2.0 * M_PI * k / plan.n_rays;
    rays.emplace_back(std::cos(phi), std::sin(phi));
  }

  {  // floor condition on b
    HypothesisCheck c{.id = "b_floor"};
    const double m1 = pots.b1.minCoeff(), m2 = pots.b2.minCoeff();
    c.passed = pots.b1_floor > 0.0 && pots.b2_floor > 0.0 &&
               m1 >= pots.b1_floor && m2 >= pots.b2_floor;
    std::ostringstream os;
    os << "min b1 = " << m1 << " (floor " << pots.b1_floor << "), min b2 = "
       << m2 << " (floor " << pots.b2_floor << ")";
    c.detail = os.str();
    report.checks.push_back(std::move(c));
  }

  {  // some node sees a positive V
    HypothesisCheck c{.id = "v_positive_somewhere"};
    c.passed = pots.V1.maxCoeff() > 0.0 || pots.V2.maxCoeff() > 0.0;
    c.detail = c.passed ? "a node with positive V1 or V2 exists"
                        : "V1 and V2 are nonpositive on every node";
    report.checks.push_back(std::move(c));
  }

  {  // W >= 0; report the observed growth constant
    HypothesisCheck c{.id = "growth_bound"};
    double wmin = 0.0, growth_const = 0.0;
    for (int xi : x_samples)
      for (auto [ct, cs] : rays)
        for (double r : radii) {
          const double w = eval_W(nl, xi, r * ct, r * cs);
          wmin = std::min(wmin, w);
          growth_const =
              std::max(growth_const, w / (1.0 + std::pow(r, nl.p_growth)));
        }
    c.passed = wmin >= -1e-14;
    std::ostringstream os;
    os << "min W = " << wmin << ", observed C in W <= C(1+|z|^p): "
       << growth_const;
    c.detail = os.str();
    report.checks.push_back(std::move(c));
  }

  {  // superquadratic growth of W/|z|^2 along rays
    HypothesisCheck c{.id = "superquadratic_growth"};
    bool ok = true;
    std::ostringstream os;
    const int tail_start = plan.n_radii / 2;
    for (int xi : x_samples) {
      for (auto [ct, cs] : rays) {
        double prev = -1.0;
        bool monotone = true;
        for (int k = tail_start; k < plan.n_radii; ++k) {
          const double r = radii[k];
          const double ratio = eval_W(nl, xi, r * ct, r * cs) / (r * r);
          if (prev >= 0.0 && ratio < prev * (1.0 - 1e-12)) monotone = false;
          prev = ratio;
        }
        const double first = eval_W(nl, xi, radii[tail_start] * ct,
                                    radii[tail_start] * cs) /
                             (radii[tail_start] * radii[tail_start]);
        const double last = prev;
        if (!monotone || !(last >= plan.growth_factor * std::max(first, 0.0) &&
                           last > 0.0)) {
          ok = false;
          os << "ray (" << ct << "," << cs << ") at node " << xi
             << ": tail ratio " << first << " -> " << last;
          break;
        }
      }
      if (!ok) break;
    }
    c.passed = ok;
    if (ok) c.detail = "W/|z|^2 grows along every sampled ray";
    else c.detail = os.str();
    report.checks.push_back(std::move(c));
  }

  {  // zero limit at the origin and the axis derivative conditions
    HypothesisCheck c{.id = "zero_limit"};
    bool ok = true;
    std::ostringstream os;
    for (int xi : x_samples) {
      for (auto [ct, cs] : rays) {
        const double r_ref = 1.0, r_small = plan.radius_min;
        const double ratio_ref =
            eval_W(nl, xi, r_ref * ct, r_ref * cs) / (r_ref * r_ref);
        const double ratio_small =
            eval_W(nl, xi, r_small * ct, r_small * cs) / (r_small * r_small);
        if (!(ratio_small <= 1e-2 * std::max(ratio_ref, 1e-30) + 1e-14)) {
          ok = false;
          os << "W/|z|^2 = " << ratio_small << " at |z| = " << r_small
             << " on ray (" << ct << "," << cs << ")";
          break;
        }
      }
      for (double s : {0.5, 2.0, -3.0}) {
        if (std::abs(eval_gradW(nl, xi, 0.0, s).first) > 1e-12 ||
            std::abs(eval_gradW(nl, xi, s, 0.0).second) > 1e-12) {
          ok = false;
          os << "axis derivative nonzero at node " << xi;
        }
      }
      if (!ok) break;
    }
    c.passed = ok;
    c.detail = ok ? "W/|z|^2 vanishes at the origin, axis derivatives zero"
                  : os.str();
    report.checks.push_back(std::move(c));
  }

  {  // theta monotonicity of calW along eta in [0, 1]
    HypothesisCheck c{.id = "theta_monotonicity"};
    bool ok = true;
    double worst = 0.0;
    std::mt19937_64 rng(plan.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<std::pair<double, double>> zs;
    for (auto [ct, cs] : rays)
      for (double r : {0.1, 1.0, 10.0, 100.0}) zs.emplace_back(r * ct, r * cs);
    for (int k = 0; k < 64; ++k) {
      const double a = unif(rng) * 10.0, b = unif(rng) * 10.0;
      zs.emplace_back(a, b);
    }
    for (int xi : x_samples)
      for (auto [t, s] : zs) {
        const double lhs = nl.theta * eval_calW(nl, xi, t, s);
        for (int e = 0; e < plan.n_eta; ++e) {
          const double eta = double(e) / (plan.n_eta - 1);
          const double rhs = eval_calW(nl, xi, eta * t, eta * s);
          const double slack = lhs - rhs;
          worst = std::min(worst, slack);
          if (slack < -1e-10 * (1.0 + std::abs(lhs))) ok = false;
        }
      }
    c.passed = ok;
    std::ostringstream os;
    os << "worst slack " << worst << " with theta = " << nl.theta;
    c.detail = os.str();
    report.checks.push_back(std::move(c));
  }

  {  // radial structure holds by construction when sampling in r
    HypothesisCheck c{.id = "radial_symmetry"};
    c.passed = true;
    c.applicable = spec.grid_spec.mode == GridMode::Radial;
    c.detail = c.applicable
                   ? "potentials and W sampled in r, symmetric by construction"
                   : "full-line mode, radial symmetry not required";
    report.checks.push_back(std::move(c));
  }

  return report;
}

}  // namespace cnls
