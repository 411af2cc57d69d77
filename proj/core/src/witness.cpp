#include "mfgc/witness.hpp"

#include "mfgc/counter_rng.hpp"
#include "mfgc/errors.hpp"
#include "mfgc/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

namespace mfgc {
namespace {

constexpr double kSignificance = 1e-8;

Vec scalar(double a) { return Vec::Constant(1, a); }

void check_weights(const std::vector<Atom>& mu, const char* name) {
  if (mu.empty()) throw invalid_argument(std::string(name) + " has no atoms");
  double total = 0.0;
  for (const auto& a : mu) {
    if (!(a.weight >= 0.0)) throw invalid_argument(std::string(name) + " has a negative weight");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw invalid_argument(std::string(name) + " weights must sum to 1");
  }
}

double mean_control(const std::vector<Atom>& mu) {
  double m = 0.0;
  for (const auto& a : mu) m += a.weight * a.v;
  return m;
}

// Keeps the lowest and highest values seen, first occurrence wins ties.
struct Extremes {
  std::optional<WitnessInstance> lo;
  std::optional<WitnessInstance> hi;

  void offer(const WitnessInstance& w) {
    if (!lo || w.value < lo->value) lo = w;
    if (!hi || w.value > hi->value) hi = w;
  }
  void merge(const Extremes& other) {
    if (other.lo) offer(*other.lo);
    if (other.hi) offer(*other.hi);
  }
};

std::optional<WitnessInstance> evaluate_ll(const ModelSpec& model, std::vector<Atom> mu1,
                                           std::vector<Atom> mu2) {
  try {
    WitnessInstance w;
    w.value = lasry_lions_value(model, mu1, mu2);
    w.Q1 = mean_control(mu1);
    w.Q2 = mean_control(mu2);
    w.mu1 = std::move(mu1);
    w.mu2 = std::move(mu2);
    return w;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Domain) throw;
    return std::nullopt;
  }
}

std::optional<WitnessInstance> evaluate_displacement(const ModelSpec& model,
                                                     std::vector<CouplingAtom> coupling) {
  try {
    WitnessInstance w;
    w.value = displacement_value(model, coupling);
    for (const auto& a : coupling) {
      w.Q1 += a.weight * a.v1;
      w.Q2 += a.weight * a.v2;
    }
    w.coupling = std::move(coupling);
    return w;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Domain && e.kind() != ErrorKind::SingularHessian) throw;
    return std::nullopt;
  }
}

std::vector<double> geometric_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1));
  g.back() = hi;
  return g;
}

std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = lo + (hi - lo) * k / (n - 1);
  g.back() = hi;
  return g;
}

// Neighbourhood [g[i-1], g[i+1]] of a grid node, clamped at the ends.
std::pair<double, double> cell(const std::vector<double>& g, std::size_t i) {
  return {g[i == 0 ? 0 : i - 1], g[std::min(i + 1, g.size() - 1)]};
}

std::size_t nearest_index(const std::vector<double>& g, double value) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (std::abs(g[i] - value) < std::abs(g[best] - value)) best = i;
  }
  return best;
}

ViolationWitness finish(WitnessKind kind, const Extremes& ex, int evaluations) {
  ViolationWitness out;
  out.kind = kind;
  out.evaluations = evaluations;
  if (ex.lo && ex.lo->value < -kSignificance) out.negative = ex.lo;
  if (ex.hi && ex.hi->value > kSignificance) out.positive = ex.hi;
  out.found = out.negative.has_value() && out.positive.has_value();
  return out;
}

void require_scalar(const ModelSpec& model, const WitnessSearchOptions& options) {
  if (model.dim() != 1) throw invalid_argument("witness searches need a one-dimensional model");
  if (options.budget < 1) throw invalid_argument("witness budget must be positive");
  if (!(options.range > 0.0)) throw invalid_argument("witness range must be positive");
  if (options.grid_points < 4) throw invalid_argument("witness grid needs at least 4 points");
}

// Largest n <= requested with count(n) <= budget.
int fit_grid(int requested, long budget, const std::function<long(long)>& count) {
  int n = requested;
  while (n > 4 && count(n) > budget) --n;
  return n;
}

// --- Lasry-Lions, production families ------------------------------------------
//
// Negative side: mu1 = c delta_{q1} + (1-c) delta_{qbar}, mu2 = delta_{q2} with
// q1 < q2 < qbar, q2 = t q1 + (1-t) qbar and c = t (1 - eta) just below t.
// Positive side: mu1 = delta_{q1}, mu2 = delta_{q2} with q2 < q1.

WitnessInstance ll_mixture(double q1, double q2, double qbar, double eta, double* c_out) {
  const double t = (qbar - q2) / (qbar - q1);
  const double c = t * (1.0 - eta);
  if (c_out) *c_out = c;
  WitnessInstance w;
  w.mu1 = {{0.0, q1, c}, {0.0, qbar, 1.0 - c}};
  w.mu2 = {{0.0, q2, 1.0}};
  return w;
}

ViolationWitness lasry_lions_production(const ModelSpec& model, const WitnessSearchOptions& opt) {
  const double q_min = model.params().q_min;
  const double R = std::max(opt.range, 2.0 * q_min);
  const int n_eta = 16;
  const long budget = opt.budget;
  const int n = fit_grid(opt.grid_points, budget * 9 / 10, [&](long m) {
    return m * (m - 1) * (m - 2) / 6 * n_eta + m * m;
  });
  const auto qs = geometric_grid(q_min, R, n);
  const auto etas = geometric_grid(1e-4, 0.5, n_eta);

  int evaluations = 0;
  Extremes ex;

  // Negative side: coarse grid, parallel over q1, ordered reduction.
  struct Local {
    Extremes ex;
    int evals = 0;
    std::array<std::size_t, 4> arg{};
  };
  std::vector<Local> local(n);
  parallel_for(n, [&](std::size_t i) {
    Local& L = local[i];
    double best = 0.0;
    for (int j = static_cast<int>(i) + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        for (int m = 0; m < n_eta; ++m) {
          auto w = ll_mixture(qs[i], qs[j], qs[k], etas[m], nullptr);
          ++L.evals;
          auto r = evaluate_ll(model, std::move(w.mu1), std::move(w.mu2));
          if (!r) continue;
          if (!L.ex.lo || r->value < best) {
            best = r->value;
            L.arg = {i, static_cast<std::size_t>(j), static_cast<std::size_t>(k),
                     static_cast<std::size_t>(m)};
          }
          L.ex.offer(*r);
        }
      }
    }
  });
  std::array<std::size_t, 4> arg{};
  Extremes negative;
  for (const auto& L : local) {
    evaluations += L.evals;
    if (L.ex.lo && (!negative.lo || L.ex.lo->value < negative.lo->value)) arg = L.arg;
    if (L.ex.lo) negative.offer(*L.ex.lo);
  }

  // Refine once around the best cell.
  if (negative.lo) {
    const int r = 9;
    if (evaluations + static_cast<long>(r) * r * r * r <= budget) {
      const auto [a1, b1] = cell(qs, arg[0]);
      const auto [a2, b2] = cell(qs, arg[1]);
      const auto [a3, b3] = cell(qs, arg[2]);
      const auto [a4, b4] = cell(etas, arg[3]);
      const auto g1 = geometric_grid(a1, b1, r), g2 = geometric_grid(a2, b2, r);
      const auto g3 = geometric_grid(a3, b3, r), g4 = geometric_grid(a4, b4, r);
      for (double q1 : g1) {
        for (double q2 : g2) {
          for (double qb : g3) {
            if (!(q1 < q2 && q2 < qb)) continue;
            for (double eta : g4) {
              auto w = ll_mixture(q1, q2, qb, eta, nullptr);
              ++evaluations;
              if (auto res = evaluate_ll(model, std::move(w.mu1), std::move(w.mu2))) {
                negative.offer(*res);
              }
            }
          }
        }
      }
    }
  }

  // Positive side: Dirac pairs.
  Extremes positive;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      ++evaluations;
      if (auto res = evaluate_ll(model, {{0.0, qs[i], 1.0}}, {{0.0, qs[j], 1.0}})) {
        positive.offer(*res);
      }
    }
  }
  ex.lo = negative.lo;
  ex.hi = positive.hi;
  return finish(WitnessKind::LasryLions, ex, evaluations);
}

// --- Lasry-Lions, general families: Dirac pairs mu_i = delta_{(x_i, v_i)} ------

ViolationWitness lasry_lions_dirac(const ModelSpec& model, const WitnessSearchOptions& opt) {
  Extremes ex;
  int evaluations = 0;
  auto scan = [&](const std::vector<double>& g) {
    for (double x1 : g)
      for (double x2 : g)
        for (double v1 : g)
          for (double v2 : g) {
            if (evaluations >= opt.budget) return;
            ++evaluations;
            if (auto r = evaluate_ll(model, {{x1, v1, 1.0}}, {{x2, v2, 1.0}})) ex.offer(*r);
          }
  };
  // Unit grid first so simple witnesses are preferred.
  scan({1.0, 0.0});
  auto result = finish(WitnessKind::LasryLions, ex, evaluations);
  if (result.found) return result;
  const int n = fit_grid(opt.grid_points / 2 * 2 + 1, opt.budget - evaluations,
                         [](long m) { return m * m * m * m; });
  auto g = linear_grid(0.5 * opt.range, -0.5 * opt.range, n);
  scan(g);
  return finish(WitnessKind::LasryLions, ex, evaluations);
}

// --- displacement, production families -------------------------------------------
//
// Two-atom couplings with weights (pi, 1-pi). The first atom is placed by its
// effective price argument z = q + eps Q, which lets it approach the floor
// q + eps Q = q_min where the negative values live.

struct ProductionCoupling {
  double pi, zeta1, a2, zeta2, b2;
};

std::vector<CouplingAtom> build_coupling(const ModelSpec& model, const ProductionCoupling& c) {
  const double eps = model.params().epsilon;
  const double Q1 = (c.pi * c.zeta1 + (1.0 - c.pi) * c.a2) / (1.0 + eps * c.pi);
  const double Q2 = (c.pi * c.zeta2 + (1.0 - c.pi) * c.b2) / (1.0 + eps * c.pi);
  return {{0.0, c.zeta1 - eps * Q1, 0.0, c.zeta2 - eps * Q2, c.pi},
          {0.0, c.a2, 0.0, c.b2, 1.0 - c.pi}};
}

ViolationWitness displacement_production(const ModelSpec& model, const WitnessSearchOptions& opt) {
  const double q_min = model.params().q_min;
  const double R = std::max(opt.range, 2.0 * q_min);
  const long budget = opt.budget;
  int evaluations = 0;

  // Two-atom construction: xi1 in {q1, qbar} w.p. (lambda, 1 - lambda), xi2 = q2.
  std::optional<double> construction_best;
  {
    const auto qs = geometric_grid(q_min, R, 16);
    const auto etas = geometric_grid(1e-4, 0.5, 8);
    for (std::size_t i = 0; i < qs.size(); ++i)
      for (std::size_t j = i + 1; j < qs.size(); ++j)
        for (std::size_t k = j + 1; k < qs.size(); ++k)
          for (double eta : etas) {
            const double t = (qs[k] - qs[j]) / (qs[k] - qs[i]);
            const double lambda = t * (1.0 - eta);
            ++evaluations;
            auto r = evaluate_displacement(
                model, {{0.0, qs[i], 0.0, qs[j], lambda}, {0.0, qs[k], 0.0, qs[j], 1.0 - lambda}});
            if (r && (!construction_best || r->value < *construction_best)) {
              construction_best = r->value;
            }
          }
  }

  // General two-atom couplings on a grid, then one refinement and a compass search.
  const int n_pi = 8;
  const int n = std::min(12, fit_grid(opt.grid_points, (budget - evaluations) * 7 / 10,
                                      [&](long m) { return n_pi * m * m * m * m; }));
  std::vector<double> pis(n_pi);
  for (int k = 0; k < n_pi; ++k) pis[k] = (k + 1.0) / (n_pi + 1.0);
  const auto zetas = geometric_grid(q_min, R, n);
  const auto levels = linear_grid(0.0, R, n);

  struct Local {
    std::optional<WitnessInstance> lo;
    ProductionCoupling arg{};
    int evals = 0;
  };
  std::vector<Local> local(n_pi * n);
  parallel_for(local.size(), [&](std::size_t idx) {
    Local& L = local[idx];
    const double pi = pis[idx / n];
    const double z1 = zetas[idx % n];
    for (double a2 : levels)
      for (double z2 : zetas)
        for (double b2 : levels) {
          const ProductionCoupling c{pi, z1, a2, z2, b2};
          ++L.evals;
          auto r = evaluate_displacement(model, build_coupling(model, c));
          if (r && (!L.lo || r->value < L.lo->value)) {
            L.lo = std::move(r);
            L.arg = c;
          }
        }
  });
  std::optional<WitnessInstance> best;
  ProductionCoupling arg{};
  for (auto& L : local) {
    evaluations += L.evals;
    if (L.lo && (!best || L.lo->value < best->value)) {
      best = L.lo;
      arg = L.arg;
    }
  }

  auto consider = [&](const ProductionCoupling& c) {
    ++evaluations;
    auto r = evaluate_displacement(model, build_coupling(model, c));
    if (r && (!best || r->value < best->value)) {
      best = std::move(r);
      arg = c;
      return true;
    }
    return false;
  };

  if (best && evaluations + 3125 <= budget) {
    const auto [p0, p1] = cell(pis, nearest_index(pis, arg.pi));
    const auto [z10, z11] = cell(zetas, nearest_index(zetas, arg.zeta1));
    const auto [a0, a1] = cell(levels, nearest_index(levels, arg.a2));
    const auto [z20, z21] = cell(zetas, nearest_index(zetas, arg.zeta2));
    const auto [b0, b1] = cell(levels, nearest_index(levels, arg.b2));
    const auto gp = linear_grid(p0, p1, 5), gz1 = geometric_grid(z10, z11, 5);
    const auto ga = linear_grid(a0, a1, 5), gz2 = geometric_grid(z20, z21, 5);
    const auto gb = linear_grid(b0, b1, 5);
    for (double pi : gp)
      for (double z1 : gz1)
        for (double a2 : ga)
          for (double z2 : gz2)
            for (double b2 : gb) consider({pi, z1, a2, z2, b2});
  }

  if (best) {
    std::array<double, 5> step{0.05, 0.5, 0.5 * R / n, 0.5, 0.5 * R / n};
    const long compass_budget = std::min<long>(budget, evaluations + 5000);
    while (evaluations + 10 <= compass_budget && step[2] > 1e-10) {
      bool improved = false;
      for (int c = 0; c < 5 && !improved; ++c) {
        for (double sgn : {1.0, -1.0}) {
          ProductionCoupling trial = arg;
          double* field[] = {&trial.pi, &trial.zeta1, &trial.a2, &trial.zeta2, &trial.b2};
          if (c == 1 || c == 3) {
            *field[c] *= std::exp(sgn * step[c]);  // zeta moves multiplicatively
          } else {
            *field[c] += sgn * step[c];
          }
          if (!(trial.pi > 0.0 && trial.pi < 1.0) || trial.zeta1 < q_min || trial.zeta2 < q_min ||
              trial.zeta1 > R || trial.zeta2 > R || trial.a2 < 0.0 || trial.b2 < 0.0 ||
              trial.a2 > R || trial.b2 > R) {
            continue;
          }
          if (consider(trial)) {
            improved = true;
            break;
          }
        }
      }
      if (!improved) {
        for (double& s : step) s *= 0.5;
      }
    }
  }

  // Positive side: swapped pairs have Q1 = Q2 and a strictly positive value.
  Extremes positive;
  const auto qs = geometric_grid(q_min, R, 16);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    for (std::size_t j = i + 1; j < qs.size(); ++j) {
      ++evaluations;
      if (auto r = evaluate_displacement(
              model, {{0.0, qs[i], 0.0, qs[j], 0.5}, {0.0, qs[j], 0.0, qs[i], 0.5}})) {
        positive.offer(*r);
      }
    }
  }

  Extremes ex;
  ex.lo = best;
  ex.hi = positive.hi;
  auto out = finish(WitnessKind::Displacement, ex, evaluations);
  out.construction_best = construction_best;
  return out;
}

// --- displacement, general families: random two-atom couplings + compass --------

ViolationWitness displacement_general(const ModelSpec& model, const WitnessSearchOptions& opt) {
  const CounterRng rng(opt.seed);
  const double h = 0.5 * opt.range;
  using Params = std::array<double, 9>;  // pi, then (x1, v1, x2, v2) for each atom
  auto to_coupling = [](const Params& p) {
    return std::vector<CouplingAtom>{{p[1], p[2], p[3], p[4], p[0]},
                                     {p[5], p[6], p[7], p[8], 1.0 - p[0]}};
  };
  const int random_draws = std::max(1, opt.budget * 4 / 5);
  Extremes ex;
  Params arg{};
  int evaluations = 0;
  for (int r = 0; r < random_draws; ++r) {
    Params p;
    p[0] = rng.uniform(static_cast<std::uint64_t>(r), 0, 0.05, 0.95);
    for (int c = 1; c < 9; ++c) p[c] = rng.uniform(static_cast<std::uint64_t>(r), c, -h, h);
    ++evaluations;
    auto w = evaluate_displacement(model, to_coupling(p));
    if (!w) continue;
    if (!ex.lo || w->value < ex.lo->value) arg = p;
    ex.offer(*w);
  }
  if (ex.lo) {
    double step = 0.1 * h;
    while (evaluations + 18 <= opt.budget && step > 1e-9) {
      bool improved = false;
      for (int c = 0; c < 9 && !improved; ++c) {
        for (double sgn : {1.0, -1.0}) {
          Params trial = arg;
          trial[c] += sgn * (c == 0 ? step / h * 0.1 : step);
          if (!(trial[0] > 0.0 && trial[0] < 1.0)) continue;
          ++evaluations;
          auto w = evaluate_displacement(model, to_coupling(trial));
          if (w && w->value < ex.lo->value) {
            arg = trial;
            ex.offer(*w);
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
  }
  return finish(WitnessKind::Displacement, ex, evaluations);
}

}  // namespace

std::string_view to_string(WitnessKind kind) {
  return kind == WitnessKind::LasryLions ? "lasry_lions" : "displacement";
}

double lasry_lions_value(const ModelSpec& model, const std::vector<Atom>& mu1,
                         const std::vector<Atom>& mu2) {
  if (model.dim() != 1) throw invalid_argument("witness measures need a one-dimensional model");
  check_weights(mu1, "mu1");
  check_weights(mu2, "mu2");
  const Vec Q1 = scalar(mean_control(mu1));
  const Vec Q2 = scalar(mean_control(mu2));
  auto gap = [&](const Atom& a) {
    const Vec x = scalar(a.x), v = scalar(a.v);
    return eval_lagrangian(model, x, v, Q1).value - eval_lagrangian(model, x, v, Q2).value;
  };
  double value = 0.0;
  for (const auto& a : mu1) value += a.weight * gap(a);
  for (const auto& a : mu2) value -= a.weight * gap(a);
  return value;
}

double displacement_value(const ModelSpec& model, const std::vector<CouplingAtom>& coupling) {
  if (model.dim() != 1) throw invalid_argument("witness couplings need a one-dimensional model");
  if (coupling.empty()) throw invalid_argument("coupling has no atoms");
  double total = 0.0, Q1 = 0.0, Q2 = 0.0;
  for (const auto& a : coupling) {
    if (!(a.weight >= 0.0)) throw invalid_argument("coupling has a negative weight");
    total += a.weight;
    Q1 += a.weight * a.v1;
    Q2 += a.weight * a.v2;
  }
  if (std::abs(total - 1.0) > 1e-12) throw invalid_argument("coupling weights must sum to 1");
  double value = 0.0;
  for (const auto& a : coupling) {
    const auto e1 = eval_lagrangian(model, scalar(a.x1), scalar(a.v1), scalar(Q1));
    const auto e2 = eval_lagrangian(model, scalar(a.x2), scalar(a.v2), scalar(Q2));
    value += a.weight * ((e1.dx[0] - e2.dx[0]) * (a.x1 - a.x2) +
                         (e1.dv[0] - e2.dv[0]) * (a.v1 - a.v2));
  }
  return value;
}

double recompute(const ModelSpec& model, WitnessKind kind, const WitnessInstance& instance) {
  return kind == WitnessKind::LasryLions ? lasry_lions_value(model, instance.mu1, instance.mu2)
                                         : displacement_value(model, instance.coupling);
}

ViolationWitness find_lasry_lions_violation(const ModelSpec& model,
                                            const WitnessSearchOptions& options) {
  require_scalar(model, options);
  return model.is_production_family() ? lasry_lions_production(model, options)
                                      : lasry_lions_dirac(model, options);
}

ViolationWitness find_displacement_violation(const ModelSpec& model,
                                             const WitnessSearchOptions& options) {
  require_scalar(model, options);
  return model.is_production_family() ? displacement_production(model, options)
                                      : displacement_general(model, options);
}

}  // namespace mfgc
