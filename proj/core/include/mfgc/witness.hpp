#pragma once

#include "mfgc/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mfgc {

enum class WitnessKind { LasryLions, Displacement };

std::string_view to_string(WitnessKind kind);

// Atom of a measure on (x, v); v is the model's native control.
struct Atom {
  double x = 0.0;
  double v = 0.0;
  double weight = 0.0;
};

// Atom of a coupling of (X1, V1) and (X2, V2).
struct CouplingAtom {
  double x1 = 0.0, v1 = 0.0;
  double x2 = 0.0, v2 = 0.0;
  double weight = 0.0;
};

// One evaluated test configuration. Lasry-Lions instances use mu1/mu2,
// displacement instances use the coupling. Q1, Q2 are the mean controls.
struct WitnessInstance {
  std::vector<Atom> mu1;
  std::vector<Atom> mu2;
  std::vector<CouplingAtom> coupling;
  double Q1 = 0.0;
  double Q2 = 0.0;
  double value = 0.0;
};

struct ViolationWitness {
  WitnessKind kind = WitnessKind::LasryLions;
  bool found = false;  // both signs with |value| > 1e-8
  std::optional<WitnessInstance> negative;
  std::optional<WitnessInstance> positive;
  int evaluations = 0;
  // Best value of the two-atom construction xi1 in {q1, qbar1}, xi2 = q2
  // (displacement search on production families only).
  std::optional<double> construction_best;
};

// int (L(x,v,Q1) - L(x,v,Q2)) d(mu1 - mu2)(x,v) with Q_i the mean of v under mu_i.
double lasry_lions_value(const ModelSpec& model, const std::vector<Atom>& mu1,
                         const std::vector<Atom>& mu2);

// E[(D_xL(X1,V1,Q1) - D_xL(X2,V2,Q2))(X1-X2) + (D_vL(X1,V1,Q1) - D_vL(X2,V2,Q2))(V1-V2)]
// with Q_i = E[V_i].
double displacement_value(const ModelSpec& model, const std::vector<CouplingAtom>& coupling);

// Recomputes an instance's value from its stored atoms.
double recompute(const ModelSpec& model, WitnessKind kind, const WitnessInstance& instance);

struct WitnessSearchOptions {
  int budget = 200000;  // expression evaluations
  std::uint64_t seed = 1;
  double range = 10.0;  // production families: q in [q_min, range]; others [-range/2, range/2]
  int grid_points = 32;
};

// Both searches need d = 1.
ViolationWitness find_lasry_lions_violation(const ModelSpec& model,
                                            const WitnessSearchOptions& options = {});
ViolationWitness find_displacement_violation(const ModelSpec& model,
                                             const WitnessSearchOptions& options = {});

}  // namespace mfgc
