#pragma once

// A perturbed system  u' = k(u) + g(t, u)  whose unperturbed part k has an
// exactly computable, symplectic flow.

#include <memory>
#include <span>
#include <vector>

#include "errors.hpp"
#include "kepler.hpp"
#include "xprec.hpp"

namespace fcirk {

// Solver state a system may keep between flow calls made from the same call
// site (warm starts), and reuse between a flow and the Jacobian product that
// follows it at the same (t, u).
struct FlowMemo {
  std::vector<KeplerSolve<double>> w;
  std::vector<KeplerSolve<DDReal>> dd;
};

class PerturbedSystem {
 public:
  virtual ~PerturbedSystem() = default;

  virtual int dim() const = 0;

  // Exact t-flow of the unperturbed part, in either precision tier.
  virtual void flow(double t, std::span<const double> u, std::span<double> out,
                    FlowMemo* memo) const = 0;
  virtual void flow(DDReal t, std::span<const DDReal> u, std::span<DDReal> out,
                    FlowMemo* memo) const = 0;

  // out = phi_t'(u)^T w. When memo is non-null it holds the state left by
  // flow(t, u, ., memo) for the same t and u.
  virtual void flow_jacT_apply(double t, std::span<const double> u,
                               std::span<const double> w, std::span<double> out,
                               const FlowMemo* memo) const = 0;

  // g(t, u).
  virtual void perturbation(double t, std::span<const double> u,
                            std::span<double> g) const = 0;

  // Canonical skew structure J and its inverse.
  virtual void structure_apply(std::span<const double> w,
                               std::span<double> out) const = 0;
  virtual void structure_solve(std::span<const double> w,
                               std::span<double> out) const = 0;

  // k(u), needed only by integrators that do not use the exact flow.
  virtual bool has_unperturbed_field() const { return false; }
  virtual void unperturbed_field(std::span<const double> u,
                                 std::span<double> k) const {
    (void)u;
    (void)k;
    throw InvalidArgument("system does not provide its unperturbed field");
  }

  // Split g = g_0 + ... + g_{P-1} where each part's own flow is its explicit
  // Euler map (the part does not depend on the coordinates it moves).
  virtual int perturbation_parts() const { return 0; }
  virtual void perturbation_part(int part, double t, std::span<const double> u,
                                 std::span<double> g) const {
    (void)part;
    (void)t;
    (void)u;
    (void)g;
    throw InvalidArgument("system has no split perturbation");
  }

  // Position/velocity partition for partitioned stage iterations: mask[c] is
  // nonzero for position components, whose rate (k + g restricted to them)
  // depends on velocity components only. Empty if not partitioned.
  virtual std::vector<unsigned char> position_mask() const { return {}; }
  virtual void position_rate(double t, std::span<const double> u,
                             std::span<double> out) const {
    (void)t;
    (void)u;
    (void)out;
    throw InvalidArgument("system has no position/velocity partition");
  }
};

// Wraps a system and multiplies its perturbation by a constant factor.
class ScaledSystem final : public PerturbedSystem {
 public:
  ScaledSystem(std::shared_ptr<const PerturbedSystem> base, double scale)
      : base_(std::move(base)), scale_(scale) {}

  int dim() const override { return base_->dim(); }

  void flow(double t, std::span<const double> u, std::span<double> out,
            FlowMemo* memo) const override {
    base_->flow(t, u, out, memo);
  }
  void flow(DDReal t, std::span<const DDReal> u, std::span<DDReal> out,
            FlowMemo* memo) const override {
    base_->flow(t, u, out, memo);
  }
  void flow_jacT_apply(double t, std::span<const double> u,
                       std::span<const double> w, std::span<double> out,
                       const FlowMemo* memo) const override {
    base_->flow_jacT_apply(t, u, w, out, memo);
  }
  void perturbation(double t, std::span<const double> u,
                    std::span<double> g) const override {
    if (scale_ == 0.0) {
      std::fill(g.begin(), g.end(), 0.0);
      return;
    }
    base_->perturbation(t, u, g);
    for (double& x : g) x *= scale_;
  }
  void structure_apply(std::span<const double> w,
                       std::span<double> out) const override {
    base_->structure_apply(w, out);
  }
  void structure_solve(std::span<const double> w,
                       std::span<double> out) const override {
    base_->structure_solve(w, out);
  }
  bool has_unperturbed_field() const override {
    return base_->has_unperturbed_field();
  }
  void unperturbed_field(std::span<const double> u,
                         std::span<double> k) const override {
    base_->unperturbed_field(u, k);
  }
  int perturbation_parts() const override {
    return base_->perturbation_parts();
  }
  void perturbation_part(int part, double t, std::span<const double> u,
                         std::span<double> g) const override {
    base_->perturbation_part(part, t, u, g);
    for (double& x : g) x *= scale_;
  }

 private:
  std::shared_ptr<const PerturbedSystem> base_;
  double scale_;
};

// Canonical J on consecutive 6-blocks (q, v): J(a, b) = (-b, a).
inline void canonical_structure_apply(std::span<const double> w,
                                      std::span<double> out) {
  for (std::size_t o = 0; o + 6 <= w.size(); o += 6) {
    for (std::size_t i = 0; i < 3; ++i) {
      out[o + i] = -w[o + 3 + i];
      out[o + 3 + i] = w[o + i];
    }
  }
}

// J^{-1}(a, b) = (b, -a).
inline void canonical_structure_solve(std::span<const double> w,
                                      std::span<double> out) {
  for (std::size_t o = 0; o + 6 <= w.size(); o += 6) {
    for (std::size_t i = 0; i < 3; ++i) {
      out[o + i] = w[o + 3 + i];
      out[o + 3 + i] = -w[o + i];
    }
  }
}

}  // namespace fcirk
