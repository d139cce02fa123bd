#pragma once

// Planetary N-body problem in canonical heliocentric coordinates.
//
// Body 0 is the central mass. For i = 1..N the state holds Q_i (position
// relative to body 0) and V_i = P_i / mu_i, laid out as 6 consecutive
// components [Q_i, V_i]. With mu_i = m_0 m_i / (m_0 + m_i) and
// k_i = G (m_0 + m_i), the motion splits into N independent Kepler problems
// with parameters k_i and the interaction
//   dQ_i/dt = sum_{j != i} m_j / (m_0 + m_j) V_j
//   dV_i/dt = -(k_i / m_0) sum_{j != i} m_j (Q_i - Q_j) / |Q_i - Q_j|^3.

#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "kepler.hpp"
#include "system.hpp"

namespace fcirk {

struct BarycentricState {
  double G = 0.0;
  std::string epoch;
  std::vector<std::string> names;  // names[0] is the central body
  std::vector<double> masses;      // m_0..m_N
  std::vector<Vec3<double>> q;     // positions
  std::vector<Vec3<double>> p;     // momenta
};

class NBodyModel final : public PerturbedSystem {
 public:
  // masses[0] is the central body; all masses must be positive.
  NBodyModel(double G, std::vector<double> masses);

  int bodies() const { return static_cast<int>(masses_.size()) - 1; }
  double G() const { return g_; }
  double mass(int i) const { return masses_[static_cast<std::size_t>(i)]; }
  // Reduced mass and Kepler parameter of secondary i = 1..N.
  double mu(int i) const { return mu_[static_cast<std::size_t>(i)]; }
  double k(int i) const { return k_[static_cast<std::size_t>(i)]; }
  DDReal mu_dd(int i) const { return mu_dd_[static_cast<std::size_t>(i)]; }

  int dim() const override { return 6 * bodies(); }

  void flow(double t, std::span<const double> u, std::span<double> out,
            FlowMemo* memo) const override;
  void flow(DDReal t, std::span<const DDReal> u, std::span<DDReal> out,
            FlowMemo* memo) const override;
  void flow_jacT_apply(double t, std::span<const double> u,
                       std::span<const double> w, std::span<double> out,
                       const FlowMemo* memo) const override;
  void perturbation(double t, std::span<const double> u,
                    std::span<double> g) const override;
  void structure_apply(std::span<const double> w,
                       std::span<double> out) const override {
    canonical_structure_apply(w, out);
  }
  void structure_solve(std::span<const double> w,
                       std::span<double> out) const override {
    canonical_structure_solve(w, out);
  }

  bool has_unperturbed_field() const override { return true; }
  void unperturbed_field(std::span<const double> u,
                         std::span<double> k) const override;

  // Part 0 depends on velocities and moves positions; part 1 depends on
  // positions and moves velocities.
  int perturbation_parts() const override { return 2; }
  void perturbation_part(int part, double t, std::span<const double> u,
                         std::span<double> g) const override;

  std::vector<unsigned char> position_mask() const override;
  void position_rate(double t, std::span<const double> u,
                     std::span<double> out) const override;

  // K + G, the Hamiltonian in heliocentric coordinates.
  template <class T>
  T energy(std::span<const T> u) const;

  // sum_i mu_i Q_i x V_i, which equals the barycentric sum_i q_i x p_i when
  // the total momentum vanishes.
  template <class T>
  Vec3<T> angular_momentum(std::span<const T> u) const;

 private:
  double g_;
  std::vector<double> masses_;
  std::vector<double> mu_, k_;
  // Constants of the interaction terms, kept in double-word: a constant
  // rounded once to double would bias every pair exchange the same way.
  std::vector<DDReal> mu_dd_;
  std::vector<DDReal> ratio_;  // m_j / (m_0 + m_j)
  std::vector<DDReal> kick_;   // k_j / m_0
};

// Forward transform. Throws NormalizationError unless the total momentum
// vanishes to `tolerance` relative to sum |p_i|.
State to_heliocentric(const BarycentricState& b, double tolerance = 1e-12);

// Inverse transform assuming vanishing total momentum and barycentre at the
// origin.
BarycentricState to_barycentric(const NBodyModel& model,
                                std::span<const DDReal> u);

NBodyModel make_model(const BarycentricState& b);

// Barycentric Hamiltonian and angular momentum evaluated directly.
double barycentric_energy(const BarycentricState& b);
Vec3<double> barycentric_angular_momentum(const BarycentricState& b);

// Initial-condition files: JSON with
//   { "G": number, "epoch": string, "units": {length, time, mass},
//     "frame": string, "provenance": string, "description": string,
//     "bodies": [ {"name", "mass", "position": [3], "velocity": [3]} ] }
// bodies[0] is the central body. The returned state is shifted to the
// barycentre and to zero total momentum. Unknown fields raise ParseError
// unless `lax`; a G inconsistent with the declared units raises UnitError.
BarycentricState parse_initial_conditions(std::string_view json_text,
                                          bool lax = false);
BarycentricState load_initial_conditions(const std::string& path,
                                         bool lax = false);

extern template double NBodyModel::energy(std::span<const double>) const;
extern template DDReal NBodyModel::energy(std::span<const DDReal>) const;
extern template Vec3<double> NBodyModel::angular_momentum(
    std::span<const double>) const;
extern template Vec3<DDReal> NBodyModel::angular_momentum(
    std::span<const DDReal>) const;

}  // namespace fcirk
