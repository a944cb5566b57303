#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gplfm/linalg.hpp"

namespace gplfm {

using Index = Eigen::Index;

/// M u'' + C u' + K u = S_p p(t), dense matrices in SI units.
struct FullOrderSystem {
  Matrix mass;
  Matrix damping;
  Matrix stiffness;

  Index n_dof() const { return mass.rows(); }
  /// Throws InvalidInput when the matrices are not square, equally sized, symmetric,
  /// with M positive definite and K positive semidefinite.
  void validate() const;
};

/// Fixed-base chain ground-m0-m1-...-m_{n-1} with a free end: n masses, n springs.
FullOrderSystem spring_mass_chain(Index n_dof, double mass, double stiffness);

/// Truncated mass-normalized modal basis.
struct ModalModel {
  Matrix phi;    ///< n_dof x n_r, columns are mass-normalized mode shapes
  Vector omega;  ///< rad/s, ascending
  Vector zeta;   ///< damping ratios; NaN while unassigned
  std::vector<std::string> dof_labels;

  Index n_dof() const { return phi.rows(); }
  Index n_modes() const { return phi.cols(); }
  bool has_damping() const;
  ModalModel with_uniform_damping(double ratio) const;
  ModalModel truncated(Index n_modes) const;
  /// Index of the DOF carrying `label`, or -1.
  Index dof_index(std::string_view label) const;
  void validate() const;
};

enum class Quantity { Acceleration, Velocity, Displacement };

std::string_view to_string(Quantity q);
/// Accepts "accel"/"acc"/"a", "vel"/"v", "disp"/"d" (case-sensitive).
Quantity parse_quantity(std::string_view s);

/// One sensor channel: which quantity is measured at which DOF.
struct Channel {
  std::string name;
  Quantity quantity = Quantity::Acceleration;
  Index dof = 0;

  bool operator==(const Channel&) const = default;
};

/// Selection matrices S_a, S_v, S_d in index-list form. Channel order is
/// [accel..., vel..., disp...].
struct SensorLayout {
  std::vector<Index> accel_dofs;
  std::vector<Index> vel_dofs;
  std::vector<Index> disp_dofs;

  std::size_t size() const { return accel_dofs.size() + vel_dofs.size() + disp_dofs.size(); }
  bool empty() const { return size() == 0; }
  void validate(Index n_dof) const;
  /// Channels in layout order, named "<a|v|d><dof>".
  std::vector<Channel> channels() const;
};

struct ContinuousStateSpace {
  Matrix ac;  ///< 2n_r x 2n_r
  Matrix bc;  ///< 2n_r x n_r
  Matrix gc;  ///< n_y x 2n_r
  Matrix jc;  ///< n_y x n_r

  Index n_states() const { return ac.rows(); }
  Index n_inputs() const { return bc.cols(); }
  Index n_outputs() const { return gc.rows(); }
};

struct DiscreteStateSpace {
  Matrix a;
  Matrix b;
  Matrix g;
  Matrix j;
  double dt = 0.0;
  Matrix qx;  ///< structural process noise, zero until tuned
  Matrix r;   ///< measurement noise, zero until tuned
  ContinuousStateSpace continuous;
};

/// Lowest n_modes modes of K phi = M phi omega^2 via Cholesky reduction of M.
/// Damping ratios are left unassigned.
ModalModel solve_modal(const FullOrderSystem& sys, Index n_modes);

/// Output rows for arbitrary channels: y = G x + J f with f the modal forces.
struct ObservationRows {
  Matrix g;
  Matrix j;
};
ObservationRows observation_rows(const ModalModel& modal, std::span<const Channel> channels);

ContinuousStateSpace build_continuous(const ModalModel& modal, std::span<const Channel> channels);
ContinuousStateSpace build_continuous(const ModalModel& modal, const SensorLayout& layout);

DiscreteStateSpace discretize(const ContinuousStateSpace& css, double dt);

/// |S Phi| per channel and mode.
Matrix modal_influence(const ModalModel& modal, const SensorLayout& layout);

}  // namespace gplfm
