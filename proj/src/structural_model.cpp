#include "gplfm/structural_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Eigenvalues>

#include "gplfm/error.hpp"

namespace gplfm {

namespace {

bool is_symmetric(const Matrix& m, double rel_tol = 1e-10) {
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace

void FullOrderSystem::validate() const {
  const Index n = mass.rows();
  if (n == 0) throw InvalidInput("full-order system: empty mass matrix");
  for (const Matrix* m : {&mass, &damping, &stiffness}) {
    if (m->rows() != n || m->cols() != n)
      throw InvalidInput("full-order system: M, C, K must be square with identical dimension");
    if (!m->allFinite()) throw InvalidInput("full-order system: non-finite entries");
  }
  if (!is_symmetric(mass)) throw InvalidInput("full-order system: mass matrix is not symmetric");
  if (!is_symmetric(stiffness)) throw InvalidInput("full-order system: stiffness matrix is not symmetric");
  Eigen::LLT<Matrix> llt(mass);
  if (llt.info() != Eigen::Success) throw InvalidInput("full-order system: mass matrix is not positive definite");
  if (!is_psd(stiffness, 1e-10))
    throw InvalidInput("full-order system: stiffness matrix is not positive semidefinite");
}

FullOrderSystem spring_mass_chain(Index n_dof, double mass, double stiffness) {
  if (n_dof < 1 || !(mass > 0.0) || !(stiffness > 0.0))
    throw InvalidInput("spring_mass_chain: need n_dof >= 1 and positive mass/stiffness");
  FullOrderSystem sys;
  sys.mass = mass * Matrix::Identity(n_dof, n_dof);
  sys.damping = Matrix::Zero(n_dof, n_dof);
  sys.stiffness = Matrix::Zero(n_dof, n_dof);
  for (Index i = 0; i < n_dof; ++i) {
    // spring i connects DOF i to DOF i-1 (or ground for i == 0)
    sys.stiffness(i, i) += stiffness;
    if (i > 0) {
      sys.stiffness(i - 1, i - 1) += stiffness;
      sys.stiffness(i, i - 1) -= stiffness;
      sys.stiffness(i - 1, i) -= stiffness;
    }
  }
  return sys;
}

bool ModalModel::has_damping() const {
  return zeta.size() == phi.cols() && zeta.allFinite();
}

ModalModel ModalModel::with_uniform_damping(double ratio) const {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidInput("damping ratio must lie in (0, 1)");
  ModalModel out = *this;
  out.zeta = Vector::Constant(n_modes(), ratio);
  return out;
}

ModalModel ModalModel::truncated(Index n) const {
  if (n < 1 || n > n_modes()) throw InvalidInput("truncated: mode count out of range");
  ModalModel out;
  out.phi = phi.leftCols(n);
  out.omega = omega.head(n);
  out.zeta = zeta.size() == n_modes() ? Vector(zeta.head(n))
                                      : Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
  out.dof_labels = dof_labels;
  return out;
}

Index ModalModel::dof_index(std::string_view label) const {
  for (std::size_t i = 0; i < dof_labels.size(); ++i)
    if (dof_labels[i] == label) return static_cast<Index>(i);
  return -1;
}

void ModalModel::validate() const {
  if (phi.rows() == 0 || phi.cols() == 0) throw InvalidInput("modal model: empty mode-shape matrix");
  if (omega.size() != phi.cols()) throw InvalidInput("modal model: omega length must equal mode count");
  if (!phi.allFinite() || !omega.allFinite()) throw InvalidInput("modal model: non-finite entries");
  for (Index j = 0; j < omega.size(); ++j) {
    if (omega(j) < 0.0) throw InvalidInput("modal model: negative natural frequency");
    if (j > 0 && omega(j) < omega(j - 1)) throw InvalidInput("modal model: frequencies must be ascending");
  }
  if (zeta.size() != 0 && zeta.size() != phi.cols())
    throw InvalidInput("modal model: zeta length must equal mode count");
  if (has_damping()) {
    for (Index j = 0; j < zeta.size(); ++j)
      if (!(zeta(j) > 0.0 && zeta(j) < 1.0)) throw InvalidInput("modal model: damping ratios must lie in (0, 1)");
  }
  if (!dof_labels.empty() && static_cast<Index>(dof_labels.size()) != phi.rows())
    throw InvalidInput("modal model: dof_labels length must equal n_dof");
}

std::string_view to_string(Quantity q) {
  switch (q) {
    case Quantity::Acceleration: return "accel";
    case Quantity::Velocity: return "vel";
    case Quantity::Displacement: return "disp";
  }
  return "?";
}

Quantity parse_quantity(std::string_view s) {
  if (s == "accel" || s == "acc" || s == "a") return Quantity::Acceleration;
  if (s == "vel" || s == "v") return Quantity::Velocity;
  if (s == "disp" || s == "d") return Quantity::Displacement;
  throw ParseError("unknown measured quantity '" + std::string(s) + "' (expected accel, vel or disp)");
}

void SensorLayout::validate(Index n_dof) const {
  for (const auto* list : {&accel_dofs, &vel_dofs, &disp_dofs}) {
    std::set<Index> seen;
    for (Index d : *list) {
      if (d < 0 || d >= n_dof) throw InvalidInput("sensor layout: DOF index out of range");
      if (!seen.insert(d).second) throw InvalidInput("sensor layout: DOF listed twice for the same quantity");
    }
  }
}

std::vector<Channel> SensorLayout::channels() const {
  std::vector<Channel> out;
  out.reserve(size());
  auto add = [&](const std::vector<Index>& dofs, Quantity q, char tag) {
    for (Index d : dofs) out.push_back({std::string(1, tag) + std::to_string(d), q, d});
  };
  add(accel_dofs, Quantity::Acceleration, 'a');
  add(vel_dofs, Quantity::Velocity, 'v');
  add(disp_dofs, Quantity::Displacement, 'd');
  return out;
}

ModalModel solve_modal(const FullOrderSystem& sys, Index n_modes) {
  sys.validate();
  const Index n = sys.n_dof();
  if (n_modes < 1 || n_modes > n) throw InvalidInput("solve_modal: n_r must satisfy 1 <= n_r <= n_dof");

  // K phi = M phi w^2, M = L L^T  ->  (L^-1 K L^-T) v = w^2 v, phi = L^-T v
  Eigen::LLT<Matrix> llt(sys.mass);
  const Matrix l = llt.matrixL();
  Matrix a = l.triangularView<Eigen::Lower>().solve(sys.stiffness);
  a = l.triangularView<Eigen::Lower>().solve(a.transpose()).transpose();
  a = symmetrized(a);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  if (eig.info() != Eigen::Success) throw NumericalError("solve_modal: eigensolver failed");

  // Ascending eigenvalues; the symmetric solver returns an orthonormal basis inside
  // repeated eigenspaces, so ties keep the solver's order.
  const Matrix v = eig.eigenvectors().leftCols(n_modes);
  Matrix phi = l.transpose().triangularView<Eigen::Upper>().solve(v);

  ModalModel out;
  out.omega.resize(n_modes);
  for (Index j = 0; j < n_modes; ++j) {
    const double w2 = eig.eigenvalues()(j);
    out.omega(j) = std::sqrt(std::max(w2, 0.0));
    // sign convention: largest-magnitude entry positive
    Index imax = 0;
    phi.col(j).cwiseAbs().maxCoeff(&imax);
    if (phi(imax, j) < 0.0) phi.col(j) *= -1.0;
  }
  out.phi = std::move(phi);
  out.zeta = Vector::Constant(n_modes, std::numeric_limits<double>::quiet_NaN());
  out.dof_labels.reserve(n);
  for (Index i = 0; i < n; ++i) out.dof_labels.push_back("dof" + std::to_string(i));
  return out;
}

ObservationRows observation_rows(const ModalModel& modal, std::span<const Channel> channels) {
  const Index nr = modal.n_modes();
  const Index ny = static_cast<Index>(channels.size());
  if (!modal.has_damping()) throw InvalidInput("observation rows: modal damping ratios are unassigned");
  ObservationRows rows{Matrix::Zero(ny, 2 * nr), Matrix::Zero(ny, nr)};
  for (Index c = 0; c < ny; ++c) {
    const Channel& ch = channels[static_cast<std::size_t>(c)];
    if (ch.dof < 0 || ch.dof >= modal.n_dof())
      throw InvalidInput("channel '" + ch.name + "' refers to a DOF outside the modal model");
    const auto shape = modal.phi.row(ch.dof);
    switch (ch.quantity) {
      case Quantity::Acceleration:
        for (Index j = 0; j < nr; ++j) {
          const double w = modal.omega(j);
          rows.g(c, j) = -shape(j) * w * w;
          rows.g(c, nr + j) = -shape(j) * 2.0 * modal.zeta(j) * w;
          rows.j(c, j) = shape(j);
        }
        break;
      case Quantity::Velocity:
        rows.g.row(c).segment(nr, nr) = shape;
        break;
      case Quantity::Displacement:
        rows.g.row(c).head(nr) = shape;
        break;
    }
  }
  return rows;
}

ContinuousStateSpace build_continuous(const ModalModel& modal, std::span<const Channel> channels) {
  if (channels.empty()) throw InvalidInput("build_continuous: empty sensor layout");
  modal.validate();
  const Index nr = modal.n_modes();
  ContinuousStateSpace css;
  css.ac = Matrix::Zero(2 * nr, 2 * nr);
  css.ac.topRightCorner(nr, nr) = Matrix::Identity(nr, nr);
  for (Index j = 0; j < nr; ++j) {
    css.ac(nr + j, j) = -modal.omega(j) * modal.omega(j);
    css.ac(nr + j, nr + j) = -2.0 * modal.zeta(j) * modal.omega(j);
  }
  css.bc = Matrix::Zero(2 * nr, nr);
  css.bc.bottomRows(nr) = Matrix::Identity(nr, nr);
  ObservationRows rows = observation_rows(modal, channels);
  css.gc = std::move(rows.g);
  css.jc = std::move(rows.j);
  return css;
}

ContinuousStateSpace build_continuous(const ModalModel& modal, const SensorLayout& layout) {
  layout.validate(modal.n_dof());
  const auto channels = layout.channels();
  return build_continuous(modal, channels);
}

DiscreteStateSpace discretize(const ContinuousStateSpace& css, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("discretize: dt must be positive");
  const Index n = css.n_states();
  DiscreteStateSpace d;
  d.dt = dt;
  d.a = expm(css.ac * dt);

  Eigen::PartialPivLU<Matrix> lu(css.ac);
  const bool invertible = n > 0 && lu.rcond() > 1e-12;
  if (invertible) {
    d.b = (d.a - Matrix::Identity(n, n)) * lu.solve(css.bc);
  } else {
    d.b = hold_discretize(css.ac, css.bc, dt).gamma0;
  }
  d.g = css.gc;
  d.j = css.jc;
  d.qx = Matrix::Zero(n, n);
  d.r = Matrix::Zero(css.n_outputs(), css.n_outputs());
  d.continuous = css;
  return d;
}

Matrix modal_influence(const ModalModel& modal, const SensorLayout& layout) {
  layout.validate(modal.n_dof());
  const auto channels = layout.channels();
  Matrix out(static_cast<Index>(channels.size()), modal.n_modes());
  for (Index c = 0; c < out.rows(); ++c)
    out.row(c) = modal.phi.row(channels[static_cast<std::size_t>(c)].dof).cwiseAbs();
  return out;
}

}  // namespace gplfm
