#include "gplfm/model_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "gplfm/error.hpp"

namespace gplfm {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<double> numbers(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError(std::string(what) + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ParseError(std::string(what) + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ParseError(std::string(what) + ": rows must be non-empty arrays");
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = numbers(j[r], what);
    if (row.size() != cols) throw ParseError(std::string(what) + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = row[c];
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ModalModel modal_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("modal file: expected a JSON object");
  for (const char* key : {"phi", "omega_hz"})
    if (!j.contains(key)) throw ParseError(std::string("modal file: missing key '") + key + "'");

  ModalModel m;
  const auto omega_hz = numbers(j.at("omega_hz"), "omega_hz");
  const auto nr = static_cast<Index>(omega_hz.size());
  const json& phi = j.at("phi");
  if (phi.is_array() && !phi.empty() && phi.front().is_array()) {
    m.phi = matrix_from_json(phi, "phi");
  } else {
    const auto flat = numbers(phi, "phi");
    const Index n_dof = j.contains("n_dof") ? j.at("n_dof").get<Index>() : static_cast<Index>(flat.size()) / std::max<Index>(nr, 1);
    if (n_dof * nr != static_cast<Index>(flat.size())) throw ParseError("phi: flat length does not equal n_dof * n_modes");
    m.phi.resize(n_dof, nr);
    for (Index r = 0; r < n_dof; ++r)
      for (Index c = 0; c < nr; ++c) m.phi(r, c) = flat[static_cast<std::size_t>(r * nr + c)];
  }
  if (m.phi.cols() != nr) throw ParseError("modal file: phi column count must equal the length of omega_hz");
  m.omega.resize(nr);
  for (Index i = 0; i < nr; ++i) m.omega(i) = 2.0 * std::numbers::pi * omega_hz[static_cast<std::size_t>(i)];
  if (j.contains("zeta")) {
    const auto z = numbers(j.at("zeta"), "zeta");
    if (z.size() == 1) m.zeta = Vector::Constant(nr, z.front());
    else if (static_cast<Index>(z.size()) == nr) m.zeta = Eigen::Map<const Vector>(z.data(), nr);
    else throw ParseError("modal file: zeta must have one entry or one per mode");
  } else {
    m.zeta = Vector::Constant(nr, std::numeric_limits<double>::quiet_NaN());
  }
  if (j.contains("dof_labels")) m.dof_labels = j.at("dof_labels").get<std::vector<std::string>>();
  else
    for (Index i = 0; i < m.phi.rows(); ++i) m.dof_labels.push_back("dof" + std::to_string(i));
  m.validate();
  return m;
}

json modal_to_json(const ModalModel& modal) {
  json j;
  j["units"] = {{"phi", "mass-normalized (1/sqrt(kg))"}, {"omega_hz", "Hz"}, {"zeta", "1"}};
  j["phi"] = matrix_to_json(modal.phi);
  std::vector<double> hz;
  for (Index i = 0; i < modal.omega.size(); ++i) hz.push_back(modal.omega(i) / (2.0 * std::numbers::pi));
  j["omega_hz"] = hz;
  if (modal.has_damping()) j["zeta"] = std::vector<double>(modal.zeta.data(), modal.zeta.data() + modal.zeta.size());
  j["dof_labels"] = modal.dof_labels;
  return j;
}

ModalModel load_modal(const std::filesystem::path& path) {
  try {
    return modal_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_modal(const std::filesystem::path& path, const ModalModel& modal) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << modal_to_json(modal).dump(2) << '\n';
}

FullOrderSystem full_order_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("full-order file: expected a JSON object");
  for (const char* key : {"M", "K"})
    if (!j.contains(key)) throw ParseError(std::string("full-order file: missing key '") + key + "'");
  FullOrderSystem sys;
  sys.mass = matrix_from_json(j.at("M"), "M");
  sys.stiffness = matrix_from_json(j.at("K"), "K");
  sys.damping = j.contains("C") ? matrix_from_json(j.at("C"), "C") : Matrix::Zero(sys.mass.rows(), sys.mass.cols());
  sys.validate();
  return sys;
}

FullOrderSystem load_full_order(const std::filesystem::path& path) {
  try {
    return full_order_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace gplfm
