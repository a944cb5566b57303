#pragma once

#include <filesystem>

#include <json.hpp>

#include "gplfm/structural_model.hpp"

namespace gplfm {

// Modal data file (JSON):
//   { "units": {...}, "phi": [[...], ...] (n_dof rows x n_r) or flat row-major with
//     "n_dof"/"n_modes", "omega_hz": [...], "zeta": [...], "dof_labels": [...] }
// Full-order file (JSON): { "units": {...}, "M": [[...]], "C": [[...]], "K": [[...]] }

ModalModel modal_from_json(const nlohmann::json& j);
nlohmann::json modal_to_json(const ModalModel& modal);
ModalModel load_modal(const std::filesystem::path& path);
void save_modal(const std::filesystem::path& path, const ModalModel& modal);

FullOrderSystem full_order_from_json(const nlohmann::json& j);
FullOrderSystem load_full_order(const std::filesystem::path& path);

Matrix matrix_from_json(const nlohmann::json& j, const char* what);
nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace gplfm
