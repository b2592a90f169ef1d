#pragma once

#include <filesystem>

#include <json.hpp>

#include "affine/model.hpp"

namespace affine {

/**
 * JSON model schema:
 *   {"m":int, "n":int, "a":[[..]], "alpha":[[[..]]], "b":[..], "beta":[[..]],
 *    "nu":{"atoms":[{"mass":w, "point":[..]}]}, "mu":[{"atoms":[..]}, ..]}
 * Matrices are row-major with coordinates ordered I then J. A measure without "atoms" is zero.
 * "alpha" may be omitted when m = 0; "nu" and "mu" may be omitted entirely.
 * Unknown keys and shape mismatches raise Error(Usage) naming the offending field.
 */
AffineModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const AffineModel& model);
AffineModel load_model(const std::filesystem::path& path);

nlohmann::json to_json(const ValidationReport& report);

}  // namespace affine
