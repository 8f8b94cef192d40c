#pragma once

#include "ssmf/factorization.hpp"
#include "ssmf/ordinal.hpp"

#include <filesystem>
#include <string>
#include <variant>

namespace ssmf::model_io {

// Models are JSON documents with "format": "ssmf-model" and a "model" field of
// "normal", "constrained" or "saturated". Lambda is stored row-major as
// nested arrays. Intercepts are keyed "time|app"; coefficients are keyed
// "time|app" (constrained) or "time|app|level" (saturated).

std::string to_json(const NormalFit& fit);
std::string to_json(const ordinal::OrdinalModel& model);

using AnyModel = std::variant<NormalFit, ordinal::OrdinalModel>;

/// Throws SchemaError on malformed input.
AnyModel from_json(const std::string& text);

void save(const std::filesystem::path& path, const AnyModel& model);
AnyModel load(const std::filesystem::path& path);

} // namespace ssmf::model_io
