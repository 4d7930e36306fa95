#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "singular_drift/spectral.hpp"
#include "singular_drift/time_field.hpp"

namespace singular_drift::snapshot {

/// On-disk layout of field snapshots.
///
/// The payload is a flat array of little-endian IEEE-754 doubles holding the
/// coefficients as interleaved (re, im) pairs, component-major and then
/// row-major over the wavevector lattice in FFT ordering. Time fields store
/// their nodes back to back. A JSON sidecar `<payload>.json` carries
/// {d, N, L, components, real_flag, description} and, for time fields,
/// {T, M, times}.

void write_field(const std::filesystem::path& payload, const SpectralField& field,
                 const std::string& description);
SpectralField read_field(const std::filesystem::path& payload);

void write_time_field(const std::filesystem::path& payload, const TimeField& field,
                      const std::string& description, const nlohmann::json& extra = nlohmann::json::object());
TimeField read_time_field(const std::filesystem::path& payload);

/// Sidecar metadata of a payload.
nlohmann::json read_sidecar(const std::filesystem::path& payload);
std::filesystem::path sidecar_path(const std::filesystem::path& payload);

/// Raw little-endian float64 helpers shared with the ensemble format.
void append_le_doubles(std::string& out, std::span<const double> values);
std::vector<double> parse_le_doubles(std::string_view bytes);

}  // namespace singular_drift::snapshot
