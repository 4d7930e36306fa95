#include "singular_drift/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "singular_drift/errors.hpp"

namespace singular_drift::snapshot {
namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

nlohmann::json grid_header(const SpectralField& f, const std::string& description) {
  return {{"d", f.grid().dim()},
          {"N", f.grid().modes()},
          {"L", f.grid().period()},
          {"components", f.components()},
          {"real_flag", f.is_real()},
          {"description", description}};
}

void append_field(std::string& out, const SpectralField& f) {
  const auto coeffs = f.all_coeffs();
  std::vector<double> flat(coeffs.size() * 2);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    flat[2 * i] = coeffs[i].real();
    flat[2 * i + 1] = coeffs[i].imag();
  }
  append_le_doubles(out, flat);
}

SpectralField field_from(const GridSpec& grid, int components, bool real, std::span<const double> flat) {
  std::vector<Complex> coeffs(flat.size() / 2);
  for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] = Complex(flat[2 * i], flat[2 * i + 1]);
  return SpectralField::from_coefficients(grid, components, real, std::move(coeffs));
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& payload) {
  auto p = payload;
  p += ".json";
  return p;
}

void append_le_doubles(std::string& out, std::span<const double> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * sizeof(double));
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    std::memcpy(out.data() + start + i * sizeof(double), &bits, sizeof(bits));
  }
}

std::vector<double> parse_le_doubles(std::string_view bytes) {
  if (bytes.size() % sizeof(double) != 0) throw FormatError("payload is not a whole number of float64 values");
  std::vector<double> out(bytes.size() / sizeof(double));
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + i * sizeof(double), sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

nlohmann::json read_sidecar(const std::filesystem::path& payload) {
  try {
    return nlohmann::json::parse(slurp(sidecar_path(payload)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad sidecar for " + payload.string() + ": " + e.what());
  }
}

void write_field(const std::filesystem::path& payload, const SpectralField& field,
                 const std::string& description) {
  std::string bytes;
  append_field(bytes, field);
  spit(payload, bytes);
  spit(sidecar_path(payload), grid_header(field, description).dump(2) + "\n");
}

SpectralField read_field(const std::filesystem::path& payload) {
  const auto meta = read_sidecar(payload);
  const GridSpec grid(meta.at("d").get<int>(), meta.at("N").get<int>(), meta.at("L").get<double>());
  const int components = meta.at("components").get<int>();
  const auto values = parse_le_doubles(slurp(payload));
  if (values.size() != 2 * grid.size() * static_cast<std::size_t>(components))
    throw FormatError("payload size does not match sidecar for " + payload.string());
  return field_from(grid, components, meta.at("real_flag").get<bool>(), values);
}

void write_time_field(const std::filesystem::path& payload, const TimeField& field,
                      const std::string& description, const nlohmann::json& extra) {
  std::string bytes;
  for (const auto& node : field.nodes()) append_field(bytes, node);
  spit(payload, bytes);
  auto meta = grid_header(field[0], description);
  meta["T"] = field.time().horizon();
  meta["M"] = field.time().intervals();
  std::vector<double> times;
  for (int m = 0; m < field.time().nodes(); ++m) times.push_back(field.time().node(m));
  meta["times"] = times;
  bool real = true;
  for (const auto& node : field.nodes()) real = real && node.is_real();
  meta["real_flag"] = real;
  for (const auto& [key, value] : extra.items()) meta[key] = value;
  spit(sidecar_path(payload), meta.dump(2) + "\n");
}

TimeField read_time_field(const std::filesystem::path& payload) {
  const auto meta = read_sidecar(payload);
  const GridSpec grid(meta.at("d").get<int>(), meta.at("N").get<int>(), meta.at("L").get<double>());
  const int components = meta.at("components").get<int>();
  const bool real = meta.at("real_flag").get<bool>();
  const TimeGrid time(meta.at("T").get<double>(), meta.at("M").get<int>());
  const auto values = parse_le_doubles(slurp(payload));
  const std::size_t stride = 2 * grid.size() * static_cast<std::size_t>(components);
  if (values.size() != stride * static_cast<std::size_t>(time.nodes()))
    throw FormatError("payload size does not match sidecar for " + payload.string());
  std::vector<SpectralField> nodes;
  for (int m = 0; m < time.nodes(); ++m)
    nodes.push_back(field_from(grid, components, real,
                               std::span<const double>(values).subspan(stride * static_cast<std::size_t>(m), stride)));
  return TimeField(time, std::move(nodes));
}

}  // namespace singular_drift::snapshot
