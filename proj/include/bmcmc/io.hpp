// File formats: counts CSV, parameter files, sample and trace CSVs.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bmcmc/chain.hpp"
#include "bmcmc/cj_models.hpp"
#include "bmcmc/drivers.hpp"
#include "bmcmc/rating_matrix.hpp"

namespace bmcmc::io {

/// Malformed input. `line` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message);
  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// Shortest round-trip decimal form.
std::string format_double(double x);

// Counts CSV:
//   stimulus,r1,r2,...,r{M+1}
//   1,12,40,...
RatingMatrix parse_counts_csv(std::istream& in, const std::string& source = "<input>");
RatingMatrix read_counts_csv(const std::filesystem::path& path);
void write_counts_csv(std::ostream& out, const RatingMatrix& data);

// Parameter file, one entry per line:
//   muS[1] 0 fixed
//   sigS[1] 1.2 free
// Names are muS[h] sigS[h] muC[i] sigC[i], 1-based. Blank lines and text
// after '#' are ignored. Every muS[h] and muC[i] must be present; a missing
// sigma defaults to 1, fixed.
CJParameters parse_parameter_file(std::istream& in, const std::string& source = "<input>");
CJParameters read_parameter_file(const std::filesystem::path& path);
void write_parameter_file(std::ostream& out, const CJParameters& params);

/// Fixes the sigma block the variant does not use, so a file written for one
/// variant can seed another.
CJParameters adapt_to_variant(CJParameters params, ModelVariant variant);

// index,log_density,<names...>
void write_samples_csv(std::ostream& out, std::span<const ParameterPoint> samples,
                       std::span<const std::string> names);

// iteration,log_density,lambda,temperature,accepted
void write_trace_csv(std::ostream& out, std::span<const StepRecord> trace);

/// Sidecar path written next to a counts file: same stem, ".json".
std::filesystem::path sidecar_path(const std::filesystem::path& counts_path);

struct SimulationRecord {
  ModelVariant variant = ModelVariant::fsdt;
  std::uint64_t seed = 0;
  std::int64_t trials = 0;
  CJParameters generating;
};

std::string simulation_sidecar_json(const SimulationRecord& record);
/// Returns nullopt when the file does not exist; throws ParseError when it
/// exists but is malformed.
std::optional<SimulationRecord> read_simulation_sidecar(const std::filesystem::path& path);

/// Writes text to a file, throwing std::runtime_error on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace bmcmc::io
