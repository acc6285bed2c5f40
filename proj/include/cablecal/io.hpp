/**
 * @file io.hpp
 * @brief Text formats: DH tables and cable-length datasets.
 *
 * DH table: one joint per line, `a d theta_offset alpha` separated by
 * whitespace and/or commas, `#` starts a comment.
 *
 * Dataset: CSV with header `q1,...,qJ,L_mm`, preceded by metadata comments
 *   # anchor_mm: x y z
 *   # seed: <u64>              (synthetic sets)
 *   # truth: <flattened w*>    (synthetic sets)
 *
 * Numbers are written in shortest round-trip form, so reading a written
 * file reproduces every value bit for bit.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "cablecal/kinematics.hpp"
#include "cablecal/objective.hpp"

namespace cablecal {

/// Shortest decimal string that parses back to exactly @p v.
std::string format_double(double v);

/// @throws IoError on malformed input.
double parse_double(const std::string& text);

DhTable parse_dh_table(std::istream& in);
/// @throws IoError if the file cannot be read or parsed.
DhTable read_dh_table(const std::filesystem::path& path);
void write_dh_table(std::ostream& out, const DhTable& table);
void write_dh_table(const std::filesystem::path& path, const DhTable& table);

struct Dataset {
  MeasurementSet ms;
  std::optional<std::uint64_t> seed;
  std::optional<Eigen::VectorXd> truth;

  bool operator==(const Dataset&) const = default;
};

Dataset parse_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// Truth vector of a dataset as a DeviationVector (layout inferred from size).
std::optional<DeviationVector> truth_deviation(const Dataset& data);

}  // namespace cablecal
