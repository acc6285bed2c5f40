#include "cablecal/objective.hpp"

#include <cmath>
#include <string>

#include "cablecal/error.hpp"

namespace cablecal {

MeasurementSet::MeasurementSet(std::size_t joint_count,
                               const Eigen::Vector3d& anchor_mm,
                               std::vector<Sample> samples)
    : joints_(joint_count), anchor_(anchor_mm), samples_(std::move(samples)) {
  if (joints_ == 0) throw InvalidParameter("measurement set needs joints");
  if (samples_.empty()) throw InvalidParameter("measurement set is empty");
  if (!anchor_.allFinite()) throw InvalidParameter("anchor is not finite");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (static_cast<std::size_t>(s.q.size()) != joints_) {
      throw DimensionMismatch("sample " + std::to_string(i + 1) + " has " +
                              std::to_string(s.q.size()) + " joint values, expected " +
                              std::to_string(joints_));
    }
    if (!s.q.allFinite()) {
      throw InvalidParameter("sample " + std::to_string(i + 1) +
                             " has a non-finite joint value");
    }
    if (!std::isfinite(s.length_mm) || !(s.length_mm > 0.0)) {
      throw InvalidParameter("sample " + std::to_string(i + 1) +
                             " cable length must be positive and finite");
    }
  }
}

MeasurementSet MeasurementSet::subset(std::span<const std::size_t> indices) const {
  std::vector<Sample> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= samples_.size()) throw DimensionMismatch("sample index out of range");
    picked.push_back(samples_[i]);
  }
  return MeasurementSet(joints_, anchor_, std::move(picked));
}

double nominal_cable_length(const Eigen::Vector3d& p, const Eigen::Vector3d& anchor) {
  return (p - anchor).norm();
}

Eigen::VectorXd residuals(const MeasurementSet& ms, const DhTable& table,
                          const DeviationVector& w) {
  if (ms.joint_count() != table.joint_count()) {
    throw DimensionMismatch("measurement set and DH table disagree on joint count");
  }
  const DhTable deviated = apply_deviation(table, w);
  const Eigen::Vector3d anchor = ms.anchor() + w.anchor_offset();
  Eigen::VectorXd r(static_cast<Eigen::Index>(ms.size()));
  for (std::size_t i = 0; i < ms.size(); ++i) {
    r[static_cast<Eigen::Index>(i)] =
        ms[i].length_mm - nominal_cable_length(end_position(deviated, ms[i].q), anchor);
  }
  return r;
}

double mean_square(const Eigen::VectorXd& r) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) acc += r[i] * r[i];
  return acc / static_cast<double>(r.size());
}

double fitness(const MeasurementSet& ms, const DhTable& table,
               const DeviationVector& w) {
  return mean_square(residuals(ms, table, w));
}

Metrics metrics(const Eigen::VectorXd& r) {
  if (r.size() == 0) throw InvalidParameter("metrics of an empty residual vector");
  double abs_sum = 0.0;
  double max_abs = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double a = std::abs(r[i]);
    abs_sum += a;
    max_abs = std::max(max_abs, a);
  }
  const double n = static_cast<double>(r.size());
  Metrics m;
  m.rmse_mm = std::sqrt(mean_square(r));
  m.std_mm = abs_sum / n;
  m.max_mm = max_abs;
  // Rounding can put the mean a hair above the root mean square for
  // constant vectors; the ordering is exact in real arithmetic.
  m.std_mm = std::min(m.std_mm, m.rmse_mm);
  return m;
}

Eigen::MatrixXd cable_jacobian(const MeasurementSet& ms, const DhTable& table,
                               const DeviationVector& w) {
  const DhTable deviated = apply_deviation(table, w);
  const Eigen::Vector3d anchor = ms.anchor() + w.anchor_offset();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ms.size()),
                      static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Eigen::Vector3d p = end_position(deviated, ms[i].q);
    Eigen::Vector3d u = p - anchor;
    const double len = u.norm();
    if (len > 0.0) u /= len;
    const Eigen::MatrixXd jac = error_jacobian(deviated, ms[i].q, w.has_anchor());
    out.row(row) = u.transpose() * jac;
    if (w.has_anchor()) out.row(row).tail<3>() = -u.transpose();
  }
  return out;
}

Identifiability identifiability(const MeasurementSet& ms, const DhTable& table,
                                const DeviationVector& w,
                                const Eigen::VectorXd& scale, double rel_tol) {
  Eigen::MatrixXd jac = cable_jacobian(ms, table, w);
  if (scale.size() != jac.cols()) throw DimensionMismatch("scale vector size");
  jac = jac * scale.asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  Identifiability out;
  out.singular_values = svd.singularValues();
  const double top = out.singular_values.size() > 0 ? out.singular_values[0] : 0.0;
  for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values[i] > rel_tol * top) ++out.rank;
  }
  return out;
}

}  // namespace cablecal
