#include "cablecal/kinematics.hpp"

#include <cmath>
#include <string>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

bool finite(const DhLink& l) {
  return std::isfinite(l.a) && std::isfinite(l.d) &&
         std::isfinite(l.theta_offset) && std::isfinite(l.alpha);
}

void check_joints(const DhTable& table,
                  const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (static_cast<std::size_t>(q.size()) != table.joint_count()) {
    throw DimensionMismatch("joint vector has " + std::to_string(q.size()) +
                            " entries, table has " +
                            std::to_string(table.joint_count()) + " joints");
  }
}

}  // namespace

DhTable::DhTable(std::vector<DhLink> links) : links_(std::move(links)) {
  if (links_.empty()) throw InvalidParameter("DH table needs at least one link");
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (!finite(links_[i])) {
      throw InvalidParameter("non-finite DH parameter in link " +
                             std::to_string(i + 1));
    }
  }
}

DhTable DhTable::slice(std::size_t first, std::size_t count) const {
  if (first + count > links_.size()) {
    throw DimensionMismatch("slice out of range");
  }
  return DhTable(std::vector<DhLink>(links_.begin() + first,
                                     links_.begin() + first + count));
}

DeviationVector::DeviationVector(std::size_t joint_count, bool with_anchor)
    : DeviationVector(joint_count, with_anchor,
                      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(
                          dimension(joint_count, with_anchor)))) {}

DeviationVector::DeviationVector(std::size_t joint_count, bool with_anchor,
                                 Eigen::VectorXd values)
    : joints_(joint_count), with_anchor_(with_anchor), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) !=
      dimension(joint_count, with_anchor)) {
    throw DimensionMismatch("deviation vector has " +
                            std::to_string(values_.size()) + " entries, expected " +
                            std::to_string(dimension(joint_count, with_anchor)));
  }
}

Eigen::Vector3d DeviationVector::anchor_offset() const {
  if (!with_anchor_) return Eigen::Vector3d::Zero();
  return values_.tail<3>();
}

Transform link_transform(const LinkParams& p) {
  if (!std::isfinite(p.a) || !std::isfinite(p.d) || !std::isfinite(p.theta) ||
      !std::isfinite(p.alpha)) {
    throw InvalidParameter("non-finite link parameter");
  }
  const double ct = std::cos(p.theta);
  const double st = std::sin(p.theta);
  const double ca = std::cos(p.alpha);
  const double sa = std::sin(p.alpha);

  Transform t;
  // clang-format off
  t.m_ << ct, -st * ca,  st * sa, p.a * ct,
          st,  ct * ca, -ct * sa, p.a * st,
         0.0,       sa,       ca,      p.d,
         0.0,      0.0,      0.0,      1.0;
  // clang-format on
  return t;
}

Transform forward_kinematics(const DhTable& table,
                             const Eigen::Ref<const Eigen::VectorXd>& q) {
  check_joints(table, q);
  Transform t;
  for (std::size_t i = 0; i < table.joint_count(); ++i) {
    const DhLink& l = table[i];
    t = t * link_transform({l.a, l.d, l.theta_offset + q[static_cast<Eigen::Index>(i)],
                            l.alpha});
  }
  return t;
}

Eigen::Vector3d end_position(const DhTable& table,
                             const Eigen::Ref<const Eigen::VectorXd>& q) {
  return forward_kinematics(table, q).translation();
}

DhTable apply_deviation(const DhTable& table, const DeviationVector& w) {
  if (w.joint_count() != table.joint_count()) {
    throw DimensionMismatch("deviation vector is for " +
                            std::to_string(w.joint_count()) + " joints, table has " +
                            std::to_string(table.joint_count()));
  }
  std::vector<DhLink> links = table.links();
  for (std::size_t j = 0; j < links.size(); ++j) {
    links[j].alpha += w.at(DevBlock::kAlpha, j);
    links[j].a += w.at(DevBlock::kA, j);
    links[j].d += w.at(DevBlock::kD, j);
    links[j].theta_offset += w.at(DevBlock::kTheta, j);
  }
  return DhTable(std::move(links));
}

Eigen::MatrixXd error_jacobian(const DhTable& table,
                               const Eigen::Ref<const Eigen::VectorXd>& q,
                               bool with_anchor, double h) {
  check_joints(table, q);
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InvalidParameter("finite-difference step must be positive");
  }
  const std::size_t n = table.joint_count();
  const std::size_t dim = DeviationVector::dimension(n, with_anchor);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(dim));

  DeviationVector step(n, with_anchor);
  for (std::size_t k = 0; k < 4 * n; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    step.values()[col] = h;
    const Eigen::Vector3d plus = end_position(apply_deviation(table, step), q);
    step.values()[col] = -h;
    const Eigen::Vector3d minus = end_position(apply_deviation(table, step), q);
    step.values()[col] = 0.0;
    jac.col(col) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

}  // namespace cablecal
