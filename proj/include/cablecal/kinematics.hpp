/**
 * @file kinematics.hpp
 * @brief Standard DH forward kinematics, parameter deviations and the
 * position error Jacobian.
 *
 * Lengths are millimeters and angles radians throughout. A link transform is
 *   T = Rot_z(theta) * Trans_z(d) * Trans_x(a) * Rot_x(alpha)
 * and the joint variable q_i of a configuration adds to the stored
 * theta_offset_i of link i.
 */
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace cablecal {

/// One evaluated link: theta already includes the joint variable.
struct LinkParams {
  double a = 0.0;      ///< link length [mm]
  double d = 0.0;      ///< link offset [mm]
  double theta = 0.0;  ///< joint angle [rad]
  double alpha = 0.0;  ///< link twist [rad]
};

/// Nominal parameters of one joint.
struct DhLink {
  double a = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
  double alpha = 0.0;

  bool operator==(const DhLink&) const = default;
};

/// Ordered per-joint DH parameters (the nominal model). Never empty.
class DhTable {
 public:
  explicit DhTable(std::vector<DhLink> links);

  std::size_t joint_count() const { return links_.size(); }
  const DhLink& operator[](std::size_t i) const { return links_[i]; }
  const std::vector<DhLink>& links() const { return links_; }

  /// Links [first, first + count) as a table of their own.
  DhTable slice(std::size_t first, std::size_t count) const;

  bool operator==(const DhTable&) const = default;

 private:
  std::vector<DhLink> links_;
};

/// 4x4 homogeneous transform. The bottom row is exactly (0, 0, 0, 1).
class Transform {
 public:
  Transform() : m_(Eigen::Matrix4d::Identity()) {}

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return m_.topRightCorner<3, 1>(); }

  Transform operator*(const Transform& rhs) const {
    Transform out;
    out.m_.topRows<3>() = m_.topRows<3>() * rhs.m_;
    return out;
  }

 private:
  friend Transform link_transform(const LinkParams& p);
  Eigen::Matrix4d m_;
};

/// Parameter blocks of the deviation vector, in storage order.
enum class DevBlock : std::size_t { kAlpha = 0, kA = 1, kD = 2, kTheta = 3 };

/**
 * @brief Stacked kinematic parameter deviations w.
 *
 * Layout is block-major: (dalpha_1..n | da_1..n | dd_1..n | dtheta_1..n),
 * optionally followed by a 3-vector anchor offset [mm].
 */
class DeviationVector {
 public:
  DeviationVector(std::size_t joint_count, bool with_anchor);
  DeviationVector(std::size_t joint_count, bool with_anchor,
                  Eigen::VectorXd values);

  static std::size_t dimension(std::size_t joint_count, bool with_anchor) {
    return 4 * joint_count + (with_anchor ? 3 : 0);
  }
  static std::size_t index(DevBlock block, std::size_t joint,
                           std::size_t joint_count) {
    return static_cast<std::size_t>(block) * joint_count + joint;
  }

  std::size_t joint_count() const { return joints_; }
  bool has_anchor() const { return with_anchor_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  double at(DevBlock block, std::size_t joint) const {
    return values_[static_cast<Eigen::Index>(index(block, joint, joints_))];
  }
  double& at(DevBlock block, std::size_t joint) {
    return values_[static_cast<Eigen::Index>(index(block, joint, joints_))];
  }

  /// Zero when anchor identification is disabled.
  Eigen::Vector3d anchor_offset() const;

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  DeviationVector operator-() const {
    return DeviationVector(joints_, with_anchor_, -values_);
  }

  bool operator==(const DeviationVector& o) const {
    return joints_ == o.joints_ && with_anchor_ == o.with_anchor_ &&
           values_ == o.values_;
  }

 private:
  std::size_t joints_;
  bool with_anchor_;
  Eigen::VectorXd values_;
};

/// Link transform for one set of evaluated DH parameters.
/// @throws InvalidParameter on non-finite input.
Transform link_transform(const LinkParams& p);

/// Chain product of link transforms; q_i adds to theta_offset_i.
/// @throws DimensionMismatch if q has the wrong length.
Transform forward_kinematics(const DhTable& table,
                             const Eigen::Ref<const Eigen::VectorXd>& q);

/// End-effector position [mm].
Eigen::Vector3d end_position(const DhTable& table,
                             const Eigen::Ref<const Eigen::VectorXd>& q);

/// Table with the deviations added; anchor entries are ignored.
DhTable apply_deviation(const DhTable& table, const DeviationVector& w);

inline constexpr double kJacobianStep = 1e-6;

/**
 * @brief Position error Jacobian d(end_position)/dw, 3 x dim(w).
 *
 * Central differences with step @p h per coordinate; columns follow the
 * DeviationVector layout (anchor columns, if requested, are zero).
 */
Eigen::MatrixXd error_jacobian(const DhTable& table,
                               const Eigen::Ref<const Eigen::VectorXd>& q,
                               bool with_anchor = false,
                               double h = kJacobianStep);

}  // namespace cablecal
