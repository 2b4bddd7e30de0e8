#pragma once

#include <Eigen/Core>

namespace geco {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole intrinsics in pixels.
struct Pinhole {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  friend bool operator==(const Pinhole&, const Pinhole&) = default;
};

// Rigid transform x' = rotation * x + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }
  friend bool operator==(const RigidTransform& a, const RigidTransform& b) {
    return a.rotation == b.rotation && a.translation == b.translation;
  }
};

// Absolute camera pose: maps camera coordinates to world coordinates.
using WorldFromCamera = RigidTransform;

// Maps camera-c coordinates into camera-i coordinates.
using RelativePose = RigidTransform;

// Relative pose c -> i from two world-from-camera poses.
inline RelativePose relative_pose(const WorldFromCamera& c, const WorldFromCamera& i) {
  RelativePose rel;
  rel.rotation = i.rotation.transpose() * c.rotation;
  rel.translation = i.rotation.transpose() * (c.translation - i.translation);
  return rel;
}

}  // namespace geco
