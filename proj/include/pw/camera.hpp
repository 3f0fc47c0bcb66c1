#pragma once

#include <Eigen/Core>

namespace pw {

/// Pinhole intrinsics. Integer pixel (u, v) maps to the ray ((u - cx) / fx, (v - cy) / fy, 1);
/// there is no half-pixel offset.
struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const;

    /// Camera-frame direction with unit z through continuous pixel coordinate (u, v).
    Eigen::Vector3d ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }
};

/// Rigid camera-to-world transform: p_world = rotation * p_cam + translation.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    void validate() const;

    Eigen::Vector3d to_world(const Eigen::Vector3d& p_cam) const { return rotation * p_cam + translation; }
    Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
        return rotation.transpose() * (p_world - translation);
    }

    Pose inverse() const;
    /// this ∘ other: applies `other` first.
    Pose compose(const Pose& other) const;

    /// Row-major 4x4 camera-to-world matrix.
    Eigen::Matrix4d matrix() const;
    static Pose from_matrix(const Eigen::Matrix4d& m);

    /// Rotation about the camera-frame y axis (yaw) in degrees, combined with a translation.
    static Pose from_yaw(double yaw_degrees, const Eigen::Vector3d& translation);
};

struct CameraRig {
    CameraIntrinsics intrinsics;
    Pose pose;

    void validate() const {
        intrinsics.validate();
        pose.validate();
    }
};

/// Intrinsics with the principal point at the image centre and the given horizontal field of view.
CameraIntrinsics make_intrinsics(int width, int height, double hfov_degrees);

}  // namespace pw
