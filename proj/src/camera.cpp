#include "pw/camera.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "pw/errors.hpp"

namespace pw {

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
        throw ValidationError("intrinsics: focal lengths must be positive and finite");
    if (width <= 0 || height <= 0) throw ValidationError("intrinsics: resolution must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
        throw ValidationError("intrinsics: principal point outside the image");
}

void Pose::validate() const {
    if (!rotation.allFinite() || !translation.allFinite()) throw ValidationError("pose: non-finite entries");
    const double orth = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (orth > 1e-9) throw ValidationError("pose: rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9) throw ValidationError("pose: rotation determinant is not +1");
}

Pose Pose::inverse() const {
    Pose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
}

Pose Pose::compose(const Pose& other) const {
    Pose out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
}

Eigen::Matrix4d Pose::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
    if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0)
        throw ValidationError("pose matrix bottom row must be (0, 0, 0, 1)");
    Pose p;
    p.rotation = m.topLeftCorner<3, 3>();
    p.translation = m.topRightCorner<3, 1>();
    p.validate();
    return p;
}

Pose Pose::from_yaw(double yaw_degrees, const Eigen::Vector3d& translation) {
    Pose p;
    p.rotation = Eigen::AngleAxisd(yaw_degrees * std::numbers::pi / 180.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
    p.translation = translation;
    return p;
}

CameraIntrinsics make_intrinsics(int width, int height, double hfov_degrees) {
    CameraIntrinsics k;
    k.width = width;
    k.height = height;
    k.fx = 0.5 * width / std::tan(0.5 * hfov_degrees * std::numbers::pi / 180.0);
    k.fy = k.fx;
    k.cx = 0.5 * width;
    k.cy = 0.5 * height;
    return k;
}

}  // namespace pw
