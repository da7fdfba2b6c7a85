#pragma once

#include <Eigen/Dense>

namespace quadmcv {

inline constexpr int kStateDim = 10;
inline constexpr int kInputDim = 4;
inline constexpr int kNoiseDim = 3;

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using InputVec = Eigen::Matrix<double, kInputDim, 1>;
using MatA = Eigen::Matrix<double, kStateDim, kStateDim>;
using MatB = Eigen::Matrix<double, kStateDim, kInputDim>;
using MatG = Eigen::Matrix<double, kStateDim, kNoiseDim>;
using MatK = Eigen::Matrix<double, kInputDim, kStateDim>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

}  // namespace quadmcv
