#pragma once

#include <Eigen/Core>

namespace rhfedmtl {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Samples are stored row-wise: one row per data point.
template <typename Scalar>
using SampleMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vector = VectorX<double>;
using Matrix = SampleMatrix<double>;

}  // namespace rhfedmtl
