#pragma once

#include <Eigen/Dense>

namespace mimlnd {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One instance per row.
using InstanceTable = RowMatrix;

using VectorRef = Eigen::Ref<const Vector>;

}  // namespace mimlnd
