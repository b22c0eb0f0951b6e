#pragma once

#include <Eigen/Core>

namespace flowguess {

// Batches are stored one example per row so a single row is a contiguous D-vector.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// A point in data space: D values in [0, 1) after encoding.
using DataVector = Eigen::VectorXd;
// A point in latent space.
using LatentPoint = Eigen::VectorXd;

}  // namespace flowguess
