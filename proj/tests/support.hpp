#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/LU>

#include "flowguess/flow.hpp"
#include "flowguess/rng.hpp"

namespace testing_support {

using namespace flowguess;

// Adds N(0, scale^2) to every parameter, including the zero-initialized
// output layers, so the model is no longer the identity.
inline void perturb(FlowModel& model, double scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    model.for_each_array([&](std::span<double> a) {
        for (double& v : a) v += n(rng);
    });
}

inline FlowModel random_model(int dim, int layers, int hidden, int blocks, MaskSpec mask, std::uint64_t seed,
                              double scale = 0.1, double bound = kDefaultScaleBound) {
    FlowConfig c;
    c.dim = dim;
    c.layers = layers;
    c.hidden = hidden;
    c.blocks = blocks;
    c.mask = mask;
    c.scale_bound = bound;
    FlowModel m = FlowModel::create(c, Charset::canonical(), seed);
    perturb(m, scale, seed ^ 0x9e3779b97f4a7c15ULL);
    return m;
}

inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo = 0.0,
                             double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// log|det J| of the flow at x by central differences on every coordinate.
inline double fd_logdet(const FlowModel& model, const DataVector& x, double h = 1e-5) {
    const int d = static_cast<int>(x.size());
    Eigen::MatrixXd jac(d, d);
    for (int j = 0; j < d; ++j) {
        Matrix plus = x.transpose();
        Matrix minus = x.transpose();
        plus(0, j) += h;
        minus(0, j) -= h;
        const Matrix zp = flow_forward(model, plus).z;
        const Matrix zm = flow_forward(model, minus).z;
        jac.col(j) = ((zp - zm) / (2.0 * h)).transpose();
    }
    return std::log(std::abs(jac.determinant()));
}

inline std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "flowguess-tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace testing_support
