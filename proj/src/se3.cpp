#include <cmath>
#include <complex>

#include "qnerf/dataset.hpp"

namespace qnerf::data {

Pose pose_identity() {
    return {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
}

Pose pose_compose(const Pose& a, const Pose& b) {
    // Row-major [R|t]: result applies b first, then a.
    Pose out{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) acc += a[std::size_t(i * 4 + k)] * b[std::size_t(k * 4 + j)];
            out[std::size_t(i * 4 + j)] = acc;
        }
        double acc = a[std::size_t(i * 4 + 3)];
        for (int k = 0; k < 3; ++k) acc += a[std::size_t(i * 4 + k)] * b[std::size_t(k * 4 + 3)];
        out[std::size_t(i * 4 + 3)] = acc;
    }
    return out;
}

Vec3 pose_apply_point(const Pose& p, const Vec3& x) {
    Vec3 out{};
    for (int i = 0; i < 3; ++i)
        out[std::size_t(i)] = p[std::size_t(i * 4 + 0)] * x[0] + p[std::size_t(i * 4 + 1)] * x[1] +
                              p[std::size_t(i * 4 + 2)] * x[2] + p[std::size_t(i * 4 + 3)];
    return out;
}

Vec3 pose_apply_dir(const Pose& p, const Vec3& d) {
    Vec3 out{};
    for (int i = 0; i < 3; ++i)
        out[std::size_t(i)] = p[std::size_t(i * 4 + 0)] * d[0] + p[std::size_t(i * 4 + 1)] * d[1] +
                              p[std::size_t(i * 4 + 2)] * d[2];
    return out;
}

namespace {
template <typename T>
double mag(const T& x) {
    if constexpr (std::is_same_v<T, double>) {
        return std::abs(x);
    } else {
        return std::abs(x.real());
    }
}
}  // namespace

template <typename T>
std::array<T, 12> se3_exp(const std::array<T, 6>& delta) {
    const T ux = delta[0], uy = delta[1], uz = delta[2];
    const T wx = delta[3], wy = delta[4], wz = delta[5];
    const T theta2 = wx * wx + wy * wy + wz * wz;

    // Rotation coefficients A = sin(t)/t, B = (1-cos(t))/t^2, C = (t-sin(t))/t^3,
    // with analytic series near zero so the complex-step path stays exact.
    T A, B, C;
    if (mag(theta2) < 1e-10) {
        A = T(1.0) - theta2 / T(6.0) + theta2 * theta2 / T(120.0);
        B = T(0.5) - theta2 / T(24.0) + theta2 * theta2 / T(720.0);
        C = T(1.0) / T(6.0) - theta2 / T(120.0) + theta2 * theta2 / T(5040.0);
    } else {
        const T theta = std::sqrt(theta2);
        A = std::sin(theta) / theta;
        B = (T(1.0) - std::cos(theta)) / theta2;
        C = (theta - std::sin(theta)) / (theta2 * theta);
    }

    // [w]x and [w]x^2 entries.
    const T W[9] = {T(0), -wz, wy, wz, T(0), -wx, -wy, wx, T(0)};
    T W2[9];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            T acc = T(0);
            for (int k = 0; k < 3; ++k) acc += W[i * 3 + k] * W[k * 3 + j];
            W2[i * 3 + j] = acc;
        }

    std::array<T, 12> out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            out[std::size_t(i * 4 + j)] =
                (i == j ? T(1.0) : T(0.0)) + A * W[i * 3 + j] + B * W2[i * 3 + j];
    // t = V u with V = I + B [w]x + C [w]x^2.
    for (int i = 0; i < 3; ++i) {
        T acc = delta[std::size_t(i)];
        const T u[3] = {ux, uy, uz};
        for (int k = 0; k < 3; ++k) acc += (B * W[i * 3 + k] + C * W2[i * 3 + k]) * u[k];
        out[std::size_t(i * 4 + 3)] = acc;
    }
    return out;
}

template std::array<double, 12> se3_exp<double>(const std::array<double, 6>&);
template std::array<std::complex<double>, 12> se3_exp<std::complex<double>>(
    const std::array<std::complex<double>, 6>&);

std::array<double, 6> se3_log(const Pose& p) {
    const double tr = p[0] + p[5] + p[10];
    const double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
    const double theta = std::acos(c);

    // Vee of the skew part of R.
    const double vx = p[9] - p[6];
    const double vy = p[2] - p[8];
    const double vz = p[4] - p[1];

    std::array<double, 3> w{};
    double B_inv_coeff;  // coefficient on [w]x^2 in V^-1
    if (theta < 1e-7) {
        w = {0.5 * vx, 0.5 * vy, 0.5 * vz};
        B_inv_coeff = 1.0 / 12.0;
    } else {
        const double s = theta / (2.0 * std::sin(theta));
        w = {s * vx, s * vy, s * vz};
        B_inv_coeff = 1.0 / (theta * theta) -
                      (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    }

    const double W[9] = {0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0};
    double W2[9];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) acc += W[i * 3 + k] * W[k * 3 + j];
            W2[i * 3 + j] = acc;
        }
    const double t[3] = {p[3], p[7], p[11]};
    std::array<double, 6> out{};
    for (int i = 0; i < 3; ++i) {
        double acc = t[i];
        for (int k = 0; k < 3; ++k)
            acc += (-0.5 * W[i * 3 + k] + B_inv_coeff * W2[i * 3 + k]) * t[k];
        out[std::size_t(i)] = acc;
    }
    out[3] = w[0];
    out[4] = w[1];
    out[5] = w[2];
    return out;
}

double rotation_angle_between(const Pose& a, const Pose& b) {
    // trace(Ra * Rb^T)
    double tr = 0;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) tr += a[std::size_t(i * 4 + k)] * b[std::size_t(i * 4 + k)];
    return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

double translation_distance(const Pose& a, const Pose& b) {
    double acc = 0;
    for (int i = 0; i < 3; ++i) {
        const double d = a[std::size_t(i * 4 + 3)] - b[std::size_t(i * 4 + 3)];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace qnerf::data
