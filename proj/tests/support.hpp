#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <string>

#include "affine/model.hpp"
#include "affine/model_io.hpp"

namespace testing {

using affine::AffineModel;
using affine::Complex;
using affine::Mat;
using affine::Vec;

inline std::filesystem::path models_dir() { return std::filesystem::path(AFFINE_MODELS_DIR); }

inline AffineModel load(const std::string& name) { return affine::load_model(models_dir() / (name + ".json")); }

inline AffineModel cir(double b = 2.0, double alpha = 1.0, double beta = -1.0) {
  AffineModel m;
  m.m = 1;
  m.n = 0;
  m.a = Mat::Zero(1, 1);
  m.alpha = {Mat::Constant(1, 1, alpha)};
  m.b = Vec::Constant(1, b);
  m.beta = Mat::Constant(1, 1, beta);
  m.mu = {affine::JumpMeasure()};
  return m;
}

inline AffineModel ou(double a = 0.5, double beta = -1.0, double b = 0.0) {
  AffineModel m;
  m.m = 0;
  m.n = 1;
  m.a = Mat::Constant(1, 1, a);
  m.b = Vec::Constant(1, b);
  m.beta = Mat::Constant(1, 1, beta);
  return m;
}

/// m = n = 1 with one atom in nu and one in mu_1.
inline AffineModel mixed(double b1 = 2.0) {
  AffineModel m;
  m.m = 1;
  m.n = 1;
  m.a = Mat::Zero(2, 2);
  m.a(1, 1) = 0.5;
  Mat al(2, 2);
  al << 1.0, 0.2, 0.2, 0.3;
  m.alpha = {al};
  m.b = Vec(2);
  m.b << b1, 0.1;
  m.beta = Mat(2, 2);
  m.beta << -1.0, 0.0, 0.3, -0.8;
  Vec p1(2), p2(2);
  p1 << 0.3, 0.5;
  p2 << 0.2, -0.3;
  m.nu = affine::JumpMeasure({{0.5, p1}});
  m.mu = {affine::JumpMeasure({{0.4, p2}})};
  return m;
}

/// CIR with generator alpha x f'' + (b + beta x) f': psi = u e^{beta t}/(1 - u c), c = alpha (1 - e^{beta t})/(-beta).
inline Complex cir_psi(double t, Complex u, double alpha = 1.0, double beta = -1.0) {
  const double c = alpha * (1.0 - std::exp(beta * t)) / (-beta);
  return u * std::exp(beta * t) / (1.0 - u * c);
}

inline Complex cir_phi(double t, Complex u, double b = 2.0, double alpha = 1.0, double beta = -1.0) {
  const double c = alpha * (1.0 - std::exp(beta * t)) / (-beta);
  return -(b / alpha) * std::log(1.0 - u * c);
}

/// Transition density of the same CIR: scaled noncentral chi-square with shape b/alpha.
inline double cir_density(double t, double x, double y, double b = 2.0, double alpha = 1.0, double beta = -1.0) {
  if (y <= 0.0) return 0.0;
  const double c = alpha * (1.0 - std::exp(beta * t)) / (-beta);
  const double q = b / alpha;
  const double mu = x * std::exp(beta * t);
  if (mu == 0.0) return std::pow(y, q - 1.0) * std::exp(-y / c) / (std::tgamma(q) * std::pow(c, q));
  return std::exp(-(y + mu) / c) / c * std::pow(y / mu, 0.5 * (q - 1.0)) *
         std::cyl_bessel_i(q - 1.0, 2.0 * std::sqrt(y * mu) / c);
}

/// OU with generator a f'' + (b + beta x) f': Gaussian with mean and variance below.
inline double ou_mean(double t, double x, double beta = -1.0, double b = 0.0) {
  return x * std::exp(beta * t) + b * (std::exp(beta * t) - 1.0) / beta;
}

inline double ou_var(double t, double a = 0.5, double beta = -1.0) {
  return a * (1.0 - std::exp(2.0 * beta * t)) / (-beta);
}

inline double normal_pdf(double y, double mean, double var) {
  return std::exp(-0.5 * (y - mean) * (y - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

inline double normal_cdf(double y, double mean, double var) {
  return 0.5 * std::erfc(-(y - mean) / std::sqrt(2.0 * var));
}

}  // namespace testing
