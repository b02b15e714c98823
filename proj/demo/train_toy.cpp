// Fits y = sin(x) on eight points with each solver and prints the fit.
#include <cmath>
#include <cstdio>
#include <vector>

#include "qsvr/qsvr.hpp"

int main() {
  std::vector<qsvr::Vector> xs;
  qsvr::Vector ys;
  for (int i = 0; i < 8; ++i) {
    const double x = 0.4 * i;
    xs.push_back({x});
    ys.push_back(std::sin(x));
  }
  const qsvr::TrainingSet data(xs, ys);
  const auto kernel = qsvr::KernelSpec::gaussian(1.0);
  const qsvr::Encoding enc{4, 2};

  qsvr::TrainOptions sa;
  sa.method = qsvr::Method::Annealing;
  sa.sa.sweeps = 500;
  sa.sa.reads = 100;
  sa.sa.keep_best = 10;
  sa.ensemble = 5;
  qsvr::TrainOptions base;

  const auto m_sa = qsvr::train(data, qsvr::HyperParams::encoded(enc, kernel, 2.0), sa);
  const auto m_base = qsvr::train(data, qsvr::HyperParams::boxed(enc.gamma(), kernel), base);

  std::printf("%6s %9s %9s %9s\n", "x", "sin(x)", "anneal", "baseline");
  for (int i = 0; i <= 14; ++i) {
    const qsvr::Vector x{0.2 * i};
    std::printf("%6.2f %9.4f %9.4f %9.4f\n", x[0], std::sin(x[0]), qsvr::predict(m_sa, x), qsvr::predict(m_base, x));
  }
}
