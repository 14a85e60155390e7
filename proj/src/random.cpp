#include <Eigen/QR>

#include "mnfd/types.hpp"

namespace mnfd {

Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat g(rows, cols);
  // Column-major fill order keeps streams stable across Eigen versions.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return g;
}

Vec random_unit_vector(Eigen::Index n, Rng& rng) {
  Vec v = gaussian_matrix(n, 1, rng).col(0);
  double norm = v.norm();
  while (norm < 1e-300) {
    v = gaussian_matrix(n, 1, rng).col(0);
    norm = v.norm();
  }
  return v / norm;
}

Mat random_rotation(Eigen::Index n, Rng& rng) {
  Mat g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  // Fix the sign ambiguity of QR so the distribution is Haar.
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  if (q.determinant() < 0) q.col(0) = -q.col(0);
  return q;
}

}  // namespace mnfd
