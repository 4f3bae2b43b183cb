#ifndef FASTNN_RNG_HPP
#define FASTNN_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace fastnn {

// splitmix64 finalizer; used to hash seed components into stream seeds
std::uint64_t mix64(std::uint64_t x);

// Deterministic sub-seed from a master seed and a path of indices,
// e.g. derive_seed(master, {p, trial}).
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path);

// Wraps mt19937_64 with fixed draw algorithms so that streams do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1), 53-bit resolution
  double uniform();
  double uniform(double a, double b);

  // standard normal via Box-Muller, one spare cached
  double gaussian();
  double gaussian(double mean, double sd);

  // uniform integer in [0, n), n >= 1, rejection-sampled
  std::size_t uniform_index(std::size_t n);

  // Fisher-Yates
  void shuffle(std::vector<int>& v);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                               double a, double b);
Eigen::VectorXd uniform_vector(Rng& rng, Eigen::Index n, double a, double b);
Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                double mean, double sd);
Eigen::VectorXd gaussian_vector(Rng& rng, Eigen::Index n, double mean,
                                double sd);

}  // namespace fastnn

#endif
