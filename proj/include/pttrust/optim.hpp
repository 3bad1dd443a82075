#ifndef PTTRUST_OPTIM_HPP_
#define PTTRUST_OPTIM_HPP_

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace pttrust {

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a fixed list of parameter blocks, addressed by slot index.
/// Call begin_step() once per optimizer step, then update() per block.
class Adam {
 public:
  explicit Adam(AdamSettings s = {}) : s_(s) {}

  void begin_step() {
    ++t_;
    c1_ = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
    c2_ = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
  }

  template <typename P, typename G>
  void update(std::size_t slot, Eigen::MatrixBase<P>& param, const Eigen::MatrixBase<G>& grad) {
    if (slot >= m_.size()) {
      m_.resize(slot + 1);
      v_.resize(slot + 1);
    }
    auto& m = m_[slot];
    auto& v = v_[slot];
    if (m.size() == 0) {
      m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
      v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    }
    m = s_.beta1 * m + (1.0 - s_.beta1) * grad;
    v = s_.beta2 * v + (1.0 - s_.beta2) * grad.cwiseProduct(grad);
    const double lr = s_.learning_rate;
    const double c1 = c1_, c2 = c2_, eps = s_.epsilon;
    param.derived() -= (m.array() / c1)
                           .binaryExpr(v.array() / c2,
                                       [lr, eps](double mh, double vh) { return lr * mh / (std::sqrt(vh) + eps); })
                           .matrix();
  }

  long steps() const noexcept { return t_; }

 private:
  AdamSettings s_;
  long t_ = 0;
  double c1_ = 1.0;
  double c2_ = 1.0;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
};

}  // namespace pttrust

#endif  // PTTRUST_OPTIM_HPP_
