#include "stg/gradcheck.hpp"

#include <cmath>

namespace stg {

GradCheckReport finite_difference_check(const std::function<Scalar()>& objective,
                                        const std::function<void()>& compute_grads,
                                        const std::vector<std::pair<std::string, Tensor>>& params,
                                        Scalar h) {
  const Scalar probe_a = objective();
  const Scalar probe_b = objective();
  if (!(probe_a == probe_b)) {
    throw std::invalid_argument(
        "finite_difference_check: objective is not deterministic or not finite");
  }

  compute_grads();
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, t] : params) {
    analytic.push_back(t.has_grad() ? t.grad() : Mat::Zero(t.rows(), t.cols()));
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].second;
    for (Index r = 0; r < t.rows(); ++r) {
      for (Index c = 0; c < t.cols(); ++c) {
        const Scalar saved = t.value()(r, c);
        t.value()(r, c) = saved + h;
        const Scalar f_plus = objective();
        t.value()(r, c) = saved - h;
        const Scalar f_minus = objective();
        t.value()(r, c) = saved;

        const Scalar numeric = (f_plus - f_minus) / (2 * h);
        const Scalar a = analytic[k](r, c);
        const Scalar rel =
            std::abs(a - numeric) / std::max({Scalar(1), std::abs(a), std::abs(numeric)});
        if (rel > report.max_rel_err) {
          report.max_rel_err = rel;
          report.worst_name = params[k].first;
          report.worst_row = r;
          report.worst_col = c;
        }
      }
    }
  }
  return report;
}

}  // namespace stg
