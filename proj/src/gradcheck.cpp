#include "duality/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace duality {

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << (e.ok ? "  ok   " : "  FLAG ") << e.param
       << "  max_rel_err=" << e.max_rel_err << "  coord=" << e.worst_coord
       << "  tape=" << e.tape_grad << "  fd=" << e.fd_grad << "\n";
  }
  os << (all_ok ? "gradient check passed" : "gradient check FAILED")
     << "  (max_rel_err=" << max_rel_err << ")\n";
  return os.str();
}

GradCheckReport finite_difference_check(
    const std::function<double(bool)>& loss,
    const std::vector<Parameter*>& params, double step, double tolerance) {
  for (auto* p : params) p->tensor->zero_grad();
  loss(true);

  // Snapshot tape gradients before perturbing anything.
  std::vector<std::vector<double>> tape_grads;
  tape_grads.reserve(params.size());
  for (auto* p : params) tape_grads.push_back(p->tensor->grad);

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    GradCheckEntry entry;
    entry.param = p->name;
    for (std::size_t i = 0; i < p->tensor->values.size(); ++i) {
      const double orig = p->tensor->values[i];
      p->tensor->values[i] = orig + step;
      const double lp = loss(false);
      p->tensor->values[i] = orig - step;
      const double lm = loss(false);
      p->tensor->values[i] = orig;
      const double fd = (lp - lm) / (2.0 * step);
      const double tg = tape_grads[pi][i];
      // Floor the denominator: central differences carry roundoff of order
      // eps * |loss| / step, so coordinates with near-zero gradient are
      // compared on an absolute scale instead of blowing up the ratio.
      const double denom = std::max({std::fabs(fd), std::fabs(tg), 1e-3});
      const double rel = std::fabs(fd - tg) / denom;
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_coord = i;
        entry.tape_grad = tg;
        entry.fd_grad = fd;
      }
    }
    entry.ok = entry.max_rel_err <= tolerance;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.all_ok = report.all_ok && entry.ok;
    report.entries.push_back(std::move(entry));
  }

  // Restore the tape gradients so callers can keep using them.
  for (std::size_t pi = 0; pi < params.size(); ++pi)
    params[pi]->tensor->grad = tape_grads[pi];
  return report;
}

}  // namespace duality
