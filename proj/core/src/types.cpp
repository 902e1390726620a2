#include "frdw/types.hpp"

#include <cmath>

namespace frdw {

bool all_finite(const Matrix& m) {
  const double* p = m.data();
  for (Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

void validate_trial(const Trial& trial, const std::string& context) {
  const std::string where = context.empty() ? std::string("trial") : context;
  if (trial.channels() < 1) throw DataError(where + ": no channels");
  if (trial.samples() < 1) throw DataError(where + ": no samples");
  if (!(trial.fs > 0.0) || !std::isfinite(trial.fs)) throw DataError(where + ": sampling rate must be positive");
  if (!all_finite(trial.data)) throw DataError(where + ": non-finite sample value");
}

} // namespace frdw
