#ifndef TECHINFER_BASELINE_HPP
#define TECHINFER_BASELINE_HPP

#include "techinfer/dataset.hpp"
#include "techinfer/model.hpp"

namespace techinfer {

/// Popularity scorer as a d=1 factor model: U rows are 1, V_j = [count_j].
/// Counts come from whatever matrix is passed in; callers pass the training
/// partition only.
FactorModel train_top_techniques(const SparseBinaryMatrix& interactions);

}  // namespace techinfer

#endif
