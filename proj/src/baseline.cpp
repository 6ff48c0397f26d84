#include "techinfer/baseline.hpp"

#include "techinfer/error.hpp"

namespace techinfer {

FactorModel train_top_techniques(const SparseBinaryMatrix& interactions) {
    if (interactions.rows() == 0 || interactions.cols() == 0) {
        throw Error(ErrorCode::InvalidArgument, "interaction matrix is empty");
    }
    FactorModel model;
    model.trained_by = TrainedBy::Popularity;
    model.U = Matrix::Ones(static_cast<Eigen::Index>(interactions.rows()), 1);
    model.V.resize(static_cast<Eigen::Index>(interactions.cols()), 1);
    const auto counts = interactions.column_counts();
    for (std::size_t j = 0; j < counts.size(); ++j) {
        model.V(static_cast<Eigen::Index>(j), 0) = static_cast<double>(counts[j]);
    }
    return model;
}

}  // namespace techinfer
