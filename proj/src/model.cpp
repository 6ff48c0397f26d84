#include "techinfer/model.hpp"

#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>

#include <nlohmann/json.hpp>

#include "techinfer/error.hpp"

namespace techinfer {

namespace {

constexpr int kFormatVersion = 1;

using ordered_json = nlohmann::ordered_json;

ordered_json matrix_to_json(const Matrix& m) {
    auto rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const ordered_json& rows, std::size_t cols, std::string_view name) {
    if (!rows.is_array()) {
        throw Error(ErrorCode::ModelFormat, std::string(name) + " must be an array of rows");
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (!row.is_array() || row.size() != cols) {
            throw Error(ErrorCode::ModelFormat, std::string(name) + " row " + std::to_string(i) +
                                                    " must have " + std::to_string(cols) + " entries");
        }
        for (std::size_t j = 0; j < cols; ++j) {
            if (!row[j].is_number()) {
                throw Error(ErrorCode::ModelFormat, std::string(name) + " entries must be numbers");
            }
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
        }
    }
    return m;
}

}  // namespace

std::string_view to_string(TrainedBy value) noexcept {
    switch (value) {
        case TrainedBy::Wmf: return "wmf";
        case TrainedBy::Bpr: return "bpr";
        case TrainedBy::Popularity: return "popularity";
    }
    return "wmf";
}

std::string_view to_string(Similarity value) noexcept {
    return value == Similarity::Dot ? "dot" : "cosine";
}

TrainedBy parse_trained_by(std::string_view text) {
    if (text == "wmf") return TrainedBy::Wmf;
    if (text == "bpr") return TrainedBy::Bpr;
    if (text == "popularity") return TrainedBy::Popularity;
    throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(text) + "'");
}

Similarity parse_similarity(std::string_view text) {
    if (text == "dot") return Similarity::Dot;
    if (text == "cosine") return Similarity::Cosine;
    throw Error(ErrorCode::InvalidArgument, "unknown similarity '" + std::string(text) + "'");
}

void FactorModel::validate() const {
    if (U.cols() != V.cols()) {
        throw Error(ErrorCode::ModelFormat, "U and V must share the embedding dimension");
    }
    if (static_cast<std::size_t>(U.rows()) != entities.size() ||
        static_cast<std::size_t>(V.rows()) != items.size()) {
        throw Error(ErrorCode::ModelFormat, "factor row counts must match catalog lengths");
    }
    if (!U.allFinite() || !V.allFinite()) {
        throw Error(ErrorCode::ModelFormat, "factor entries must be finite");
    }
}

void attach_catalogs(FactorModel& model, const InteractionDataset& dataset) {
    if (static_cast<std::size_t>(model.U.rows()) != dataset.entity_count() ||
        static_cast<std::size_t>(model.V.rows()) != dataset.item_count()) {
        throw Error(ErrorCode::DimensionMismatch, "model shape does not match dataset catalogs");
    }
    model.entities = dataset.entities();
    model.items = dataset.items();
}

Matrix random_factors(std::size_t rows, std::size_t dim, double init_scale, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, init_scale / std::sqrt(static_cast<double>(dim)));
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = normal(rng);
        }
    }
    return m;
}

std::string save_model(const FactorModel& model) {
    model.validate();
    ordered_json doc;
    doc["format_version"] = kFormatVersion;
    doc["trained_by"] = to_string(model.trained_by);
    doc["d"] = model.dim();
    doc["similarity"] = to_string(model.similarity);
    auto entities = ordered_json::array();
    for (const auto& e : model.entities) {
        entities.push_back(e.str());
    }
    auto items = ordered_json::array();
    for (const auto& t : model.items) {
        items.push_back(t.str());
    }
    doc["entities"] = std::move(entities);
    doc["items"] = std::move(items);
    doc["U"] = matrix_to_json(model.U);
    doc["V"] = matrix_to_json(model.V);
    doc["fold_in"] = {{"negative_weight", model.fold_in.negative_weight},
                      {"regularization", model.fold_in.regularization}};
    // Doubles are written in shortest round-trip form.
    return doc.dump();
}

void save_model(const FactorModel& model, std::ostream& out) { out << save_model(model) << '\n'; }

FactorModel load_model(std::string_view json) {
    auto doc = ordered_json::parse(json, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error(ErrorCode::ModelFormat, "model file is not a JSON object");
    }
    try {
        if (doc.at("format_version").get<int>() != kFormatVersion) {
            throw Error(ErrorCode::ModelFormat, "unsupported model format_version");
        }
        FactorModel model;
        model.trained_by = parse_trained_by(doc.at("trained_by").get<std::string>());
        model.similarity = parse_similarity(doc.value("similarity", std::string("dot")));
        const auto d = doc.at("d").get<std::size_t>();
        for (const auto& e : doc.at("entities")) {
            model.entities.emplace_back(e.get<std::string>());
        }
        for (const auto& t : doc.at("items")) {
            model.items.emplace_back(t.get<std::string>());
        }
        model.U = matrix_from_json(doc.at("U"), d, "U");
        model.V = matrix_from_json(doc.at("V"), d, "V");
        if (auto it = doc.find("fold_in"); it != doc.end()) {
            model.fold_in.negative_weight = it->at("negative_weight").get<double>();
            model.fold_in.regularization = it->at("regularization").get<double>();
        }
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::ModelFormat, std::string("invalid model file: ") + ex.what());
    } catch (const Error& ex) {
        if (ex.code() == ErrorCode::ModelFormat) {
            throw;
        }
        throw Error(ErrorCode::ModelFormat, std::string("invalid model file: ") + ex.what());
    }
}

FactorModel load_model(std::istream& in) {
    std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return load_model(content);
}

}  // namespace techinfer
