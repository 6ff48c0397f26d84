#ifndef TECHINFER_SERVE_HPP
#define TECHINFER_SERVE_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "techinfer/dataset.hpp"
#include "techinfer/model.hpp"

namespace techinfer {

/// Optional display names keyed by technique id, read from a local CSV
/// `technique_id,name`.
class TechniqueCatalog {
public:
    TechniqueCatalog() = default;

    static TechniqueCatalog load_csv(std::istream& in);

    void add(const TechniqueId& id, std::string name);
    [[nodiscard]] std::optional<std::string> name(const TechniqueId& id) const;
    [[nodiscard]] std::size_t size() const noexcept { return names_.size(); }

private:
    std::unordered_map<std::string, std::string> names_;
};

struct PredictRequest {
    std::vector<std::string> observed;
    std::size_t k = 20;
    /// Falls back to the model's configured similarity.
    std::optional<Similarity> similarity;
};

struct Prediction {
    TechniqueId technique;
    std::optional<std::string> name;
    double score = 0.0;
    std::size_t rank = 0;
};

struct PredictResponse {
    std::vector<Prediction> predictions;
    std::vector<std::string> unknown_ids;
};

/// Folds the known observed techniques into an entity embedding and returns
/// the top k remaining techniques. Unknown ids are reported, not fatal.
/// Throws Error(EmptyObservation) when nothing known remains,
/// Error(InvalidTechniqueId) for malformed ids, Error(InvalidArgument) for k < 1.
PredictResponse predict(const FactorModel& model, const PredictRequest& request,
                        const TechniqueCatalog* catalog = nullptr);

/// Navigator layer JSON with scores min-max scaled to [0, 100].
std::string export_navigator_layer(const PredictResponse& response, std::string_view name);

/// CSV `rank,technique_id,score`.
std::string export_csv(const PredictResponse& response);

PredictRequest parse_predict_request(const nlohmann::json& body);
nlohmann::ordered_json to_json(const PredictResponse& response);

struct HttpReply {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Stateless request router over an immutable model and catalog. Safe to call
/// from any number of threads.
class PredictionService {
public:
    PredictionService(FactorModel model, TechniqueCatalog catalog);

    [[nodiscard]] HttpReply handle(std::string_view method, std::string_view path, std::string_view body) const;

    [[nodiscard]] const FactorModel& model() const noexcept { return model_; }

private:
    HttpReply techniques() const;
    HttpReply model_info() const;
    HttpReply predict_route(std::string_view body) const;
    HttpReply export_route(std::string_view body, bool navigator) const;

    FactorModel model_;
    TechniqueCatalog catalog_;
};

struct BindAddress {
    std::string host = "127.0.0.1";
    int port = 8080;
};

BindAddress parse_bind_address(std::string_view text);

class HttpServer {
public:
    explicit HttpServer(const PredictionService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port.
    int bind(const BindAddress& address);
    /// Blocks until stop() is called.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Loads model and optional catalog, then serves until interrupted.
void serve_http(const std::string& model_path, const std::string& catalog_path, const BindAddress& address);

}  // namespace techinfer

#endif
