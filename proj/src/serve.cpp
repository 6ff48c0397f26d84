#include "techinfer/serve.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <istream>
#include <sstream>

#include <httplib.h>

#include "techinfer/error.hpp"
#include "techinfer/eval.hpp"
#include "techinfer/text.hpp"
#include "techinfer/wmf.hpp"

namespace techinfer {

namespace {

using ordered_json = nlohmann::ordered_json;

HttpReply json_reply(int status, const ordered_json& body) {
    return {status, "application/json", body.dump()};
}

HttpReply error_reply(int status, std::string_view code, std::string_view message) {
    ordered_json body;
    body["error"] = {{"code", code}, {"message", message}};
    return json_reply(status, body);
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyObservation:
        case ErrorCode::EmptyPredictions:
            return 422;
        case ErrorCode::InvalidTechniqueId:
        case ErrorCode::InvalidArgument:
        case ErrorCode::MalformedRecord:
            return 400;
        default:
            return 500;
    }
}

HttpReply reply_for(const Error& error) {
    const auto code = error.code();
    const std::string_view name =
        code == ErrorCode::InvalidArgument ? std::string_view("invalid-request") : error_code_name(code);
    return error_reply(status_for(code), name, error.what());
}

}  // namespace

TechniqueCatalog TechniqueCatalog::load_csv(std::istream& in) {
    TechniqueCatalog catalog;
    std::string raw;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = text::normalize_line(raw, line_no == 1);
        if (text::trim(line).empty()) {
            continue;
        }
        auto fields = text::split_csv_record(line);
        if (!fields || fields->size() < 2) {
            throw RecordError(ErrorCode::MalformedRecord, line_no, "expected 'technique_id,name'");
        }
        if (!header_seen) {
            header_seen = true;
            if (text::trim((*fields)[0]) == "technique_id") {
                continue;
            }
        }
        const auto id = text::trim((*fields)[0]);
        if (!TechniqueId::is_valid(id)) {
            throw RecordError(ErrorCode::InvalidTechniqueId, line_no,
                              "invalid technique id '" + std::string(id) + "'");
        }
        catalog.add(TechniqueId(std::string(id)), std::string(text::trim((*fields)[1])));
    }
    return catalog;
}

void TechniqueCatalog::add(const TechniqueId& id, std::string name) { names_[id.str()] = std::move(name); }

std::optional<std::string> TechniqueCatalog::name(const TechniqueId& id) const {
    if (auto it = names_.find(id.str()); it != names_.end()) {
        return it->second;
    }
    return std::nullopt;
}

PredictResponse predict(const FactorModel& model, const PredictRequest& request, const TechniqueCatalog* catalog) {
    if (request.k < 1) {
        throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    }
    if (request.observed.empty()) {
        throw Error(ErrorCode::EmptyObservation, "no observed techniques given");
    }
    std::unordered_map<std::string_view, std::size_t> index;
    index.reserve(model.items.size());
    for (std::size_t j = 0; j < model.items.size(); ++j) {
        index.emplace(model.items[j].str(), j);
    }

    PredictResponse response;
    std::vector<std::size_t> known;
    for (const auto& raw : request.observed) {
        const auto id = text::trim(raw);
        if (!TechniqueId::is_valid(id)) {
            throw Error(ErrorCode::InvalidTechniqueId, "invalid technique id '" + std::string(id) + "'");
        }
        if (auto it = index.find(id); it != index.end()) {
            if (std::find(known.begin(), known.end(), it->second) == known.end()) {
                known.push_back(it->second);
            }
        } else if (std::find(response.unknown_ids.begin(), response.unknown_ids.end(), id) ==
                   response.unknown_ids.end()) {
            response.unknown_ids.emplace_back(id);
        }
    }
    if (known.empty()) {
        throw Error(ErrorCode::EmptyObservation, "none of the observed techniques are in the model catalog");
    }

    Vector embedding;
    if (model.trained_by == TrainedBy::Popularity) {
        embedding = Vector::Ones(static_cast<Eigen::Index>(model.dim()));
    } else {
        embedding = fold_in_entity(model.V, known, model.fold_in.negative_weight, model.fold_in.regularization);
    }
    const auto similarity = request.similarity.value_or(model.similarity);
    const auto ranked = rank_items(model.V, embedding, known, similarity, request.k);
    response.predictions.reserve(ranked.size());
    for (const auto& r : ranked) {
        const auto& technique = model.items[r.item];
        response.predictions.push_back(
            {technique, catalog != nullptr ? catalog->name(technique) : std::nullopt, r.score, r.rank});
    }
    return response;
}

std::string export_navigator_layer(const PredictResponse& response, std::string_view name) {
    if (response.predictions.empty()) {
        throw Error(ErrorCode::EmptyPredictions, "nothing to export");
    }
    const auto [lo, hi] = std::minmax_element(response.predictions.begin(), response.predictions.end(),
                                              [](const auto& a, const auto& b) { return a.score < b.score; });
    const double low = lo->score;
    const double span = hi->score - low;
    ordered_json layer;
    layer["name"] = name;
    layer["versions"] = {{"layer", "4.5"}};
    layer["domain"] = "enterprise-attack";
    auto techniques = ordered_json::array();
    for (const auto& p : response.predictions) {
        // Dividing first keeps the top score at exactly 100.
        const double scaled = span > 0.0 ? 100.0 * ((p.score - low) / span) : 100.0;
        techniques.push_back({{"techniqueID", p.technique.str()}, {"score", scaled}});
    }
    layer["techniques"] = std::move(techniques);
    return layer.dump(2) + "\n";
}

std::string export_csv(const PredictResponse& response) {
    std::ostringstream out;
    out << "rank,technique_id,score\n";
    for (const auto& p : response.predictions) {
        out << p.rank << ',' << p.technique.str() << ',' << text::format_double(p.score) << '\n';
    }
    return out.str();
}

PredictRequest parse_predict_request(const nlohmann::json& body) {
    if (!body.is_object()) {
        throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
    }
    PredictRequest request;
    auto observed = body.find("observed");
    if (observed == body.end() || !observed->is_array()) {
        throw Error(ErrorCode::InvalidArgument, "'observed' must be an array of technique ids");
    }
    for (const auto& id : *observed) {
        if (!id.is_string()) {
            throw Error(ErrorCode::InvalidArgument, "'observed' entries must be strings");
        }
        request.observed.push_back(id.get<std::string>());
    }
    if (auto k = body.find("k"); k != body.end()) {
        if (!k->is_number_integer() || k->get<long long>() < 1) {
            throw Error(ErrorCode::InvalidArgument, "'k' must be a positive integer");
        }
        request.k = k->get<std::size_t>();
    }
    if (auto sim = body.find("similarity"); sim != body.end()) {
        if (!sim->is_string()) {
            throw Error(ErrorCode::InvalidArgument, "'similarity' must be \"dot\" or \"cosine\"");
        }
        request.similarity = parse_similarity(sim->get<std::string>());
    }
    return request;
}

nlohmann::ordered_json to_json(const PredictResponse& response) {
    ordered_json out;
    auto predictions = ordered_json::array();
    for (const auto& p : response.predictions) {
        ordered_json item;
        item["technique_id"] = p.technique.str();
        item["technique_name"] = p.name ? ordered_json(*p.name) : ordered_json(nullptr);
        item["score"] = p.score;
        item["rank"] = p.rank;
        predictions.push_back(std::move(item));
    }
    out["predictions"] = std::move(predictions);
    out["unknown_ids"] = response.unknown_ids;
    return out;
}

PredictionService::PredictionService(FactorModel model, TechniqueCatalog catalog)
    : model_(std::move(model)), catalog_(std::move(catalog)) {
    model_.validate();
}

HttpReply PredictionService::handle(std::string_view method, std::string_view path, std::string_view body) const {
    struct Route {
        std::string_view method;
        std::string_view path;
    };
    static constexpr Route routes[] = {{"GET", "/api/health"},        {"GET", "/api/techniques"},
                                       {"GET", "/api/model"},         {"POST", "/api/predict"},
                                       {"POST", "/api/export/csv"},   {"POST", "/api/export/navigator"}};
    const auto route = std::find_if(std::begin(routes), std::end(routes),
                                    [&](const Route& r) { return r.path == path; });
    if (route == std::end(routes)) {
        return error_reply(404, "not-found", "no route for " + std::string(path));
    }
    if (route->method != method) {
        return error_reply(405, "method-not-allowed", std::string(route->method) + " required");
    }
    if (path == "/api/health") {
        return json_reply(200, ordered_json{{"status", "ok"}});
    }
    if (path == "/api/techniques") {
        return techniques();
    }
    if (path == "/api/model") {
        return model_info();
    }
    if (path == "/api/predict") {
        return predict_route(body);
    }
    return export_route(body, path == "/api/export/navigator");
}

HttpReply PredictionService::techniques() const {
    auto list = ordered_json::array();
    for (const auto& id : model_.items) {
        const auto name = catalog_.name(id);
        list.push_back({{"id", id.str()}, {"name", name ? ordered_json(*name) : ordered_json(nullptr)}});
    }
    return json_reply(200, list);
}

HttpReply PredictionService::model_info() const {
    ordered_json info;
    info["trained_by"] = to_string(model_.trained_by);
    info["d"] = model_.dim();
    info["m"] = model_.entities.size();
    info["n"] = model_.items.size();
    info["similarity"] = to_string(model_.similarity);
    return json_reply(200, info);
}

HttpReply PredictionService::predict_route(std::string_view body) const {
    const auto parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_discarded()) {
        return error_reply(400, "invalid-json", "request body is not valid JSON");
    }
    try {
        return json_reply(200, to_json(predict(model_, parse_predict_request(parsed), &catalog_)));
    } catch (const Error& ex) {
        return reply_for(ex);
    }
}

HttpReply PredictionService::export_route(std::string_view body, bool navigator) const {
    const auto parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_discarded()) {
        return error_reply(400, "invalid-json", "request body is not valid JSON");
    }
    try {
        const auto response = predict(model_, parse_predict_request(parsed), &catalog_);
        if (navigator) {
            std::string name = "Inferred techniques";
            if (auto it = parsed.find("name"); it != parsed.end() && it->is_string()) {
                name = it->get<std::string>();
            }
            return {200, "application/json", export_navigator_layer(response, name)};
        }
        return {200, "text/csv", export_csv(response)};
    } catch (const Error& ex) {
        return reply_for(ex);
    }
}

BindAddress parse_bind_address(std::string_view text) {
    BindAddress address;
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) {
        address.host = std::string(text);
        return address;
    }
    address.host = std::string(text.substr(0, colon));
    const auto port_text = text.substr(colon + 1);
    try {
        std::size_t consumed = 0;
        address.port = std::stoi(std::string(port_text), &consumed);
        if (consumed != port_text.size() || address.port < 0 || address.port > 65535) {
            throw std::invalid_argument("port");
        }
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "invalid bind address '" + std::string(text) + "'");
    }
    if (address.host.empty()) {
        address.host = "127.0.0.1";
    }
    return address;
}

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(const PredictionService& service) : impl_(std::make_unique<Impl>()) {
    auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
        const auto reply = service.handle(req.method, req.path, req.body);
        res.status = reply.status;
        res.set_content(reply.body, reply.content_type);
    };
    impl_->server.Get(".*", dispatch);
    impl_->server.Post(".*", dispatch);
    impl_->server.Put(".*", dispatch);
    impl_->server.Delete(".*", dispatch);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const BindAddress& address) {
    int port = address.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(address.host);
    } else if (!impl_->server.bind_to_port(address.host, port)) {
        port = -1;
    }
    if (port < 0) {
        throw Error(ErrorCode::Io, "cannot bind " + address.host + ":" + std::to_string(address.port));
    }
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void serve_http(const std::string& model_path, const std::string& catalog_path, const BindAddress& address) {
    std::ifstream model_file(model_path);
    if (!model_file) {
        throw Error(ErrorCode::Io, "cannot open model file '" + model_path + "'");
    }
    auto model = load_model(model_file);
    TechniqueCatalog catalog;
    if (!catalog_path.empty()) {
        std::ifstream catalog_file(catalog_path);
        if (!catalog_file) {
            throw Error(ErrorCode::Io, "cannot open catalog file '" + catalog_path + "'");
        }
        catalog = TechniqueCatalog::load_csv(catalog_file);
    }
    const PredictionService service(std::move(model), std::move(catalog));
    HttpServer server(service);
    const int port = server.bind(address);
    std::cerr << "serving on http://" << address.host << ':' << port << '\n';
    server.listen();
}

}  // namespace techinfer
