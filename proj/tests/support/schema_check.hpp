// Minimal JSON-schema checker covering the keywords used in schemas/.
#ifndef TECHINFER_TEST_SCHEMA_CHECK_HPP
#define TECHINFER_TEST_SCHEMA_CHECK_HPP

#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace techinfer::testing {

inline bool type_matches(const nlohmann::json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "number") return value.is_number();
    if (type == "integer") return value.is_number_integer();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    return false;
}

/// Appends one message per violation; empty means valid.
inline void check_schema(const nlohmann::json& schema, const nlohmann::json& value, const std::string& where,
                         std::vector<std::string>& errors) {
    if (auto t = schema.find("type"); t != schema.end() && !type_matches(value, t->get<std::string>())) {
        errors.push_back(where + ": expected " + t->get<std::string>());
        return;
    }
    if (auto c = schema.find("const"); c != schema.end() && *c != value) {
        errors.push_back(where + ": expected constant " + c->dump());
    }
    if (auto e = schema.find("enum"); e != schema.end()) {
        bool found = false;
        for (const auto& option : *e) found = found || option == value;
        if (!found) errors.push_back(where + ": not in enum");
    }
    if (value.is_number()) {
        const double x = value.get<double>();
        if (auto lo = schema.find("minimum"); lo != schema.end() && x < lo->get<double>())
            errors.push_back(where + ": below minimum");
        if (auto hi = schema.find("maximum"); hi != schema.end() && x > hi->get<double>())
            errors.push_back(where + ": above maximum");
    }
    if (value.is_string()) {
        if (auto p = schema.find("pattern"); p != schema.end() &&
                                             !std::regex_search(value.get<std::string>(), std::regex(p->get<std::string>())))
            errors.push_back(where + ": pattern mismatch");
    }
    if (value.is_object()) {
        if (auto req = schema.find("required"); req != schema.end()) {
            for (const auto& key : *req)
                if (!value.contains(key.get<std::string>())) errors.push_back(where + ": missing " + key.get<std::string>());
        }
        const auto props = schema.find("properties");
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (props != schema.end() && props->contains(it.key())) {
                check_schema((*props)[it.key()], it.value(), where + "." + it.key(), errors);
            } else if (auto extra = schema.find("additionalProperties");
                       extra != schema.end() && extra->is_boolean() && !extra->get<bool>()) {
                errors.push_back(where + ": unexpected property " + it.key());
            }
        }
    }
    if (value.is_array()) {
        if (auto mi = schema.find("minItems"); mi != schema.end() && value.size() < mi->get<std::size_t>())
            errors.push_back(where + ": too few items");
        if (auto items = schema.find("items"); items != schema.end()) {
            for (std::size_t i = 0; i < value.size(); ++i)
                check_schema(*items, value[i], where + "[" + std::to_string(i) + "]", errors);
        }
    }
}

inline nlohmann::json load_schema(const std::string& name) {
    std::ifstream in(std::string(TECHINFER_SCHEMA_DIR) + "/" + name);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return nlohmann::json::parse(buffer.str());
}

inline std::vector<std::string> validate_navigator_layer(const std::string& text) {
    std::vector<std::string> errors;
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        errors.push_back("not JSON");
        return errors;
    }
    check_schema(load_schema("navigator_layer.schema.json"), doc, "$", errors);
    return errors;
}

}  // namespace techinfer::testing

#endif
