#include "bankcf/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <variant>

#include <httplib.h>

#include "bankcf/error.hpp"
#include "bankcf/evaluation.hpp"
#include "bankcf/pipeline.hpp"

namespace bankcf {

namespace {

HttpReply bad_request(Json fields, const std::string& message = "request validation failed") {
    return {400, {{"error", "invalid_request"}, {"message", message}, {"fields", std::move(fields)}}};
}

Json range_json(const std::optional<Interval>& r) {
    if (!r) return nullptr;
    return Json::array({r->lower, r->upper});
}

struct Parsed {
    const ModelArtifact* model = nullptr;
    std::vector<double> factual;
    Json body;
};

// Either a parsed request or the reply explaining why it was rejected.
std::variant<Parsed, HttpReply> parse_request(const std::map<std::string, ModelArtifact>& models,
                                              const std::string& text) {
    Parsed p;
    try {
        p.body = Json::parse(text);
    } catch (const Json::exception&) {
        return bad_request({{"body", "not valid JSON"}});
    }
    if (!p.body.is_object()) return bad_request({{"body", "expected a JSON object"}});

    Json fields = Json::object();
    const auto id_it = p.body.find("model_id");
    if (id_it == p.body.end()) fields["model_id"] = "missing";
    else if (!id_it->is_string()) fields["model_id"] = "must be a string";
    const auto ind_it = p.body.find("indicators");
    if (ind_it == p.body.end()) fields["indicators"] = "missing";
    else if (!ind_it->is_object()) fields["indicators"] = "must be an object of feature values";
    if (fields.contains("model_id")) return bad_request(fields);

    const auto id = id_it->get<std::string>();
    auto m = models.find(id);
    if (m == models.end()) return HttpReply{404, {{"error", "unknown_model"}, {"model_id", id}}};
    p.model = &m->second;
    if (!fields.empty()) return bad_request(fields);

    const auto& schema = p.model->reference.schema;
    const auto& ind = *ind_it;
    for (const auto& spec : schema) {
        auto it = ind.find(spec.name);
        if (it == ind.end()) {
            fields[spec.name] = "missing";
            continue;
        }
        if (!it->is_number()) {
            fields[spec.name] = "must be a number";
            continue;
        }
        const double v = it->get<double>();
        if (!std::isfinite(v)) {
            fields[spec.name] = "must be finite";
        } else if (spec.valid_range && !spec.valid_range->contains(v)) {
            fields[spec.name] = "outside the valid range [" + Json(spec.valid_range->lower).dump() + ", " +
                                Json(spec.valid_range->upper).dump() + "]";
        }
        p.factual.push_back(v);
    }
    for (auto it = ind.begin(); it != ind.end(); ++it) {
        const bool known = std::any_of(schema.begin(), schema.end(), [&](const auto& s) { return s.name == it.key(); });
        if (!known) fields[it.key()] = "not a feature of model " + id;
    }
    if (!fields.empty()) return bad_request(fields);
    return p;
}

Json prediction_json(const EnsembleModel& model, std::span<const double> x) {
    return {{"probability", model.predict_proba(x)}, {"label", model.predict_label(x)}};
}

}  // namespace

Service::Service(std::vector<ModelArtifact> models, ServiceOptions options) : options_(std::move(options)) {
    for (auto& m : models) {
        if (m.id.empty()) throw ConfigError("model without an id");
        if (models_.count(m.id)) throw ConfigError("duplicate model id '" + m.id + "'");
        const auto id = m.id;
        models_.emplace(id, std::move(m));
    }
}

HttpReply Service::health() const { return {200, {{"status", "ok"}, {"models", models_.size()}}}; }

HttpReply Service::models() const {
    Json list = Json::array();
    for (const auto& [id, a] : models_) {
        Json features = Json::array();
        for (const auto& s : a.reference.schema)
            features.push_back({{"name", s.name},
                                {"valid_range", range_json(s.valid_range)},
                                {"observed_range", range_json(s.observed_range)},
                                {"mutable", s.mutable_in_cf}});
        list.push_back({{"id", id},
                        {"kind", to_string(a.model.kind())},
                        {"strategy", to_string(a.strategy)},
                        {"group", to_string(a.group)},
                        {"decision_threshold", a.model.decision_threshold()},
                        {"features", features}});
    }
    return {200, {{"models", list}}};
}

HttpReply Service::predict(const std::string& body) const {
    auto parsed = parse_request(models_, body);
    if (auto* reply = std::get_if<HttpReply>(&parsed)) return *reply;
    const auto& p = std::get<Parsed>(parsed);
    Json out = prediction_json(p.model->model, p.factual);
    out["model_id"] = p.model->id;
    return {200, out};
}

HttpReply Service::counterfactuals(const std::string& body) const {
    auto parsed = parse_request(models_, body);
    if (auto* reply = std::get_if<HttpReply>(&parsed)) return *reply;
    const auto& p = std::get<Parsed>(parsed);
    const auto& artifact = *p.model;
    const auto& schema = artifact.reference.schema;

    Json fields = Json::object();
    CfMethod method = CfMethod::NICE;
    const auto m_it = p.body.find("method");
    if (m_it == p.body.end()) {
        fields["method"] = "missing";
    } else if (!m_it->is_string()) {
        fields["method"] = "must be a string";
    } else {
        try {
            method = parse_cf_method(m_it->get<std::string>());
        } catch (const Error&) {
            fields["method"] = "unknown method; expected WhatIf, NICE or MOC";
        }
    }
    CFQuery q;
    q.factual = p.factual;
    q.desired_class = 0;
    q.k_plausibility = options_.desiderata.k_plaus;
    q.max_counterfactuals = options_.max_counterfactuals;
    if (auto f_it = p.body.find("frozen_features"); f_it != p.body.end() && !f_it->is_null()) {
        if (!f_it->is_array()) {
            fields["frozen_features"] = "must be a list of feature names";
        } else {
            for (const auto& f : *f_it) {
                const bool known = f.is_string() && std::any_of(schema.begin(), schema.end(), [&](const auto& s) {
                                       return s.name == f.get<std::string>();
                                   });
                if (!known) {
                    fields["frozen_features"] = "unknown feature " + f.dump();
                    break;
                }
                q.frozen_features.insert(f.get<std::string>());
            }
        }
    }
    if (auto c_it = p.body.find("max_counterfactuals"); c_it != p.body.end() && !c_it->is_null()) {
        if (!c_it->is_number_unsigned() || c_it->get<std::size_t>() == 0)
            fields["max_counterfactuals"] = "must be a positive integer";
        else q.max_counterfactuals = std::min(q.max_counterfactuals, c_it->get<std::size_t>());
    }
    if (!fields.empty()) return bad_request(fields);

    MocConfig moc;
    moc.population_size = options_.moc_population;
    moc.generations = options_.moc_generations;
    // Seeded from the request itself so identical requests get identical answers.
    moc.seed = derive_seed(options_.seed, p.body["indicators"].dump() + "/" + artifact.id);
    moc.deadline = std::chrono::steady_clock::now() +
                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(options_.budget_s));

    const auto& model = artifact.model;
    const auto result = generate(method, q, model, artifact.reference, moc);
    Json out{{"model_id", artifact.id}, {"method", to_string(method)}, {"prediction", prediction_json(model, q.factual)}};
    if (!result.found()) {
        out["error"] = "no_counterfactual";
        out["reason"] = result.reason;
        return {422, out};
    }

    std::vector<std::pair<DesiderataRecord, const Counterfactual*>> scored;
    for (const auto& cf : result.counterfactuals)
        scored.emplace_back(desiderata(q.factual, cf, model, artifact.reference, options_.desiderata), &cf);
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first.sparsity != b.first.sparsity) return a.first.sparsity < b.first.sparsity;
        return a.first.proximity < b.first.proximity;
    });

    Json items = Json::array();
    for (const auto& [d, cf] : scored) {
        Json values = Json::object();
        Json deltas = Json::array();
        for (std::size_t f = 0; f < schema.size(); ++f) {
            values[schema[f].name] = cf->values[f];
            deltas.push_back({{"feature", schema[f].name},
                              {"old", q.factual[f]},
                              {"new", cf->values[f]},
                              {"direction", to_string(direction(q.factual[f], cf->values[f]))}});
        }
        items.push_back({{"method", to_string(cf->method)},
                         {"values", values},
                         {"deltas", deltas},
                         {"prediction", prediction_json(model, cf->values)},
                         {"desiderata",
                          {{"valid", d.valid_flip},
                           {"valid_flip", d.valid_flip},
                           {"validity_threshold", d.valid_threshold},
                           {"proximity", d.proximity},
                           {"sparsity", d.sparsity},
                           {"plausibility", d.plausibility}}}});
    }
    out["counterfactuals"] = items;
    return {200, out};
}

void Service::mount(httplib::Server& server) const {
    const auto origin = options_.cors_origin;
    server.set_default_headers({{"Access-Control-Allow-Origin", origin}, {"Vary", "Origin"}});
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Max-Age", "600");
        res.status = 204;
    });

    auto send = [](httplib::Response& res, const HttpReply& reply) {
        res.status = reply.status;
        res.set_content(reply.body.dump(), "application/json");
    };
    auto guarded = [send](auto&& fn) {
        return [send, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                send(res, fn(req));
            } catch (const std::exception& e) {
                send(res, {500, {{"error", "internal"}, {"message", e.what()}}});
            }
        };
    };
    server.Get("/health", guarded([this](const httplib::Request&) { return health(); }));
    server.Get("/models", guarded([this](const httplib::Request&) { return models(); }));
    server.Post("/predict", guarded([this](const httplib::Request& req) { return predict(req.body); }));
    server.Post("/counterfactuals", guarded([this](const httplib::Request& req) { return counterfactuals(req.body); }));
}

ServiceOptions service_options(const RunConfig& config) {
    ServiceOptions o;
    o.cors_origin = config.cors_origin;
    o.budget_s = config.request_budget_s;
    o.max_counterfactuals = config.request_cap;
    o.moc_population = config.moc_population;
    o.moc_generations = config.moc_generations;
    o.desiderata = config.desiderata;
    o.seed = config.seed.value_or(0);
    return o;
}

void serve_http(const RunConfig& config) {
    if (config.serve_models.empty()) throw ConfigError("serve.models: no model files given");
    std::vector<ModelArtifact> models;
    for (const auto& path : config.serve_models) models.push_back(load_artifact(path));
    const Service service(std::move(models), service_options(config));
    httplib::Server server;
    service.mount(server);
    std::cerr << "listening on " << config.host << ":" << config.port << "\n";
    if (!server.listen(config.host, config.port))
        throw IoError("cannot listen on " + config.host + ":" + std::to_string(config.port));
}

}  // namespace bankcf
