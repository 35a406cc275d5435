#pragma once

#include <map>
#include <string>
#include <vector>

#include "bankcf/artifact.hpp"
#include "bankcf/config.hpp"

namespace httplib {
class Server;
}

namespace bankcf {

struct ServiceOptions {
    std::string cors_origin = "*";
    double budget_s = 10.0;         // per counterfactual request
    std::size_t max_counterfactuals = 5;
    std::size_t moc_population = 50;
    std::size_t moc_generations = 100;
    DesiderataConfig desiderata;
    std::uint64_t seed = 0;
};

struct HttpReply {
    int status = 200;
    Json body;
};

// Request handling over a fixed set of models. Handlers are const and share
// no mutable state, so concurrent requests cannot observe each other.
class Service {
public:
    Service(std::vector<ModelArtifact> models, ServiceOptions options);

    HttpReply health() const;
    HttpReply models() const;
    HttpReply predict(const std::string& body) const;
    HttpReply counterfactuals(const std::string& body) const;

    // Registers every endpoint, CORS headers and the preflight handler.
    void mount(httplib::Server& server) const;

    const ServiceOptions& options() const noexcept { return options_; }

private:
    std::map<std::string, ModelArtifact> models_;
    ServiceOptions options_;
};

ServiceOptions service_options(const RunConfig& config);

// Loads config.serve_models and blocks serving on host:port.
void serve_http(const RunConfig& config);

}  // namespace bankcf
