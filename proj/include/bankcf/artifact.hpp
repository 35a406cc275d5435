#pragma once

#include <filesystem>
#include <string>

#include "bankcf/balancing.hpp"
#include "bankcf/dataset.hpp"
#include "bankcf/json_io.hpp"
#include "bankcf/trees.hpp"

namespace bankcf {

inline constexpr int kArtifactVersion = 1;

// A trained model plus everything needed to explain its predictions: the
// schema with observed ranges and the unbalanced training rows that serve as
// the counterfactual reference set.
struct ModelArtifact {
    std::string id;
    EnsembleModel model;
    GroupId group = GroupId::II;
    BalancingTag strategy = BalancingTag::Original;
    DataTable reference;
    std::string config_hash;
};

// Doubles are written with round-trip precision so a reloaded model predicts
// bit-identically.
Json artifact_to_json(const ModelArtifact& artifact);
ModelArtifact artifact_from_json(const Json& j);

void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_artifact(const std::filesystem::path& path);

}  // namespace bankcf
