#include "bankcf/artifact.hpp"

#include <fstream>
#include <sstream>

#include "bankcf/error.hpp"

namespace bankcf {

namespace {

Json interval_json(const std::optional<Interval>& r) {
    if (!r) return nullptr;
    return Json::array({r->lower, r->upper});
}

std::optional<Interval> interval_from(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return Interval{j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

Json artifact_to_json(const ModelArtifact& a) {
    const auto& m = a.model;
    Json trees = Json::array();
    for (const auto& t : m.trees()) {
        Json nodes = Json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.positive_mass, n.total_weight});
        trees.push_back(std::move(nodes));
    }
    const auto& tc = m.train_config();
    Json train{{"n_trees", tc.n_trees},
               {"max_depth", tc.max_depth ? Json(*tc.max_depth) : Json(nullptr)},
               {"min_samples_split", tc.min_samples_split},
               {"mtry", tc.mtry ? Json(*tc.mtry) : Json(nullptr)},
               {"bootstrap", tc.bootstrap ? Json(*tc.bootstrap) : Json(nullptr)},
               {"seed", tc.seed}};

    Json schema = Json::array();
    for (const auto& s : a.reference.schema)
        schema.push_back({{"name", s.name},
                          {"kind", s.kind == FeatureKind::Numeric ? "numeric" : "categorical"},
                          {"valid_range", interval_json(s.valid_range)},
                          {"observed_range", interval_json(s.observed_range)},
                          {"mutable", s.mutable_in_cf}});
    Json rows = Json::array();
    for (const auto& r : a.reference.rows)
        rows.push_back({r.bank_id, format_iso_date(r.report_date), r.failed_label, r.indicators});

    return {{"format", "bankcf-model"},
            {"version", kArtifactVersion},
            {"id", a.id},
            {"kind", to_string(m.kind())},
            {"group", to_string(a.group)},
            {"strategy", to_string(a.strategy)},
            {"config_hash", a.config_hash},
            {"decision_threshold", m.decision_threshold()},
            {"features", m.feature_names()},
            {"train_config", train},
            {"trees", trees},
            {"schema", schema},
            {"reference", rows}};
}

ModelArtifact artifact_from_json(const Json& j) {
    try {
        if (j.value("format", "") != "bankcf-model") throw SchemaError("not a model file");
        if (j.at("version").get<int>() != kArtifactVersion)
            throw SchemaError("unsupported model file version " + j.at("version").dump());

        ModelArtifact a;
        a.id = j.at("id").get<std::string>();
        a.group = parse_group(j.at("group").get<std::string>());
        a.strategy = parse_balancing(j.at("strategy").get<std::string>());
        a.config_hash = j.value("config_hash", "");
        const auto features = j.at("features").get<std::vector<std::string>>();

        for (const auto& s : j.at("schema")) {
            FeatureSpec f;
            f.name = s.at("name").get<std::string>();
            f.kind = s.at("kind").get<std::string>() == "categorical" ? FeatureKind::Categorical : FeatureKind::Numeric;
            f.valid_range = interval_from(s.at("valid_range"));
            f.observed_range = interval_from(s.at("observed_range"));
            f.mutable_in_cf = s.value("mutable", true);
            a.reference.schema.push_back(std::move(f));
        }
        if (a.reference.feature_names() != features)
            throw SchemaError("model features do not match the stored schema");
        for (const auto& r : j.at("reference")) {
            BankQuarterRecord rec;
            rec.bank_id = r.at(0).get<std::string>();
            rec.report_date = parse_iso_date(r.at(1).get<std::string>());
            rec.failed_label = r.at(2).get<int>();
            rec.indicators = r.at(3).get<std::vector<double>>();
            if (rec.indicators.size() != features.size()) throw SchemaError("reference row has the wrong arity");
            a.reference.rows.push_back(std::move(rec));
        }

        const auto& t = j.at("train_config");
        TrainConfig tc;
        tc.n_trees = t.at("n_trees").get<std::size_t>();
        if (!t.at("max_depth").is_null()) tc.max_depth = t.at("max_depth").get<std::size_t>();
        tc.min_samples_split = t.at("min_samples_split").get<std::size_t>();
        if (!t.at("mtry").is_null()) tc.mtry = t.at("mtry").get<std::size_t>();
        if (!t.at("bootstrap").is_null()) tc.bootstrap = t.at("bootstrap").get<bool>();
        tc.seed = t.at("seed").get<std::uint64_t>();

        std::vector<Tree> trees;
        const auto d = static_cast<int>(features.size());
        for (const auto& jt : j.at("trees")) {
            Tree tree;
            for (const auto& n : jt) {
                TreeNode node;
                node.feature = n.at(0).get<int>();
                node.threshold = n.at(1).get<double>();
                node.left = n.at(2).get<int>();
                node.right = n.at(3).get<int>();
                node.positive_mass = n.at(4).get<double>();
                node.total_weight = n.at(5).get<double>();
                tree.nodes.push_back(node);
            }
            const auto size = static_cast<int>(tree.nodes.size());
            if (size == 0) throw SchemaError("empty tree");
            for (int i = 0; i < size; ++i) {
                const auto& n = tree.nodes[static_cast<std::size_t>(i)];
                if (n.is_leaf()) continue;
                // Preorder layout: children always come after their parent.
                if (n.feature >= d || n.left <= i || n.right <= i || n.left >= size || n.right >= size)
                    throw SchemaError("corrupt tree node");
            }
            trees.push_back(std::move(tree));
        }
        a.model = EnsembleModel(parse_model_kind(j.at("kind").get<std::string>()), std::move(trees), features, tc,
                                j.at("decision_threshold").get<double>());
        return a;
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("malformed model file: ") + e.what());
    }
}

void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path) {
    write_text_file(path, artifact_to_json(artifact).dump() + "\n");
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read model file '" + path.string() + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw SchemaError("model file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return artifact_from_json(j);
}

}  // namespace bankcf
