#pragma once

#include "cotflow/common.hpp"
#include "cotflow/flow.hpp"
#include "cotflow/metrics.hpp"
#include "cotflow/ode.hpp"
#include "cotflow/tasks.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cotflow::io {

using nlohmann::json;

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kConfigVersion = 1;

/// Full description of one run: task, training setup, solvers to evaluate
/// with, and evaluation protocol.
struct RunConfig {
    tasks::TaskSpec task;
    flow::TrainConfig train;
    std::vector<ode::SolverConfig> solvers;
    int n_eval = 2000;
    std::vector<std::uint64_t> eval_seeds = {1};
    std::vector<std::string> eval_metrics = {"w2"};
    std::string output_dir = "runs/out";
    // sweep axes (used by the sweep subcommand)
    std::vector<coupling::Strategy> sweep_couplings;
    std::vector<std::uint64_t> sweep_seeds;
};

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline json parse_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw IoError(origin + ": parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw IoError("config: unknown key '" + it.key() + "' in " + where);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Vector vector_from_json(const json& a) {
    Vector v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] =
        a[i].get<double>();
    return v;
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& rows) {
    if (rows.empty()) return Matrix(0, 0);
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[i][j].get<double>();
    return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Run configuration

inline coupling::Strategy strategy_from_name(const std::string& s) {
    if (s == "independent") return coupling::Strategy::Independent;
    if (s == "ot") return coupling::Strategy::Ot;
    if (s == "cot") return coupling::Strategy::Cot;
    throw IoError("config: unknown coupling '" + s + "'");
}

inline RunConfig config_from_json(const json& root) {
    RunConfig rc;
    detail::reject_unknown_keys(root, {"format_version", "task", "train", "solver", "eval",
                                       "sweep", "output_dir"},
                                "top level");
    if (root.contains("format_version") && root["format_version"].get<int>() != kConfigVersion)
        throw IoError("config: unsupported format_version");
    if (!root.contains("task")) throw IoError("config: missing required key 'task'");

    const json& jt = root["task"];
    if (jt.is_string()) {
        rc.task.name = jt.get<std::string>();
    } else {
        detail::reject_unknown_keys(jt, {"name", "n", "seed", "noise", "horizon"}, "task");
        rc.task.name = jt.at("name").get<std::string>();
        if (jt.contains("n")) rc.task.n = jt["n"].get<int>();
        if (jt.contains("seed")) rc.task.seed = jt["seed"].get<std::uint64_t>();
        if (jt.contains("noise")) rc.task.noise = jt["noise"].get<double>();
        if (jt.contains("horizon")) rc.task.horizon = jt["horizon"].get<int>();
    }
    rc.task.validate();
    rc.train.clusters = tasks::default_clusters(rc.task.name);

    if (root.contains("train")) {
        const json& j = root["train"];
        detail::reject_unknown_keys(j,
                                    {"steps", "batch_size", "coupling", "gamma", "clusters",
                                     "pca_dims", "seed", "eval_every", "lr", "beta1", "beta2",
                                     "eps", "hidden_dims"},
                                    "train");
        if (j.contains("steps")) rc.train.steps = j["steps"].get<long>();
        if (j.contains("batch_size")) rc.train.batch_size = j["batch_size"].get<int>();
        if (j.contains("coupling"))
            rc.train.strategy = strategy_from_name(j["coupling"].get<std::string>());
        if (j.contains("gamma")) {
            const json& g = j["gamma"];
            detail::reject_unknown_keys(g, {"mode", "value", "multiplier"}, "train.gamma");
            const std::string mode = g.at("mode").get<std::string>();
            if (mode == "fixed") {
                rc.train.cost_spec = ot::CostSpec::fixed(g.at("value").get<double>());
            } else if (mode == "auto") {
                rc.train.cost_spec = ot::CostSpec::auto_scaled(
                    g.contains("multiplier") ? g["multiplier"].get<double>() : 10.0);
            } else {
                throw IoError("config: gamma mode must be 'fixed' or 'auto'");
            }
        }
        if (j.contains("clusters")) rc.train.clusters = j["clusters"].get<int>();
        if (j.contains("pca_dims")) rc.train.pca_dims = j["pca_dims"].get<int>();
        if (j.contains("seed")) rc.train.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("eval_every")) rc.train.eval_every = j["eval_every"].get<long>();
        if (j.contains("lr")) rc.train.optim.learning_rate = j["lr"].get<double>();
        if (j.contains("beta1")) rc.train.optim.beta1 = j["beta1"].get<double>();
        if (j.contains("beta2")) rc.train.optim.beta2 = j["beta2"].get<double>();
        if (j.contains("eps")) rc.train.optim.eps = j["eps"].get<double>();
        if (j.contains("hidden_dims")) {
            rc.train.hidden_dims.clear();
            for (const auto& h : j["hidden_dims"]) rc.train.hidden_dims.push_back(h.get<int>());
        }
    }
    rc.train.validate();

    if (root.contains("solver")) {
        for (const auto& js : root["solver"]) {
            detail::reject_unknown_keys(js, {"kind", "steps", "rtol", "atol", "max_nfe"},
                                        "solver");
            ode::SolverConfig sc;
            sc.kind = ode::solver_from_name(js.at("kind").get<std::string>());
            if (js.contains("steps")) sc.steps = js["steps"].get<int>();
            if (js.contains("rtol")) sc.rtol = js["rtol"].get<double>();
            if (js.contains("atol")) sc.atol = js["atol"].get<double>();
            if (js.contains("max_nfe")) sc.max_nfe = js["max_nfe"].get<int>();
            sc.validate();
            rc.solvers.push_back(sc);
        }
    }
    if (rc.solvers.empty()) rc.solvers.push_back({ode::SolverKind::Euler, 1});

    if (root.contains("eval")) {
        const json& j = root["eval"];
        detail::reject_unknown_keys(j, {"n_eval", "seeds", "metrics"}, "eval");
        if (j.contains("n_eval")) rc.n_eval = j["n_eval"].get<int>();
        if (j.contains("seeds")) {
            rc.eval_seeds.clear();
            for (const auto& s : j["seeds"]) rc.eval_seeds.push_back(s.get<std::uint64_t>());
        }
        if (j.contains("metrics")) {
            rc.eval_metrics.clear();
            for (const auto& m : j["metrics"]) rc.eval_metrics.push_back(m.get<std::string>());
        }
    }
    if (root.contains("sweep")) {
        const json& j = root["sweep"];
        detail::reject_unknown_keys(j, {"couplings", "seeds"}, "sweep");
        if (j.contains("couplings"))
            for (const auto& c : j["couplings"])
                rc.sweep_couplings.push_back(strategy_from_name(c.get<std::string>()));
        if (j.contains("seeds"))
            for (const auto& s : j["seeds"]) rc.sweep_seeds.push_back(s.get<std::uint64_t>());
    }
    if (root.contains("output_dir")) rc.output_dir = root["output_dir"].get<std::string>();
    return rc;
}

inline RunConfig load_config(const std::string& path) {
    return config_from_json(detail::parse_text(detail::read_file(path), path));
}

inline json config_to_json(const RunConfig& rc) {
    json root;
    root["format_version"] = kConfigVersion;
    root["task"] = {{"name", rc.task.name},
                    {"n", rc.task.n},
                    {"seed", rc.task.seed},
                    {"noise", rc.task.noise},
                    {"horizon", rc.task.horizon}};
    root["train"] = json{{"steps", rc.train.steps},
                         {"batch_size", rc.train.batch_size},
                         {"coupling", coupling::strategy_name(rc.train.strategy)},
                         {"clusters", rc.train.clusters},
                         {"pca_dims", rc.train.pca_dims},
                         {"seed", rc.train.seed},
                         {"eval_every", rc.train.eval_every},
                         {"lr", rc.train.optim.learning_rate},
                         {"beta1", rc.train.optim.beta1},
                         {"beta2", rc.train.optim.beta2},
                         {"eps", rc.train.optim.eps},
                         {"hidden_dims", rc.train.hidden_dims}};
    if (rc.train.cost_spec.mode == ot::CostSpec::Mode::Fixed)
        root["train"]["gamma"] = {{"mode", "fixed"}, {"value", rc.train.cost_spec.gamma}};
    else
        root["train"]["gamma"] = {{"mode", "auto"},
                                  {"multiplier", rc.train.cost_spec.multiplier}};
    root["solver"] = json::array();
    for (const auto& sc : rc.solvers)
        root["solver"].push_back({{"kind", ode::solver_name(sc.kind)},
                                  {"steps", sc.steps},
                                  {"rtol", sc.rtol},
                                  {"atol", sc.atol},
                                  {"max_nfe", sc.max_nfe}});
    root["eval"] = {{"n_eval", rc.n_eval},
                    {"seeds", rc.eval_seeds},
                    {"metrics", rc.eval_metrics}};
    if (!rc.sweep_couplings.empty() || !rc.sweep_seeds.empty()) {
        json sweep = json::object();
        json cs = json::array();
        for (auto c : rc.sweep_couplings) cs.push_back(coupling::strategy_name(c));
        sweep["couplings"] = cs;
        sweep["seeds"] = rc.sweep_seeds;
        root["sweep"] = sweep;
    }
    root["output_dir"] = rc.output_dir;
    return root;
}

inline void save_config(const RunConfig& rc, const std::string& path) {
    detail::write_file(path, config_to_json(rc).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Checkpoints

inline json task_to_json(const tasks::TaskSpec& t) {
    return {{"name", t.name}, {"n", t.n},      {"seed", t.seed},
            {"noise", t.noise}, {"horizon", t.horizon}};
}

inline tasks::TaskSpec task_from_json(const json& j) {
    tasks::TaskSpec t;
    t.name = j.at("name").get<std::string>();
    t.n = j.at("n").get<int>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.noise = j.at("noise").get<double>();
    t.horizon = j.at("horizon").get<int>();
    return t;
}

inline json train_to_json(const flow::TrainConfig& cfg) {
    json j{{"steps", cfg.steps},
           {"batch_size", cfg.batch_size},
           {"coupling", coupling::strategy_name(cfg.strategy)},
           {"clusters", cfg.clusters},
           {"pca_dims", cfg.pca_dims},
           {"seed", cfg.seed},
           {"eval_every", cfg.eval_every},
           {"lr", cfg.optim.learning_rate},
           {"beta1", cfg.optim.beta1},
           {"beta2", cfg.optim.beta2},
           {"eps", cfg.optim.eps},
           {"hidden_dims", cfg.hidden_dims}};
    if (cfg.cost_spec.mode == ot::CostSpec::Mode::Fixed)
        j["gamma"] = {{"mode", "fixed"}, {"value", cfg.cost_spec.gamma}};
    else
        j["gamma"] = {{"mode", "auto"}, {"multiplier", cfg.cost_spec.multiplier}};
    return j;
}

inline flow::TrainConfig train_from_json(const json& j) {
    flow::TrainConfig cfg;
    cfg.steps = j.at("steps").get<long>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.strategy = strategy_from_name(j.at("coupling").get<std::string>());
    cfg.clusters = j.at("clusters").get<int>();
    cfg.pca_dims = j.at("pca_dims").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.eval_every = j.at("eval_every").get<long>();
    cfg.optim.learning_rate = j.at("lr").get<double>();
    cfg.optim.beta1 = j.at("beta1").get<double>();
    cfg.optim.beta2 = j.at("beta2").get<double>();
    cfg.optim.eps = j.at("eps").get<double>();
    cfg.hidden_dims.clear();
    for (const auto& h : j.at("hidden_dims")) cfg.hidden_dims.push_back(h.get<int>());
    const json& g = j.at("gamma");
    if (g.at("mode").get<std::string>() == "fixed")
        cfg.cost_spec = ot::CostSpec::fixed(g.at("value").get<double>());
    else
        cfg.cost_spec = ot::CostSpec::auto_scaled(g.at("multiplier").get<double>());
    return cfg;
}

/// Serialize the full training state. Doubles are emitted with shortest
/// round-trip decimal encoding (up to 17 significant digits), so reloading
/// reproduces forward outputs bitwise.
inline json checkpoint_to_json(const flow::TrainState& st, const tasks::TaskSpec& task,
                               const flow::TrainConfig& cfg) {
    require_finite(st.model.params, "checkpoint parameters");
    json spec{{"input_dim", st.model.spec.input_dim},
              {"hidden_dims", st.model.spec.hidden_dims},
              {"output_dim", st.model.spec.output_dim},
              {"activation", "selu"},
              {"seed", st.model.spec.seed}};
    json model{{"spec", spec},
               {"parameters", detail::vector_to_json(st.model.params)},
               {"adam_m", detail::vector_to_json(st.model.adam_m)},
               {"adam_v", detail::vector_to_json(st.model.adam_v)},
               {"adam_steps", st.model.adam_steps}};
    json cond;
    if (st.cond) {
        cond = json::object();
        if (st.cond->pca) {
            cond["pca"] = {{"mean", detail::vector_to_json(st.cond->pca->mean)},
                           {"components", detail::matrix_to_json(st.cond->pca->components)},
                           {"singular_values",
                            detail::vector_to_json(st.cond->pca->singular_values)},
                           {"k", st.cond->pca->k}};
        }
        cond["kmeans"] = {{"centroids", detail::matrix_to_json(st.cond->kmeans.centroids)},
                          {"K", st.cond->kmeans.K},
                          {"inertia", st.cond->kmeans.inertia},
                          {"seed", st.cond->kmeans.seed}};
    }
    json payload{{"format_version", kCheckpointVersion},
                 {"kind", "cotflow-checkpoint"},
                 {"task", task_to_json(task)},
                 {"train", train_to_json(cfg)},
                 {"model", model},
                 {"condproc", cond},
                 {"rng_state", st.rng.state()},
                 {"step", st.step}};
    payload["checksum"] = detail::fnv1a(payload.dump());
    return payload;
}

struct Checkpoint {
    flow::TrainState state;
    tasks::TaskSpec task;
    flow::TrainConfig train;
};

inline Checkpoint checkpoint_from_json(json payload, const std::string& origin) {
    if (!payload.contains("format_version"))
        throw IoError(origin + ": not a cotflow checkpoint (no format_version)");
    const int version = payload["format_version"].get<int>();
    if (version != kCheckpointVersion)
        throw IoError(origin + ": unsupported checkpoint format_version " +
                      std::to_string(version) + " (reader supports " +
                      std::to_string(kCheckpointVersion) + ")");
    if (!payload.contains("checksum")) throw IoError(origin + ": missing checksum");
    const std::uint64_t stored = payload["checksum"].get<std::uint64_t>();
    payload.erase("checksum");
    if (detail::fnv1a(payload.dump()) != stored)
        throw IoError(origin + ": checksum mismatch (corrupted checkpoint)");

    Checkpoint ck;
    ck.task = task_from_json(payload.at("task"));
    ck.train = train_from_json(payload.at("train"));
    const json& model = payload.at("model");
    const json& spec = model.at("spec");
    ck.state.model.spec.input_dim = spec.at("input_dim").get<int>();
    ck.state.model.spec.output_dim = spec.at("output_dim").get<int>();
    ck.state.model.spec.seed = spec.at("seed").get<std::uint64_t>();
    ck.state.model.spec.hidden_dims.clear();
    for (const auto& h : spec.at("hidden_dims"))
        ck.state.model.spec.hidden_dims.push_back(h.get<int>());
    ck.state.model.params = detail::vector_from_json(model.at("parameters"));
    ck.state.model.adam_m = detail::vector_from_json(model.at("adam_m"));
    ck.state.model.adam_v = detail::vector_from_json(model.at("adam_v"));
    ck.state.model.adam_steps = model.at("adam_steps").get<long long>();
    require(ck.state.model.params.size() == nn::param_count(ck.state.model.spec),
            "checkpoint: parameter count does not match spec");

    const json& cond = payload.at("condproc");
    if (!cond.is_null()) {
        condproc::CondProcessor cp;
        if (cond.contains("pca")) {
            condproc::PcaEncoder enc;
            enc.mean = detail::vector_from_json(cond["pca"].at("mean"));
            enc.components = detail::matrix_from_json(cond["pca"].at("components"));
            enc.singular_values = detail::vector_from_json(cond["pca"].at("singular_values"));
            enc.k = cond["pca"].at("k").get<int>();
            cp.pca = std::move(enc);
        }
        cp.kmeans.centroids = detail::matrix_from_json(cond.at("kmeans").at("centroids"));
        cp.kmeans.K = cond.at("kmeans").at("K").get<int>();
        cp.kmeans.inertia = cond.at("kmeans").at("inertia").get<double>();
        cp.kmeans.seed = cond.at("kmeans").at("seed").get<std::uint64_t>();
        ck.state.cond = std::move(cp);
    }
    ck.state.rng.set_state(payload.at("rng_state").get<std::string>());
    ck.state.step = payload.at("step").get<long>();
    return ck;
}

inline void save_checkpoint(const flow::TrainState& st, const tasks::TaskSpec& task,
                            const flow::TrainConfig& cfg, const std::string& path) {
    detail::write_file(path, checkpoint_to_json(st, task, cfg).dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_json(detail::parse_text(detail::read_file(path), path), path);
}

// ---------------------------------------------------------------------------
// CSV emission

inline constexpr const char* kMetricsHeader =
    "task,coupling,solver,nfe,seed,w2_squared,tv,straightness";

inline std::string metrics_row(const metrics::MetricsRecord& r) {
    auto opt = [](const std::optional<double>& v) {
        return v ? detail::fmt17(*v) : std::string();
    };
    std::ostringstream os;
    os << r.task << ',' << r.coupling << ',' << r.solver << ',' << r.nfe << ',' << r.seed << ','
       << opt(r.w2_squared) << ',' << opt(r.tv) << ',' << opt(r.straightness);
    return os.str();
}

/// Appends records to a metrics CSV, writing the header only when the file
/// does not already exist.
inline void emit_metrics(const std::vector<metrics::MetricsRecord>& records,
                         const std::string& path) {
    const bool fresh = !std::filesystem::exists(path);
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot open " + path + " for writing");
    if (fresh) out << kMetricsHeader << "\n";
    for (const auto& r : records) out << metrics_row(r) << "\n";
    if (!out) throw IoError("write failed for " + path);
}

inline std::vector<metrics::MetricsRecord> read_metrics(const std::string& path) {
    std::istringstream in(detail::read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty metrics file");
    if (line != kMetricsHeader) throw IoError(path + ": unexpected metrics header");
    std::vector<metrics::MetricsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        f.resize(8);
        metrics::MetricsRecord r;
        r.task = f[0];
        r.coupling = f[1];
        r.solver = f[2];
        r.nfe = std::stol(f[3]);
        r.seed = std::stoull(f[4]);
        if (!f[5].empty()) r.w2_squared = std::stod(f[5]);
        if (!f[6].empty()) r.tv = std::stod(f[6]);
        if (!f[7].empty()) r.straightness = std::stod(f[7]);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset and log CSV

inline void write_dataset_csv(const tasks::ConditionedDataset& ds, const std::string& path) {
    std::ostringstream os;
    for (int j = 0; j < ds.samples.cols(); ++j) os << (j ? "," : "") << "x_" << j;
    for (int j = 0; j < ds.conditions.cols(); ++j) os << ",c_" << j;
    os << "\n";
    for (int i = 0; i < ds.samples.rows(); ++i) {
        for (int j = 0; j < ds.samples.cols(); ++j)
            os << (j ? "," : "") << detail::fmt17(ds.samples(i, j));
        for (int j = 0; j < ds.conditions.cols(); ++j)
            os << "," << detail::fmt17(ds.conditions(i, j));
        os << "\n";
    }
    detail::write_file(path, os.str());
}

/// Reads a dataset CSV written by write_dataset_csv (x_* then c_* columns).
inline tasks::ConditionedDataset read_dataset_csv(const std::string& path) {
    std::istringstream in(detail::read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty dataset file");
    int d = 0, q = 0;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) {
            if (cell.rfind("x_", 0) == 0) ++d;
            else if (cell.rfind("c_", 0) == 0) ++q;
            else throw IoError(path + ": unexpected dataset column '" + cell + "'");
        }
    }
    std::vector<double> vals;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        int got = 0;
        while (std::getline(ls, cell, ',')) {
            vals.push_back(std::stod(cell));
            ++got;
        }
        if (got != d + q) throw IoError(path + ": ragged dataset row");
        ++rows;
    }
    tasks::ConditionedDataset ds;
    ds.samples.resize(rows, d);
    ds.conditions.resize(rows, q);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < d; ++j) ds.samples(i, j) = vals[i * (d + q) + j];
        for (int j = 0; j < q; ++j) ds.conditions(i, j) = vals[i * (d + q) + d + j];
    }
    return ds;
}

inline constexpr const char* kTrainLogHeader = "step,loss,w2_nfe1,w2_nfe2";

inline void write_train_log(const std::vector<flow::TrainLogRow>& log, const std::string& path,
                            bool append = false) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    const bool fresh = !append || !std::filesystem::exists(path);
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    if (fresh) out << kTrainLogHeader << "\n";
    for (const auto& row : log) {
        out << row.step << ',' << detail::fmt17(row.loss) << ','
            << (row.w2_nfe1 ? detail::fmt17(*row.w2_nfe1) : std::string()) << ','
            << (row.w2_nfe2 ? detail::fmt17(*row.w2_nfe2) : std::string()) << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace cotflow::io
