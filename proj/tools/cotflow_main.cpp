// cotflow command-line tool: dataset generation, flow training, sampling,
// evaluation, sweeps, and OT-matrix dumps for the gamma study.

#include "cotflow/common.hpp"
#include "cotflow/coupling.hpp"
#include "cotflow/eval.hpp"
#include "cotflow/flow.hpp"
#include "cotflow/io.hpp"
#include "cotflow/metrics.hpp"
#include "cotflow/ode.hpp"
#include "cotflow/ot.hpp"
#include "cotflow/tasks.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace cotflow;

int thread_budget() {
    if (const char* env = std::getenv("COTFLOW_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::istringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
    }
    if (seeds.empty()) throw ValueError("expected a comma-separated seed list");
    return seeds;
}

ode::SolverConfig make_solver(const std::string& kind, int steps, double rtol, double atol) {
    ode::SolverConfig sc;
    sc.kind = ode::solver_from_name(kind);
    sc.steps = steps;
    sc.rtol = rtol;
    sc.atol = atol;
    sc.validate();
    return sc;
}

flow::EvalHook make_periodic_eval(const io::RunConfig& rc) {
    if (rc.train.eval_every <= 0) return {};
    const int n = std::min(rc.n_eval, 512);
    const std::uint64_t eval_seed = rc.eval_seeds.empty() ? 1 : rc.eval_seeds.front();
    tasks::TaskSpec task = rc.task;
    return [task, n, eval_seed](const flow::TrainState& st, flow::TrainLogRow& row) {
        for (int steps : {1, 2}) {
            ode::SolverConfig sc;
            sc.kind = ode::SolverKind::Euler;
            sc.steps = steps;
            auto g = eval::generate(st.model, task, n, eval_seed, sc);
            (steps == 1 ? row.w2_nfe1 : row.w2_nfe2) = eval::w2_vs_target(g);
        }
    };
}

int cmd_gen(const std::string& task_name, int n, std::uint64_t seed, double noise, int horizon,
            const std::string& out) {
    tasks::TaskSpec t;
    t.name = task_name;
    t.n = n;
    t.seed = seed;
    t.noise = noise;
    if (horizon > 0) t.horizon = horizon;
    io::write_dataset_csv(tasks::make_dataset(t), out);
    std::cout << "wrote " << out << " (" << n << " rows)\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume_path) {
    io::RunConfig rc = io::load_config(config_path);
    auto dataset = tasks::make_dataset(rc.task);
    auto prior = tasks::task_prior(rc.task);

    flow::TrainState st;
    bool resumed = false;
    if (!resume_path.empty()) {
        io::Checkpoint ck = io::load_checkpoint(resume_path);
        st = std::move(ck.state);
        resumed = true;
        if (st.step >= rc.train.steps) {
            std::cout << "checkpoint already at step " << st.step << "\n";
        }
    } else {
        st = flow::init_train(dataset, rc.train);
    }

    std::vector<flow::TrainLogRow> log;
    flow::train_until(st, dataset, prior, rc.train, rc.train.steps, log,
                      make_periodic_eval(rc));

    const auto dir = std::filesystem::path(rc.output_dir);
    io::save_checkpoint(st, rc.task, rc.train, (dir / "checkpoint.json").string());
    io::write_train_log(log, (dir / "train_log.csv").string(), /*append=*/resumed);
    std::cout << "trained " << coupling::strategy_name(rc.train.strategy) << " to step "
              << st.step << ", final loss "
              << (log.empty() ? 0.0 : log.back().loss) << "\n";
    return 0;
}

int cmd_sample(const std::string& ckpt_path, const std::string& solver, int steps, int n,
               std::uint64_t seed, double rtol, double atol, const std::string& out,
               const std::string& paths_out) {
    io::Checkpoint ck = io::load_checkpoint(ckpt_path);
    ode::SolverConfig sc = make_solver(solver, steps, rtol, atol);
    sc.record_path = !paths_out.empty();
    auto g = eval::generate(ck.state.model, ck.task, n, seed, sc);

    tasks::ConditionedDataset out_ds;
    out_ds.samples = g.generated;
    out_ds.conditions = g.target.conditions;
    io::write_dataset_csv(out_ds, out);

    if (!paths_out.empty()) {
        std::ostringstream os;
        os << "sample_id,t";
        for (int j = 0; j < g.generated.cols(); ++j) os << ",x_" << j;
        os << "\n";
        for (int i = 0; i < g.generated.rows(); ++i)
            for (const auto& pp : g.report.path) {
                os << i << ',' << io::detail::fmt17(pp.t);
                for (int j = 0; j < pp.x.cols(); ++j)
                    os << ',' << io::detail::fmt17(pp.x(i, j));
                os << "\n";
            }
        io::detail::write_file(paths_out, os.str());
    }
    std::cout << "nfe=" << g.report.nfe << " accepted=" << g.report.accepted
              << " rejected=" << g.report.rejected << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, std::string task_name, const std::string& metric,
             const std::string& solver, int steps, const std::string& seeds_csv, int n,
             double rtol, double atol, int horizon, const std::string& out,
             const std::string& gen_csv, const std::string& target_csv) {
    auto seeds = parse_seed_list(seeds_csv);
    ode::SolverConfig sc = make_solver(solver, steps, rtol, atol);
    sc.record_path = metric == "straightness";

    io::Checkpoint ck;
    std::string coupling_name = "none";
    if (!ckpt_path.empty()) {
        ck = io::load_checkpoint(ckpt_path);
        coupling_name = coupling::strategy_name(ck.train.strategy);
        if (task_name.empty()) task_name = ck.task.name;
        if (horizon <= 0) horizon = ck.task.horizon;
    }
    require(!task_name.empty(), "eval: need --task or a checkpoint");

    std::vector<metrics::MetricsRecord> records;
    for (std::uint64_t seed : seeds) {
        metrics::MetricsRecord rec;
        rec.task = task_name;
        rec.coupling = coupling_name;
        rec.solver = ode::solver_name(sc.kind);
        rec.seed = seed;
        rec.n_samples = n;

        Matrix generated, target;
        long nfe = 0;
        if (!gen_csv.empty()) {
            generated = io::read_dataset_csv(gen_csv).samples;
            target = target_csv.empty() ? generated : io::read_dataset_csv(target_csv).samples;
            rec.n_samples = static_cast<int>(generated.rows());
        } else {
            require(!ckpt_path.empty(), "eval: need --ckpt unless --gen-csv is given");
            auto g = eval::generate(ck.state.model, ck.task, n, seed, sc);
            nfe = g.report.nfe;
            generated = g.generated;
            target = g.target.samples;
            if (metric == "straightness") rec.straightness = ode::straightness(g.report);
        }
        rec.nfe = nfe;
        if (metric == "w2") {
            rec.w2_squared = metrics::w2_squared(generated, target);
        } else if (metric == "tv") {
            require(horizon >= 2, "eval: tv needs a trajectory task (horizon >= 2)");
            rec.tv = metrics::trajectory_variance(
                metrics::unflatten_trajectories(generated, horizon));
        } else if (metric != "straightness") {
            throw ValueError("eval: metric must be one of w2, tv, straightness");
        }
        records.push_back(std::move(rec));
        std::cout << io::metrics_row(records.back()) << "\n";
    }
    if (!out.empty()) io::emit_metrics(records, out);
    return 0;
}

int cmd_sweep(const std::string& config_path) {
    io::RunConfig rc = io::load_config(config_path);
    auto couplings = rc.sweep_couplings;
    if (couplings.empty())
        couplings = {coupling::Strategy::Independent, coupling::Strategy::Ot,
                     coupling::Strategy::Cot};
    auto seeds = rc.sweep_seeds;
    if (seeds.empty()) seeds = {rc.train.seed};

    struct Cell {
        coupling::Strategy strategy;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (auto c : couplings)
        for (auto s : seeds) cells.push_back({c, s});

    auto dataset = tasks::make_dataset(rc.task);
    auto prior = tasks::task_prior(rc.task);

    struct Row {
        metrics::MetricsRecord rec;
        std::string status = "ok";
    };
    std::vector<std::vector<Row>> results(cells.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            flow::TrainConfig cfg = rc.train;
            cfg.strategy = cell.strategy;
            cfg.seed = cell.seed;
            try {
                auto res = flow::train(dataset, prior, cfg);
                const std::uint64_t eval_seed =
                    rc.eval_seeds.empty() ? cell.seed + 1000 : rc.eval_seeds.front();
                for (const auto& sc : rc.solvers) {
                    Row row;
                    row.rec.task = rc.task.name;
                    row.rec.coupling = coupling::strategy_name(cell.strategy);
                    row.rec.solver = ode::solver_name(sc.kind);
                    row.rec.seed = cell.seed;
                    row.rec.n_samples = rc.n_eval;
                    auto g = eval::generate(res.state.model, rc.task, rc.n_eval, eval_seed, sc);
                    row.rec.nfe = g.report.nfe;
                    row.rec.w2_squared = eval::w2_vs_target(g);
                    results[i].push_back(std::move(row));
                }
            } catch (const std::exception& e) {
                Row row;
                row.rec.task = rc.task.name;
                row.rec.coupling = coupling::strategy_name(cell.strategy);
                row.rec.seed = cell.seed;
                row.status = std::string("failed: ") + e.what();
                results[i].push_back(std::move(row));
            }
        }
    };

    const int n_threads = std::min<int>(thread_budget(), static_cast<int>(cells.size()));
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    const auto out_path = std::filesystem::path(rc.output_dir) / "sweep.csv";
    std::ostringstream os;
    os << io::kMetricsHeader << ",status\n";
    for (const auto& cell_rows : results)
        for (const auto& row : cell_rows)
            os << io::metrics_row(row.rec) << ',' << row.status << "\n";
    io::detail::write_file(out_path.string(), os.str());
    std::cout << "wrote " << out_path.string() << "\n";
    return 0;
}

int cmd_ot_matrix(const std::string& task_name, int n, std::uint64_t seed,
                  const std::string& gammas_csv, const std::string& out_dir) {
    tasks::TaskSpec t;
    t.name = task_name;
    t.n = n;
    t.seed = seed;
    auto ds = tasks::make_dataset(t);
    Rng rng(seed);
    Matrix x0 = tasks::task_prior(t).sample(rng, n);
    Matrix x1 = ds.samples;
    // Unit normalization so the fixed gamma grid is scale-free.
    const double scale = std::max(x0.cwiseAbs().maxCoeff(), x1.cwiseAbs().maxCoeff());
    if (scale > 0) {
        x0 /= scale;
        x1 /= scale;
    }
    const auto perm = rng.permutation(n);
    Matrix c1 = ds.conditions;
    Matrix c0(n, c1.cols());
    for (int i = 0; i < n; ++i) c0.row(i) = c1.row(perm[i]);

    std::vector<double> gammas;
    {
        std::istringstream ss(gammas_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) gammas.push_back(std::stod(tok));
    }
    require(!gammas.empty(), "ot-matrix: need at least one gamma");

    std::filesystem::create_directories(out_dir);
    std::ostringstream assignments;
    assignments << "gamma,row,col\n";
    for (double gamma : gammas) {
        auto cm = ot::cost_matrix_conditional(x0, c0, x1, c1, gamma);
        auto plan = ot::solve_assignment(cm);
        std::ostringstream os;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                os << (j ? "," : "") << io::detail::fmt17(cm.entries(i, j));
            os << "\n";
        }
        std::ostringstream name;
        name << "cost_gamma_" << gamma << ".csv";
        io::detail::write_file((std::filesystem::path(out_dir) / name.str()).string(),
                               os.str());
        for (int i = 0; i < n; ++i)
            assignments << io::detail::fmt17(gamma) << ',' << i << ',' << plan.assignment[i]
                        << "\n";
    }
    io::detail::write_file((std::filesystem::path(out_dir) / "assignments.csv").string(),
                           assignments.str());
    std::cout << "wrote " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional-OT flow matching toolkit"};
    app.require_subcommand(1);

    std::string task_name = "fork", out, config_path, resume_path, ckpt_path;
    std::string solver = "euler", metric = "w2", seeds_csv = "1", paths_out;
    std::string gammas_csv = "0,10,100,1000,10000", gen_csv, target_csv;
    int n = 1000, steps = 1, horizon = 0;
    std::uint64_t seed = 0;
    double noise = 0.05, rtol = 1e-5, atol = 1e-5;

    auto* gen = app.add_subcommand("gen", "Generate a dataset CSV");
    gen->add_option("--task", task_name, "moons | fork | traj-fork");
    gen->add_option("--n", n, "number of rows");
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("--noise", noise, "jitter sigma (moons, traj-fork)");
    gen->add_option("--horizon", horizon, "trajectory length (traj-fork)");
    gen->add_option("--out", out, "output CSV path")->required();

    auto* train = app.add_subcommand("train", "Train a flow model from a config");
    train->add_option("--config", config_path, "run config JSON")->required();
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    auto* sample = app.add_subcommand("sample", "Sample a trained model");
    sample->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    sample->add_option("--solver", solver, "euler | midpoint | dopri5");
    sample->add_option("--steps", steps, "fixed-step count");
    sample->add_option("--n", n, "number of samples");
    sample->add_option("--seed", seed, "evaluation seed");
    sample->add_option("--rtol", rtol, "dopri5 relative tolerance");
    sample->add_option("--atol", atol, "dopri5 absolute tolerance");
    sample->add_option("--out", out, "samples CSV")->required();
    sample->add_option("--paths", paths_out, "dense path CSV (records the path)");

    auto add_eval_options = [&](CLI::App* cmd, bool with_metric) {
        cmd->add_option("--ckpt", ckpt_path, "checkpoint path");
        cmd->add_option("--task", task_name, "task override (defaults to checkpoint task)")
            ->default_val("");
        if (with_metric) cmd->add_option("--metric", metric, "w2 | tv | straightness");
        cmd->add_option("--solver", solver, "euler | midpoint | dopri5");
        cmd->add_option("--steps", steps, "fixed-step count");
        cmd->add_option("--seeds", seeds_csv, "comma-separated evaluation seeds");
        cmd->add_option("--n", n, "samples per evaluation");
        cmd->add_option("--rtol", rtol, "dopri5 relative tolerance");
        cmd->add_option("--atol", atol, "dopri5 absolute tolerance");
        cmd->add_option("--horizon", horizon, "trajectory length for tv");
        cmd->add_option("--out", out, "metrics CSV to append to");
        cmd->add_option("--gen-csv", gen_csv, "test hook: read generated set from CSV");
        cmd->add_option("--target-csv", target_csv, "test hook: read target set from CSV");
    };
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model or injected sample sets");
    add_eval_options(eval_cmd, true);
    auto* eval_w2 = app.add_subcommand("eval-w2", "Shorthand for eval --metric w2");
    add_eval_options(eval_w2, false);
    auto* eval_tv = app.add_subcommand("eval-tv", "Shorthand for eval --metric tv");
    add_eval_options(eval_tv, false);

    auto* sweep = app.add_subcommand("sweep", "Run the coupling x solver x seed grid");
    sweep->add_option("--config", config_path, "run config JSON with a sweep section")
        ->required();

    auto* otm = app.add_subcommand("ot-matrix", "Dump conditional cost matrices and plans");
    otm->add_option("--task", task_name, "task name");
    otm->add_option("--n", n, "batch size");
    otm->add_option("--seed", seed, "batch seed");
    otm->add_option("--gammas", gammas_csv, "comma-separated gamma values");
    otm->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // 0 for --help, usage errors map to 2
    }

    try {
        if (gen->parsed()) return cmd_gen(task_name, n, seed, noise, horizon, out);
        if (train->parsed()) return cmd_train(config_path, resume_path);
        if (sample->parsed())
            return cmd_sample(ckpt_path, solver, steps, n, seed, rtol, atol, out, paths_out);
        if (eval_cmd->parsed())
            return cmd_eval(ckpt_path, task_name, metric, solver, steps, seeds_csv, n, rtol,
                            atol, horizon, out, gen_csv, target_csv);
        if (eval_w2->parsed())
            return cmd_eval(ckpt_path, task_name, "w2", solver, steps, seeds_csv, n, rtol,
                            atol, horizon, out, gen_csv, target_csv);
        if (eval_tv->parsed())
            return cmd_eval(ckpt_path, task_name, "tv", solver, steps, seeds_csv, n, rtol,
                            atol, horizon, out, gen_csv, target_csv);
        if (sweep->parsed()) return cmd_sweep(config_path);
        if (otm->parsed()) return cmd_ot_matrix(task_name, n, seed, gammas_csv, out);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
