// SPDX-License-Identifier: Apache-2.0
//
// Operator entry point: data preparation, training (single and multi-worker),
// evaluation, prediction, the SVD baseline and the scaling benchmark.

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rbmcf/bench.hpp"
#include "rbmcf/data.hpp"
#include "rbmcf/inference.hpp"
#include "rbmcf/parallel.hpp"
#include "rbmcf/sampling.hpp"
#include "rbmcf/svd.hpp"
#include "rbmcf/trainer.hpp"

namespace {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("RBMCF_LOG");
    if (!env) return LogLevel::Info;
    std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[rbmcf] " << msg << "\n";
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    for (const auto& tok : split_commas(s)) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw rbmcf::ArgumentError(std::string("bad ") + what + " entry: " + tok);
        }
    }
    if (out.empty()) throw rbmcf::ArgumentError(std::string(what) + " list is empty");
    return out;
}

// Flat `key = value` config file with '#' comments. Applied after flag
// parsing: keys never override options given on the command line.
void apply_config_file(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw rbmcf::DataError("cannot open config file: " + path);
    auto trim = [](std::string s) {
        size_t l = s.find_first_not_of(" \t\r");
        if (l == std::string::npos) return std::string();
        size_t r = s.find_last_not_of(" \t\r");
        return s.substr(l, r - l + 1);
    };
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw rbmcf::ArgumentError("config: missing '=' at line " + std::to_string(line_no));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        CLI::Option* op = sub->get_option_no_throw("--" + key);
        if (op == nullptr)
            throw rbmcf::ArgumentError("config: unknown key '" + key + "' at line " +
                                       std::to_string(line_no));
        if (op->count() > 0) continue;  // command-line flag wins
        op->add_result(value.empty() ? "true" : value);
        op->run_callback();
    }
}

struct TrainCliOpts {
    std::string data_path;
    std::string model_path;
    std::string history_path;
    rbmcf::TrainConfig cfg;
    std::string workers;     // "host:port,host:port,..."
    int rank = 0;
    int spawn_local = 0;
    double timeout_sec = 30.0;
};

int run_train_worker(const TrainCliOpts& o) {
    rbmcf::SplitDataset split = rbmcf::load_split(o.data_path);
    rbmcf::TrainConfig cfg = o.cfg;

    std::unique_ptr<rbmcf::Reducer> reducer;
    std::unique_ptr<rbmcf::InProcessGroup> local_group;
    if (!o.workers.empty()) {
        rbmcf::WorkerGroup g;
        g.endpoints = split_commas(o.workers);
        g.P = static_cast<int>(g.endpoints.size());
        g.rank = o.rank;
        g.transport = rbmcf::Transport::SocketRing;
        g.timeout_sec = o.timeout_sec;
        cfg.workers = g.P;
        if (g.P == 1) {
            local_group = std::make_unique<rbmcf::InProcessGroup>(1, o.timeout_sec);
            reducer = std::make_unique<rbmcf::InProcessReducer>(*local_group, 0);
        } else {
            reducer = std::make_unique<rbmcf::SocketRingReducer>(g);
        }
    } else {
        cfg.workers = 1;
        local_group = std::make_unique<rbmcf::InProcessGroup>(1, o.timeout_sec);
        reducer = std::make_unique<rbmcf::InProcessReducer>(*local_group, 0);
    }

    log_info("training: " + std::to_string(split.train.num_users()) + " users, " +
             std::to_string(split.train.num_items()) + " items, F=" + std::to_string(cfg.F) +
             ", epochs=" + std::to_string(cfg.epochs) + ", P=" + std::to_string(cfg.workers));
    rbmcf::TrainResult result = rbmcf::train(split.train, cfg, *reducer);

    if (reducer->rank() == 0) {
        rbmcf::save_model(result.params, split.train.item_ids, o.model_path);
        log_info("model written to " + o.model_path);
        if (!o.history_path.empty()) {
            std::ofstream out(o.history_path);
            rbmcf::write_history_csv(result.history, out);
        }
    }
    return 0;
}

int spawn_local_workers(const TrainCliOpts& o, int P, int port_base, const char* exe) {
    std::string endpoints;
    for (int p = 0; p < P; ++p) {
        if (p) endpoints += ',';
        endpoints += "127.0.0.1:" + std::to_string(port_base + p);
    }
    std::vector<pid_t> pids;
    for (int p = 0; p < P; ++p) {
        pid_t pid = fork();
        if (pid < 0) throw rbmcf::TransportError("fork failed");
        if (pid == 0) {
            std::vector<std::string> args = {
                exe, "train",
                "--data", o.data_path,
                "--model", o.model_path,
                "--workers", endpoints,
                "--rank", std::to_string(p),
                "--epochs", std::to_string(o.cfg.epochs),
                "--hidden", std::to_string(o.cfg.F),
                "--lr", std::to_string(o.cfg.eta),
                "--global-batch", std::to_string(o.cfg.global_batch),
                "--gibbs", std::to_string(o.cfg.T),
                "--seed", std::to_string(o.cfg.seed),
                "--init-sigma", std::to_string(o.cfg.init_sigma),
                "--timeout", std::to_string(o.timeout_sec),
            };
            if (!o.cfg.shuffle) args.push_back("--no-shuffle");
            if (o.cfg.verify_sync) args.push_back("--verify-sync");
            if (!o.history_path.empty() && p == 0) {
                args.push_back("--history");
                args.push_back(o.history_path);
            }
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            argv.push_back(nullptr);
            execv(exe, argv.data());
            _exit(127);
        }
        pids.push_back(pid);
    }
    int worst = 0;
    for (pid_t pid : pids) {
        int status = 0;
        waitpid(pid, &status, 0);
        int code = WIFEXITED(status) ? WEXITSTATUS(status) : 3;
        worst = std::max(worst, code);
    }
    return worst;
}

int run_bench(const std::string& data_path, const std::string& mode_str,
              const std::string& workers_list, int epochs, int reps, int warmup,
              const rbmcf::TrainConfig& base_cfg, int strong_global, int weak_per_worker,
              const std::string& out_path) {
#ifdef _OPENMP
    // Worker scaling is what the report measures; keep the kernels single
    // threaded so worker threads do not fight OpenMP teams for cores.
    omp_set_num_threads(1);
#endif
    rbmcf::SplitDataset split = rbmcf::load_split(data_path);
    rbmcf::ScalingMode mode;
    if (mode_str == "strong") {
        mode = rbmcf::ScalingMode::Strong;
    } else if (mode_str == "weak") {
        mode = rbmcf::ScalingMode::Weak;
    } else {
        throw rbmcf::ArgumentError("bench: mode must be strong or weak");
    }
    std::vector<int> worker_counts = parse_int_list(workers_list, "workers-list");

    unsigned hw = std::thread::hardware_concurrency();
    int max_p = *std::max_element(worker_counts.begin(), worker_counts.end());
    if (hw > 0 && static_cast<unsigned>(max_p) > hw)
        std::cerr << "[rbmcf] warning: " << max_p << " workers oversubscribe " << hw
                  << " hardware thread(s); scaling numbers will be pessimistic\n";

    rbmcf::ScalingReport report;
    double t1 = 0.0;
    for (int P : worker_counts) {
        rbmcf::ScalingReport::Row row;
        row.P = P;
        row.mode = mode;
        if (mode == rbmcf::ScalingMode::Strong) {
            row.global_batch = strong_global;
        } else {
            row.global_batch = weak_per_worker * P;
        }
        row.per_worker_batch = row.global_batch / P;
        try {
            rbmcf::TrainConfig cfg = base_cfg;
            cfg.workers = P;
            cfg.global_batch = row.global_batch;
            cfg.epochs = epochs;
            auto run_once = [&] {
                rbmcf::InProcessGroup group(P);
                std::vector<std::thread> threads;
                std::exception_ptr err;
                std::mutex err_mu;
                for (int r = 0; r < P; ++r) {
                    threads.emplace_back([&, r] {
                        try {
                            rbmcf::InProcessReducer red(group, r);
                            rbmcf::train(split.train, cfg, red);
                        } catch (...) {
                            std::lock_guard<std::mutex> lock(err_mu);
                            if (!err) err = std::current_exception();
                        }
                    });
                }
                for (auto& t : threads) t.join();
                if (err) std::rethrow_exception(err);
            };
            rbmcf::TimingSample s = rbmcf::time_epoch(run_once, warmup, reps);
            row.epoch_seconds = s.seconds;
            row.raw = s.raw;
            if (P == 1) t1 = s.seconds;
            row.speedup = t1 > 0.0 ? rbmcf::speedup(t1, s.seconds) : 1.0;
            row.efficiency = row.speedup / P;
            log_info("bench P=" + std::to_string(P) + ": " + std::to_string(s.seconds) +
                     " s/epoch, speedup " + std::to_string(row.speedup));
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            report.partial = true;
            std::cerr << "[rbmcf] bench row P=" << P << " aborted: " << e.what() << "\n";
        }
        report.rows.push_back(std::move(row));
    }

    std::ofstream out(out_path);
    rbmcf::write_scaling_csv(report, out);
    log_info("scaling report written to " + out_path);
    return report.partial ? 3 : 0;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"softmax-visible RBM collaborative filtering engine"};
    app.require_subcommand(1);

    // prepare
    auto* prep = app.add_subcommand("prepare", "ingest a ratings CSV into a split cache");
    std::string prep_input, prep_output = "dataset.rbds";
    int prep_min_ratings = 1, prep_holdout = 30, prep_k = 5;
    std::string prep_order = "first";
    uint64_t prep_seed = 1;
    prep->add_option("--input", prep_input, "ratings CSV (userId,movieId,rating,timestamp)")
        ->required();
    prep->add_option("--output", prep_output, "cache file to write");
    prep->add_option("--min-ratings", prep_min_ratings, "keep users with at least N ratings");
    prep->add_option("--holdout", prep_holdout, "test ratings held out per user");
    prep->add_option("--k", prep_k, "number of rating levels");
    prep->add_option("--holdout-order", prep_order, "first (by timestamp) or random");
    prep->add_option("--seed", prep_seed, "seed for random holdout order");

    // train
    auto* tr = app.add_subcommand("train", "train the RBM");
    TrainCliOpts topt;
    int port_base = 29500;
    bool no_shuffle = false;
    tr->add_option("--data", topt.data_path, "dataset cache from prepare")->required();
    tr->add_option("--model", topt.model_path, "model file to write")->required();
    tr->add_option("--history", topt.history_path, "training history CSV");
    tr->add_option("--epochs", topt.cfg.epochs, "training epochs");
    tr->add_option("--hidden", topt.cfg.F, "hidden units");
    tr->add_option("--lr", topt.cfg.eta, "learning rate");
    tr->add_option("--global-batch", topt.cfg.global_batch, "users per optimizer step");
    tr->add_option("--gibbs", topt.cfg.T, "Gibbs steps per CD update");
    tr->add_option("--seed", topt.cfg.seed, "RNG seed");
    tr->add_option("--init-sigma", topt.cfg.init_sigma, "weight init std-dev");
    tr->add_flag("--no-shuffle", no_shuffle, "keep users in dataset order");
    tr->add_flag("--verify-sync", topt.cfg.verify_sync, "hash-check parameters across workers");
    tr->add_flag("--track-nll", topt.cfg.track_nll, "record exact NLL per epoch (tiny data only)");
    tr->add_option("--workers", topt.workers, "comma-separated host:port per rank (socket mode)");
    tr->add_option("--rank", topt.rank, "this worker's rank in --workers");
    tr->add_option("--spawn-local", topt.spawn_local, "spawn N local worker processes");
    tr->add_option("--port-base", port_base, "first port for --spawn-local");
    tr->add_option("--timeout", topt.timeout_sec, "collective timeout in seconds");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "RMSE on the held-out ratings");
    std::string ev_model, ev_data, ev_report;
    bool ev_weighted = false;
    ev->add_option("--model", ev_model)->required();
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--report", ev_report, "prediction report CSV");
    ev->add_flag("--weighted-mean", ev_weighted, "probability-weighted mean instead of argmax");

    // predict
    auto* pr = app.add_subcommand("predict", "predict one user/item rating");
    std::string pr_model, pr_data;
    int64_t pr_user = 0, pr_item = 0;
    pr->add_option("--model", pr_model)->required();
    pr->add_option("--data", pr_data)->required();
    pr->add_option("--user", pr_user, "external user id")->required();
    pr->add_option("--item", pr_item, "external item id")->required();

    // svd
    auto* sv = app.add_subcommand("svd", "truncated-SVD baseline sweep");
    std::string sv_data, sv_qlist = "2,5,10,20,50", sv_out = "svd_sweep.csv";
    bool sv_round = false;
    sv->add_option("--data", sv_data)->required();
    sv->add_option("--q-list", sv_qlist, "comma-separated q values");
    sv->add_option("--out", sv_out, "sweep table CSV");
    sv->add_flag("--round", sv_round, "round predictions to integer levels");

    // bench
    auto* be = app.add_subcommand("bench", "strong/weak scaling benchmark");
    std::string be_data, be_mode = "strong", be_workers = "1,2,4,8", be_out = "scaling.csv";
    int be_epochs = 1, be_reps = 3, be_warmup = 1;
    int be_strong_global = 512, be_weak_per_worker = 100;
    rbmcf::TrainConfig be_cfg;
    be->add_option("--data", be_data)->required();
    be->add_option("--mode", be_mode, "strong or weak");
    be->add_option("--workers-list", be_workers, "comma-separated worker counts");
    be->add_option("--epochs", be_epochs, "epochs per timed repetition");
    be->add_option("--reps", be_reps, "timed repetitions (median reported)");
    be->add_option("--warmup", be_warmup, "untimed warm-up repetitions");
    be->add_option("--hidden", be_cfg.F, "hidden units");
    be->add_option("--lr", be_cfg.eta, "learning rate");
    be->add_option("--seed", be_cfg.seed, "RNG seed");
    be->add_option("--global-batch", be_strong_global, "global batch for strong mode");
    be->add_option("--per-worker-batch", be_weak_per_worker, "per-worker batch for weak mode");
    be->add_option("--out", be_out, "scaling report CSV");

    std::string config_path;
    for (CLI::App* sub : {prep, tr, ev, pr, sv, be})
        sub->add_option("--config", config_path, "flat key = value config file (flags win)");

    CLI11_PARSE(app, argc, argv);
    if (!config_path.empty())
        for (CLI::App* sub : {prep, tr, ev, pr, sv, be})
            if (sub->parsed()) apply_config_file(sub, config_path);
    topt.cfg.shuffle = !no_shuffle;

    if (prep->parsed()) {
        rbmcf::RatingDataset raw = rbmcf::parse_ratings_file(prep_input, prep_k);
        size_t raw_users = raw.num_users(), raw_ratings = raw.num_ratings();
        rbmcf::RatingDataset filtered = rbmcf::filter_min_ratings(raw, prep_min_ratings);
        rbmcf::HoldoutOrder order = prep_order == "random" ? rbmcf::HoldoutOrder::SeededRandom
                                                           : rbmcf::HoldoutOrder::FirstByTimestamp;
        rbmcf::SplitDataset split = rbmcf::holdout_split(filtered, prep_holdout, order, prep_seed);
        rbmcf::save_split(split, prep_output);
        std::cout << "parsed_users," << raw_users << "\n"
                  << "parsed_ratings," << raw_ratings << "\n"
                  << "filtered_users," << filtered.num_users() << "\n"
                  << "filtered_items," << filtered.num_items() << "\n"
                  << "train_ratings," << split.train.num_ratings() << "\n"
                  << "test_ratings," << split.test.num_ratings() << "\n";
        return 0;
    }

    if (tr->parsed()) {
        if (topt.spawn_local > 1)
            return spawn_local_workers(topt, topt.spawn_local, port_base, "/proc/self/exe");
        return run_train_worker(topt);
    }

    if (ev->parsed()) {
        rbmcf::LoadedModel model = rbmcf::load_model(ev_model);
        rbmcf::SplitDataset split = rbmcf::load_split(ev_data);
        if (model.item_ids != split.train.item_ids)
            throw rbmcf::DataError("evaluate: model item map does not match dataset cache");
        rbmcf::PredictionResult res = rbmcf::evaluate_rbm(model.params, split, ev_weighted);
        std::cout << "RMSE," << res.rmse << "\n";
        if (!ev_report.empty()) {
            std::ofstream out(ev_report);
            rbmcf::write_report_csv(res, out);
        }
        return 0;
    }

    if (pr->parsed()) {
        rbmcf::LoadedModel model = rbmcf::load_model(pr_model);
        rbmcf::SplitDataset split = rbmcf::load_split(pr_data);
        if (model.item_ids != split.train.item_ids)
            throw rbmcf::DataError("predict: model item map does not match dataset cache");
        auto uit = split.train.user_index.find(pr_user);
        if (uit == split.train.user_index.end())
            throw rbmcf::DataError("predict: unknown user id");
        auto iit = split.train.item_index.find(pr_item);
        if (iit == split.train.item_index.end())
            throw rbmcf::DataError("predict: unknown item id");
        rbmcf::VisibleState vobs = split.train.visible_state(static_cast<size_t>(uit->second));
        int level = rbmcf::rbm_predict(vobs, iit->second, model.params);
        std::cout << "predicted_level," << level << "\n";
        for (int k = 1; k <= model.params.K; ++k)
            std::cout << "log_score_" << k << ","
                      << rbmcf::rbm_score(vobs, iit->second, k, model.params) << "\n";
        return 0;
    }

    if (sv->parsed()) {
        rbmcf::SplitDataset split = rbmcf::load_split(sv_data);
        std::vector<int> qs = parse_int_list(sv_qlist, "q");
        auto rows = rbmcf::q_sweep(split, qs, sv_round);
        std::ofstream out(sv_out);
        out << "q,rmse\n";
        const rbmcf::QSweepRow* best = &rows[0];
        for (const auto& r : rows) {
            out << r.q << ',' << r.rmse << '\n';
            if (r.rmse < best->rmse) best = &r;
        }
        std::cout << "best_q," << best->q << "\nbest_rmse," << best->rmse << "\n";
        return 0;
    }

    if (be->parsed()) {
        return run_bench(be_data, be_mode, be_workers, be_epochs, be_reps, be_warmup, be_cfg,
                         be_strong_global, be_weak_per_worker, be_out);
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const rbmcf::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 3;
    } catch (const rbmcf::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const rbmcf::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
