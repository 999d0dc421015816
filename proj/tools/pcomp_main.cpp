// pcomp: command-line front end over the pcomp C API.

#include "pcomp.h"

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string seed;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value config file");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "model init seed");
    cmd->add_option("--set", args.sets, "override any config key, key=value (repeatable)");
}

using ConfigPtr = std::unique_ptr<pc_config, decltype(&pc_config_free)>;

int fail(pc_status st) {
    std::fprintf(stderr, "pcomp: %s\n", pc_error_message());
    return static_cast<int>(st);
}

// Builds the config from file + overrides; returns PC_OK or the first error.
pc_status build_config(const CommonArgs& args, const std::vector<std::string>& extra_sets,
                       ConfigPtr& cfg) {
    cfg = ConfigPtr(pc_config_new(), &pc_config_free);
    if (!args.config_path.empty()) {
        if (pc_status st = pc_config_load(cfg.get(), args.config_path.c_str()); st != PC_OK) {
            return st;
        }
    }
    if (!args.seed.empty()) {
        if (pc_status st = pc_config_set(cfg.get(), "seed", args.seed.c_str()); st != PC_OK) {
            return st;
        }
    }
    auto apply = [&](const std::vector<std::string>& kvs) -> pc_status {
        for (const std::string& kv : kvs) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "pcomp: expected key=value, got '%s'\n", kv.c_str());
                return PC_EVALIDATION;
            }
            const std::string key = kv.substr(0, eq);
            const std::string value = kv.substr(eq + 1);
            if (pc_status st = pc_config_set(cfg.get(), key.c_str(), value.c_str());
                st != PC_OK) {
                return st;
            }
        }
        return PC_OK;
    };
    if (pc_status st = apply(extra_sets); st != PC_OK) return st;
    return apply(args.sets); // --set wins over named flags
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pcomp: chunked parallel attention with KV-cache eviction"};
    app.require_subcommand(1);

    CommonArgs run_args, bench_args, analyze_args, vs_args;
    std::string context_path, query_path, chunk_width, kv_budget, queue_capacity, mode, max_new;
    std::string budgets, memory_budget;
    std::string widths, eps, trials, sp_mode;

    CLI::App* run = app.add_subcommand("run", "execute the pipeline on a context/query pair");
    add_common(run, run_args);
    run->add_option("--context", context_path, "context token file");
    run->add_option("--query", query_path, "query token file");
    run->add_option("--chunk-width", chunk_width, "tokens per chunk");
    run->add_option("--kv-budget", kv_budget, "retained context tokens per head per chunk");
    run->add_option("--queue-capacity", queue_capacity, "chunks kept in the priority queue");
    run->add_option("--mode", mode, "none|compression|calibration|both");
    run->add_option("--max-new", max_new, "tokens to decode");

    CLI::App* bench = app.add_subcommand("bench", "cost model across kv budgets");
    add_common(bench, bench_args);
    bench->add_option("--budgets", budgets, "comma-separated kv budgets");
    bench->add_option("--memory-budget", memory_budget, "byte budget for parallel chunks");

    CLI::App* analyze = app.add_subcommand("analyze", "attention bias report for a run");
    add_common(analyze, analyze_args);
    analyze->add_option("--context", context_path, "context token file");
    analyze->add_option("--query", query_path, "query token file");

    CLI::App* vs = app.add_subcommand("verify-sparsity", "sparsity trend and decay fit");
    add_common(vs, vs_args);
    vs->add_option("--widths", widths, "comma-separated chunk widths, ascending");
    vs->add_option("--epsilon", eps, "effective-entry threshold");
    vs->add_option("--trials", trials, "trials per width");
    vs->add_option("--mode", sp_mode, "toy-model|synthetic-decay");

    CLI11_PARSE(app, argc, argv);

    auto kv = [](const char* key, const std::string& value) {
        return value.empty() ? std::string() : std::string(key) + "=" + value;
    };
    auto collect = [](std::initializer_list<std::string> items) {
        std::vector<std::string> out;
        for (const auto& s : items) {
            if (!s.empty()) out.push_back(s);
        }
        return out;
    };

    ConfigPtr cfg(nullptr, &pc_config_free);
    if (run->parsed()) {
        if (pc_status st = build_config(
                run_args,
                collect({kv("context_path", context_path), kv("query_path", query_path),
                         kv("chunk_width", chunk_width), kv("kv_budget", kv_budget),
                         kv("queue_capacity", queue_capacity), kv("mode", mode),
                         kv("max_new", max_new)}),
                cfg);
            st != PC_OK) {
            return fail(st);
        }
        pc_result* res = nullptr;
        const char* out = run_args.out_dir.empty() ? nullptr : run_args.out_dir.c_str();
        if (pc_status st = pc_run(cfg.get(), out, &res); st != PC_OK) return fail(st);
        std::printf("ppl=%.6f generated=%zu retained=%zu truncated=%d\n", pc_result_ppl(res),
                    pc_result_generated_count(res), pc_result_retained_count(res),
                    pc_result_truncated(res));
        pc_result_free(res);
        return 0;
    }
    if (bench->parsed()) {
        if (pc_status st = build_config(bench_args,
                                        collect({kv("bench_budgets", budgets),
                                                 kv("memory_budget_bytes", memory_budget)}),
                                        cfg);
            st != PC_OK) {
            return fail(st);
        }
        const char* out = bench_args.out_dir.empty() ? nullptr : bench_args.out_dir.c_str();
        if (pc_status st = pc_bench(cfg.get(), out); st != PC_OK) return fail(st);
        std::printf("bench.csv written\n");
        return 0;
    }
    if (analyze->parsed()) {
        if (pc_status st = build_config(analyze_args,
                                        collect({kv("context_path", context_path),
                                                 kv("query_path", query_path)}),
                                        cfg);
            st != PC_OK) {
            return fail(st);
        }
        const char* out = analyze_args.out_dir.empty() ? nullptr : analyze_args.out_dir.c_str();
        if (pc_status st = pc_analyze(cfg.get(), out); st != PC_OK) return fail(st);
        std::printf("analysis CSVs written\n");
        return 0;
    }
    if (vs->parsed()) {
        if (pc_status st = build_config(vs_args,
                                        collect({kv("widths", widths),
                                                 kv("sparsity_epsilon", eps),
                                                 kv("trials", trials),
                                                 kv("sparsity_mode", sp_mode)}),
                                        cfg);
            st != PC_OK) {
            return fail(st);
        }
        int trend = 0;
        const char* out = vs_args.out_dir.empty() ? nullptr : vs_args.out_dir.c_str();
        if (pc_status st = pc_verify_sparsity(cfg.get(), out, &trend); st != PC_OK) {
            return fail(st);
        }
        if (widths.find(',') == std::string::npos && !widths.empty()) {
            std::printf("warning: single width, trend is trivially satisfied\n");
        }
        std::printf("sparsity trend %s\n", trend ? "PASS" : "FAIL");
        return 0;
    }
    return 1;
}
