#include "run_config.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pcomp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    try {
        const long long v = std::stoll(value);
        if (v < 0) fail_validation(key + ": must be non-negative, got " + value);
        return static_cast<std::size_t>(v);
    } catch (const Error&) {
        throw;
    } catch (...) {
        fail_validation(key + ": not an integer: " + value);
    }
}

double parse_real(const std::string& key, const std::string& value) {
    if (value == "inf" || value == "+inf") return std::numeric_limits<double>::infinity();
    try {
        return std::stod(value);
    } catch (...) {
        fail_validation(key + ": not a number: " + value);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    fail_validation(key + ": expected true/false, got " + value);
}

std::vector<std::size_t> parse_count_list(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_count(key, item));
    }
    if (out.empty()) fail_validation(key + ": empty list");
    return out;
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "n_layers") n_layers = parse_count(key, value);
    else if (key == "n_heads") n_heads = parse_count(key, value);
    else if (key == "d_head") d_head = parse_count(key, value);
    else if (key == "vocab_size") vocab_size = parse_count(key, value);
    else if (key == "max_train_positions") max_train_positions = parse_count(key, value);
    else if (key == "ff_mult") ff_mult = parse_count(key, value);
    else if (key == "seed") seed = parse_count(key, value);
    else if (key == "weights_path") weights_path = value;
    else if (key == "weights_out") weights_out = value;
    else if (key == "context_path") context_path = value;
    else if (key == "query_path") query_path = value;
    else if (key == "token_format") {
        if (value == "text") token_format = TokenFormat::text;
        else if (value == "bin") token_format = TokenFormat::binary;
        else fail_validation("token_format: expected text|bin, got " + value);
    } else if (key == "chunk_width") chunk_width = parse_count(key, value);
    else if (key == "q_obs") q_obs = parse_count(key, value);
    else if (key == "kv_budget") kv_budget = parse_count(key, value);
    else if (key == "queue_capacity") queue_capacity = parse_count(key, value);
    else if (key == "epsilon") epsilon = parse_real(key, value);
    else if (key == "lambda_mult") lambda_mult = parse_real(key, value);
    else if (key == "mode") {
        if (value == "none") mode = EvictionMode::none;
        else if (value == "compression") mode = EvictionMode::compression;
        else if (value == "calibration") mode = EvictionMode::calibration;
        else if (value == "both") mode = EvictionMode::both;
        else fail_validation("mode: expected none|compression|calibration|both, got " + value);
    } else if (key == "layer_schedule") layer_schedule = value;
    else if (key == "sink_len") sink_len = parse_count(key, value);
    else if (key == "recency_len") recency_len = parse_count(key, value);
    else if (key == "max_new") max_new = parse_count(key, value);
    else if (key == "parallel_chunks") parallel_chunks = parse_bool(key, value);
    else if (key == "memory_budget_bytes") memory_budget_bytes = parse_count(key, value);
    else if (key == "bench_budgets") bench_budgets = parse_count_list(key, value);
    else if (key == "widths") widths = parse_count_list(key, value);
    else if (key == "sparsity_epsilon") sparsity_epsilon = parse_real(key, value);
    else if (key == "trials") trials = parse_count(key, value);
    else if (key == "sparsity_mode") {
        if (value == "toy-model") sparsity_mode = SparsityMode::toy_model;
        else if (value == "synthetic-decay") sparsity_mode = SparsityMode::synthetic_decay;
        else fail_validation("sparsity_mode: expected toy-model|synthetic-decay, got " + value);
    } else if (key == "decay_alpha") decay_alpha = parse_real(key, value);
    else if (key == "head_frac") head_frac = parse_real(key, value);
    else if (key == "tail_frac") tail_frac = parse_real(key, value);
    else if (key == "out_dir") out_dir = value;
    else fail_validation("unknown config key: " + key);
}

void RunConfig::validate() const {
    model_config().validate();
    if (chunk_width < 1) fail_validation("chunk_width must be >= 1");
    if (q_obs < 1) fail_validation("q_obs must be >= 1");
    if (kv_budget < 1) fail_validation("kv_budget must be >= 1");
    if (queue_capacity < 1) fail_validation("queue_capacity must be >= 1");
    if (!(lambda_mult > 1.0)) fail_validation("lambda_mult must be > 1");
    if (trials < 1) fail_validation("trials must be >= 1");
    if (head_frac <= 0.0 || head_frac >= 0.5 || tail_frac <= 0.0 || tail_frac >= 0.5) {
        fail_validation("head_frac/tail_frac must be in (0, 0.5)");
    }
    parsed_schedule(); // also validates format
}

ModelConfig RunConfig::model_config() const {
    ModelConfig cfg;
    cfg.n_layers = n_layers;
    cfg.n_heads = n_heads;
    cfg.d_head = d_head;
    cfg.vocab_size = vocab_size;
    cfg.max_train_positions = max_train_positions;
    cfg.ff_mult = ff_mult;
    return cfg;
}

std::vector<std::set<Region>> RunConfig::parsed_schedule() const {
    if (layer_schedule == "auto" || layer_schedule.empty()) {
        return EvictionPolicy::default_schedule(n_layers);
    }
    std::vector<std::set<Region>> sched(n_layers);
    std::stringstream ss(layer_schedule);
    std::string entry;
    while (std::getline(ss, entry, ';')) {
        entry = trim(entry);
        if (entry.empty()) continue;
        const auto colon = entry.find(':');
        if (colon == std::string::npos) {
            fail_validation("layer_schedule entry missing ':': " + entry);
        }
        const std::string range = trim(entry.substr(0, colon));
        std::size_t lo, hi;
        const auto dash = range.find('-');
        if (dash == std::string::npos) {
            lo = hi = parse_count("layer_schedule", range);
        } else {
            lo = parse_count("layer_schedule", range.substr(0, dash));
            hi = parse_count("layer_schedule", range.substr(dash + 1));
        }
        if (lo > hi || hi >= n_layers) {
            fail_validation("layer_schedule range out of [0, n_layers): " + range);
        }
        std::set<Region> regions;
        std::stringstream rs(entry.substr(colon + 1));
        std::string rname;
        while (std::getline(rs, rname, '+')) {
            rname = trim(rname);
            if (rname == "sink") regions.insert(Region::sink);
            else if (rname == "recency") regions.insert(Region::recency);
            else if (rname == "middle") regions.insert(Region::middle);
            else if (rname == "none" || rname.empty()) continue;
            else fail_validation("layer_schedule: unknown region: " + rname);
        }
        for (std::size_t l = lo; l <= hi; ++l) sched[l] = regions;
    }
    return sched;
}

RunSettings RunConfig::run_settings() const {
    RunSettings s;
    s.chunk_width = chunk_width;
    s.q_obs = q_obs;
    s.queue_capacity = queue_capacity;
    s.epsilon = epsilon;
    s.mode = mode;
    s.policy.kv_budget = kv_budget;
    s.policy.lambda_mult = lambda_mult;
    s.policy.sink_len = sink_len;
    s.policy.recency_len = recency_len;
    s.policy.layer_regions = parsed_schedule();
    s.max_new = max_new;
    s.parallel_chunks = parallel_chunks;
    return s;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_io("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail_validation(path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

TokenSequence load_token_file(const std::string& path, TokenFormat format,
                              std::size_t vocab_size) {
    TokenSequence tokens;
    if (format == TokenFormat::text) {
        std::ifstream is(path);
        if (!is) fail_io("cannot open token file: " + path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            line = trim(line);
            if (line.empty()) continue;
            try {
                tokens.push_back(static_cast<std::int32_t>(std::stol(line)));
            } catch (...) {
                fail_validation(path + ":" + std::to_string(lineno) + ": not a token id: " + line);
            }
        }
    } else {
        std::ifstream is(path, std::ios::binary);
        if (!is) fail_io("cannot open token file: " + path);
        is.seekg(0, std::ios::end);
        const auto bytes = static_cast<std::size_t>(is.tellg());
        is.seekg(0);
        if (bytes % 4 != 0) fail_io("binary token file size not a multiple of 4: " + path);
        tokens.resize(bytes / 4);
        is.read(reinterpret_cast<char*>(tokens.data()), static_cast<std::streamsize>(bytes));
        if (!is) fail_io("read failure on token file: " + path);
    }
    for (std::int32_t t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
            fail_validation(path + ": token id " + std::to_string(t) + " outside vocab " +
                            std::to_string(vocab_size));
        }
    }
    return tokens;
}

void save_token_file(const TokenSequence& tokens, const std::string& path, TokenFormat format) {
    if (format == TokenFormat::text) {
        std::ofstream os(path);
        if (!os) fail_io("cannot open token file for writing: " + path);
        for (std::int32_t t : tokens) os << t << "\n";
        if (!os) fail_io("write failure on token file: " + path);
    } else {
        std::ofstream os(path, std::ios::binary);
        if (!os) fail_io("cannot open token file for writing: " + path);
        os.write(reinterpret_cast<const char*>(tokens.data()),
                 static_cast<std::streamsize>(tokens.size() * 4));
        if (!os) fail_io("write failure on token file: " + path);
    }
}

} // namespace pcomp
