#include "model.hpp"

#include "error.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace pcomp {

void ModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_head < 1 || vocab_size < 1 || max_train_positions < 1 ||
        ff_mult < 1) {
        fail_validation("ModelConfig: all counts must be >= 1");
    }
    if (d_head % 2 != 0) {
        fail_validation("ModelConfig: d_head must be even for rotary pairs");
    }
}

RoPETable::RoPETable(std::size_t dh, std::size_t max_pos, double base)
    : d_head(dh), max_positions(max_pos) {
    const std::size_t half = dh / 2;
    cos_tab.resize(max_pos * half);
    sin_tab.resize(max_pos * half);
    for (std::size_t p = 0; p < max_pos; ++p) {
        for (std::size_t i = 0; i < half; ++i) {
            const double theta = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(dh));
            const double ang = static_cast<double>(p) * theta;
            cos_tab[p * half + i] = std::cos(ang);
            sin_tab[p * half + i] = std::sin(ang);
        }
    }
}

namespace {

// Explicit Box-Muller so the weight stream is pinned to the generator, not to
// a library distribution's internals.
struct GaussianGen {
    std::mt19937_64 g;
    bool has_spare = false;
    double spare = 0.0;

    explicit GaussianGen(std::uint64_t seed) : g(seed) {}

    double uniform01() {
        // 53-bit mantissa in (0, 1]
        return (static_cast<double>(g() >> 11) + 1.0) * 0x1.0p-53;
    }

    double next() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare = r * std::sin(a);
        has_spare = true;
        return r * std::cos(a);
    }
};

void fill(Matrix& m, std::size_t rows, std::size_t cols, GaussianGen& gen, double scale) {
    m = Matrix(rows, cols);
    for (double& x : m.data) x = gen.next() * scale;
}

std::vector<double> rmsnorm_row(std::span<const double> x) {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + 1e-8);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv;
    return out;
}

Matrix rmsnorm_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        auto r = rmsnorm_row(m.row(i));
        std::copy(r.begin(), r.end(), out.row(i).begin());
    }
    return out;
}

Matrix slice_cols(const Matrix& m, std::size_t c0, std::size_t n) {
    Matrix out(m.rows, n);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = m.at(i, c0 + j);
    }
    return out;
}

void append_rows(Matrix& dst, const Matrix& src) {
    if (dst.rows == 0) {
        dst = src;
        return;
    }
    if (dst.cols != src.cols) fail_validation("append_rows: column mismatch");
    dst.data.insert(dst.data.end(), src.data.begin(), src.data.end());
    dst.rows += src.rows;
}

void rope_inplace(Matrix& x, std::span<const std::size_t> positions, const RoPETable& rope,
                  Counters* counters) {
    if (x.cols != rope.d_head) fail_validation("apply_rope: row width != d_head");
    if (x.rows != positions.size()) fail_validation("apply_rope: positions/rows mismatch");
    const std::size_t half = rope.d_head / 2;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const std::size_t p = positions[i];
        if (p >= rope.max_positions) {
            fail_validation("apply_rope: position " + std::to_string(p) +
                            " outside training budget " + std::to_string(rope.max_positions));
        }
        if (counters) counters->note_position(p);
        auto r = x.row(i);
        for (std::size_t f = 0; f < half; ++f) {
            const double c = rope.cos_tab[p * half + f];
            const double s = rope.sin_tab[p * half + f];
            const double a = r[2 * f];
            const double b = r[2 * f + 1];
            r[2 * f] = a * c - b * s;
            r[2 * f + 1] = a * s + b * c;
        }
    }
}

} // namespace

ModelWeights init_from_seed(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.d_model();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    GaussianGen gen(seed);
    ModelWeights w;
    w.cfg = cfg;
    fill(w.token_embedding, cfg.vocab_size, d, gen, scale);
    w.layers.resize(cfg.n_layers);
    for (auto& l : w.layers) {
        fill(l.wq, d, d, gen, scale);
        fill(l.wk, d, d, gen, scale);
        fill(l.wv, d, d, gen, scale);
        fill(l.wo, d, d, gen, scale);
        fill(l.w1, d, cfg.ff_mult * d, gen, scale);
        fill(l.w2, cfg.ff_mult * d, d, gen, scale);
    }
    fill(w.lm_head, d, cfg.vocab_size, gen, scale);
    return w;
}

Matrix apply_rope(const Matrix& x, std::span<const std::size_t> positions, const RoPETable& rope,
                  Counters* counters) {
    Matrix out = x;
    rope_inplace(out, positions, rope, counters);
    return out;
}

std::uint64_t KVCache::total_rows() const {
    std::uint64_t n = 0;
    for (const auto& layer : k) {
        for (const auto& m : layer) n += m.rows;
    }
    return n;
}

Matrix forward(const ModelWeights& w, const RoPETable& rope, std::span<const std::int32_t> tokens,
               std::span<const std::size_t> positions, KVCache& cache, AttentionCapture* capture,
               Counters* counters) {
    const ModelConfig& cfg = w.cfg;
    const std::size_t T = tokens.size();
    const std::size_t d = cfg.d_model();
    if (T == 0) fail_validation("forward: empty token span");
    if (positions.size() != T) fail_validation("forward: tokens/positions length mismatch");
    if (cache.k.size() != cfg.n_layers) cache = KVCache(cfg);
    for (std::int32_t t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
            fail_validation("forward: token id " + std::to_string(t) + " outside vocab");
        }
    }
    if (capture) {
        capture->att.assign(cfg.n_layers, std::vector<Matrix>(cfg.n_heads));
    }

    Matrix h(T, d);
    for (std::size_t i = 0; i < T; ++i) {
        auto src = w.token_embedding.row(static_cast<std::size_t>(tokens[i]));
        std::copy(src.begin(), src.end(), h.row(i).begin());
    }

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.d_head));

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const LayerWeights& lw = w.layers[l];
        Matrix x = rmsnorm_rows(h);
        Matrix q = matmul(x, lw.wq);
        Matrix k = matmul(x, lw.wk);
        Matrix v = matmul(x, lw.wv);

        Matrix attn_out(T, d);
        for (std::size_t hd = 0; hd < cfg.n_heads; ++hd) {
            Matrix qh = slice_cols(q, hd * cfg.d_head, cfg.d_head);
            Matrix kh = slice_cols(k, hd * cfg.d_head, cfg.d_head);
            Matrix vh = slice_cols(v, hd * cfg.d_head, cfg.d_head);
            rope_inplace(qh, positions, rope, counters);
            rope_inplace(kh, positions, rope, counters);

            Matrix& ck = cache.k[l][hd];
            Matrix& cv = cache.v[l][hd];
            const std::size_t prev = ck.rows;
            append_rows(ck, kh);
            append_rows(cv, vh);
            const std::size_t total = prev + T;

            // Full score matrix, then causal mask over this pass's rows.
            Matrix a(T, total);
            for (std::size_t i = 0; i < T; ++i) {
                auto qi = qh.row(i);
                for (std::size_t j = 0; j < total; ++j) {
                    double dot = 0.0;
                    auto kj = ck.row(j);
                    for (std::size_t f = 0; f < cfg.d_head; ++f) dot += qi[f] * kj[f];
                    a.at(i, j) = dot * inv_sqrt_dh;
                }
                // stable masked softmax: keys j <= prev + i are visible
                const std::size_t vis = prev + i + 1;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < vis; ++j) mx = std::max(mx, a.at(i, j));
                double sum = 0.0;
                for (std::size_t j = 0; j < vis; ++j) {
                    a.at(i, j) = std::exp(a.at(i, j) - mx);
                    sum += a.at(i, j);
                }
                for (std::size_t j = 0; j < vis; ++j) a.at(i, j) /= sum;
                for (std::size_t j = vis; j < total; ++j) a.at(i, j) = 0.0;
            }
            if (counters) counters->add_score_pairs(static_cast<std::uint64_t>(T) * total);

            for (std::size_t i = 0; i < T; ++i) {
                for (std::size_t j = 0; j < total; ++j) {
                    const double aij = a.at(i, j);
                    if (aij == 0.0) continue;
                    auto vj = cv.row(j);
                    for (std::size_t f = 0; f < cfg.d_head; ++f) {
                        attn_out.at(i, hd * cfg.d_head + f) += aij * vj[f];
                    }
                }
            }
            if (capture) capture->att[l][hd] = std::move(a);
        }

        Matrix proj = matmul(attn_out, lw.wo);
        for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += proj.data[i];

        Matrix x2 = rmsnorm_rows(h);
        Matrix f1 = matmul(x2, lw.w1);
        for (double& val : f1.data) val = val / (1.0 + std::exp(-val)); // silu
        Matrix f2 = matmul(f1, lw.w2);
        for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += f2.data[i];
    }

    if (counters) counters->note_cache_rows(cache.total_rows());
    return matmul(rmsnorm_rows(h), w.lm_head);
}

LocalForward forward_local(const ModelWeights& w, const RoPETable& rope,
                           std::span<const std::int32_t> tokens,
                           std::span<const std::size_t> positions, Counters* counters) {
    if (tokens.size() > w.cfg.max_train_positions) {
        fail_validation("forward_local: chunk length exceeds position budget");
    }
    LocalForward out;
    out.kv = KVCache(w.cfg);
    out.logits = forward(w, rope, tokens, positions, out.kv, &out.attention, counters);
    return out;
}

namespace {

constexpr char kWeightMagic[8] = {'P', 'C', 'W', 'T', '0', '1', '\n', '\0'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_matrix(std::ostream& os, const Matrix& m) {
    os.write(reinterpret_cast<const char*>(m.data.data()),
             static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

void read_matrix(std::istream& is, Matrix& m, std::size_t rows, std::size_t cols) {
    m = Matrix(rows, cols);
    is.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

} // namespace

void save_weights(const ModelWeights& w, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_io("cannot open weight file for writing: " + path);
    os.write(kWeightMagic, sizeof(kWeightMagic));
    const ModelConfig& c = w.cfg;
    for (std::size_t v : {c.n_layers, c.n_heads, c.d_head, c.vocab_size, c.max_train_positions,
                          c.ff_mult}) {
        write_u32(os, static_cast<std::uint32_t>(v));
    }
    write_matrix(os, w.token_embedding);
    for (const auto& l : w.layers) {
        write_matrix(os, l.wq);
        write_matrix(os, l.wk);
        write_matrix(os, l.wv);
        write_matrix(os, l.wo);
        write_matrix(os, l.w1);
        write_matrix(os, l.w2);
    }
    write_matrix(os, w.lm_head);
    if (!os) fail_io("write failure on weight file: " + path);
}

ModelWeights load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail_io("cannot open weight file: " + path);
    char magic[sizeof(kWeightMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kWeightMagic, sizeof(magic)) != 0) {
        fail_io("bad magic in weight file: " + path);
    }
    ModelConfig c;
    c.n_layers = read_u32(is);
    c.n_heads = read_u32(is);
    c.d_head = read_u32(is);
    c.vocab_size = read_u32(is);
    c.max_train_positions = read_u32(is);
    c.ff_mult = read_u32(is);
    c.validate();
    const std::size_t d = c.d_model();
    ModelWeights w;
    w.cfg = c;
    read_matrix(is, w.token_embedding, c.vocab_size, d);
    w.layers.resize(c.n_layers);
    for (auto& l : w.layers) {
        read_matrix(is, l.wq, d, d);
        read_matrix(is, l.wk, d, d);
        read_matrix(is, l.wv, d, d);
        read_matrix(is, l.wo, d, d);
        read_matrix(is, l.w1, d, c.ff_mult * d);
        read_matrix(is, l.w2, c.ff_mult * d, d);
    }
    read_matrix(is, w.lm_head, d, c.vocab_size);
    if (!is) fail_io("truncated weight file: " + path);
    for (double x : w.token_embedding.data) {
        if (!std::isfinite(x)) fail_io("non-finite weights in file: " + path);
    }
    return w;
}

} // namespace pcomp
