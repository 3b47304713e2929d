// Acceptance runner. `acceptance N...` checks the listed criteria (all when
// none are given) and prints one PASS/FAIL/SKIP line per criterion.
// Exit status: 1 on any failure, otherwise 77 if a criterion was skipped
// and 0 if all passed.

#include <boost/math/distributions/chi_squared.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tall/cli.hpp"
#include "tall/gradcheck.hpp"
#include "tall/trainer.hpp"

namespace fs = std::filesystem;
using namespace tall;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::fail;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string run_cli(const std::string& args, int& status) {
    const std::string cmd = std::string(TALL_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw IoError("cannot run " + cmd);
    std::string out;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) out += buf.data();
    status = pclose(pipe);
    return out;
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

Clip random_clip(std::size_t t, std::size_t h, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    return Clip{Tensor<float>::uniform(Shape{t, kChannels, h, w}, rng, 0.05, 1.0), 0, 0, 0, seed};
}

std::size_t hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// 1. Transform oracle equality.
Outcome transform_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t mismatches = 0, checked = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Clip clip = random_clip(4, 32, 32, seed);
        Rng a(seed), b(seed);
        const auto order = seed % 2 ? OrderSpec::random(seed) : OrderSpec::forward();
        const auto th1 = tall_transform(clip, 0, LayoutSpec::grid(2, 2, 1), order, a);
        if (!bit_equal(inverse_transform(th1, 4), clip.frames)) ++mismatches;

        const auto layout = LayoutSpec::grid(2, 2, 2);
        const auto th2 = tall_transform(clip, 0, layout, OrderSpec::forward(), b);
        for (std::size_t r = 0; r < th2.height(); ++r)
            for (std::size_t c = 0; c < th2.width(); ++c) {
                const auto p = pixel_provenance(r, c, layout, th2.sub_h, th2.sub_w);
                if (!p || !p->frame) {
                    ++mismatches;
                    continue;
                }
                for (std::size_t ch = 0; ch < kChannels; ++ch) {
                    double s = 0.0;
                    for (std::size_t dy = 0; dy < p->rows; ++dy)
                        for (std::size_t dx = 0; dx < p->cols; ++dx)
                            s += clip.frames.at(*p->frame, ch, p->row0 + dy, p->col0 + dx);
                    const double err = std::abs(th2.image.at(ch, r, c) - s / static_cast<double>(p->rows * p->cols));
                    worst = std::max(worst, err);
                    ++checked;
                }
            }
    }
    const double secs = seconds_since(t0);
    return verdict(mismatches == 0 && worst <= 1e-6 && secs < 10.0,
                   fmt("100 clips, bijection mismatches %zu, %zu box averages max err %.2e, %.2fs", mismatches, checked,
                       worst, secs));
}

// 2. Mask invariants.
Outcome mask_invariants() {
    const std::size_t h = 32, w = 32, s = 8, t = 4, span = h - s + 1;
    const Clip clip = random_clip(t, h, w, 7);
    Rng rng(2024);
    std::size_t bad_count = 0, bad_shared = 0;
    std::vector<double> xs(span, 0.0), ys(span, 0.0), joint(25, 0.0);
    for (int draw = 0; draw < 1000; ++draw) {
        const auto th = tall_transform(clip, s, LayoutSpec::grid(2, 2, 1), OrderSpec::forward(), rng);
        const auto back = inverse_transform(th, t);
        std::set<std::vector<bool>> patterns;
        for (std::size_t f = 0; f < t; ++f) {
            std::vector<bool> zero(h * w, false);
            std::size_t zeros = 0;
            for (std::size_t ch = 0; ch < kChannels; ++ch)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x)
                        if (back.at(f, ch, y, x) == 0.0f) {
                            ++zeros;
                            zero[y * w + x] = true;
                        }
            if (zeros != kChannels * s * s) ++bad_count;
            patterns.insert(zero);
        }
        if (patterns.size() != 1) ++bad_shared;
        xs[th.mask.x] += 1;
        ys[th.mask.y] += 1;
        joint[(th.mask.y * 5 / span) * 5 + th.mask.x * 5 / span] += 1;
    }
    auto p_value = [](const std::vector<double>& counts, const std::vector<double>& expected) {
        double chi2 = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) chi2 += std::pow(counts[i] - expected[i], 2) / expected[i];
        const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
        return boost::math::cdf(boost::math::complement(dist, chi2));
    };
    const std::vector<double> flat(span, 1000.0 / static_cast<double>(span));
    // coarse 5x5 cells hold 5 offsets per axis (25 offsets in all)
    std::vector<double> cell(25);
    for (std::size_t i = 0; i < 25; ++i) cell[i] = 1000.0 * 25.0 / static_cast<double>(span * span);
    const double px = p_value(xs, flat), py = p_value(ys, flat), pj = p_value(joint, cell);
    return verdict(bad_count == 0 && bad_shared == 0 && px > 0.01 && py > 0.01 && pj > 0.01,
                   fmt("1000 draws, wrong zero count %zu, unshared masks %zu, chi2 p x=%.3f y=%.3f joint=%.3f",
                       bad_count, bad_shared, px, py, pj));
}

// 3. Gradient check of the toy model with the full loss.
Outcome gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelConfig cfg;
    auto params = init_params<double>(cfg, 1);
    Rng rng(5);
    // leave the special initial point so zero-initialised tensors carry gradient
    for (auto& [name, t] : params)
        for (auto& v : t.data()) v += 0.05 * rng.normal();
    CorpusSpec corpus;
    const Clip clip = render_clip(corpus, corpus.videos_per_class + 3, 0, 4);
    const Thumbnail th = tall_transform(clip, 16, LayoutSpec::grid(2, 2, 4), OrderSpec::forward(), rng);
    LossFn loss = [&](Tape<double>& t, const ParamVars& p) {
        const auto out = model_forward(t, cfg, p, th);
        return total_loss(ce_loss(out.logits, 1), sc_loss(*out.frame_features), kDefaultAlpha);
    };
    // GRB affinity gradients are ~1e-7 here; a step of 1e-6 puts central
    // difference roundoff at ~1e-4 of them, 1e-4 keeps both error terms small
    const auto report = grad_check(loss, params, 1e-4, 50, 9);
    const ParamGradError* worst = &report.params.front();
    for (const auto& p : report.params)
        if (p.max_rel_error > worst->max_rel_error) worst = &p;
    const double secs = seconds_since(t0);
    return verdict(report.max_rel_error() < 1e-4 && secs < 120.0,
                   fmt("%zu tensors, %zu coordinates, max rel err %.2e (%s), %.1fs", report.params.size(),
                       report.coordinates_sampled, report.max_rel_error(), worst->name.c_str(), secs));
}

// 4. Loss unit values.
Outcome loss_values() {
    const double sc = sc_loss({{0.0, 0.0}, {2.0, 2.0}}).sc;
    const double ce = ce_loss(std::vector<double>{0.5}, std::vector<int>{1});
    const double total = total_loss(ce, sc);
    return verdict(sc == 4.0 && std::abs(ce - std::log(2.0)) <= 1e-9 && total == ce + 0.5 * sc,
                   fmt("sc %.17g, ce - ln2 %.2e, total %.17g", sc, ce - std::log(2.0), total));
}

// 5. AUC against the pairwise oracle.
Outcome auc_oracle() {
    Rng rng(77);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_int(0, 60));
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double u = rng.uniform(0.0, 1.0);
            s[k] = i % 2 ? u : std::round(u * 8.0) / 8.0;  // every other instance has ties
            y[k] = rng.uniform(0.0, 1.0) < 0.5;
        }
        y[0] = 0;
        y[1] = 1;
        double hits = 0.0, pairs = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                if (y[a] == 1 && y[b] == 0) {
                    pairs += 1.0;
                    hits += s[a] > s[b] ? 1.0 : s[a] == s[b] ? 0.5 : 0.0;
                }
        worst = std::max(worst, std::abs(roc_auc(s, y).auc - hits / pairs));
    }
    const double example = roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}).auc;
    return verdict(worst <= 1e-12 && example == 0.75, fmt("1000 instances max diff %.2e, example %.17g", worst, example));
}

// 6. Attention locality.
Outcome attention_locality() {
    const ModelConfig cfg;
    const auto params = init_params<double>(cfg, 2);
    Rng rng(3);
    const Clip clip = random_clip(4, 128, 128, 3);
    const Thumbnail th = tall_transform(clip, 0, LayoutSpec::grid(2, 2, 4), OrderSpec::forward(), rng);
    Tape<double> tape;
    ForwardOptions opt;
    opt.record_attention = true;
    const auto out = model_forward(tape, cfg, bind_params(tape, params), th.image.cast<double>(), opt);
    const auto [gh, gw] = cfg.stage_grid(0);
    const auto cells = token_cells(gh, gw, cfg.grid_rows, cfg.grid_cols);
    const auto& b0 = out.blocks.at(0);
    std::size_t leaks = 0, entries = 0;
    for (std::size_t h = 0; h < cfg.heads[0]; ++h) {
        const auto dense = dense_attention(b0, h);
        for (std::size_t i = 0; i < dense.dim(0); ++i)
            for (std::size_t j = 0; j < dense.dim(1); ++j) {
                ++entries;
                if (cells[i] != cells[j] && dense.at(i, j) != 0.0) ++leaks;
            }
    }
    const auto& b1 = out.blocks.at(1);
    std::size_t spanning = 0;
    for (std::size_t w = 0; w < b1.geometry->windows(); ++w) {
        std::set<std::size_t> slots;
        for (std::size_t l = 0; l < b1.geometry->window_len(); ++l)
            slots.insert(cells[b1.geometry->token_of[w * b1.geometry->window_len() + l]]);
        spanning += slots.size() >= 2;
    }
    return verdict(b0.geometry->sh == 0 && b1.geometry->sh == b1.geometry->wh / 2 && leaks == 0 && spanning > 0,
                   fmt("unshifted: %zu of %zu entries are nonzero cross-sub-frame weights; shifted by %zu: %zu of %zu windows span "
                       "sub-frames",
                       leaks, entries, b1.geometry->sh, spanning, b1.geometry->windows()));
}

// 7. GRB is the identity before training.
Outcome grb_identity() {
    const ModelConfig cfg;
    const auto params = init_params<float>(cfg, 4);
    Rng rng(8);
    const Clip clip = random_clip(4, 128, 128, 8);
    const Thumbnail th = tall_transform(clip, 16, LayoutSpec::grid(2, 2, 4), OrderSpec::forward(), rng);
    Tape<float> tape;
    const auto bound = bind_params(tape, params);
    auto with = model_forward(tape, cfg, bound, th);
    ForwardOptions bypass;
    bypass.bypass_grb = true;
    auto without = model_forward(tape, cfg, bound, th, bypass);
    const auto& g = with.grb_weights->value();
    double worst = 0.0;
    for (std::size_t i = 0; i < g.dim(0); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < g.dim(1); ++j) s += g.at(i, j);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    const bool same = bit_equal(with.logits.value(), without.logits.value());
    return verdict(same && worst <= 1e-6,
                   fmt("logits bit-identical %s, %zu G_w rows, max |row sum - 1| %.2e", same ? "yes" : "no", g.dim(0),
                       worst));
}

// 8. End-to-end synthetic gate.
Outcome end_to_end() {
    TrainConfig cfg;  // default toy run on the 500+500 corpus
    cfg.threads = std::min<std::size_t>(4, hardware_threads());
    TrainOptions opt;
    opt.log = [](const std::string& s) { std::cerr << "  " << s << "\n"; };
    const auto t0 = std::chrono::steady_clock::now();
    const auto rec = train(cfg, opt);
    const double secs = seconds_since(t0);
    const double auc = rec.final_metrics.at("auc").get<double>();

    TrainConfig zero = cfg;
    zero.corpus.magnitude = 0.0;
    std::cerr << "  magnitude-0 corpus\n";
    const auto rec0 = train(zero, opt);
    const double auc0 = rec0.final_metrics.at("auc").get<double>();
    return verdict(auc >= 0.95 && secs <= 600.0 && auc0 >= 0.4 && auc0 <= 0.6,
                   fmt("test AUC %.4f acc %.4f in %.0fs on %zu thread(s); magnitude-0 test AUC %.4f", auc,
                       rec.final_metrics.at("acc").get<double>(), secs, cfg.threads, auc0));
}

// 9. Ablation harness shape.
Outcome ablation_shape() {
    int st_c = 0, st_o = 0;
    const auto comp = lines_of(run_cli("ablate --axis components --plan --seed 0", st_c));
    const auto order = lines_of(run_cli("ablate --axis order --plan --seed 0", st_o));
    // columns are written in key order: grb, mask, sc_loss, tall
    bool grid_ok = st_c == 0 && comp.size() == 8 && comp[0].rfind("variant,grb,mask,sc_loss,tall,auc", 0) == 0;
    const bool rows[7][4] = {{0, 0, 0, 0}, {1, 0, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 1, 1}, {1, 1, 1, 0}, {1, 1, 1, 1}};
    for (std::size_t i = 0; grid_ok && i < 7; ++i) {
        const auto b = [](bool v) { return v ? "true" : "false"; };
        const std::string expect = std::to_string(i + 1) + "," + b(rows[i][2]) + "," + b(rows[i][1]) + "," +
                                   b(rows[i][3]) + "," + b(rows[i][0]) + ",";
        grid_ok = comp[i + 1].rfind(expect, 0) == 0;
    }
    const std::vector<std::string> names = {"\"0, 1, 2, -\"", "\"0, 1, -, -\"", "Random", "Reverse", "Forward"};
    bool order_ok = st_o == 0 && order.size() == 6;
    for (std::size_t i = 0; order_ok && i < names.size(); ++i) order_ok = order[i + 1].rfind(names[i] + ",", 0) == 0;
    std::set<std::string> hashes;
    for (const auto* table : {&comp, &order})
        for (std::size_t i = 1; i < table->size(); ++i) hashes.insert((*table)[i].substr((*table)[i].rfind(',') + 1));
    return verdict(grid_ok && order_ok && hashes.size() == 1,
                   fmt("components rows %zu (grid %s), order rows %zu (%s), distinct split hashes %zu",
                       comp.empty() ? 0 : comp.size() - 1, grid_ok ? "ok" : "wrong",
                       order.empty() ? 0 : order.size() - 1, order_ok ? "ok" : "wrong", hashes.size()));
}

// 10. Determinism and checkpointing.
bool same_dirs(const fs::path& a, const fs::path& b) {
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const fs::path other = b / fs::relative(e.path(), a);
        std::ifstream fa(e.path(), std::ios::binary), fb(other, std::ios::binary);
        if (!fb) return false;
        const std::string sa{std::istreambuf_iterator<char>(fa), {}}, sb{std::istreambuf_iterator<char>(fb), {}};
        if (sa != sb) return false;
    }
    return true;
}

Outcome determinism() {
    TrainConfig cfg;
    cfg.corpus.videos_per_class = 24;
    cfg.epochs = 2;
    cfg.seed = 31;
    cfg.eval_each_epoch = false;
    const fs::path root = fs::temp_directory_path() / "tall_acceptance_determinism";
    fs::remove_all(root);
    TrainOptions opt;
    opt.final_test_eval = false;
    opt.out_dir = root / "a";
    train(cfg, opt);
    opt.out_dir = root / "b";
    train(cfg, opt);
    const bool identical = same_dirs(root / "a" / "checkpoint", root / "b" / "checkpoint") &&
                           same_dirs(root / "b" / "checkpoint", root / "a" / "checkpoint");

    Trainer direct(cfg);
    for (int i = 0; i < 3; ++i) direct.step();
    direct.save(root / "mid");
    Trainer resumed = Trainer::load(root / "mid");
    const auto ra = direct.step(), rb = resumed.step();
    bool next_equal = ra.total == rb.total;
    for (const auto& [name, t] : direct.params()) next_equal = next_equal && bit_equal(t, resumed.params().at(name));
    fs::remove_all(root);
    return verdict(identical && next_equal, fmt("two runs bit-identical %s; resumed next step bit-identical %s",
                                                identical ? "yes" : "no", next_equal ? "yes" : "no"));
}

// 11. Transform throughput.
Outcome throughput() {
    const auto one = cli::bench_transform(2000, 1, 224, 4, 2.0, 28, "2x2", 1);
    if (one.clips_per_s < 200.0) return verdict(false, fmt("single thread %.0f clips/s", one.clips_per_s));
    const std::size_t hw = hardware_threads();
    if (hw < 4)
        return {Status::skip, fmt("single thread %.0f clips/s (>= 200); scaling needs 4 cores, machine has %zu",
                                  one.clips_per_s, hw)};
    const auto four = cli::bench_transform(8000, 4, 224, 4, 2.0, 28, "2x2", 1);
    const double speedup = four.clips_per_s / one.clips_per_s;
    return verdict(speedup >= 3.0, fmt("single thread %.0f clips/s, 4 threads %.0f clips/s, speedup %.2fx",
                                       one.clips_per_s, four.clips_per_s, speedup));
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {"transform oracle equality", transform_oracle},
        {"mask invariants", mask_invariants},
        {"gradient check", gradient_check},
        {"loss unit values", loss_values},
        {"AUC oracle", auc_oracle},
        {"attention locality", attention_locality},
        {"GRB identity at init", grb_identity},
        {"end-to-end synthetic gate", end_to_end},
        {"ablation harness shape", ablation_shape},
        {"determinism and checkpointing", determinism},
        {"transform throughput", throughput},
    };
    std::vector<std::size_t> selected;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (n < 1 || n > static_cast<int>(criteria.size())) {
            std::cerr << "unknown criterion '" << argv[i] << "' (1.." << criteria.size() << ")\n";
            return 1;
        }
        selected.push_back(static_cast<std::size_t>(n));
    }
    if (selected.empty())
        for (std::size_t n = 1; n <= criteria.size(); ++n) selected.push_back(n);

    bool failed = false, skipped = false;
    for (std::size_t n : selected) {
        Outcome o;
        try {
            o = criteria[n - 1].run();
        } catch (const std::exception& e) {
            o = {Status::fail, std::string("exception: ") + e.what()};
        }
        const char* word = o.status == Status::pass ? "PASS" : o.status == Status::skip ? "SKIP" : "FAIL";
        std::cout << "criterion " << n << " " << word << " " << criteria[n - 1].name << ": " << o.detail << std::endl;
        failed |= o.status == Status::fail;
        skipped |= o.status == Status::skip;
    }
    if (failed) return 1;
    return skipped ? 77 : 0;
}
