#include "fedleak/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "fedleak/error.hpp"
#include "fedleak/rng.hpp"

namespace fedleak {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& context) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown key '" + key + "' in " + context);
        }
    }
}

DatasetSpec dataset_from_json(const json& j) {
    check_keys(j,
               {"type", "count", "side", "classes", "images", "labels", "normalize", "path", "max_len",
                "embed_dim", "vocab", "avg_words"},
               "dataset");
    DatasetSpec d;
    d.type = j.at("type").get<std::string>();
    d.count = j.value("count", d.count);
    d.side = j.value("side", d.side);
    d.classes = j.value("classes", d.classes);
    d.images = j.value("images", d.images);
    d.labels = j.value("labels", d.labels);
    d.normalize = j.value("normalize", d.normalize);
    d.path = j.value("path", d.path);
    d.max_len = j.value("max_len", d.max_len);
    d.embed_dim = j.value("embed_dim", d.embed_dim);
    d.vocab = j.value("vocab", d.vocab);
    d.avg_words = j.value("avg_words", d.avg_words);
    return d;
}

VictimBatchMode batch_mode_from_string(const std::string& s) {
    if (s == "random") return VictimBatchMode::random;
    if (s == "spread") return VictimBatchMode::spread;
    if (s == "distinct_bins") return VictimBatchMode::distinct_bins;
    throw ConfigError("victim_batch must be random|spread|distinct_bins, got '" + s + "'");
}

std::string batch_mode_to_string(VictimBatchMode m) {
    switch (m) {
        case VictimBatchMode::random: return "random";
        case VictimBatchMode::spread: return "spread";
        case VictimBatchMode::distinct_bins: return "distinct_bins";
    }
    return "random";
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    check_keys(j,
               {"modality", "dataset", "n_clients", "victim", "k", "local_epochs", "lr", "batch_size",
                "aux_fraction", "batch", "seed", "thresholds", "codec", "victim_batch", "w2_row_scale",
                "head", "exclude_top_bin", "aux_include_bound", "victim_class_filter", "sweep", "out"},
               "config");
    ExperimentConfig c;
    const std::string modality = j.at("modality").get<std::string>();
    if (modality == "image") {
        c.modality = Modality::image;
    } else if (modality == "text") {
        c.modality = Modality::text;
    } else {
        throw ConfigError("modality must be image|text, got '" + modality + "'");
    }
    c.dataset = dataset_from_json(j.at("dataset"));
    c.n_clients = j.value("n_clients", c.n_clients);
    c.victim = j.value("victim", c.victim);
    c.k = j.value("k", c.k);
    c.local_epochs = j.value("local_epochs", c.local_epochs);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.aux_fraction = j.value("aux_fraction", c.aux_fraction);
    c.batch = j.value("batch", c.batch);
    c.seed = j.value("seed", c.seed);
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        check_keys(t, {"psnr", "ssim", "wer"}, "thresholds");
        c.thresholds.psnr_th = t.value("psnr", c.thresholds.psnr_th);
        c.thresholds.ssim_th = t.value("ssim", c.thresholds.ssim_th);
        c.thresholds.wer_th = t.value("wer", c.thresholds.wer_th);
    }
    if (j.contains("codec")) {
        const auto& t = j.at("codec");
        check_keys(t, {"scale", "clip"}, "codec");
        c.codec_scale = t.value("scale", c.codec_scale);
        c.codec_clip = t.value("clip", c.codec_clip);
    }
    if (j.contains("victim_batch")) {
        c.victim_batch = batch_mode_from_string(j.at("victim_batch").get<std::string>());
    }
    c.w2_row_scale = j.value("w2_row_scale", c.w2_row_scale);
    if (j.contains("head")) {
        const auto& t = j.at("head");
        check_keys(t, {"hidden", "init", "beta", "target_sat"}, "head");
        c.head_hidden = t.value("hidden", c.head_hidden);
        c.head_init = t.value("init", c.head_init);
        c.head_beta = t.value("beta", c.head_beta);
        c.head_target_sat = t.value("target_sat", c.head_target_sat);
    }
    c.exclude_top_bin = j.value("exclude_top_bin", c.exclude_top_bin);
    c.aux_include_bound = j.value("aux_include_bound", c.aux_include_bound);
    c.victim_class_filter = j.value("victim_class_filter", c.victim_class_filter);
    if (j.contains("sweep")) {
        check_keys(j.at("sweep"), {"k", "n_clients", "local_epochs", "noniid"}, "sweep");
        for (const auto& [axis, values] : j.at("sweep").items()) {
            c.sweep[axis] = values.get<std::vector<double>>();
        }
    }
    c.out_dir = j.value("out", c.out_dir);
    validate(c);
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string() + ": cannot open config");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": bad JSON: " + e.what());
    }
    return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
    if (c.n_clients < 1) throw ConfigError("n_clients must be positive");
    if (c.victim >= c.n_clients) {
        throw ConfigError("victim " + std::to_string(c.victim) + " out of range for " +
                          std::to_string(c.n_clients) + " clients");
    }
    if (c.k < 1) throw ConfigError("k must be positive");
    if (c.local_epochs < 1) throw ConfigError("local_epochs must be positive");
    if (c.batch < 1) throw ConfigError("batch must be positive");
    if (c.aux_fraction <= 0.0 || c.aux_fraction >= 1.0) throw ConfigError("aux_fraction must be in (0,1)");
    if (c.lr <= 0.0) throw ConfigError("lr must be positive");
    if (c.codec_scale <= 0.0) throw ConfigError("codec scale must be positive");
    if (c.thresholds.psnr_th < 0.0 || c.thresholds.ssim_th < -1.0 || c.thresholds.ssim_th > 1.0 ||
        c.thresholds.wer_th < 0.0 || c.thresholds.wer_th > 1.0) {
        throw ConfigError("thresholds out of metric ranges");
    }
    if (c.head_init != "attack_tuned" && c.head_init != "random") {
        throw ConfigError("head.init must be attack_tuned|random");
    }
    if (c.head_hidden < 2) throw ConfigError("head.hidden must be at least 2");
    const std::set<std::string> kTypes{"synthetic", "idx", "image_dir", "text_corpus", "synthetic_text"};
    if (!kTypes.count(c.dataset.type)) {
        throw ConfigError("dataset.type must be synthetic|idx|image_dir|text_corpus|synthetic_text");
    }
    const bool text_source = c.dataset.type == "text_corpus" || c.dataset.type == "synthetic_text";
    if ((c.modality == Modality::text) != text_source && c.dataset.type != "synthetic") {
        throw ConfigError("dataset.type does not match modality");
    }
    if (c.modality == Modality::text && c.dataset.type == "synthetic") {
        throw ConfigError("text modality needs dataset.type synthetic_text or text_corpus");
    }
}

json resolved_json(const ExperimentConfig& c) {
    json d;
    d["type"] = c.dataset.type;
    if (c.dataset.type == "synthetic") {
        d["count"] = c.dataset.count;
        d["side"] = c.dataset.side;
        d["classes"] = c.dataset.classes;
    } else if (c.dataset.type == "idx") {
        d["images"] = c.dataset.images;
        d["labels"] = c.dataset.labels;
        d["normalize"] = c.dataset.normalize;
    } else if (c.dataset.type == "image_dir") {
        d["path"] = c.dataset.path;
        d["side"] = c.dataset.side;
    } else if (c.dataset.type == "text_corpus") {
        d["path"] = c.dataset.path;
        d["max_len"] = c.dataset.max_len;
        d["embed_dim"] = c.dataset.embed_dim;
    } else {
        d["count"] = c.dataset.count;
        d["classes"] = c.dataset.classes;
        d["max_len"] = c.dataset.max_len;
        d["embed_dim"] = c.dataset.embed_dim;
        d["vocab"] = c.dataset.vocab;
        d["avg_words"] = c.dataset.avg_words;
    }

    json j;
    j["modality"] = c.modality == Modality::image ? "image" : "text";
    j["dataset"] = d;
    j["n_clients"] = c.n_clients;
    j["victim"] = c.victim;
    j["k"] = c.k;
    j["local_epochs"] = c.local_epochs;
    j["lr"] = c.lr;
    j["batch_size"] = c.batch_size;
    j["aux_fraction"] = c.aux_fraction;
    j["batch"] = c.batch;
    j["seed"] = c.seed;
    j["thresholds"] = {{"psnr", c.thresholds.psnr_th},
                       {"ssim", c.thresholds.ssim_th},
                       {"wer", c.thresholds.wer_th}};
    j["codec"] = {{"scale", c.codec_scale}, {"clip", c.codec_clip}};
    j["victim_batch"] = batch_mode_to_string(c.victim_batch);
    j["w2_row_scale"] = c.w2_row_scale;
    j["head"] = {{"hidden", c.head_hidden},
                 {"init", c.head_init},
                 {"beta", c.head_beta},
                 {"target_sat", c.head_target_sat}};
    j["exclude_top_bin"] = c.exclude_top_bin;
    j["aux_include_bound"] = c.aux_include_bound;
    j["victim_class_filter"] = c.victim_class_filter;
    if (!c.sweep.empty()) {
        json s;
        for (const auto& [axis, values] : c.sweep) s[axis] = values;
        j["sweep"] = s;
    }
    j["out"] = c.out_dir;
    return j;
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string dump = resolved_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

// ---------------------------------------------------------------------------
// Batch selection

namespace {

// Picks the victim's training batch from its pool. `bright` maps a sample to
// its brightness feature under the published model.
template <typename Sample, typename BrightFn>
std::vector<Sample> select_victim_batch(const std::vector<Sample>& pool, std::size_t m,
                                        VictimBatchMode mode, const BinVector& bins,
                                        const BrightFn& bright, std::uint64_t seed,
                                        std::vector<std::string>& warnings) {
    if (pool.size() <= m) {
        if (pool.size() < m) {
            warnings.push_back("victim pool smaller than requested batch (" +
                               std::to_string(pool.size()) + " < " + std::to_string(m) + ")");
        }
        return pool;
    }
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, {kBatchStream, 0x76696374696dULL}));
    shuffle(order, rng);

    std::vector<Sample> batch;
    batch.reserve(m);
    if (mode == VictimBatchMode::random) {
        for (std::size_t i = 0; i < m; ++i) batch.push_back(pool[order[i]]);
        return batch;
    }
    if (mode == VictimBatchMode::spread) {
        std::vector<std::size_t> ranked = order;
        std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
            return bright(pool[a]) < bright(pool[b]);
        });
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t rank = (2 * i + 1) * ranked.size() / (2 * m);
            batch.push_back(pool[ranked[rank]]);
        }
        return batch;
    }

    // distinct_bins: bucket the (shuffled) pool by bin index and take one
    // sample per occupied bin before taking seconds. Within a bucket,
    // samples nearest the bin midpoint go first; they survive the small
    // threshold drift of multi-epoch training best.
    std::vector<std::vector<std::size_t>> buckets(bins.k() + 1);
    for (std::size_t idx : order) {
        const std::size_t b = bin_index(bins, bright(pool[idx]));
        if (b == 0) continue;  // below every threshold: leaves no gradient signature
        buckets[b].push_back(idx);
    }
    for (std::size_t b = 1; b <= bins.k(); ++b) {
        const double lo = bins.h[b - 1];
        const double hi = b < bins.k() ? bins.h[b] : lo;
        const double mid = 0.5 * (lo + hi);
        std::stable_sort(buckets[b].begin(), buckets[b].end(), [&](std::size_t x, std::size_t y) {
            return std::abs(bright(pool[x]) - mid) < std::abs(bright(pool[y]) - mid);
        });
    }
    std::size_t round = 0;
    bool took_any = true;
    while (batch.size() < m && took_any) {
        took_any = false;
        for (std::size_t b = 1; b <= bins.k() && batch.size() < m; ++b) {
            if (round < buckets[b].size()) {
                batch.push_back(pool[buckets[b][round]]);
                took_any = true;
            }
        }
        if (round == 0) {
            std::size_t distinct = 0;
            for (std::size_t b = 1; b <= bins.k(); ++b) distinct += buckets[b].empty() ? 0 : 1;
            if (distinct < m) {
                warnings.push_back("victim pool covers only " + std::to_string(distinct) + " of " +
                                   std::to_string(bins.k()) + " bins for batch " + std::to_string(m) +
                                   "; collisions are unavoidable");
            }
        }
        ++round;
    }
    return batch;
}

template <typename Sample>
std::vector<Sample> trim_pool(const std::vector<Sample>& pool, std::size_t m, std::uint64_t seed,
                              std::size_t client) {
    if (pool.size() <= m) return pool;
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, {kBatchStream, 0x686f6e657374ULL, client}));
    shuffle(order, rng);
    std::vector<Sample> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) out.push_back(pool[order[i]]);
    return out;
}

RoundConfig round_config_of(const ExperimentConfig& c) {
    RoundConfig r;
    r.n_clients = c.n_clients;
    r.victim = c.victim;
    r.local_epochs = c.local_epochs;
    r.lr = c.lr;
    r.batch_size = c.batch_size;
    r.k = c.k;
    r.seed = c.seed;
    r.codec.scale = c.codec_scale;
    r.codec.clip = c.codec_clip > 0.0 ? c.codec_clip : 1073741824.0 / c.codec_scale;
    return r;
}

double effective_w2_scale(const ExperimentConfig& c) {
    if (c.w2_row_scale != 0.0) return c.w2_row_scale;
    return c.modality == Modality::image ? 1.0 : 1.0 / static_cast<double>(c.k);
}

Head build_head(const ExperimentConfig& c, std::size_t input_dim, std::size_t classes,
                const CraftedModule& victim_module, const std::vector<std::vector<double>>& aux_inputs) {
    if (c.head_init == "random") {
        return random_head(input_dim, c.head_hidden, classes, c.seed);
    }
    const auto stats = measure_activation_stats(victim_module, aux_inputs);
    return attack_tuned_head(input_dim, c.head_hidden, classes, stats.center, stats.spread,
                             c.head_target_sat, c.head_beta);
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiment pipeline

namespace {

ExperimentOutcome run_image_experiment(const ExperimentConfig& c) {
    const auto t0 = Clock::now();
    ExperimentOutcome out;
    out.config = c;

    std::vector<ImageSample> samples;
    std::size_t side = c.dataset.side;
    if (c.dataset.type == "synthetic") {
        samples = synth_images(c.dataset.count, c.dataset.side, c.dataset.classes, c.seed);
    } else if (c.dataset.type == "idx") {
        samples = load_idx_images(c.dataset.images, c.dataset.labels, c.dataset.normalize);
        side = static_cast<std::size_t>(std::lround(std::sqrt(double(samples.at(0).pixels.size()))));
    } else if (c.dataset.type == "image_dir") {
        samples = load_image_dir(c.dataset.path, c.dataset.side);
    } else {
        throw ConfigError("dataset.type '" + c.dataset.type + "' is not an image source");
    }
    if (samples.empty()) throw ConfigError("dataset is empty");
    const std::size_t d = samples[0].pixels.size();
    if (side * side != d) throw ConfigError("images are not square; ssim needs side x side");
    std::size_t classes = 0;
    for (const auto& s : samples) classes = std::max(classes, s.label + 1);

    auto split = split_for_attack(samples, c.aux_fraction, c.n_clients, c.victim, c.seed,
                                  c.victim_class_filter >= 0
                                      ? std::optional<std::size_t>(c.victim_class_filter)
                                      : std::nullopt);

    auto cdf = estimate_cdf(split.auxiliary);
    if (cdf.degenerate()) {
        out.warnings.push_back("auxiliary brightness distribution is degenerate: all samples will "
                               "collide in one bin");
    }
    if (c.aux_include_bound) pad_with_upper_bound(cdf, 1.0);
    out.bins = bin_vector(cdf, c.k);
    const double w2s = effective_w2_scale(c);
    const CraftedModule victim_module = craft_linear_leakage(out.bins, d, w2s);
    const CraftedModule honest_module = craft_zero_gradient(out.bins, d, w2s);
    out.victim_module = victim_module;

    std::vector<std::vector<double>> aux_inputs;
    aux_inputs.reserve(split.auxiliary.size());
    for (const auto& s : split.auxiliary) aux_inputs.push_back(s.pixels);
    const Head head = build_head(c, d, classes, victim_module, aux_inputs);

    auto bright = [](const ImageSample& s) { return brightness(s.pixels); };
    out.truth_images = select_victim_batch(split.victim_pool, c.batch, c.victim_batch, out.bins, bright,
                                           c.seed, out.warnings);
    if (out.truth_images.empty() && !split.victim_pool.empty()) {
        throw ConfigError("victim batch selection produced no samples");
    }
    for (std::size_t client = 0; client < c.n_clients; ++client) {
        if (client == c.victim) {
            split.client_pools[client] = out.truth_images;
        } else {
            split.client_pools[client] = trim_pool(split.client_pools[client], c.batch, c.seed, client);
        }
    }
    split.victim_pool = out.truth_images;

    const auto round_start = Clock::now();
    auto result = run_round(round_config_of(c), split, victim_module, honest_module, head);
    out.round_ms = ms_since(round_start);
    out.view = std::move(result.view);
    out.transcript = std::move(result.transcript);

    const auto rec_start = Clock::now();
    out.recovered = reconstruct_from_view(out.view, Modality::image);
    out.reconstruct_ms = ms_since(rec_start);

    // Metric truth: optionally drop samples above the top threshold, whose
    // bin accumulates the whole out-of-range tail.
    std::vector<ImageSample> truth = out.truth_images;
    if (c.exclude_top_bin) {
        std::erase_if(truth, [&](const ImageSample& s) {
            return bin_index(out.bins, brightness(s.pixels)) == out.bins.k();
        });
    }
    const auto metrics_start = Clock::now();
    out.match = match_and_rate(out.recovered, truth, side, c.thresholds);
    annotate_collisions(out.recovered, out.match);
    out.metrics_ms = ms_since(metrics_start);
    out.side = side;
    out.total_ms = ms_since(t0);
    return out;
}

ExperimentOutcome run_text_experiment(const ExperimentConfig& c) {
    const auto t0 = Clock::now();
    ExperimentOutcome out;
    out.config = c;

    std::vector<TextRecord> records;
    Vocabulary vocab;
    if (c.dataset.type == "synthetic_text") {
        std::tie(records, vocab) = synth_text(c.dataset.count, c.dataset.classes, c.dataset.vocab,
                                              c.dataset.avg_words, c.dataset.max_len, c.seed);
    } else if (c.dataset.type == "text_corpus") {
        std::tie(records, vocab) = load_text_corpus(c.dataset.path, c.dataset.max_len);
    } else {
        throw ConfigError("dataset.type '" + c.dataset.type + "' is not a text source");
    }
    if (records.empty()) throw ConfigError("corpus is empty");
    const std::size_t l = c.dataset.max_len;
    const std::size_t e = c.dataset.embed_dim;
    const std::size_t flat_dim = l * e;
    std::size_t classes = 0;
    for (const auto& r : records) classes = std::max(classes, r.label + 1);

    auto split = split_for_attack(records, c.aux_fraction, c.n_clients, c.victim, c.seed,
                                  c.victim_class_filter >= 0
                                      ? std::optional<std::size_t>(c.victim_class_filter)
                                      : std::nullopt);

    const Matrix embedding = make_embedding(vocab.size(), e, c.seed);
    out.embedding = embedding;
    out.vocab = vocab;

    auto cdf = estimate_cdf(split.auxiliary, embedding, l);
    if (cdf.degenerate()) {
        out.warnings.push_back("auxiliary embedding-brightness distribution is degenerate");
    }
    if (c.aux_include_bound) pad_with_upper_bound(cdf, embedding_brightness_bound(embedding));
    out.bins = bin_vector(cdf, c.k);
    const double w2s = effective_w2_scale(c);
    const CraftedModule victim_module =
        craft_linear_leakage(out.bins, flat_dim, w2s, Insertion::post_embedding);
    const CraftedModule honest_module =
        craft_zero_gradient(out.bins, flat_dim, w2s, Insertion::post_embedding);
    out.victim_module = victim_module;

    TextModel probe(embedding, l, random_head(flat_dim, c.head_hidden, std::max<std::size_t>(classes, 2),
                                              c.seed));
    std::vector<std::vector<double>> aux_inputs;
    aux_inputs.reserve(split.auxiliary.size());
    for (const auto& r : split.auxiliary) aux_inputs.push_back(probe.embed_record(r));
    const Head head = build_head(c, flat_dim, classes, victim_module, aux_inputs);

    auto bright = [&](const TextRecord& r) { return brightness(probe.embed_record(r)); };
    out.truth_texts = select_victim_batch(split.victim_pool, c.batch, c.victim_batch, out.bins, bright,
                                          c.seed, out.warnings);
    for (std::size_t client = 0; client < c.n_clients; ++client) {
        if (client == c.victim) {
            split.client_pools[client] = out.truth_texts;
        } else {
            split.client_pools[client] = trim_pool(split.client_pools[client], c.batch, c.seed, client);
        }
    }
    split.victim_pool = out.truth_texts;

    const auto round_start = Clock::now();
    auto result = run_round(round_config_of(c), split, victim_module, honest_module, head, embedding, l);
    out.round_ms = ms_since(round_start);
    out.view = std::move(result.view);
    out.transcript = std::move(result.transcript);

    const auto rec_start = Clock::now();
    out.recovered = reconstruct_from_view(out.view, Modality::text);
    out.text_out = recover_text_batch(out.recovered, embedding, vocab);
    out.reconstruct_ms = ms_since(rec_start);

    std::vector<TextRecord> truth = out.truth_texts;
    if (c.exclude_top_bin) {
        std::erase_if(truth, [&](const TextRecord& r) {
            return bin_index(out.bins, bright(r)) == out.bins.k();
        });
    }
    const auto metrics_start = Clock::now();
    out.match = match_and_rate(out.text_out, truth, c.thresholds);
    annotate_collisions(out.recovered, out.match);
    out.metrics_ms = ms_since(metrics_start);
    out.total_ms = ms_since(t0);
    return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
    validate(config);
    return config.modality == Modality::image ? run_image_experiment(config)
                                              : run_text_experiment(config);
}

// ---------------------------------------------------------------------------
// Reporting

json ExperimentOutcome::summary() const {
    std::size_t successes = 0;
    for (const auto& p : match.pairs) successes += p.success ? 1 : 0;
    std::size_t suspects = 0;
    for (const auto& item : recovered.items) {
        suspects += item.status == BinStatus::collision_suspect ? 1 : 0;
    }

    json results;
    results["rate"] = match.rate;
    results["per_sample_rate"] = match.per_sample_rate;
    results["matched_pairs"] = match.pairs.size();
    results["successes"] = successes;
    results["mean_psnr_success"] = match.mean_psnr_success;
    results["mean_ssim_success"] = match.mean_ssim_success;
    results["mean_wer_success"] = match.mean_wer_success;
    results["mean_psnr_all"] = match.mean_psnr_all;
    results["mean_ssim_all"] = match.mean_ssim_all;
    results["bins_total"] = recovered.items.size();
    results["bins_occupied"] = recovered.occupied();
    results["collision_suspects"] = suspects;
    results["victim_batch_size"] =
        config.modality == Modality::image ? truth_images.size() : truth_texts.size();

    json j;
    j["config"] = resolved_json(config);
    j["config_hash"] = config_hash(config);
    j["results"] = results;
    j["warnings"] = warnings;
    j["timing"] = {{"round_ms", round_ms},
                   {"reconstruct_ms", reconstruct_ms},
                   {"metrics_ms", metrics_ms},
                   {"total_ms", total_ms}};
    return j;
}

void write_artifacts(const ExperimentOutcome& outcome, const fs::path& dir) {
    fs::create_directories(dir);

    {
        std::ofstream f(dir / "summary.json");
        if (!f) throw IoError((dir / "summary.json").string() + ": cannot write");
        f << outcome.summary().dump(2) << "\n";
    }
    {
        std::ofstream f(dir / "pairs.csv");
        f << "bin,source_id,psnr,ssim,wer,success\n";
        for (const auto& p : outcome.match.pairs) {
            f << p.bin << "," << p.source_id << "," << p.psnr << "," << p.ssim << "," << p.wer << ","
              << (p.success ? 1 : 0) << "\n";
        }
    }
    {
        json t;
        t["clients"] = json::array();
        for (const auto& cstat : outcome.transcript.clients) {
            t["clients"].push_back(
                {{"client", cstat.client}, {"samples", cstat.samples}, {"train_ms", cstat.train_ms}});
        }
        t["mask_ms"] = outcome.transcript.mask_ms;
        t["aggregate_ms"] = outcome.transcript.aggregate_ms;
        t["total_ms"] = outcome.transcript.total_ms;
        t["warnings"] = outcome.transcript.warnings;
        t["config"] = resolved_json(outcome.config);
        std::ofstream f(dir / "transcript.json");
        f << t.dump(2) << "\n";
    }
    save_flat_vector(dir / "aggregate.bin", outcome.view.aggregate, outcome.view.layout);
    save_param_stream(dir / "victim_module.bin", crafted_blocks(outcome.victim_module));

    const fs::path rec_dir = dir / "recovered";
    fs::create_directories(rec_dir);
    if (outcome.config.modality == Modality::image) {
        json manifest = json::array();
        for (const auto& item : outcome.recovered.items) {
            json entry;
            entry["bin"] = item.bin;
            entry["status"] = item.status == BinStatus::empty
                                  ? "empty"
                                  : (item.status == BinStatus::recovered ? "recovered"
                                                                         : "collision_suspect");
            entry["denom_mass"] = item.denom_mass;
            if (item.vec) {
                std::ostringstream name;
                name << "bin_" << std::setw(4) << std::setfill('0') << item.bin << ".pgm";
                write_pgm(rec_dir / name.str(), *item.vec, outcome.side);
                entry["file"] = name.str();
            }
            manifest.push_back(entry);
        }
        std::ofstream f(rec_dir / "manifest.json");
        f << manifest.dump(2) << "\n";
    } else {
        std::ofstream f(rec_dir / "recovered_text.txt");
        json diag = json::array();
        for (const auto& rec : outcome.text_out.records) {
            f << rec.text << "\n";
            diag.push_back({{"bin", rec.bin}, {"mean_distance", rec.mean_distance}});
        }
        std::ofstream df(rec_dir / "text_diagnostics.json");
        df << diag.dump(2) << "\n";
    }
}

fs::path cmd_run(const ExperimentConfig& config) {
    const auto outcome = run_experiment(config);
    const fs::path dir = fs::path(config.out_dir) / config_hash(config);
    write_artifacts(outcome, dir);
    return dir;
}

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& config, const std::string& axis,
                                const fs::path& csv_path) {
    const auto it = config.sweep.find(axis);
    if (it == config.sweep.end()) {
        throw ConfigError("sweep axis '" + axis + "' not present in config.sweep");
    }
    std::vector<SweepRow> rows;
    for (double value : it->second) {
        ExperimentConfig run_cfg = config;
        run_cfg.sweep.clear();
        if (axis == "k") {
            run_cfg.k = static_cast<std::size_t>(value);
        } else if (axis == "n_clients") {
            run_cfg.n_clients = static_cast<std::size_t>(value);
        } else if (axis == "local_epochs") {
            run_cfg.local_epochs = static_cast<std::size_t>(value);
        } else if (axis == "noniid") {
            run_cfg.victim_class_filter = static_cast<int>(value);
        } else {
            throw ConfigError("unknown sweep axis '" + axis + "'");
        }
        validate(run_cfg);
        const auto outcome = run_experiment(run_cfg);
        write_artifacts(outcome, fs::path(config.out_dir) / config_hash(run_cfg));
        rows.push_back({value, outcome.match.rate, outcome.match.mean_psnr_success,
                        outcome.match.mean_ssim_success, outcome.total_ms / 1000.0});
    }
    std::ofstream f(csv_path);
    if (!f) throw IoError(csv_path.string() + ": cannot write");
    f << "axis_value,rate,mean_psnr,mean_ssim,time_s\n";
    for (const auto& r : rows) {
        f << r.axis_value << "," << r.rate << "," << r.mean_psnr << "," << r.mean_ssim << ","
          << r.time_s << "\n";
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Inspect

std::string inspect_param_file(const fs::path& path) {
    const auto blocks = load_param_stream(path);
    std::ostringstream out;
    out << "blocks:\n";
    for (const auto& b : blocks) {
        out << "  " << b.name << "  " << b.value.rows() << " x " << b.value.cols() << "\n";
    }

    const Matrix* w1 = nullptr;
    const Matrix* b1 = nullptr;
    for (const auto& b : blocks) {
        if (b.name == "crafted.w1") w1 = &b.value;
        if (b.name == "crafted.b1") b1 = &b.value;
    }
    std::string kind = "none detected";
    if (w1 && b1 && b1->rows() == 1 && b1->cols() == w1->rows() && w1->cols() > 0) {
        const double expected = 1.0 / static_cast<double>(w1->cols());
        bool uniform_w1 = true;
        for (double v : w1->data()) {
            if (std::abs(v - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
                uniform_w1 = false;
                break;
            }
        }
        if (uniform_w1) {
            bool constant_b1 = true;
            bool nonincreasing_b1 = true;
            for (std::size_t j = 1; j < b1->cols(); ++j) {
                if ((*b1)(0, j) != (*b1)(0, 0)) constant_b1 = false;
                if ((*b1)(0, j) > (*b1)(0, j - 1)) nonincreasing_b1 = false;
            }
            if (constant_b1 && b1->cols() > 1) {
                kind = "zero_gradient";
            } else if (nonincreasing_b1) {
                kind = "linear_leakage";
            }
        }
        if (kind != "none detected") {
            out << "kind: " << kind << ", k=" << w1->rows() << ", d=" << w1->cols() << "\n";
            out << "bins (-b1):";
            const std::size_t k = b1->cols();
            for (std::size_t j = 0; j < std::min<std::size_t>(k, 4); ++j) out << " " << -(*b1)(0, j);
            if (k > 5) out << " ...";
            if (k > 4) out << " " << -(*b1)(0, k - 1);
            out << "\n";
            return out.str();
        }
    }
    out << "kind: " << kind << "\n";
    return out.str();
}

}  // namespace fedleak
