#include "fedleak/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "fedleak/error.hpp"
#include "fedleak/rng.hpp"

namespace fedleak {

namespace fs = std::filesystem;

std::size_t Vocabulary::lookup(const std::string& word) const {
    for (std::size_t i = 0; i < token_strings.size(); ++i) {
        if (token_strings[i] == word) return i;
    }
    return unknown_index;
}

double brightness(const std::vector<double>& x) {
    if (x.empty()) throw ShapeError("brightness of empty vector");
    double sum = 0.0;
    for (double v : x) sum += v;
    return sum / static_cast<double>(x.size());
}

// ---------------------------------------------------------------------------
// IDX loader

namespace {

std::uint32_t read_be32(std::ifstream& in, const fs::path& path, std::size_t offset) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) {
        throw FormatError(path.string() + ": truncated at byte offset " + std::to_string(offset));
    }
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) | (std::uint32_t(buf[2]) << 8) |
           std::uint32_t(buf[3]);
}

}  // namespace

std::vector<ImageSample> load_idx_images(const fs::path& images_path, const fs::path& labels_path,
                                         bool normalize) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError(images_path.string() + ": cannot open");
    const std::uint32_t img_magic = read_be32(img, images_path, 0);
    if (img_magic != 0x00000803u) {
        throw FormatError(images_path.string() + ": bad magic at byte offset 0 (expected 0x00000803)");
    }
    const std::uint32_t count = read_be32(img, images_path, 4);
    const std::uint32_t rows = read_be32(img, images_path, 8);
    const std::uint32_t cols = read_be32(img, images_path, 12);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError(labels_path.string() + ": cannot open");
    const std::uint32_t lab_magic = read_be32(lab, labels_path, 0);
    if (lab_magic != 0x00000801u) {
        throw FormatError(labels_path.string() + ": bad magic at byte offset 0 (expected 0x00000801)");
    }
    const std::uint32_t lab_count = read_be32(lab, labels_path, 4);
    if (lab_count != count) {
        throw FormatError(labels_path.string() + ": label count " + std::to_string(lab_count) +
                          " does not match image count " + std::to_string(count));
    }

    const std::size_t dim = std::size_t(rows) * cols;
    std::vector<ImageSample> out;
    out.reserve(count);
    std::vector<unsigned char> buf(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
        if (!img) {
            throw FormatError(images_path.string() + ": truncated payload at byte offset " +
                              std::to_string(16 + std::size_t(i) * dim));
        }
        ImageSample s;
        s.pixels.resize(dim);
        for (std::size_t p = 0; p < dim; ++p) {
            s.pixels[p] = normalize ? buf[p] / 255.0 : double(buf[p]);
        }
        char lbl = 0;
        lab.read(&lbl, 1);
        if (!lab) {
            throw FormatError(labels_path.string() + ": truncated payload at byte offset " +
                              std::to_string(8 + i));
        }
        s.label = static_cast<unsigned char>(lbl);
        s.source_id = "idx:" + std::to_string(i);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// PGM

namespace {

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
        } else if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            break;
        }
    }
    while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
    return tok;
}

std::vector<double> load_pgm(const fs::path& path, std::size_t& width, std::size_t& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open");
    if (pgm_token(in) != "P5") throw FormatError(path.string() + ": not a P5 PGM file");
    const std::string w = pgm_token(in), h = pgm_token(in), maxval = pgm_token(in);
    if (w.empty() || h.empty() || maxval.empty()) {
        throw FormatError(path.string() + ": truncated PGM header");
    }
    if (maxval != "255") {
        throw FormatError(path.string() + ": unsupported maxval " + maxval + " (expected 255)");
    }
    width = std::stoul(w);
    height = std::stoul(h);
    std::vector<unsigned char> raw(width * height);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw FormatError(path.string() + ": truncated pixel payload");
    std::vector<double> px(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) px[i] = raw[i] / 255.0;
    return px;
}

// Center-crop to square then nearest-neighbor resample to side x side.
std::vector<double> crop_resize(const std::vector<double>& px, std::size_t w, std::size_t h,
                                std::size_t side) {
    const std::size_t square = std::min(w, h);
    const std::size_t x0 = (w - square) / 2;
    const std::size_t y0 = (h - square) / 2;
    std::vector<double> out(side * side);
    for (std::size_t r = 0; r < side; ++r) {
        const std::size_t sr = y0 + r * square / side;
        for (std::size_t c = 0; c < side; ++c) {
            const std::size_t sc = x0 + c * square / side;
            out[r * side + c] = px[sr * w + sc];
        }
    }
    return out;
}

}  // namespace

std::vector<ImageSample> load_image_dir(const fs::path& dir, std::size_t side) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());

    std::vector<ImageSample> out;
    for (std::size_t label = 0; label < class_dirs.size(); ++label) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(class_dirs[label])) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            std::size_t w = 0, h = 0;
            const auto px = load_pgm(file, w, h);
            ImageSample s;
            s.pixels = (w == side && h == side) ? px : crop_resize(px, w, h, side);
            s.label = label;
            s.source_id = file.string();
            out.push_back(std::move(s));
        }
    }
    return out;
}

void write_pgm(const fs::path& path, const std::vector<double>& pixels, std::size_t side) {
    if (pixels.size() != side * side) {
        throw ShapeError("write_pgm: " + std::to_string(pixels.size()) + " pixels is not " +
                         std::to_string(side) + "x" + std::to_string(side));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << "P5\n" << side << " " << side << "\n255\n";
    for (double v : pixels) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        out.put(static_cast<char>(std::lround(clamped * 255.0)));
    }
}

void write_pgm_dir(const fs::path& dir, const std::vector<ImageSample>& samples, std::size_t side) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const fs::path class_dir = dir / ("class_" + std::to_string(samples[i].label));
        fs::create_directories(class_dir);
        std::ostringstream name;
        name << "img_" << std::setw(6) << std::setfill('0') << i << ".pgm";
        write_pgm(class_dir / name.str(), samples[i].pixels, side);
    }
}

// ---------------------------------------------------------------------------
// Text corpus

namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
    std::vector<std::string> words;
    std::string word;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!word.empty()) words.push_back(std::move(word));
            word.clear();
        } else {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!word.empty()) words.push_back(std::move(word));
    return words;
}

}  // namespace

std::pair<std::vector<TextRecord>, Vocabulary> parse_text_corpus(const std::vector<std::string>& lines,
                                                                 std::size_t max_len) {
    Vocabulary vocab;
    vocab.token_strings = {"<pad>", "<unk>"};
    std::map<std::string, std::size_t> index;

    std::vector<TextRecord> records;
    for (std::size_t line_no = 0; line_no < lines.size(); ++line_no) {
        const std::string& line = lines[line_no];
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw FormatError("text corpus line " + std::to_string(line_no + 1) +
                              ": missing tab separator");
        }
        TextRecord rec;
        try {
            rec.label = std::stoul(line.substr(0, tab));
        } catch (const std::exception&) {
            throw FormatError("text corpus line " + std::to_string(line_no + 1) + ": bad label field");
        }
        const auto words = tokenize_lower(line.substr(tab + 1));
        rec.tokens.reserve(max_len);
        for (const auto& w : words) {
            auto it = index.find(w);
            std::size_t id;
            if (it == index.end()) {
                id = vocab.token_strings.size();
                vocab.token_strings.push_back(w);
                index.emplace(w, id);
            } else {
                id = it->second;
            }
            if (rec.tokens.size() < max_len) rec.tokens.push_back(id);
        }
        rec.tokens.resize(max_len, Vocabulary::pad_index);
        rec.source_id = "text:" + std::to_string(line_no);
        records.push_back(std::move(rec));
    }
    return {std::move(records), std::move(vocab)};
}

std::pair<std::vector<TextRecord>, Vocabulary> load_text_corpus(const fs::path& path,
                                                                std::size_t max_len) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string() + ": cannot open");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return parse_text_corpus(lines, max_len);
}

// ---------------------------------------------------------------------------
// Synthetic generators

std::vector<ImageSample> synth_images(std::size_t count, std::size_t side, std::size_t classes,
                                      std::uint64_t seed) {
    Rng rng(mix_seed(seed, {kSynthStream}));
    std::vector<ImageSample> out;
    out.reserve(count);
    const double sided = static_cast<double>(side);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t label = classes > 0 ? static_cast<std::size_t>(rng.below(classes)) : 0;
        // Dominant brightness driver, spread over (0,1).
        const double level = rng.uniform(0.08, 0.92);
        // Class-dependent smooth gradient, zero-mean across the image.
        const double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(label) /
                             std::max<std::size_t>(classes, 1);
        const double gx = std::cos(angle), gy = std::sin(angle);
        const double grad_amp = rng.uniform(0.05, 0.18);

        std::vector<double> px(side * side, level);
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) {
                const double u = (c + 0.5) / sided - 0.5;
                const double v = (r + 0.5) / sided - 0.5;
                px[r * side + c] += grad_amp * (gx * u + gy * v) * 2.0;
            }
        }
        // A few gaussian blobs.
        const std::size_t blobs = 1 + rng.below(3);
        for (std::size_t b = 0; b < blobs; ++b) {
            const double cx = rng.uniform(0.15, 0.85) * sided;
            const double cy = rng.uniform(0.15, 0.85) * sided;
            const double sigma = rng.uniform(0.08, 0.22) * sided;
            const double amp = rng.uniform(-0.25, 0.25);
            for (std::size_t r = 0; r < side; ++r) {
                for (std::size_t c = 0; c < side; ++c) {
                    const double dx = c - cx, dy = r - cy;
                    px[r * side + c] += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                }
            }
        }
        for (double& v : px) {
            v += rng.uniform(-0.02, 0.02);
            v = std::clamp(v, 0.0, 1.0);
        }
        out.push_back(ImageSample{std::move(px), label, "synth:" + std::to_string(i)});
    }
    return out;
}

std::pair<std::vector<TextRecord>, Vocabulary> synth_text(std::size_t count, std::size_t classes,
                                                          std::size_t vocab_words, std::size_t avg_words,
                                                          std::size_t max_len, std::uint64_t seed) {
    Rng rng(mix_seed(seed, {kSynthStream, 0x7465787400ULL}));
    std::vector<std::string> lines;
    lines.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t label = classes > 0 ? static_cast<std::size_t>(rng.below(classes)) : 0;
        const std::size_t lo = std::max<std::size_t>(1, avg_words / 2);
        const std::size_t words = lo + rng.below(avg_words + avg_words / 2 - lo + 1);
        std::ostringstream line;
        line << label << '\t';
        for (std::size_t w = 0; w < words; ++w) {
            if (w) line << ' ';
            line << 'w' << rng.below(vocab_words);
        }
        lines.push_back(line.str());
    }
    auto [records, vocab] = parse_text_corpus(lines, max_len);
    for (std::size_t i = 0; i < records.size(); ++i) records[i].source_id = "synthtext:" + std::to_string(i);
    return {std::move(records), std::move(vocab)};
}

// ---------------------------------------------------------------------------
// Splitting

template <typename Sample>
DatasetSplit<Sample> split_for_attack(const std::vector<Sample>& samples, double aux_fraction,
                                      std::size_t clients, std::size_t victim, std::uint64_t seed,
                                      std::optional<std::size_t> victim_class_filter) {
    if (aux_fraction <= 0.0 || aux_fraction >= 1.0) {
        throw ConfigError("aux_fraction must lie in (0,1), got " + std::to_string(aux_fraction));
    }
    if (clients < 1) throw ConfigError("need at least one client");
    if (victim >= clients) {
        throw IndexError("victim " + std::to_string(victim) + " out of range for " +
                         std::to_string(clients) + " clients");
    }

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, {kSplitStream}));
    shuffle(order, rng);

    const std::size_t aux_count = static_cast<std::size_t>(aux_fraction * samples.size());
    DatasetSplit<Sample> split;
    split.auxiliary.reserve(aux_count);
    for (std::size_t i = 0; i < aux_count; ++i) split.auxiliary.push_back(samples[order[i]]);

    const std::size_t rest = samples.size() - aux_count;
    const std::size_t base = rest / clients;
    const std::size_t extra = rest % clients;
    split.client_pools.resize(clients);
    std::size_t cursor = aux_count;
    for (std::size_t c = 0; c < clients; ++c) {
        const std::size_t take = base + (c < extra ? 1 : 0);
        auto& pool = split.client_pools[c];
        pool.reserve(take);
        for (std::size_t i = 0; i < take; ++i) pool.push_back(samples[order[cursor++]]);
    }
    if (victim_class_filter) {
        auto& pool = split.client_pools[victim];
        std::erase_if(pool, [&](const Sample& s) { return s.label != *victim_class_filter; });
    }
    split.victim_pool = split.client_pools[victim];
    return split;
}

template DatasetSplit<ImageSample> split_for_attack(const std::vector<ImageSample>&, double, std::size_t,
                                                    std::size_t, std::uint64_t,
                                                    std::optional<std::size_t>);
template DatasetSplit<TextRecord> split_for_attack(const std::vector<TextRecord>&, double, std::size_t,
                                                   std::size_t, std::uint64_t,
                                                   std::optional<std::size_t>);

}  // namespace fedleak
