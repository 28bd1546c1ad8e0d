#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fedleak {

/// One grayscale image, flattened row-major, pixels normalized to [0,1].
struct ImageSample {
    std::vector<double> pixels;
    std::size_t label = 0;
    std::string source_id;
};

/// One tokenized text record, padded/truncated to a fixed length. Index 0 is
/// the pad token, index 1 the unknown token.
struct TextRecord {
    std::vector<std::size_t> tokens;
    std::size_t label = 0;
    std::string source_id;
};

struct Vocabulary {
    std::vector<std::string> token_strings;  // [0]=pad, [1]=unk, then first-seen order
    static constexpr std::size_t pad_index = 0;
    static constexpr std::size_t unknown_index = 1;

    std::size_t size() const { return token_strings.size(); }
    std::size_t lookup(const std::string& word) const;
};

/// Attack-experiment split: attacker-held auxiliary data, the target client's
/// pool, and one pool per client (the victim's slot holds its pool too, so
/// client_pools[victim] == victim_pool by construction).
template <typename Sample>
struct DatasetSplit {
    std::vector<Sample> auxiliary;
    std::vector<Sample> victim_pool;
    std::vector<std::vector<Sample>> client_pools;
};

using ImageSplit = DatasetSplit<ImageSample>;
using TextSplit = DatasetSplit<TextRecord>;

/// Mean of the vector components; the scalar feature that assigns a sample
/// to a recovery bin.
double brightness(const std::vector<double>& x);

/// IDX (big-endian) image/label pair loader. Magic numbers 0x00000803 and
/// 0x00000801. When `normalize` is set pixel bytes are divided by 255.
std::vector<ImageSample> load_idx_images(const std::filesystem::path& images_path,
                                         const std::filesystem::path& labels_path, bool normalize);

/// Loads a directory of 8-bit P5 PGM files laid out as one subdirectory per
/// class (labels assigned by sorted subdirectory name). Images are
/// center-cropped then nearest-neighbor resized to side x side.
std::vector<ImageSample> load_image_dir(const std::filesystem::path& dir, std::size_t side);

/// Writes samples as PGM files under dir/<class_name>/, quantizing to 8 bits.
void write_pgm_dir(const std::filesystem::path& dir, const std::vector<ImageSample>& samples,
                   std::size_t side);

void write_pgm(const std::filesystem::path& path, const std::vector<double>& pixels,
               std::size_t side);

/// Parses "<label>\t<text>" lines: whitespace tokenization, lowercased,
/// vocabulary in first-seen order after pad/unk, records padded or truncated
/// to max_len.
std::pair<std::vector<TextRecord>, Vocabulary> load_text_corpus(const std::filesystem::path& path,
                                                                std::size_t max_len);

/// Same parse applied to in-memory lines (used by the synthetic generator).
std::pair<std::vector<TextRecord>, Vocabulary> parse_text_corpus(const std::vector<std::string>& lines,
                                                                 std::size_t max_len);

/// Synthetic grayscale samples: class-dependent smooth background plus random
/// blobs and pixel noise, clipped to [0,1]. Deterministic per seed, with the
/// per-image base level spread over (0,1) so brightness quantiles are
/// well-populated.
std::vector<ImageSample> synth_images(std::size_t count, std::size_t side, std::size_t classes,
                                      std::uint64_t seed);

/// Synthetic text corpus: random-word records over a generated vocabulary,
/// with varying lengths around `avg_words`. Deterministic per seed.
std::pair<std::vector<TextRecord>, Vocabulary> synth_text(std::size_t count, std::size_t classes,
                                                          std::size_t vocab_words, std::size_t avg_words,
                                                          std::size_t max_len, std::uint64_t seed);

/// Disjoint shuffle-split into auxiliary and per-client pools. When
/// `victim_class_filter` is set the victim pool keeps only that class
/// (non-iid setting).
template <typename Sample>
DatasetSplit<Sample> split_for_attack(const std::vector<Sample>& samples, double aux_fraction,
                                      std::size_t clients, std::size_t victim, std::uint64_t seed,
                                      std::optional<std::size_t> victim_class_filter = std::nullopt);

}  // namespace fedleak
