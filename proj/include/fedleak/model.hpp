#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedleak/crafted_module.hpp"
#include "fedleak/data.hpp"
#include "fedleak/loss.hpp"
#include "fedleak/matrix.hpp"
#include "fedleak/param_io.hpp"

namespace fedleak {

struct ParamBlock {
    std::string name;
    Matrix value;
    Matrix grad;  // same shape as value

    ParamBlock(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
        grad = Matrix(value.rows(), value.cols());
    }
};

/// Two affine layers with ReLU: in -> hidden -> classes.
struct Head {
    Matrix w1, b1;  // hidden x in, 1 x hidden
    Matrix w2, b2;  // classes x hidden, 1 x classes
};

/// Random head initialization (uniform, scaled by fan-in).
Head random_head(std::size_t in, std::size_t hidden, std::size_t classes, std::uint64_t seed,
                 double weight_scale = 1.0);

/// Head initialization used by the attack-tuned published models. The
/// crafted block in front makes every coordinate of its output equal, so
/// the head is built around that single effective direction: alternating
/// fixed-sign rows keep the softmax unsaturated for in-range inputs while
/// guaranteeing a label-dependent, bounded-away-from-zero loss gradient on
/// every sample. `activation_center`/`activation_spread` are the attacker's
/// estimates (from the auxiliary set) of the crafted block's output-sum
/// location and range; `target_sat` caps the resulting logit spread.
Head attack_tuned_head(std::size_t in, std::size_t hidden, std::size_t classes,
                       double activation_center, double activation_spread, double target_sat = 1.0,
                       double beta = 0.5);

/// Image classifier: optional crafted block at the front, then the head.
/// Without a crafted block the head consumes the raw pixels.
class ImageModel {
public:
    ImageModel(std::size_t input_dim, Head head);

    void graft(const CraftedModule& module);

    double forward_backward(const std::vector<ImageSample>& batch, LossKind kind = LossKind::cross_entropy);
    double loss_only(const std::vector<ImageSample>& batch, LossKind kind = LossKind::cross_entropy);

    std::vector<ParamBlock>& blocks() { return blocks_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    std::size_t input_dim() const { return input_dim_; }
    bool has_crafted() const { return has_crafted_; }

private:
    Matrix assemble_batch(const std::vector<ImageSample>& batch, std::vector<std::size_t>& labels) const;

    std::size_t input_dim_;
    bool has_crafted_ = false;
    std::vector<ParamBlock> blocks_;  // canonical order
};

/// Text classifier: embedding lookup, optional crafted block on the
/// flattened l*e embedding vector, then the head.
class TextModel {
public:
    TextModel(std::size_t vocab, std::size_t embed_dim, std::size_t max_len, Head head,
              std::uint64_t embed_seed);
    TextModel(Matrix embedding, std::size_t max_len, Head head);

    void graft(const CraftedModule& module);

    double forward_backward(const std::vector<TextRecord>& batch, LossKind kind = LossKind::cross_entropy);
    double loss_only(const std::vector<TextRecord>& batch, LossKind kind = LossKind::cross_entropy);

    std::vector<ParamBlock>& blocks() { return blocks_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    const Matrix& embedding() const;
    std::size_t max_len() const { return max_len_; }
    std::size_t embed_dim() const { return embed_dim_; }
    std::size_t flat_dim() const { return max_len_ * embed_dim_; }
    bool has_crafted() const { return has_crafted_; }

    /// Flattened embedding vector of one record under the current table.
    std::vector<double> embed_record(const TextRecord& record) const;

private:
    Matrix assemble_batch(const std::vector<TextRecord>& batch, std::vector<std::size_t>& labels) const;

    std::size_t embed_dim_;
    std::size_t max_len_;
    bool has_crafted_ = false;
    std::vector<ParamBlock> blocks_;
};

/// Deterministic embedding table, entries uniform in ±1/sqrt(e).
Matrix make_embedding(std::size_t vocab, std::size_t embed_dim, std::uint64_t seed);

/// Per-client model update: flattened (theta_after - theta_before) over all
/// blocks in canonical order.
using UpdateVector = std::vector<double>;

BlockLayout layout_of(const std::vector<ParamBlock>& blocks);
std::vector<double> flatten_values(const std::vector<ParamBlock>& blocks);
std::vector<double> flatten_grads(const std::vector<ParamBlock>& blocks);

/// Plain SGD for `epochs` passes over `data` (batch_size 0 means full batch).
/// Returns the flattened parameter delta and restores the model to its
/// received state afterward (clients are stateless between rounds).
template <typename Model, typename Sample>
UpdateVector local_train(Model& model, const std::vector<Sample>& data, std::size_t epochs,
                         std::size_t batch_size, double lr, std::uint64_t seed,
                         LossKind kind = LossKind::cross_entropy);

/// Attacker's gradient estimate from an update: -update / (lr * epochs).
/// Exact when epochs == 1; the averaged per-step gradient otherwise.
std::vector<double> estimate_gradient(const UpdateVector& update, std::size_t epochs, double lr);

/// Model parameter save/load in the flat parameter stream format.
template <typename Model>
void save_model(const std::filesystem::path& path, const Model& model);

std::vector<NamedMatrix> crafted_blocks(const CraftedModule& module);

}  // namespace fedleak
