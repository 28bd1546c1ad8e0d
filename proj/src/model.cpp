#include "fedleak/model.hpp"

#include <algorithm>
#include <cmath>

#include "fedleak/error.hpp"
#include "fedleak/rng.hpp"

namespace fedleak {

Head random_head(std::size_t in, std::size_t hidden, std::size_t classes, std::uint64_t seed,
                 double weight_scale) {
    Rng rng(mix_seed(seed, {kModelStream}));
    auto fill = [&](Matrix& m, std::size_t fan_in) {
        const double bound = weight_scale / std::sqrt(static_cast<double>(fan_in));
        for (double& x : m.data()) x = rng.uniform(-bound, bound);
    };
    Head head;
    head.w1 = Matrix(hidden, in);
    fill(head.w1, in);
    head.b1 = Matrix(1, hidden);
    head.w2 = Matrix(classes, hidden);
    fill(head.w2, hidden);
    head.b2 = Matrix(1, classes);
    return head;
}

Head attack_tuned_head(std::size_t in, std::size_t hidden, std::size_t classes,
                       double activation_center, double activation_spread, double target_sat,
                       double beta) {
    // Class weights: sum to zero, none zero, max magnitude 1 so that the
    // loss gradient projected on them is at least 1/(classes-1) in magnitude
    // whatever the label.
    std::vector<double> omega(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        omega[c] = (c == 0) ? -1.0 : 1.0 / static_cast<double>(classes - 1);
    }
    const double eta = target_sat / std::max(beta * hidden * activation_spread, 1e-9);

    Head head;
    head.w1 = Matrix(hidden, in);
    head.b1 = Matrix(1, hidden);
    head.w2 = Matrix(classes, hidden);
    head.b2 = Matrix(1, classes);
    for (std::size_t j = 0; j < hidden; ++j) {
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t r = 0; r < in; ++r) head.w1(j, r) = eta * sign;
        // Centering keeps every hidden unit active for in-range inputs.
        head.b1(0, j) = 1.0 - eta * sign * activation_center;
        for (std::size_t c = 0; c < classes; ++c) head.w2(c, j) = beta * sign * omega[c];
    }
    return head;
}

namespace {

std::vector<ParamBlock> head_blocks(Head head) {
    std::vector<ParamBlock> blocks;
    blocks.emplace_back("head.w1", std::move(head.w1));
    blocks.emplace_back("head.b1", std::move(head.b1));
    blocks.emplace_back("head.w2", std::move(head.w2));
    blocks.emplace_back("head.b2", std::move(head.b2));
    return blocks;
}

void insert_crafted(std::vector<ParamBlock>& blocks, const CraftedModule& module) {
    std::vector<ParamBlock> crafted;
    crafted.emplace_back("crafted.w1", module.w1);
    crafted.emplace_back("crafted.b1", module.b1);
    crafted.emplace_back("crafted.w2", module.w2);
    crafted.emplace_back("crafted.b2", module.b2);
    blocks.insert(blocks.begin(), std::make_move_iterator(crafted.begin()),
                  std::make_move_iterator(crafted.end()));
}

struct ForwardResult {
    double loss = 0.0;
    Matrix dlogits;
};

// Shared forward(+backward) over an assembled input matrix. Blocks are
// addressed positionally: [crafted.w1 b1 w2 b2]? [embedding]? head.w1 b1 w2 b2.
double run_network(std::vector<ParamBlock>& blocks, bool has_crafted, std::size_t head_base,
                   const Matrix& input, const std::vector<std::size_t>& labels, LossKind kind,
                   bool want_grads, Matrix* input_grad = nullptr) {
    const Matrix* head_in = &input;
    Matrix y1, a1, y2;
    if (has_crafted) {
        y1 = add_row_broadcast(matmul(input, transpose(blocks[0].value)), blocks[1].value);
        a1 = relu(y1);
        y2 = add_row_broadcast(matmul(a1, transpose(blocks[2].value)), blocks[3].value);
        head_in = &y2;
    }
    Matrix& hw1 = blocks[head_base].value;
    Matrix& hb1 = blocks[head_base + 1].value;
    Matrix& hw2 = blocks[head_base + 2].value;
    Matrix& hb2 = blocks[head_base + 3].value;

    Matrix z1 = add_row_broadcast(matmul(*head_in, transpose(hw1)), hb1);
    Matrix r1 = relu(z1);
    Matrix logits = add_row_broadcast(matmul(r1, transpose(hw2)), hb2);
    auto [loss, dlogits] = batch_loss(logits, labels, kind);
    if (!want_grads) return loss;

    blocks[head_base + 2].grad = matmul(transpose(dlogits), r1);
    blocks[head_base + 3].grad = col_sums(dlogits);
    Matrix dz1 = hadamard(matmul(dlogits, hw2), relu_mask(z1));
    blocks[head_base].grad = matmul(transpose(dz1), *head_in);
    blocks[head_base + 1].grad = col_sums(dz1);
    Matrix dhead_in = matmul(dz1, hw1);

    if (has_crafted) {
        blocks[2].grad = matmul(transpose(dhead_in), a1);
        blocks[3].grad = col_sums(dhead_in);
        Matrix dy1 = hadamard(matmul(dhead_in, blocks[2].value), relu_mask(y1));
        blocks[0].grad = matmul(transpose(dy1), input);
        blocks[1].grad = col_sums(dy1);
        if (input_grad) *input_grad = matmul(dy1, blocks[0].value);
    } else if (input_grad) {
        *input_grad = std::move(dhead_in);
    }
    return loss;
}

void validate_graft(const CraftedModule& module, Insertion expected, std::size_t dim) {
    if (module.insertion != expected) {
        throw ShapeError("crafted module insertion point does not match this model family");
    }
    if (module.input_dim() != dim) {
        throw ShapeError("crafted module input dim " + std::to_string(module.input_dim()) +
                         " does not match model input dim " + std::to_string(dim));
    }
    if (module.w2.rows() != dim || module.w2.cols() != module.bins()) {
        throw ShapeError("crafted module w2 must be d x k");
    }
    if (module.b1.cols() != module.bins() || module.b2.cols() != dim) {
        throw ShapeError("crafted module bias shapes inconsistent");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ImageModel

ImageModel::ImageModel(std::size_t input_dim, Head head) : input_dim_(input_dim) {
    blocks_ = head_blocks(std::move(head));
    if (blocks_[0].value.cols() != input_dim_) {
        throw ShapeError("head input dim does not match image dim");
    }
}

void ImageModel::graft(const CraftedModule& module) {
    validate_graft(module, Insertion::image_front, input_dim_);
    if (module.w2.rows() != input_dim_) {
        throw ShapeError("crafted module output dim must equal image dim");
    }
    if (has_crafted_) blocks_.erase(blocks_.begin(), blocks_.begin() + 4);
    insert_crafted(blocks_, module);
    has_crafted_ = true;
}

Matrix ImageModel::assemble_batch(const std::vector<ImageSample>& batch,
                                  std::vector<std::size_t>& labels) const {
    if (batch.empty()) throw ConfigError("empty batch");
    Matrix x(batch.size(), input_dim_);
    labels.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].pixels.size() != input_dim_) {
            throw ShapeError("sample " + batch[i].source_id + " has " +
                             std::to_string(batch[i].pixels.size()) + " pixels, expected " +
                             std::to_string(input_dim_));
        }
        std::copy(batch[i].pixels.begin(), batch[i].pixels.end(), x.row(i).begin());
        labels[i] = batch[i].label;
    }
    return x;
}

double ImageModel::forward_backward(const std::vector<ImageSample>& batch, LossKind kind) {
    std::vector<std::size_t> labels;
    const Matrix x = assemble_batch(batch, labels);
    return run_network(blocks_, has_crafted_, has_crafted_ ? 4 : 0, x, labels, kind, true);
}

double ImageModel::loss_only(const std::vector<ImageSample>& batch, LossKind kind) {
    std::vector<std::size_t> labels;
    const Matrix x = assemble_batch(batch, labels);
    return run_network(blocks_, has_crafted_, has_crafted_ ? 4 : 0, x, labels, kind, false);
}

// ---------------------------------------------------------------------------
// TextModel

Matrix make_embedding(std::size_t vocab, std::size_t embed_dim, std::uint64_t seed) {
    Rng rng(mix_seed(seed, {kEmbeddingStream}));
    Matrix table(vocab, embed_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    for (double& x : table.data()) x = rng.uniform(-bound, bound);
    return table;
}

TextModel::TextModel(std::size_t vocab, std::size_t embed_dim, std::size_t max_len, Head head,
                     std::uint64_t embed_seed)
    : TextModel(make_embedding(vocab, embed_dim, embed_seed), max_len, std::move(head)) {}

TextModel::TextModel(Matrix embedding, std::size_t max_len, Head head)
    : embed_dim_(embedding.cols()), max_len_(max_len) {
    blocks_.emplace_back("embedding", std::move(embedding));
    auto head_b = head_blocks(std::move(head));
    if (head_b[0].value.cols() != flat_dim()) {
        throw ShapeError("head input dim does not match flattened embedding dim");
    }
    for (auto& b : head_b) blocks_.push_back(std::move(b));
}

void TextModel::graft(const CraftedModule& module) {
    validate_graft(module, Insertion::post_embedding, flat_dim());
    if (has_crafted_) blocks_.erase(blocks_.begin(), blocks_.begin() + 4);
    insert_crafted(blocks_, module);
    has_crafted_ = true;
}

const Matrix& TextModel::embedding() const { return blocks_[has_crafted_ ? 4 : 0].value; }

std::vector<double> TextModel::embed_record(const TextRecord& record) const {
    const Matrix& table = embedding();
    std::vector<double> flat(flat_dim());
    for (std::size_t p = 0; p < max_len_; ++p) {
        const auto row = table.row(record.tokens[p]);
        std::copy(row.begin(), row.end(), flat.begin() + p * embed_dim_);
    }
    return flat;
}

Matrix TextModel::assemble_batch(const std::vector<TextRecord>& batch,
                                 std::vector<std::size_t>& labels) const {
    if (batch.empty()) throw ConfigError("empty batch");
    const Matrix& table = embedding();
    Matrix z(batch.size(), flat_dim());
    labels.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].tokens.size() != max_len_) {
            throw ShapeError("record " + batch[i].source_id + " has " +
                             std::to_string(batch[i].tokens.size()) + " tokens, expected " +
                             std::to_string(max_len_));
        }
        for (std::size_t p = 0; p < max_len_; ++p) {
            const std::size_t tok = batch[i].tokens[p];
            if (tok >= table.rows()) {
                throw IndexError("token " + std::to_string(tok) + " outside vocabulary");
            }
            const auto row = table.row(tok);
            std::copy(row.begin(), row.end(), z.row(i).begin() + p * embed_dim_);
        }
        labels[i] = batch[i].label;
    }
    return z;
}

double TextModel::forward_backward(const std::vector<TextRecord>& batch, LossKind kind) {
    std::vector<std::size_t> labels;
    const Matrix z = assemble_batch(batch, labels);
    const std::size_t embed_idx = has_crafted_ ? 4 : 0;
    Matrix dz;
    const double loss = run_network(blocks_, has_crafted_, embed_idx + 1, z, labels, kind, true, &dz);

    // Embedding gradient: accumulate each position's chunk into its token row.
    Matrix& egrad = blocks_[embed_idx].grad;
    egrad = Matrix(egrad.rows(), egrad.cols());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t p = 0; p < max_len_; ++p) {
            double* dst = egrad.row(batch[i].tokens[p]).data();
            const double* src = dz.row(i).data() + p * embed_dim_;
            for (std::size_t j = 0; j < embed_dim_; ++j) dst[j] += src[j];
        }
    }
    return loss;
}

double TextModel::loss_only(const std::vector<TextRecord>& batch, LossKind kind) {
    std::vector<std::size_t> labels;
    const Matrix z = assemble_batch(batch, labels);
    return run_network(blocks_, has_crafted_, (has_crafted_ ? 4 : 0) + 1, z, labels, kind, false);
}

// ---------------------------------------------------------------------------
// Flattening and training

BlockLayout layout_of(const std::vector<ParamBlock>& blocks) {
    BlockLayout layout;
    std::size_t offset = 0;
    for (const auto& b : blocks) {
        layout.blocks.push_back({b.name, b.value.rows(), b.value.cols(), offset});
        offset += b.value.size();
    }
    return layout;
}

std::vector<double> flatten_values(const std::vector<ParamBlock>& blocks) {
    std::vector<double> flat;
    for (const auto& b : blocks) flat.insert(flat.end(), b.value.data().begin(), b.value.data().end());
    return flat;
}

std::vector<double> flatten_grads(const std::vector<ParamBlock>& blocks) {
    std::vector<double> flat;
    for (const auto& b : blocks) flat.insert(flat.end(), b.grad.data().begin(), b.grad.data().end());
    return flat;
}

template <typename Model, typename Sample>
UpdateVector local_train(Model& model, const std::vector<Sample>& data, std::size_t epochs,
                         std::size_t batch_size, double lr, std::uint64_t seed, LossKind kind) {
    if (data.empty()) throw ConfigError("local_train: client has no data");
    if (epochs < 1) throw ConfigError("local_train: epochs must be >= 1");

    const std::vector<double> before = flatten_values(model.blocks());
    Rng rng(mix_seed(seed, {kBatchStream}));
    const std::size_t step = (batch_size == 0 || batch_size > data.size()) ? data.size() : batch_size;

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        if (step < data.size()) shuffle(order, rng);
        for (std::size_t start = 0; start < data.size(); start += step) {
            const std::size_t end = std::min(start + step, data.size());
            std::vector<Sample> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            model.forward_backward(batch, kind);
            for (auto& block : model.blocks()) axpy(block.value, block.grad, -lr);
        }
    }

    const std::vector<double> after = flatten_values(model.blocks());
    UpdateVector delta(after.size());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = after[i] - before[i];

    // Clients are stateless between rounds: restore the received parameters.
    std::size_t cursor = 0;
    for (auto& block : model.blocks()) {
        for (double& v : block.value.data()) v = before[cursor++];
    }
    return delta;
}

template UpdateVector local_train<ImageModel, ImageSample>(ImageModel&, const std::vector<ImageSample>&,
                                                           std::size_t, std::size_t, double,
                                                           std::uint64_t, LossKind);
template UpdateVector local_train<TextModel, TextRecord>(TextModel&, const std::vector<TextRecord>&,
                                                         std::size_t, std::size_t, double, std::uint64_t,
                                                         LossKind);

std::vector<double> estimate_gradient(const UpdateVector& update, std::size_t epochs, double lr) {
    if (lr == 0.0) throw ConfigError("estimate_gradient: lr must be nonzero");
    if (epochs < 1) throw ConfigError("estimate_gradient: epochs must be >= 1");
    std::vector<double> grad(update.size());
    const double factor = -1.0 / (lr * static_cast<double>(epochs));
    for (std::size_t i = 0; i < update.size(); ++i) grad[i] = update[i] * factor;
    return grad;
}

template <typename Model>
void save_model(const std::filesystem::path& path, const Model& model) {
    std::vector<NamedMatrix> blocks;
    for (const auto& b : model.blocks()) blocks.push_back({b.name, b.value});
    save_param_stream(path, blocks);
}

template void save_model<ImageModel>(const std::filesystem::path&, const ImageModel&);
template void save_model<TextModel>(const std::filesystem::path&, const TextModel&);

std::vector<NamedMatrix> crafted_blocks(const CraftedModule& module) {
    return {{"crafted.w1", module.w1},
            {"crafted.b1", module.b1},
            {"crafted.w2", module.w2},
            {"crafted.b2", module.b2}};
}

}  // namespace fedleak
