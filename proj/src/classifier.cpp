#include "gauntlet/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "gauntlet/parallel.hpp"
#include "gauntlet/rng.hpp"

namespace gauntlet::classifier {

Prediction predict(const SubModel& sub, const Tensor& x) {
    Prediction p;
    p.logits = sub.raw_logits(transforms::apply(sub.spec, x));
    p.probabilities = nn::softmax(p.logits);
    p.label = 0;
    for (int i = 1; i < static_cast<int>(p.logits.numel()); ++i)
        if (p.logits.data[static_cast<size_t>(i)] > p.logits.data[static_cast<size_t>(p.label)])
            p.label = i;
    return p;
}

Tensor input_gradient(const SubModel& sub, const Tensor& x_transformed, int label) {
    return nn::loss_and_gradients(sub.weights, x_transformed, label,
                                  /*want_param_grads=*/false)
        .grads.input_grad;
}

namespace {

void accumulate(nn::LayerGradients& total, const nn::LayerGradients& g) {
    for (size_t i = 0; i < total.parameter_grads.size(); ++i) {
        auto& dst = total.parameter_grads[i].value.data;
        const auto& src = g.parameter_grads[i].value.data;
        for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
}

nn::LayerGradients zero_grads(const nn::ClassifierWeights& w) {
    nn::LayerGradients g;
    for (const auto& nt : w.tensors) g.parameter_grads.push_back({nt.name, Tensor(nt.value.dims)});
    return g;
}

// Single-threaded on purpose: whole sub-models train in parallel, one per
// worker, and each training job must stay deterministic on its own.
double validation_loss(const nn::ClassifierWeights& w, const std::vector<Tensor>& images,
                       const std::vector<uint8_t>& labels) {
    double sum = 0.0;
    for (size_t i = 0; i < images.size(); ++i) {
        const Tensor logits = nn::model_forward(w, images[i]);
        sum += nn::cross_entropy(logits, labels[i]);
    }
    return sum / static_cast<double>(images.size());
}

}  // namespace

TrainedModel train_submodel(const transforms::TransformSpec& spec,
                            const data::LabelledSet& train,
                            const data::LabelledSet& val,
                            const TrainingConfig& config, uint64_t seed) {
    if (train.empty() || val.empty())
        throw std::invalid_argument("train_submodel: empty training or validation set");

    // Transforms are deterministic, so transformed copies are made once.
    std::vector<Tensor> tr_images(train.size());
    for (size_t i = 0; i < train.size(); ++i)
        tr_images[i] = transforms::apply(spec, train.images[i]);
    std::vector<Tensor> va_images(val.size());
    for (size_t i = 0; i < val.size(); ++i)
        va_images[i] = transforms::apply(spec, val.images[i]);

    nn::ClassifierWeights w =
        nn::ClassifierWeights::random_init(config.arch, mix_seed(seed, 0x11));
    nn::AdamState adam = nn::AdamState::zeros_like(w);

    TrainedModel result;
    result.sub.spec = spec;
    nn::ClassifierWeights best = w;
    double best_loss = validation_loss(w, va_images, val.labels);
    int best_epoch = -1;
    int since_best = 0;

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(seed, 0x5000 + static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            const size_t end = std::min(order.size(), start + config.batch_size);
            nn::LayerGradients batch = zero_grads(w);
            double batch_loss = 0.0;
            for (size_t b = start; b < end; ++b) {
                const size_t idx = order[b];
                auto res = nn::loss_and_gradients(w, tr_images[idx], train.labels[idx],
                                                  /*want_param_grads=*/true,
                                                  /*want_input_grad=*/false);
                batch_loss += res.loss;
                accumulate(batch, res.grads);
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged: non-finite loss on '" +
                                         spec.id + "'");
            const float inv = 1.0f / static_cast<float>(end - start);
            for (auto& nt : batch.parameter_grads)
                for (auto& v : nt.value.data) v *= inv;
            nn::adam_step(w, batch, adam, config.lr);
        }

        const double val_loss = validation_loss(w, va_images, val.labels);
        result.epochs_run = epoch + 1;
        if (val_loss < best_loss) {
            best_loss = val_loss;
            best = w;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best > config.patience) {
            break;
        }
    }

    if (!best.all_finite())
        throw std::runtime_error("training diverged: non-finite weights on '" + spec.id + "'");
    result.sub.weights = std::move(best);
    result.best_val_loss = best_loss;
    result.best_epoch = best_epoch;
    return result;
}

double accuracy(const SubModel& sub, const data::LabelledSet& set, int threads) {
    if (set.empty()) return 0.0;
    std::vector<uint8_t> correct(set.size(), 0);
    parallel_for(
        static_cast<int64_t>(set.size()),
        [&](int64_t i) {
            const auto p = predict(sub, set.images[static_cast<size_t>(i)]);
            correct[static_cast<size_t>(i)] =
                p.label == static_cast<int>(set.labels[static_cast<size_t>(i)]) ? 1 : 0;
        },
        threads);
    int64_t n = 0;
    for (uint8_t c : correct) n += c;
    return static_cast<double>(n) / static_cast<double>(set.size());
}

// ---- persistence -------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'E', 'G', 'W', '1'};

void write_u16le(std::ostream& os, uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v),
                                static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32le(std::ostream& os, uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint16_t read_u16le(std::istream& is, const std::string& path) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    if (!is) throw std::runtime_error("truncated weight file: " + path);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32le(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("truncated weight file: " + path);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_weights(const nn::ClassifierWeights& w, const std::string& path) {
    w.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write weight file: " + path);
    os.write(kMagic, 4);
    write_u32le(os, static_cast<uint32_t>(w.tensors.size()));
    for (const auto& nt : w.tensors) {
        write_u16le(os, static_cast<uint16_t>(nt.name.size()));
        os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
        os.put(static_cast<char>(nt.value.rank()));
        for (int d : nt.value.dims) write_u32le(os, static_cast<uint32_t>(d));
        for (float v : nt.value.data) write_u32le(os, std::bit_cast<uint32_t>(v));
    }
    if (!os) throw std::runtime_error("failed writing weight file: " + path);
}

nn::ClassifierWeights load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open weight file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad magic in weight file: " + path);
    const uint32_t count = read_u32le(is, path);
    if (count != nn::ClassifierWeights::weight_names().size())
        throw std::runtime_error("unexpected tensor count in weight file: " + path);

    std::vector<nn::NamedTensor> tensors;
    for (uint32_t t = 0; t < count; ++t) {
        const uint16_t name_len = read_u16le(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("truncated weight file: " + path);
        const int rank = is.get();
        if (rank <= 0 || rank > 4)
            throw std::runtime_error("bad tensor rank in weight file: " + path);
        std::vector<int> dims(static_cast<size_t>(rank));
        for (auto& d : dims) {
            d = static_cast<int>(read_u32le(is, path));
            if (d <= 0 || d > (1 << 24))
                throw std::runtime_error("bad tensor extent in weight file: " + path);
        }
        Tensor value(dims);
        for (auto& v : value.data) v = std::bit_cast<float>(read_u32le(is, path));
        tensors.push_back({std::move(name), std::move(value)});
    }

    // Architecture is implied by the stored shapes; validate() cross-checks.
    nn::Architecture arch;
    arch.conv1 = tensors[0].value.dim(3);
    arch.conv2 = tensors[2].value.dim(3);
    arch.conv3 = tensors[4].value.dim(3);
    arch.hidden = tensors[6].value.dim(1);
    nn::ClassifierWeights w;
    w.arch = arch;
    w.tensors = std::move(tensors);
    w.validate();
    return w;
}

}  // namespace gauntlet::classifier
