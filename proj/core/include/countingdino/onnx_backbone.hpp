#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <mutex>
#include <vector>

#include "countingdino/feature_source.hpp"

namespace cdino {

struct OnnxBackboneOptions {
    int patch_size = 14;
    std::size_t channels = 1024;
    /// Class token plus register tokens ahead of the patch tokens.
    std::size_t prefix_tokens = 1;
    /// Per-channel normalization applied to [0, 1] RGB input.
    std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
    std::array<float, 3> stddev{0.229f, 0.224f, 0.225f};
    int intra_op_threads = 1;
};

/// Runs an exported ViT graph with ONNX Runtime. The graph takes one
/// float32 NCHW image and returns a [1, tokens, channels] tensor. One
/// session is shared and calls into it are serialized.
class OnnxBackbone final : public Backbone {
public:
    OnnxBackbone(const std::filesystem::path& model, OnnxBackboneOptions options);
    ~OnnxBackbone() override;

    int patch_size() const override { return options_.patch_size; }
    std::size_t channels() const override { return options_.channels; }
    std::size_t prefix_tokens() const override { return options_.prefix_tokens; }
    std::vector<float> forward(const RgbImage& tile) const override;

private:
    struct Session;
    OnnxBackboneOptions options_;
    std::unique_ptr<Session> session_;
    mutable std::mutex mutex_;
};

}  // namespace cdino
