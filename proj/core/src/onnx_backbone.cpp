#include "countingdino/onnx_backbone.hpp"

#include <onnxruntime_cxx_api.h>

#include <string>

#include "countingdino/errors.hpp"

namespace cdino {

struct OnnxBackbone::Session {
    Ort::Env env{ORT_LOGGING_LEVEL_WARNING, "countingdino"};
    Ort::Session session{nullptr};
    std::string input_name;
    std::string output_name;
};

OnnxBackbone::OnnxBackbone(const std::filesystem::path& model, OnnxBackboneOptions options)
    : options_(options), session_(std::make_unique<Session>()) {
    Ort::SessionOptions so;
    so.SetIntraOpNumThreads(options_.intra_op_threads);
    session_->session = Ort::Session(session_->env, model.c_str(), so);
    Ort::AllocatorWithDefaultOptions alloc;
    session_->input_name = session_->session.GetInputNameAllocated(0, alloc).get();
    session_->output_name = session_->session.GetOutputNameAllocated(0, alloc).get();
}

OnnxBackbone::~OnnxBackbone() = default;

std::vector<float> OnnxBackbone::forward(const RgbImage& tile) const {
    const std::size_t hw = tile.height * tile.width;
    std::vector<float> nchw(3 * hw);
    for (std::size_t y = 0; y < tile.height; ++y) {
        for (std::size_t x = 0; x < tile.width; ++x) {
            for (std::size_t ch = 0; ch < 3; ++ch) {
                nchw[ch * hw + y * tile.width + x] =
                    (tile.at(y, x, ch) - options_.mean[ch]) / options_.stddev[ch];
            }
        }
    }
    const std::array<std::int64_t, 4> shape{1, 3, static_cast<std::int64_t>(tile.height),
                                            static_cast<std::int64_t>(tile.width)};
    const auto memory = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
    Ort::Value input = Ort::Value::CreateTensor<float>(memory, nchw.data(), nchw.size(),
                                                       shape.data(), shape.size());
    const char* in_names[] = {session_->input_name.c_str()};
    const char* out_names[] = {session_->output_name.c_str()};

    std::lock_guard lock(mutex_);
    auto outputs = session_->session.Run(Ort::RunOptions{nullptr}, in_names, &input, 1, out_names, 1);
    const auto info = outputs.front().GetTensorTypeAndShapeInfo();
    const auto out_shape = info.GetShape();
    if (out_shape.size() != 3 || out_shape[0] != 1 ||
        static_cast<std::size_t>(out_shape[2]) != options_.channels) {
        throw ShapeError("backbone output is not [1, tokens, " + std::to_string(options_.channels) + "]");
    }
    const float* data = outputs.front().GetTensorData<float>();
    return {data, data + info.GetElementCount()};
}

}  // namespace cdino
