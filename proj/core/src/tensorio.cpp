#include "countingdino/tensorio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "countingdino/errors.hpp"

namespace cdino {

namespace {

constexpr char kMagic[4] = {'C', 'D', 'F', 'M'};

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::byte>& out) : out_(out) {}

    template <typename T>
    void put(T value) {
        using U = std::make_unsigned_t<T>;
        auto u = static_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<std::byte>(u & 0xFFu));
            if constexpr (sizeof(T) > 1) u = static_cast<U>(u >> 8);
        }
    }

    void put_float(float value) { put(std::bit_cast<std::uint32_t>(value)); }

private:
    std::vector<std::byte>& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> in) : in_(in) {}

    template <typename T>
    T get() {
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<T>(std::to_integer<T>(in_[pos_ + i]) << (8 * i));
        }
        pos_ += sizeof(T);
        return value;
    }

    float get_float() { return std::bit_cast<float>(get<std::uint32_t>()); }

    std::size_t position() const noexcept { return pos_; }

private:
    std::span<const std::byte> in_;
    std::size_t pos_ = 0;
};

template <typename T>
T checked_narrow(std::size_t value, const char* field) {
    if (value > std::numeric_limits<T>::max()) {
        throw ValidationError(std::string(field) + " does not fit the CDFM header");
    }
    return static_cast<T>(value);
}

}  // namespace

std::vector<std::byte> encode_cdfm(const FeatureMap& map) {
    map.validate();

    std::vector<std::byte> out;
    out.reserve(kCdfmHeaderSize + map.data().size() * sizeof(float));
    ByteWriter w(out);
    for (char c : kMagic) w.put(static_cast<std::uint8_t>(c));
    w.put<std::uint16_t>(kCdfmVersion);
    w.put(checked_narrow<std::uint16_t>(static_cast<std::size_t>(map.patch_size()), "patch_size"));
    w.put(checked_narrow<std::uint32_t>(map.rows(), "rows"));
    w.put(checked_narrow<std::uint32_t>(map.cols(), "cols"));
    w.put(checked_narrow<std::uint32_t>(map.channels(), "channels"));
    const auto& g = map.geometry();
    w.put<std::uint32_t>(g.height);
    w.put<std::uint32_t>(g.width);
    w.put<std::uint32_t>(g.effective_height);
    w.put<std::uint32_t>(g.effective_width);
    w.put(checked_narrow<std::uint16_t>(static_cast<std::size_t>(map.resolution_level()),
                                        "resolution_level"));
    w.put<std::uint16_t>(0);
    for (float v : map.data()) w.put_float(v);
    return out;
}

FeatureMap decode_cdfm(std::span<const std::byte> bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("not a CDFM file (bad magic)");
    }
    if (bytes.size() < kCdfmHeaderSize) {
        throw CorruptionError("CDFM header truncated: " + std::to_string(bytes.size()) + " bytes");
    }

    ByteReader r(bytes.subspan(sizeof(kMagic)));
    const auto version = r.get<std::uint16_t>();
    if (version != kCdfmVersion) {
        throw FormatError("unsupported CDFM version " + std::to_string(version));
    }
    const auto patch_size = r.get<std::uint16_t>();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    const auto channels = r.get<std::uint32_t>();
    ImageGeometry g;
    g.height = r.get<std::uint32_t>();
    g.width = r.get<std::uint32_t>();
    g.effective_height = r.get<std::uint32_t>();
    g.effective_width = r.get<std::uint32_t>();
    const auto level = r.get<std::uint16_t>();
    const auto reserved = r.get<std::uint16_t>();
    if (reserved != 0) throw FormatError("CDFM reserved field is not zero");

    // 32-bit dims multiply into at most 2^96, so compare in steps.
    const std::size_t payload = bytes.size() - kCdfmHeaderSize;
    const std::size_t available = payload / sizeof(float);
    const std::size_t cells = std::size_t{rows} * cols;
    const bool too_large = channels != 0 && cells > available / channels;
    if (too_large || cells * channels != available || payload % sizeof(float) != 0) {
        throw CorruptionError("CDFM payload has " + std::to_string(payload) +
                              " bytes, header declares " + std::to_string(rows) + "x" +
                              std::to_string(cols) + "x" + std::to_string(channels) + " floats");
    }

    std::vector<float> data(available);
    ByteReader body(bytes.subspan(kCdfmHeaderSize));
    for (auto& v : data) v = body.get_float();

    FeatureMap map(rows, cols, channels, std::move(data), patch_size, g, level);
    map.validate();
    return map;
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return decode_cdfm(std::as_bytes(std::span(raw)));
}

void save_feature_map(const FeatureMap& map, const std::filesystem::path& path) {
    const auto bytes = encode_cdfm(map);
    if (path.empty()) throw IoError("empty output path");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

FeatureMap stitch_quadrants(std::span<const FeatureMap> quadrants, int k) {
    if (k < 0 || k > 15) throw ArgumentError("resolution level out of range: " + std::to_string(k));
    const std::size_t side = std::size_t{1} << k;
    if (quadrants.size() != side * side) {
        throw ShapeError("expected " + std::to_string(side * side) + " quadrants, got " +
                         std::to_string(quadrants.size()));
    }

    const FeatureMap& first = quadrants.front();
    const std::size_t lq = first.rows();
    const std::size_t vq = first.cols();
    const std::size_t d = first.channels();
    for (const auto& q : quadrants) {
        if (q.rows() != lq || q.cols() != vq || q.channels() != d ||
            q.patch_size() != first.patch_size()) {
            throw ShapeError("quadrants differ in shape, channels or patch size");
        }
    }

    const std::size_t rows = side * lq;
    const std::size_t cols = side * vq;
    std::vector<float> data(rows * cols * d);
    for (std::size_t qr = 0; qr < side; ++qr) {
        for (std::size_t qc = 0; qc < side; ++qc) {
            const FeatureMap& q = quadrants[qr * side + qc];
            for (std::size_t i = 0; i < lq; ++i) {
                // One quadrant row is contiguous in both source and destination.
                const auto src = q.data().subspan(i * vq * d, vq * d);
                const std::size_t dst = ((qr * lq + i) * cols + qc * vq) * d;
                std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>(dst));
            }
        }
    }
    return {rows, cols, d, std::move(data), first.patch_size(),
            ImageGeometry::exact(rows, cols, first.patch_size()), k};
}

FeatureMap crop_cells(const FeatureMap& map, std::size_t rows, std::size_t cols,
                      ImageGeometry geometry) {
    if (rows > map.rows() || cols > map.cols()) {
        throw ShapeError("crop " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " exceeds map " + std::to_string(map.rows()) + "x" +
                         std::to_string(map.cols()));
    }
    const std::size_t d = map.channels();
    std::vector<float> data;
    data.reserve(rows * cols * d);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = map.data().subspan(r * map.cols() * d, cols * d);
        data.insert(data.end(), row.begin(), row.end());
    }
    return {rows, cols, d, std::move(data), map.patch_size(), geometry, map.resolution_level()};
}

}  // namespace cdino
