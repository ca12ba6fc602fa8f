#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trecs {

struct Shape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    std::size_t size() const { return height * width * channels; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// One H x W x C frame of real-valued intensities, stored row-major HWC.
class Frame {
public:
    Frame() = default;

    Frame(Shape shape, double fill = 0.0) : shape_(shape), values_(shape.size(), fill)
    {
        if (shape.size() == 0) {
            throw std::invalid_argument("frame shape must be non-empty");
        }
    }

    Frame(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values))
    {
        if (shape.size() == 0 || values_.size() != shape.size()) {
            throw std::invalid_argument("frame value count does not match shape");
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t height() const { return shape_.height; }
    std::size_t width() const { return shape_.width; }
    std::size_t channels() const { return shape_.channels; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    double at(std::size_t y, std::size_t x, std::size_t c) const
    {
        return values_[(y * shape_.width + x) * shape_.channels + c];
    }
    double& at(std::size_t y, std::size_t x, std::size_t c)
    {
        return values_[(y * shape_.width + x) * shape_.channels + c];
    }

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

using FramePtr = std::shared_ptr<const Frame>;

/// An ordered, non-empty list of equally shaped frames. Frames are shared
/// immutably, so copies and index-based resampling never duplicate pixels.
class FrameSequence {
public:
    FrameSequence(std::string id, std::vector<FramePtr> frames)
        : id_(std::move(id)), frames_(std::move(frames))
    {
        if (frames_.empty()) {
            throw std::invalid_argument("frame sequence must contain at least one frame");
        }
        for (const auto& f : frames_) {
            if (!f) {
                throw std::invalid_argument("frame sequence contains a null frame");
            }
            if (f->shape() != frames_.front()->shape()) {
                throw std::invalid_argument("all frames in a sequence must share one shape");
            }
        }
    }

    FrameSequence(std::string id, std::vector<Frame> frames)
        : FrameSequence(std::move(id), share(std::move(frames)))
    {
    }

    const std::string& id() const { return id_; }
    std::size_t size() const { return frames_.size(); }
    const Shape& shape() const { return frames_.front()->shape(); }

    /// 0-based storage access.
    const Frame& operator[](std::size_t k) const { return *frames_[k]; }
    const FramePtr& ptr(std::size_t k) const { return frames_[k]; }
    const std::vector<FramePtr>& frames() const { return frames_; }

    /// 1-based access, matching the index convention of the public resampling API.
    const Frame& frame(std::size_t index) const
    {
        if (index < 1 || index > frames_.size()) {
            throw std::out_of_range("frame index out of range");
        }
        return *frames_[index - 1];
    }

    FrameSequence with_id(std::string id) const { return FrameSequence(std::move(id), frames_); }

    /// Concatenated frame values in temporal order.
    std::vector<double> flatten() const
    {
        std::vector<double> out;
        out.reserve(size() * shape().size());
        for (const auto& f : frames_) {
            out.insert(out.end(), f->values().begin(), f->values().end());
        }
        return out;
    }

    /// Pixel-wise equality; ids are not compared.
    bool same_frames(const FrameSequence& other) const
    {
        if (size() != other.size()) {
            return false;
        }
        for (std::size_t k = 0; k < size(); ++k) {
            if (frames_[k] != other.frames_[k] && *frames_[k] != *other.frames_[k]) {
                return false;
            }
        }
        return true;
    }

private:
    static std::vector<FramePtr> share(std::vector<Frame> frames)
    {
        std::vector<FramePtr> out;
        out.reserve(frames.size());
        for (auto& f : frames) {
            out.push_back(std::make_shared<const Frame>(std::move(f)));
        }
        return out;
    }

    std::string id_;
    std::vector<FramePtr> frames_;
};

} // namespace trecs
