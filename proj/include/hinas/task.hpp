#pragma once

#include <stdexcept>
#include <string>

#include "hinas/ops.hpp"

namespace hinas {

struct RestorationTask {
    enum class Kind { Denoise, SuperResolve };
    Kind kind = Kind::Denoise;
    int scale = 1;  // upscale factor, SuperResolve only
    bool residual = true;

    static RestorationTask denoise(bool residual = true) { return {Kind::Denoise, 1, residual}; }
    static RestorationTask super_resolve(int s, bool residual = true) {
        if (s < 2 || s > 4) throw std::invalid_argument("super-resolution scale must be 2, 3 or 4");
        return {Kind::SuperResolve, s, residual};
    }

    [[nodiscard]] bool is_sr() const { return kind == Kind::SuperResolve; }
    [[nodiscard]] int out_scale() const { return is_sr() ? scale : 1; }
    // Channels emitted by the tail before pixel shuffle.
    [[nodiscard]] int tail_channels() const { return is_sr() ? 3 * scale * scale : 3; }
    [[nodiscard]] std::string name() const { return is_sr() ? "sr" : "denoise"; }
    friend bool operator==(const RestorationTask&, const RestorationTask&) = default;
};

// Residual framing: denoise adds the input back; super-resolution pixel
// shuffles the tail output and adds the bicubic upscale of the input.
template <typename T>
Tensor<T> finish_restoration(const Tensor<T>& tail_out, const Tensor<T>& input,
                             const RestorationTask& task) {
    if (!task.is_sr()) {
        return task.residual ? add(tail_out, input) : tail_out;
    }
    Tensor<T> up = pixel_shuffle(tail_out, task.scale);
    if (!task.residual) return up;
    Tensor<T> skip;
    {
        NoGradGuard ng;  // the skip path has no parameters
        skip = bicubic_resize(input, task.scale, ResizeDirection::Up);
    }
    return add(up, skip);
}

}  // namespace hinas
