#pragma once
// Tiled evaluation of a restoration network with per-image and mean PSNR/SSIM.

#include <json.hpp>

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "hinas/config.hpp"
#include "hinas/data.hpp"
#include "hinas/loss.hpp"

namespace hinas {

struct ImageScore {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
    double loss = 0.0;
};

struct EvalReport {
    std::vector<ImageScore> images;  // sorted by id
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_loss = 0.0;
};

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& s : r.images) items.push_back({{"id", s.id}, {"psnr", s.psnr}, {"ssim", s.ssim}});
    return {{"images", items}, {"mean_psnr", r.mean_psnr}, {"mean_ssim", r.mean_ssim}, {"count", r.images.size()}};
}

namespace detail {

template <typename T>
ImageScore score_image(const Tensor<T>& out, const ImagePair<T>& p, const LossConfig& loss_cfg) {
    Tensor<T> clipped = out.detach();
    for (auto& v : clipped.values()) v = std::clamp(v, T(0), T(1));
    ImageScore s;
    s.id = p.id;
    s.psnr = psnr(clipped, p.clean);
    s.ssim = static_cast<double>(ssim(clipped, p.clean).item());
    s.loss = static_cast<double>(restoration_loss(out, p.clean, loss_cfg).item());
    return s;
}

// Accumulates in id order so the report does not depend on input order.
inline EvalReport finish_report(std::vector<ImageScore> scores) {
    EvalReport r;
    r.images = std::move(scores);
    std::sort(r.images.begin(), r.images.end(), [](const ImageScore& a, const ImageScore& b) { return a.id < b.id; });
    for (const auto& s : r.images) {
        r.mean_psnr += s.psnr;
        r.mean_ssim += s.ssim;
        r.mean_loss += s.loss;
    }
    if (!r.images.empty()) {
        const double n = static_cast<double>(r.images.size());
        r.mean_psnr /= n;
        r.mean_ssim /= n;
        r.mean_loss /= n;
    }
    return r;
}

template <typename T>
void check_task(const ImagePair<T>& p, const RestorationTask& task) {
    const Shape c = p.clean.shape();
    const Shape d = p.degraded.shape();
    if (d.h * task.out_scale() != c.h || d.w * task.out_scale() != c.w) {
        throw ConfigError("evaluation: image '" + p.id + "' does not match the " + task.name() + " task");
    }
}

}  // namespace detail

// Outputs are clipped to [0, 1] before PSNR/SSIM; the loss uses raw outputs.
template <typename T>
EvalReport evaluate(const std::function<Tensor<T>(const Tensor<T>&)>& net, const std::vector<ImagePair<T>>& pairs,
                    const RestorationTask& task, int tile, const LossConfig& loss_cfg = {}) {
    NoGradGuard ng;
    std::vector<ImageScore> scores;
    for (const auto& p : pairs) {
        detail::check_task(p, task);
        scores.push_back(detail::score_image(tiled_inference<T>(net, p.degraded, tile, task.out_scale()), p, loss_cfg));
    }
    return detail::finish_report(std::move(scores));
}

// Baseline: the degraded input itself (bicubic-upscaled for SR) against clean.
template <typename T>
EvalReport evaluate_identity(const std::vector<ImagePair<T>>& pairs, const RestorationTask& task) {
    NoGradGuard ng;
    std::vector<ImageScore> scores;
    for (const auto& p : pairs) {
        detail::check_task(p, task);
        const Tensor<T> out =
            task.is_sr() ? bicubic_resize(p.degraded, task.scale, ResizeDirection::Up) : p.degraded.detach();
        scores.push_back(detail::score_image(out, p, LossConfig{}));
    }
    return detail::finish_report(std::move(scores));
}

}  // namespace hinas
