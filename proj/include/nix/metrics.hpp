#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nix/common.hpp"
#include "nix/mask.hpp"
#include "nix/probability_map.hpp"

namespace nix {

struct EvalResult {
    std::vector<double> per_image_iou;
    double miou = 0.0;
    std::size_t count = 0;
};

/// Threshold at 0.5 by default; a pixel exactly at the threshold counts as
/// positive.
inline BinaryMask binarize(const ProbabilityMap& p, real threshold = real(0.5)) {
    BinaryMask m(p.height, p.width);
    for (std::size_t i = 0; i < p.data.size(); ++i)
        m.data[i] = p.data[i] >= threshold ? 1 : 0;
    return m;
}

/// IoU over the positive (inpainted) class. Both masks empty counts as
/// perfect agreement.
inline double iou(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeMismatch("iou: mask shapes differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        inter += pred.data[i] & gt.data[i];
        uni += pred.data[i] | gt.data[i];
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline EvalResult miou(const std::vector<std::pair<ProbabilityMap, BinaryMask>>& pairs) {
    if (pairs.empty()) throw EmptyInput("miou: no prediction/target pairs");
    EvalResult r;
    r.count = pairs.size();
    double sum = 0.0;
    for (const auto& [p, gt] : pairs) {
        const double v = iou(binarize(p), gt);
        r.per_image_iou.push_back(v);
        sum += v;
    }
    r.miou = sum / static_cast<double>(pairs.size());
    return r;
}

inline nlohmann::json eval_result_to_json(const EvalResult& r) {
    return nlohmann::json{{"miou", r.miou}, {"count", r.count}, {"per_image_iou", r.per_image_iou}};
}

}  // namespace nix
