#pragma once

#include <string>

#include "kcmp/stats.hpp"

namespace kcmp {

/// `fpr,tpr` header followed by one row per curve point.
std::string roc_to_csv(const RocCurve& curve);

/// Standalone SVG (no external assets) with the curve, chance diagonal and AUC label.
std::string roc_to_svg(const RocCurve& curve, const std::string& title);

}  // namespace kcmp
