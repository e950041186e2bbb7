#include "kcmp/roc_export.hpp"

#include <cstdio>
#include <sstream>

#include "kcmp/encoding.hpp"

namespace kcmp {
namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string roc_to_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : curve.points) out += format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
  return out;
}

std::string roc_to_svg(const RocCurve& curve, const std::string& title) {
  constexpr int kSize = 320;
  constexpr int kMargin = 40;
  auto px = [](double v) { return kMargin + v * kSize; };
  auto py = [](double v) { return kMargin + (1.0 - v) * kSize; };

  std::ostringstream svg;
  char buf[64];
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + 2 * kMargin
      << "\" height=\"" << kSize + 2 * kMargin << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize << "\" height=\""
      << kSize << "\" fill=\"white\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
      << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(p.fpr), py(p.tpr));
    svg << buf;
  }
  svg << "\"/>\n";
  std::snprintf(buf, sizeof buf, "AUC = %.4f", curve.auc);
  svg << "<text x=\"" << kMargin + kSize / 2 << "\" y=\"" << kMargin - 12
      << "\" text-anchor=\"middle\">" << xml_escape(title) << " (" << buf << ")</text>\n";
  svg << "<text x=\"" << kMargin + kSize / 2 << "\" y=\"" << kSize + kMargin + 28
      << "\" text-anchor=\"middle\">False positive rate</text>\n";
  svg << "<text x=\"12\" y=\"" << kMargin + kSize / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 12 "
      << kMargin + kSize / 2 << ")\">True positive rate</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace kcmp
