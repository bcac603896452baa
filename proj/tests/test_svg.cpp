#include <gtest/gtest.h>

#include <cmath>
#include <regex>
#include <vector>

#include "alloyfit/error.hpp"
#include "alloyfit/rng.hpp"
#include "alloyfit/svg.hpp"

using namespace alloyfit;

namespace {

// Minimal well-formedness check: balanced tags, quoted attributes, known entities only.
bool well_formed(const std::string& doc, std::string& why) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    bool root_seen = false;
    while (i < doc.size()) {
        if (doc[i] == '&') {
            const auto semi = doc.find(';', i);
            const auto ent = doc.substr(i, semi == std::string::npos ? 1 : semi - i + 1);
            if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") {
                why = "bad entity " + ent;
                return false;
            }
            i = semi + 1;
            continue;
        }
        if (doc[i] != '<') {
            if (stack.empty() && !std::isspace(static_cast<unsigned char>(doc[i]))) {
                why = "text outside root";
                return false;
            }
            ++i;
            continue;
        }
        if (doc.compare(i, 5, "<?xml") == 0) {
            i = doc.find("?>", i) + 2;
            continue;
        }
        const auto close = doc.find('>', i);
        if (close == std::string::npos) {
            why = "unterminated tag";
            return false;
        }
        std::string tag = doc.substr(i + 1, close - i - 1);
        i = close + 1;
        if (tag.find('<') != std::string::npos) {
            why = "'<' inside tag";
            return false;
        }
        if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) {
            why = "unbalanced quotes in " + tag;
            return false;
        }
        if (tag[0] == '/') {
            const auto name = tag.substr(1);
            if (stack.empty() || stack.back() != name) {
                why = "mismatched close " + name;
                return false;
            }
            stack.pop_back();
            continue;
        }
        const bool self = tag.back() == '/';
        const auto name = tag.substr(0, tag.find_first_of(" /\n"));
        if (stack.empty()) {
            if (root_seen) {
                why = "second root";
                return false;
            }
            root_seen = true;
        }
        if (!self) stack.push_back(name);
    }
    if (!stack.empty()) why = "unclosed " + stack.back();
    return stack.empty() && root_seen;
}

double attr(const std::string& tag, const std::string& name) {
    const std::regex re(name + "=\"([-0-9.]+)\"");
    std::smatch m;
    if (!std::regex_search(tag, m, re)) return std::nan("");
    return std::stod(m[1]);
}

std::vector<std::string> elements(const std::string& doc, const std::string& name) {
    std::vector<std::string> out;
    for (auto pos = doc.find("<" + name + " "); pos != std::string::npos; pos = doc.find("<" + name + " ", pos + 1)) {
        out.push_back(doc.substr(pos, doc.find('>', pos) - pos + 1));
    }
    return out;
}

}  // namespace

TEST(Svg, DiagonalPointsSitOnDiagonal) {
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 25; ++i) pairs.emplace_back(100.0 + 13.7 * i, 100.0 + 13.7 * i);
    const auto doc = emit_scatter_svg(pairs);
    const auto lines = elements(doc.svg, "line");
    std::string diag;
    for (const auto& l : lines) {
        if (l.find("id=\"diagonal\"") != std::string::npos) diag = l;
    }
    ASSERT_FALSE(diag.empty());
    const double x1 = attr(diag, "x1"), y1 = attr(diag, "y1"), x2 = attr(diag, "x2"), y2 = attr(diag, "y2");
    const double len = std::hypot(x2 - x1, y2 - y1);
    const auto circles = elements(doc.svg, "circle");
    ASSERT_EQ(circles.size(), 25u);
    for (const auto& c : circles) {
        const double cx = attr(c, "cx"), cy = attr(c, "cy");
        const double dist = std::abs((y2 - y1) * cx - (x2 - x1) * cy + x2 * y1 - y2 * x1) / len;
        EXPECT_LE(dist, 0.5);
    }
}

TEST(Svg, MarkerCountWellFormedAndSelfContained) {
    Rng rng(1);
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 207; ++i) {
        const double t = rng.uniform(100, 600);
        pairs.emplace_back(t, t + rng.normal() * 20);
    }
    ScatterLabels labels{"A <title> & \"quotes\"", "target", "prediction"};
    const auto doc = emit_scatter_svg(pairs, labels);
    EXPECT_EQ(elements(doc.svg, "circle").size(), 207u);
    std::string why;
    EXPECT_TRUE(well_formed(doc.svg, why)) << why;
    EXPECT_EQ(doc.svg.find("href"), std::string::npos);
    EXPECT_EQ(doc.svg.find("@import"), std::string::npos);
    EXPECT_EQ(doc.svg.find("url("), std::string::npos);
    EXPECT_NE(doc.svg.find("&lt;title&gt; &amp;"), std::string::npos);
    EXPECT_EQ(std::count(doc.csv.begin(), doc.csv.end(), '\n'), 208);
    EXPECT_EQ(doc.csv.substr(0, 18), "target,prediction\n");
    EXPECT_EQ(emit_scatter_svg(pairs, labels).svg, doc.svg);
}

TEST(Svg, Errors) {
    EXPECT_THROW(emit_scatter_svg({}), DataError);
    const std::vector<std::pair<double, double>> bad = {{1.0, std::nan("")}};
    EXPECT_THROW(emit_scatter_svg(bad), DataError);
    const std::vector<std::pair<double, double>> single = {{3.0, 3.0}};
    EXPECT_NO_THROW(emit_scatter_svg(single));
}
