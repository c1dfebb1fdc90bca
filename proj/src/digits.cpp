#include "gauntlet/digits.hpp"

#include <cmath>
#include <vector>

#include "gauntlet/rng.hpp"

namespace gauntlet::data {

namespace {

struct Pt {
    double x, y;
};

using Stroke = std::vector<Pt>;  // polyline in unit glyph coordinates, y down

void arc(Stroke& s, double cx, double cy, double rx, double ry,
         double deg0, double deg1, int n = 16) {
    for (int i = 0; i <= n; ++i) {
        const double a = (deg0 + (deg1 - deg0) * i / n) * M_PI / 180.0;
        s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
}

Stroke line(Pt a, Pt b) { return {a, b}; }

// Angle convention with y pointing down: 0 deg = right, 90 = bottom,
// 180 = left, 270 = top. Stroke structure varies per sample (bar lengths,
// loop sizes, optional serifs) so classes carry real within-class diversity.
std::vector<Stroke> glyph(int digit, Rng& rng) {
    std::vector<Stroke> g;
    auto u = [&](double lo, double hi) { return rng.uniform(lo, hi); };
    switch (digit) {
        case 0: {
            Stroke s;
            arc(s, 0.50, 0.50, u(0.17, 0.25), u(0.26, 0.34), 0, 360, 24);
            g.push_back(s);
            break;
        }
        case 1: {
            // short steep flag; a long flat one reads as a 7's bar
            const double x0 = u(0.50, 0.60);
            g.push_back(line({x0, 0.15}, {x0 - u(0.0, 0.04), 0.85}));
            g.push_back(line({x0 - u(0.07, 0.11), u(0.24, 0.30)}, {x0, 0.15}));
            if (rng.below(2))  // optional base bar
                g.push_back(line({x0 - 0.14, 0.85}, {x0 + 0.14, 0.85}));
            break;
        }
        case 2: {
            Stroke top;
            arc(top, 0.50, u(0.30, 0.36), u(0.18, 0.24), u(0.14, 0.19), 180, u(330, 355));
            g.push_back(top);
            const double base_y = u(0.80, 0.86);
            // full-width base bar, the mark that separates 2 from 7
            g.push_back(line({top.back().x, top.back().y}, {u(0.22, 0.28), base_y}));
            g.push_back(line({u(0.22, 0.28), base_y}, {u(0.74, 0.80), base_y}));
            break;
        }
        case 3: {
            // both arcs stay clearly open to the left (sweep ~230 degrees)
            Stroke top, bot;
            arc(top, 0.47, u(0.29, 0.34), u(0.17, 0.23), u(0.13, 0.18), u(155, 175),
                u(395, 415));
            arc(bot, 0.47, u(0.64, 0.70), u(0.19, 0.26), u(0.15, 0.20), u(300, 315),
                u(530, 550));
            g.push_back(top);
            g.push_back(bot);
            break;
        }
        case 4: {
            const double xv = u(0.56, 0.66), yb = u(0.52, 0.62);
            g.push_back(line({xv, 0.15}, {xv, 0.85}));
            g.push_back(line({xv, 0.15}, {u(0.24, 0.32), yb}));
            g.push_back(line({u(0.24, 0.32), yb}, {u(0.72, 0.82), yb}));
            break;
        }
        case 5: {
            // wide-open bowl (sweep ~230 degrees): closing it into a 6 takes
            // a lot of ink
            const double top_y = u(0.14, 0.19);
            g.push_back(line({u(0.64, 0.74), top_y}, {u(0.30, 0.36), top_y}));
            g.push_back(line({0.33, top_y}, {u(0.28, 0.33), u(0.42, 0.50)}));
            Stroke bowl;
            arc(bowl, u(0.43, 0.49), u(0.61, 0.67), u(0.20, 0.26), u(0.17, 0.22),
                u(195, 215), u(425, 445));
            g.push_back(bowl);
            break;
        }
        case 6: {
            // long hook reaching the top-right plus a fully closed loop
            Stroke hook, loop;
            arc(hook, u(0.60, 0.68), u(0.42, 0.50), u(0.23, 0.30), u(0.30, 0.37), 255,
                175);
            arc(loop, u(0.44, 0.50), u(0.61, 0.68), u(0.15, 0.21), u(0.13, 0.19), 0, 360,
                24);
            g.push_back(hook);
            g.push_back(loop);
            break;
        }
        case 7: {
            const double top_y = u(0.15, 0.21);
            g.push_back(line({u(0.20, 0.26), top_y}, {u(0.72, 0.80), top_y}));
            g.push_back(line({0.76, top_y}, {u(0.30, 0.40), 0.85}));
            if (rng.below(2))  // optional crossbar
                g.push_back(line({0.38, 0.52}, {0.62, 0.52}));
            break;
        }
        case 8: {
            Stroke top, bot;
            const double split = u(0.46, 0.52);
            arc(top, 0.50, split - u(0.15, 0.19), u(0.13, 0.19), u(0.12, 0.17), 0, 360,
                20);
            arc(bot, 0.50, split + u(0.15, 0.20), u(0.17, 0.24), u(0.14, 0.19), 0, 360,
                20);
            g.push_back(top);
            g.push_back(bot);
            break;
        }
        case 9: {
            // generous closed loop; erasing enough of it to read as 4 or 1
            // costs real ink
            Stroke loop;
            const double cy = u(0.32, 0.38);
            arc(loop, 0.52, cy, u(0.17, 0.22), u(0.15, 0.19), 0, 360, 20);
            g.push_back(loop);
            const double x_end = u(0.52, 0.64);
            if (rng.below(2)) {
                g.push_back(line({0.52 + 0.19, cy + 0.02}, {x_end, 0.85}));
            } else {  // curved tail
                Stroke tail;
                arc(tail, 0.40, cy + 0.05, u(0.29, 0.35), u(0.40, 0.48), u(0, 12),
                    u(55, 70));
                g.push_back(tail);
            }
            break;
        }
        default:
            break;
    }
    return g;
}

double dist_to_segment(double px, double py, Pt a, Pt b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double wx = px - a.x, wy = py - a.y;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    const double dx = wx - t * vx, dy = wy - t * vy;
    return std::sqrt(dx * dx + dy * dy);
}

Tensor render(int digit, Rng& rng) {
    // A slice of every batch is written sloppily; those samples sit near the
    // class boundaries and keep the learned margins realistic.
    const bool sloppy = rng.below(100) < 16;
    const double wob_amp = sloppy ? 0.085 : 0.035;
    const double theta = rng.uniform(-1.0, 1.0) * (sloppy ? 0.38 : 0.28);
    const double sx = rng.uniform(0.72, 1.14) * (sloppy ? rng.uniform(0.82, 1.0) : 1.0);
    const double sy = rng.uniform(0.72, 1.14) * (sloppy ? rng.uniform(0.82, 1.0) : 1.0);
    const double shear = rng.uniform(-1.0, 1.0) * (sloppy ? 0.30 : 0.18);
    const double tx = rng.uniform(-0.10, 0.10);
    const double ty = rng.uniform(-0.10, 0.10);
    const bool loopy = digit == 0 || digit == 6 || digit == 8 || digit == 9;
    double half_width =
        sloppy ? rng.uniform(0.45, 0.85) : rng.uniform(0.75, 1.35);  // pixels
    if (loopy) half_width = std::max(half_width, sloppy ? 0.7 : 1.0);
    const double intensity = sloppy ? rng.uniform(0.55, 0.9) : rng.uniform(0.75, 1.0);
    const double noise_sigma = rng.uniform(0.04, 0.10);
    const double ct = std::cos(theta), st = std::sin(theta);
    // two-band elastic wobble so strokes bend like handwriting
    const double a1x = rng.uniform(-wob_amp, wob_amp);
    const double a1y = rng.uniform(-wob_amp, wob_amp);
    const double a2x = rng.uniform(-wob_amp, wob_amp) * 0.6;
    const double a2y = rng.uniform(-wob_amp, wob_amp) * 0.6;
    const double f1x = rng.uniform(3.0, 6.0), f1y = rng.uniform(3.0, 6.0);
    const double f2x = rng.uniform(8.0, 13.0), f2y = rng.uniform(8.0, 13.0);
    const double p1x = rng.uniform(0.0, 6.28), p1y = rng.uniform(0.0, 6.28);
    const double p2x = rng.uniform(0.0, 6.28), p2y = rng.uniform(0.0, 6.28);

    auto to_pixels = [&](Pt p) {
        const double u0 = p.x - 0.5, v0 = p.y - 0.5;
        const double u =
            u0 + a1x * std::sin(f1y * v0 + p1x) + a2x * std::sin(f2y * v0 + p2x);
        const double v =
            v0 + a1y * std::sin(f1x * u0 + p1y) + a2y * std::sin(f2x * u0 + p2y);
        const double x = sx * (u * ct - v * st) + shear * v + 0.5 + tx;
        const double y = sy * (u * st + v * ct) + 0.5 + ty;
        return Pt{x * 28.0, y * 28.0};
    };

    std::vector<Stroke> strokes = glyph(digit, rng);
    for (auto& s : strokes)
        for (auto& p : s) {
            p.x += rng.uniform(-0.02, 0.02);
            p.y += rng.uniform(-0.02, 0.02);
            p = to_pixels(p);
        }

    Tensor img({28, 28, 1});
    const double aa = rng.uniform(1.0, 1.6);  // antialias band in pixels
    for (int y = 0; y < 28; ++y) {
        for (int x = 0; x < 28; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            double d = 1e9;
            for (const auto& s : strokes)
                for (size_t i = 0; i + 1 < s.size(); ++i)
                    d = std::min(d, dist_to_segment(px, py, s[i], s[i + 1]));
            double t = (half_width + aa - d) / (2.0 * aa);
            t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
            const double ink = intensity * t * t * (3.0 - 2.0 * t);
            double v = ink + noise_sigma * rng.normal();
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            img.at(y, x, 0) = static_cast<float>(v);
        }
    }
    return img;
}

}  // namespace

LabelledSet synth_digits(size_t count, uint64_t seed) {
    LabelledSet set;
    set.images.reserve(count);
    set.labels.reserve(count);
    Rng label_rng(mix_seed(seed, 0x1abe15ULL));
    for (size_t i = 0; i < count; ++i) {
        const int digit = static_cast<int>(label_rng.below(10));
        Rng rng(mix_seed(seed, 0x9000 + i));
        set.images.push_back(render(digit, rng));
        set.labels.push_back(static_cast<uint8_t>(digit));
    }
    return set;
}

}  // namespace gauntlet::data
