#include "gauntlet/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gauntlet/kernels.hpp"

namespace gauntlet::attacks {

namespace {

bool all_zero(const Tensor& t) {
    for (float v : t.data)
        if (v != 0.0f) return false;
    return true;
}

AttackResult finish(const DifferentiableModel& model, const Tensor& x0, Tensor adv,
                    int y, int iterations) {
    AttackResult r;
    r.success = model.predict_label(adv) != y;
    r.iterations_used = iterations;
    r.l2_distortion = l2_distance(adv, x0);
    r.adversarial = std::move(adv);
    return r;
}

}  // namespace

AttackResult fgsm(const DifferentiableModel& model, const Tensor& x, int y, float epsilon) {
    const Tensor g = model.loss_input_gradient(x, y);
    if (all_zero(g)) {
        AttackResult r;
        r.adversarial = x;
        r.success = false;  // saturated model, no step on sign(0)
        return r;
    }
    Tensor adv = x;
    for (size_t i = 0; i < adv.data.size(); ++i) {
        const float s = g.data[i] > 0.0f ? 1.0f : (g.data[i] < 0.0f ? -1.0f : 0.0f);
        adv.data[i] += epsilon * s;
    }
    kernels::ops().clip01(adv.data.data(), adv.numel());
    return finish(model, x, std::move(adv), y, 1);
}

// Runs the full iteration budget rather than aborting at the first label
// flip: with the overkill iteration counts in use, the returned point
// maximizes loss over the feasible ball instead of hugging the boundary.
AttackResult pgd(const DifferentiableModel& model, const Tensor& x, int y, float epsilon,
                 float step_size, int max_iterations) {
    const float alpha = step_size > 0.0f ? step_size : epsilon / 10.0f;
    Tensor adv = x;
    int it = 0;
    for (; it < max_iterations; ++it) {
        const Tensor g = model.loss_input_gradient(adv, y);
        if (all_zero(g)) break;
        for (size_t i = 0; i < adv.data.size(); ++i) {
            const float s = g.data[i] > 0.0f ? 1.0f : (g.data[i] < 0.0f ? -1.0f : 0.0f);
            adv.data[i] += alpha * s;
        }
        kernels::ops().project_linf(adv.data.data(), x.data.data(), epsilon, adv.numel());
        kernels::ops().clip01(adv.data.data(), adv.numel());
    }
    return finish(model, x, std::move(adv), y, it);
}

namespace {

// CW attack objective term f = max(0, Z_y - max_{k != y} Z_k); zero exactly
// when the model is already fooled.
float cw_attack_term(const Tensor& z, int y, int* best_other) {
    float zo = -std::numeric_limits<float>::infinity();
    int bo = -1;
    for (int k = 0; k < static_cast<int>(z.numel()); ++k) {
        if (k == y) continue;
        if (z.data[static_cast<size_t>(k)] > zo) {
            zo = z.data[static_cast<size_t>(k)];
            bo = k;
        }
    }
    if (best_other) *best_other = bo;
    const float diff = z.data[static_cast<size_t>(y)] - zo;
    return diff > 0.0f ? diff : 0.0f;
}

}  // namespace

AttackResult cw_l2(const DifferentiableModel& model, const Tensor& x, int y,
                   const AttackConfig& config) {
    // Change of variables: x = (tanh(w) + 1) / 2 keeps iterates inside (0,1).
    const int64_t n = x.numel();
    Tensor w0(x.dims);
    for (int64_t i = 0; i < n; ++i) {
        const double xi = std::clamp(static_cast<double>(x.data[static_cast<size_t>(i)]),
                                     1e-6, 1.0 - 1e-6);
        w0.data[static_cast<size_t>(i)] = static_cast<float>(std::atanh(2.0 * xi - 1.0));
    }

    Tensor best_adv = x;
    double best_l2 = std::numeric_limits<double>::infinity();
    bool found = false;
    int iterations = 0;

    double c = config.initial_constant;
    double c_lo = 1e-4, c_hi = 1e4;

    for (int step = 0; step < config.binary_search_steps; ++step) {
        Tensor w = w0;
        Tensor xw(x.dims);
        bool round_success = false;
        for (int it = 0; it < config.max_iterations; ++it) {
            ++iterations;
            for (int64_t i = 0; i < n; ++i)
                xw.data[static_cast<size_t>(i)] =
                    0.5f * (std::tanh(w.data[static_cast<size_t>(i)]) + 1.0f);

            const Tensor z = model.logits(xw);
            int best_other = -1;
            const float attack_term = cw_attack_term(z, y, &best_other);
            const bool fooled = attack_term <= 0.0f;
            if (fooled) {
                round_success = true;
                const double l2 = l2_distance(xw, x);
                if (l2 < best_l2) {
                    best_l2 = l2;
                    best_adv = xw;
                    found = true;
                }
            }

            // dL/dx = 2 (x - x0) + c * (dZ_y/dx - dZ_other/dx) when the
            // attack term is active.
            Tensor dx(x.dims);
            for (int64_t i = 0; i < n; ++i)
                dx.data[static_cast<size_t>(i)] =
                    2.0f * (xw.data[static_cast<size_t>(i)] - x.data[static_cast<size_t>(i)]);
            if (attack_term > 0.0f && best_other >= 0) {
                const Tensor gy = model.logit_input_gradient(xw, y);
                const Tensor go = model.logit_input_gradient(xw, best_other);
                for (int64_t i = 0; i < n; ++i)
                    dx.data[static_cast<size_t>(i)] += static_cast<float>(
                        c * (gy.data[static_cast<size_t>(i)] - go.data[static_cast<size_t>(i)]));
            }
            // dx/dw for the tanh reparameterization
            for (int64_t i = 0; i < n; ++i) {
                const float t = std::tanh(w.data[static_cast<size_t>(i)]);
                const float dxdw = 0.5f * (1.0f - t * t);
                w.data[static_cast<size_t>(i)] -=
                    config.learning_rate * dx.data[static_cast<size_t>(i)] * dxdw;
            }
        }

        if (round_success) {
            c_hi = std::min(c_hi, c);
            c = (c_lo + c_hi) / 2.0;
        } else {
            c_lo = std::max(c_lo, c);
            c = c_hi >= 1e4 ? std::min(c * 10.0, c_hi) : (c_lo + c_hi) / 2.0;
        }
    }

    AttackResult r;
    r.adversarial = found ? best_adv : x;
    kernels::ops().clip01(r.adversarial.data.data(), r.adversarial.numel());
    r.success = model.predict_label(r.adversarial) != y;
    r.iterations_used = iterations;
    r.l2_distortion = l2_distance(r.adversarial, x);
    return r;
}

AttackResult deepfool(const DifferentiableModel& model, const Tensor& x, int y,
                      const AttackConfig& config) {
    const int classes = model.num_classes();
    Tensor xi = x;
    int it = 0;

    // Candidate classes fixed from the initial logits: the top scoring
    // labels other than the true one.
    const Tensor z0 = model.logits(x);
    std::vector<int> cand;
    for (int k = 0; k < classes; ++k)
        if (k != y) cand.push_back(k);
    std::sort(cand.begin(), cand.end(), [&](int a, int b) {
        return z0.data[static_cast<size_t>(a)] > z0.data[static_cast<size_t>(b)];
    });
    if (static_cast<int>(cand.size()) > config.num_candidates)
        cand.resize(static_cast<size_t>(config.num_candidates));

    for (; it < config.max_iterations; ++it) {
        if (model.predict_label(xi) != y) break;  // fooled at a feasible point
        const Tensor z = model.logits(xi);
        const Tensor gy = model.logit_input_gradient(xi, y);

        double best_ratio = std::numeric_limits<double>::infinity();
        Tensor best_w;
        double best_f = 0.0, best_wnorm2 = 0.0;
        for (int k : cand) {
            const Tensor gk = model.logit_input_gradient(xi, k);
            Tensor wk(x.dims);
            double wnorm2 = 0.0;
            for (size_t i = 0; i < wk.data.size(); ++i) {
                wk.data[i] = gk.data[i] - gy.data[i];
                wnorm2 += static_cast<double>(wk.data[i]) * wk.data[i];
            }
            if (wnorm2 <= 0.0) continue;
            const double fk = static_cast<double>(z.data[static_cast<size_t>(k)]) -
                              z.data[static_cast<size_t>(y)];
            const double ratio = std::fabs(fk) / std::sqrt(wnorm2);
            if (ratio < best_ratio) {
                best_ratio = ratio;
                best_w = std::move(wk);
                best_f = fk;
                best_wnorm2 = wnorm2;
            }
        }
        if (best_wnorm2 <= 0.0) break;  // degenerate gradients, nothing to do

        // minimal step onto the linearized boundary, scaled by (1 + overshoot);
        // each iterate is clipped so the success check runs on a feasible point
        double scale = (1.0 + config.overshoot) * (std::fabs(best_f) / best_wnorm2);
        // with a tiny overshoot the step can shrink below float resolution at
        // the boundary and stall; floor its length at 1e-6
        const double step_len = scale * std::sqrt(best_wnorm2);
        if (step_len < 1e-6) scale = 1e-6 / std::sqrt(best_wnorm2);
        for (size_t i = 0; i < xi.data.size(); ++i)
            xi.data[i] += static_cast<float>(scale * best_w.data[i]);
        kernels::ops().clip01(xi.data.data(), xi.numel());
    }

    return finish(model, x, std::move(xi), y, it);
}

AttackResult run_attack(const DifferentiableModel& model, const Tensor& x, int y,
                        const AttackConfig& config) {
    switch (config.algorithm) {
        case Algorithm::fgsm: return fgsm(model, x, y, config.epsilon);
        case Algorithm::pgd:
            return pgd(model, x, y, config.epsilon, config.step_size, config.max_iterations);
        case Algorithm::cw_l2: return cw_l2(model, x, y, config);
        case Algorithm::deepfool: return deepfool(model, x, y, config);
    }
    throw std::invalid_argument("unknown attack algorithm");
}

AttackConfig preset(const std::string& name) {
    AttackConfig c;
    if (name == "taa-fgsm") {
        c.algorithm = Algorithm::fgsm;
        c.epsilon = 0.3f;
    } else if (name == "paa-fgsm") {
        c.algorithm = Algorithm::fgsm;
        c.epsilon = 0.05f;
    } else if (name == "taa-pgd") {
        c.algorithm = Algorithm::pgd;
        c.epsilon = 0.3f;
        c.max_iterations = 100;
    } else if (name == "paa-pgd") {
        c.algorithm = Algorithm::pgd;
        c.epsilon = 0.05f;
        c.max_iterations = 250;
    } else if (name == "cw") {
        c.algorithm = Algorithm::cw_l2;
        c.binary_search_steps = 10;
        c.initial_constant = 0.01f;
        c.learning_rate = 0.01f;
        c.max_iterations = 100;
    } else if (name == "deepfool") {
        c.algorithm = Algorithm::deepfool;
        c.max_iterations = 100;
        c.overshoot = 1e-6f;
        c.num_candidates = 3;
    } else {
        throw std::invalid_argument("unknown attack preset '" + name + "'");
    }
    return c;
}

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::fgsm: return "fgsm";
        case Algorithm::pgd: return "pgd";
        case Algorithm::cw_l2: return "cw";
        case Algorithm::deepfool: return "deepfool";
    }
    return "?";
}

}  // namespace gauntlet::attacks
