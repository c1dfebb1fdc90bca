#include "gauntlet/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "gauntlet/kernels.hpp"
#include "gauntlet/parallel.hpp"

namespace gauntlet::adaptive {

double dissimilarity(const Tensor& x_adv, const Tensor& x0) {
    if (!x_adv.same_shape(x0))
        throw std::invalid_argument("dissimilarity: shape mismatch");
    const double denom = l2_norm(x0);
    if (denom <= 0.0)
        throw std::invalid_argument("dissimilarity undefined for an all-zero reference");
    return l2_distance(x_adv, x0) / denom;
}

namespace {

// Attack one example in the victim's transformed domain and map the result
// back to the original space.
Tensor attack_and_reset(const classifier::SubModel& victim,
                        const attacks::AttackConfig& attack, const Tensor& x, int y) {
    const Tensor xt = transforms::apply(victim.spec, x);
    const attacks::SubModelView view(victim);
    attacks::AttackResult res = attacks::run_attack(view, xt, y, attack);
    return transforms::to_original(victim.spec, res.adversarial);
}

}  // namespace

TransferMatrix transfer_matrix(const std::vector<SubModelPtr>& victims,
                               const attacks::AttackConfig& attack,
                               const data::LabelledSet& set, int threads) {
    TransferMatrix m;
    for (const auto& v : victims) m.victim_ids.push_back(v->spec.id);
    m.evaluator_ids = m.victim_ids;
    m.rates.resize(victims.size());
    m.ae_counts.resize(victims.size(), 0);
    m.row_averages.resize(victims.size());

    for (size_t vi = 0; vi < victims.size(); ++vi) {
        const auto& victim = *victims[vi];

        // restrict to examples the victim classifies correctly
        std::vector<size_t> eligible;
        {
            std::vector<uint8_t> ok(set.size(), 0);
            parallel_for(
                static_cast<int64_t>(set.size()),
                [&](int64_t i) {
                    ok[static_cast<size_t>(i)] =
                        classifier::predict(victim, set.images[static_cast<size_t>(i)]).label ==
                                static_cast<int>(set.labels[static_cast<size_t>(i)])
                            ? 1
                            : 0;
                },
                threads);
            for (size_t i = 0; i < set.size(); ++i)
                if (ok[i]) eligible.push_back(i);
        }

        // generate AEs and keep those that fool the victim itself
        std::vector<Tensor> ae(eligible.size());
        std::vector<uint8_t> fooled(eligible.size(), 0);
        parallel_for(
            static_cast<int64_t>(eligible.size()),
            [&](int64_t j) {
                const size_t idx = eligible[static_cast<size_t>(j)];
                const int y = set.labels[idx];
                Tensor adv = attack_and_reset(victim, attack, set.images[idx], y);
                fooled[static_cast<size_t>(j)] =
                    classifier::predict(victim, adv).label != y ? 1 : 0;
                ae[static_cast<size_t>(j)] = std::move(adv);
            },
            threads);

        std::vector<size_t> successful;
        for (size_t j = 0; j < eligible.size(); ++j)
            if (fooled[j]) successful.push_back(j);
        m.ae_counts[vi] = static_cast<int>(successful.size());

        auto& row = m.rates[vi];
        row.assign(victims.size(), std::nullopt);
        if (successful.empty()) continue;  // undefined row

        for (size_t ei = 0; ei < victims.size(); ++ei) {
            if (ei == vi) {
                row[ei] = 1.0;  // by construction of the successful set
                continue;
            }
            const auto& evaluator = *victims[ei];
            std::vector<uint8_t> transferred(successful.size(), 0);
            parallel_for(
                static_cast<int64_t>(successful.size()),
                [&](int64_t s) {
                    const size_t j = successful[static_cast<size_t>(s)];
                    const size_t idx = eligible[j];
                    transferred[static_cast<size_t>(s)] =
                        classifier::predict(evaluator, ae[j]).label !=
                                static_cast<int>(set.labels[idx])
                            ? 1
                            : 0;
                },
                threads);
            int64_t hits = 0;
            for (uint8_t t : transferred) hits += t;
            row[ei] = static_cast<double>(hits) / static_cast<double>(successful.size());
        }

        double sum = 0.0;
        int terms = 0;
        for (size_t ei = 0; ei < victims.size(); ++ei) {
            if (ei == vi || !row[ei]) continue;
            sum += *row[ei];
            ++terms;
        }
        if (terms > 0) m.row_averages[vi] = sum / terms;
    }
    return m;
}

int TransferRanking::position_of(const std::string& id) const {
    for (size_t i = 0; i < entries.size(); ++i)
        if (entries[i].first == id) return static_cast<int>(i) + 1;
    throw std::invalid_argument("member '" + id + "' not in transferability ranking");
}

TransferRanking transfer_ranking(const std::vector<SubModelPtr>& members,
                                 const attacks::AttackConfig& attack,
                                 const data::LabelledSet& sample, int threads) {
    if (sample.empty())
        throw std::invalid_argument("transfer_ranking: empty sample");

    TransferRanking ranking;
    ranking.entries.resize(members.size());

    for (size_t ci = 0; ci < members.size(); ++ci) {
        const auto& cand = *members[ci];
        std::vector<Tensor> ae(sample.size());
        parallel_for(
            static_cast<int64_t>(sample.size()),
            [&](int64_t i) {
                const size_t idx = static_cast<size_t>(i);
                ae[idx] = attack_and_reset(cand, attack, sample.images[idx],
                                           sample.labels[idx]);
            },
            threads);

        // transferability score: mean accuracy of the OTHER members on these
        // AEs (low accuracy = high transferability)
        double acc_sum = 0.0;
        int other = 0;
        for (size_t mi = 0; mi < members.size(); ++mi) {
            if (mi == ci) continue;
            const auto& evaluator = *members[mi];
            std::vector<uint8_t> ok(sample.size(), 0);
            parallel_for(
                static_cast<int64_t>(sample.size()),
                [&](int64_t i) {
                    const size_t idx = static_cast<size_t>(i);
                    ok[idx] = classifier::predict(evaluator, ae[idx]).label ==
                                      static_cast<int>(sample.labels[idx])
                                  ? 1
                                  : 0;
                },
                threads);
            int64_t hits = 0;
            for (uint8_t o : ok) hits += o;
            acc_sum += static_cast<double>(hits) / static_cast<double>(sample.size());
            ++other;
        }
        const double score = other > 0 ? acc_sum / other : 1.0;
        ranking.entries[ci] = {cand.spec.id, score};
    }

    std::sort(ranking.entries.begin(), ranking.entries.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second < b.second;
                  return a.first < b.first;  // documented id tie-break
              });
    return ranking;
}

attacks::AttackResult taa(const Tensor& x, int y, const attacks::AttackConfig& attack,
                          const TransferRanking& ranking,
                          const std::vector<SubModelPtr>& members) {
    if (ranking.entries.empty()) throw std::invalid_argument("taa: empty ranking");
    const std::string& target_id = ranking.id_at(0);
    const SubModelPtr* target = nullptr;
    for (const auto& m : members)
        if (m->spec.id == target_id) target = &m;
    if (!target) throw std::invalid_argument("taa: ranked member '" + target_id +
                                             "' not among members");
    if (!(*target)->spec.reversible)
        throw std::invalid_argument("taa: top-ranked member '" + target_id +
                                    "' is irreversible");

    const Tensor xt = transforms::apply((*target)->spec, x);
    const attacks::SubModelView view(**target);
    attacks::AttackResult res = attacks::run_attack(view, xt, y, attack);
    res.adversarial = transforms::reset((*target)->spec, res.adversarial);
    res.l2_distortion = l2_distance(res.adversarial, x);
    return res;
}

Aggregation aggregation_from_name(const std::string& name) {
    if (name == "maxp") return Aggregation::maxp;
    if (name == "avgp") return Aggregation::avgp;
    if (name == "mvotep") return Aggregation::mvotep;
    if (name == "wsump") return Aggregation::wsump;
    throw std::invalid_argument("unknown aggregation '" + name + "'");
}

std::string aggregation_name(Aggregation a) {
    switch (a) {
        case Aggregation::maxp: return "maxp";
        case Aggregation::avgp: return "avgp";
        case Aggregation::mvotep: return "mvotep";
        case Aggregation::wsump: return "wsump";
    }
    return "?";
}

std::vector<double> wsump_weights(const std::vector<int>& positions_1based, int n_total) {
    const double n = static_cast<double>(n_total);
    std::vector<double> pos(positions_1based.size());
    for (size_t i = 0; i < positions_1based.size(); ++i) {
        double p = n - static_cast<double>(positions_1based[i]);
        p = std::max(p, 0.8 * n);
        p = std::min(p, n - 2.0);
        pos[i] = p;
    }
    // softmax, stabilized
    const double mx = *std::max_element(pos.begin(), pos.end());
    double sum = 0.0;
    for (double& p : pos) {
        p = std::exp(p - mx);
        sum += p;
    }
    for (double& p : pos) p /= sum;
    return pos;
}

Tensor aggregate(const std::vector<Tensor>& deltas,
                 const std::vector<std::string>& member_ids, Aggregation strategy,
                 const TransferRanking& ranking) {
    if (deltas.empty()) throw std::invalid_argument("aggregate: no perturbations");
    if (deltas.size() != member_ids.size())
        throw std::invalid_argument("aggregate: ids do not match deltas");
    for (const auto& d : deltas)
        if (!d.same_shape(deltas.front()))
            throw std::invalid_argument("aggregate: delta shape mismatch");

    const size_t n = deltas.size();
    const int64_t numel = deltas.front().numel();
    Tensor out(deltas.front().dims);

    std::vector<int> positions(n);
    for (size_t i = 0; i < n; ++i) positions[i] = ranking.position_of(member_ids[i]);

    switch (strategy) {
        case Aggregation::maxp: {
            // earlier-ranked member wins absolute-value ties
            std::vector<size_t> order(n);
            for (size_t i = 0; i < n; ++i) order[i] = i;
            std::sort(order.begin(), order.end(),
                      [&](size_t a, size_t b) { return positions[a] < positions[b]; });
            for (int64_t p = 0; p < numel; ++p) {
                float best = 0.0f;
                float best_abs = -1.0f;
                for (size_t oi : order) {
                    const float v = deltas[oi].data[static_cast<size_t>(p)];
                    const float a = std::fabs(v);
                    if (a > best_abs) {
                        best_abs = a;
                        best = v;
                    }
                }
                out.data[static_cast<size_t>(p)] = best;
            }
            break;
        }
        case Aggregation::avgp: {
            const double inv = 1.0 / static_cast<double>(n);
            for (int64_t p = 0; p < numel; ++p) {
                double s = 0.0;
                for (const auto& d : deltas) s += d.data[static_cast<size_t>(p)];
                out.data[static_cast<size_t>(p)] = static_cast<float>(s * inv);
            }
            break;
        }
        case Aggregation::mvotep: {
            // quantize to the 0.05 grid, then per-pixel plurality; ties go to
            // the value nearest zero, then the smaller value
            for (int64_t p = 0; p < numel; ++p) {
                std::map<int, int> counts;
                for (const auto& d : deltas) {
                    const int q = static_cast<int>(
                        std::lround(static_cast<double>(d.data[static_cast<size_t>(p)]) /
                                    kMVoteGrid));
                    ++counts[q];
                }
                int best_q = 0, best_count = -1;
                for (const auto& [q, c] : counts) {
                    bool take = c > best_count;
                    if (c == best_count) {
                        const int aq = std::abs(q), ab = std::abs(best_q);
                        take = aq < ab || (aq == ab && q < best_q);
                    }
                    if (take) {
                        best_q = q;
                        best_count = c;
                    }
                }
                out.data[static_cast<size_t>(p)] =
                    static_cast<float>(best_q * kMVoteGrid);
            }
            break;
        }
        case Aggregation::wsump: {
            const std::vector<double> w =
                wsump_weights(positions, static_cast<int>(ranking.size()));
            for (int64_t p = 0; p < numel; ++p) {
                double s = 0.0;
                for (size_t i = 0; i < n; ++i)
                    s += w[i] * deltas[i].data[static_cast<size_t>(p)];
                out.data[static_cast<size_t>(p)] = static_cast<float>(s);
            }
            break;
        }
    }
    return out;
}

PaaResult paa(const Tensor& x, int y, const std::vector<SubModelPtr>& members,
              double budget, const attacks::AttackConfig& attack,
              Aggregation strategy, const TransferRanking& ranking, int max_rounds) {
    for (const auto& m : members)
        if (!m->spec.reversible)
            throw std::invalid_argument("paa: member '" + m->spec.id +
                                        "' is irreversible");

    PaaResult out;
    Tensor x_adv = x;

    // candidates in ranking order; fooled members drop out
    std::vector<SubModelPtr> candidates;
    for (size_t i = 0; i < ranking.size(); ++i)
        for (const auto& m : members)
            if (m->spec.id == ranking.id_at(i)) candidates.push_back(m);
    if (candidates.size() != members.size())
        throw std::invalid_argument("paa: ranking does not cover the member set");

    if (budget > 0.0) {
        for (int round = 0; round < max_rounds && !candidates.empty(); ++round) {
            std::vector<Tensor> deltas(candidates.size());
            std::vector<std::string> ids(candidates.size());
            for (size_t i = 0; i < candidates.size(); ++i) {
                const Tensor adv = attack_and_reset(*candidates[i], attack, x_adv, y);
                Tensor d = adv;
                for (size_t p = 0; p < d.data.size(); ++p) d.data[p] -= x_adv.data[p];
                deltas[i] = std::move(d);
                ids[i] = candidates[i]->spec.id;
            }

            Tensor agg = aggregate(deltas, ids, strategy, ranking);
            Tensor x_tmp = x_adv;
            for (size_t p = 0; p < x_tmp.data.size(); ++p) x_tmp.data[p] += agg.data[p];
            kernels::ops().clip01(x_tmp.data.data(), x_tmp.numel());

            if (x_tmp.data == x_adv.data) break;          // no progress
            if (dissimilarity(x_tmp, x) > budget) break;  // would exceed the budget

            x_adv = std::move(x_tmp);
            out.rounds = round + 1;

            // drop members the accepted point now fools
            std::vector<SubModelPtr> still;
            for (const auto& m : candidates)
                if (classifier::predict(*m, x_adv).label == y) still.push_back(m);
            candidates = std::move(still);
        }
    }

    out.members_fooled = static_cast<int>(members.size() - candidates.size());
    out.result.success = candidates.empty();
    out.result.iterations_used = out.rounds;
    out.result.l2_distortion = l2_distance(x_adv, x);
    out.result.adversarial = std::move(x_adv);
    return out;
}

}  // namespace gauntlet::adaptive
