#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cdmatch/features.hpp"
#include "cdmatch/net.hpp"

namespace cdmatch {

/// Training needs both correct and incorrect assignments to learn a boundary.
class SingleClassCorpus : public std::runtime_error {
public:
    SingleClassCorpus() : std::runtime_error("training corpus has only one label") {}
};

struct Sample {
    FeatureVector fv;
    bool right = true;
};

struct TrainConfig {
    std::size_t rounds = 120;
    std::size_t max_depth = 3;
    double learning_rate = 0.15;
    double l2 = 1.0;
    std::uint64_t seed = 1;
};

/// Confusion counts with the incorrect-assignment class as positive. Each
/// ratio is absent rather than zero when its denominator vanishes.
struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t tn,
                               std::size_t fn) {
        return Metrics{tp, fp, tn, fn};
    }

    std::optional<double> precision() const {
        if (tp + fp == 0) return std::nullopt;
        return double(tp) / double(tp + fp);
    }
    std::optional<double> recall() const {
        if (tp + fn == 0) return std::nullopt;
        return double(tp) / double(tp + fn);
    }
    std::optional<double> f1() const {
        auto p = precision();
        auto r = recall();
        if (!p || !r || *p + *r == 0.0) return std::nullopt;
        return 2.0 * *p * *r / (*p + *r);
    }
    std::optional<double> specificity() const {
        if (tn + fp == 0) return std::nullopt;
        return double(tn) / double(tn + fp);
    }
};

namespace detail {

struct TreeNode {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0;
    double leaf = 0.0;
    int left = -1, right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const std::array<double, kFeatureCount>& x) const {
        int n = 0;
        while (nodes[std::size_t(n)].feature >= 0) {
            const TreeNode& t = nodes[std::size_t(n)];
            n = x[std::size_t(t.feature)] < t.threshold ? t.left : t.right;
        }
        return nodes[std::size_t(n)].leaf;
    }
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

/// Boosted-tree model of assignment correctness. score() is the probability
/// that the assignment is correct; at or below one half it reads as wrong.
class Scorer {
public:
    double score(const FeatureVector& fv) const {
        auto x = fv.to_array();
        double z = base_;
        for (const auto& t : trees_) z += t.predict(x);
        return detail::sigmoid(z);
    }

    /// Split-gain share per feature. Sums to one unless the model never split.
    std::array<double, kFeatureCount> importances() const {
        std::array<double, kFeatureCount> out{};
        double total = 0.0;
        for (double g : gains_) total += g;
        if (total <= 0.0) return out;
        for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = gains_[i] / total;
        return out;
    }

    std::uint64_t seed() const { return seed_; }

    std::string to_json() const {
        nlohmann::json j;
        j["format"] = "correctness-scorer/1";
        j["seed"] = seed_;
        j["base"] = base_;
        j["features"] = nlohmann::json::array();
        for (const char* n : FeatureVector::names()) j["features"].push_back(n);
        j["gains"] = gains_;
        j["trees"] = nlohmann::json::array();
        for (const auto& t : trees_) {
            nlohmann::json jt = nlohmann::json::array();
            for (const auto& n : t.nodes)
                jt.push_back({{"f", n.feature},
                              {"t", n.threshold},
                              {"v", n.leaf},
                              {"l", n.left},
                              {"r", n.right}});
            j["trees"].push_back(std::move(jt));
        }
        return j.dump(2);
    }

    static Scorer from_json(const std::string& text) {
        nlohmann::json j = nlohmann::json::parse(text);
        if (j.value("format", "") != std::string("correctness-scorer/1"))
            throw std::runtime_error("unrecognized scorer format");
        const auto& names = FeatureVector::names();
        if (!j.contains("features") || j["features"].size() != names.size())
            throw std::runtime_error("scorer feature list mismatch");
        for (std::size_t i = 0; i < names.size(); ++i)
            if (j["features"][i].get<std::string>() != names[i])
                throw std::runtime_error("scorer feature list mismatch");
        Scorer s;
        s.seed_ = j.at("seed").get<std::uint64_t>();
        s.base_ = j.at("base").get<double>();
        auto g = j.at("gains").get<std::vector<double>>();
        if (g.size() != kFeatureCount) throw std::runtime_error("scorer gain list mismatch");
        std::copy(g.begin(), g.end(), s.gains_.begin());
        for (const auto& jt : j.at("trees")) {
            detail::Tree t;
            for (const auto& jn : jt)
                t.nodes.push_back({jn.at("f").get<int>(), jn.at("t").get<double>(),
                                   jn.at("v").get<double>(), jn.at("l").get<int>(),
                                   jn.at("r").get<int>()});
            s.trees_.push_back(std::move(t));
        }
        return s;
    }

private:
    double base_ = 0.0;
    std::vector<detail::Tree> trees_;
    std::array<double, kFeatureCount> gains_{};
    std::uint64_t seed_ = 0;

    friend Scorer train(const std::vector<Sample>&, const TrainConfig&);
};

namespace detail {

struct SplitResult {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    std::vector<std::size_t> left, right;
};

inline double leaf_weight(double g, double h, double l2, double lr) {
    return -lr * g / (h + l2);
}

inline SplitResult best_split(const std::vector<std::size_t>& members,
                              const std::vector<std::array<double, kFeatureCount>>& x,
                              const std::vector<double>& grad,
                              const std::vector<double>& hess, double l2) {
    double g_all = 0.0, h_all = 0.0;
    for (std::size_t i : members) {
        g_all += grad[i];
        h_all += hess[i];
    }
    double parent = g_all * g_all / (h_all + l2);

    SplitResult best;
    std::vector<std::pair<double, std::size_t>> order(members.size());
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        for (std::size_t k = 0; k < members.size(); ++k)
            order[k] = {x[members[k]][f], members[k]};
        std::sort(order.begin(), order.end());
        double gl = 0.0, hl = 0.0;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            gl += grad[order[k].second];
            hl += hess[order[k].second];
            if (order[k].first == order[k + 1].first) continue;
            double gr = g_all - gl, hr = h_all - hl;
            double gain =
                0.5 * (gl * gl / (hl + l2) + gr * gr / (hr + l2) - parent);
            // strict improvement keeps the first qualifying split, so ties
            // resolve the same way on every run
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = int(f);
                best.threshold = (order[k].first + order[k + 1].first) / 2.0;
                best.left.clear();
                best.right.clear();
                for (std::size_t m = 0; m < order.size(); ++m)
                    (m <= k ? best.left : best.right).push_back(order[m].second);
            }
        }
    }
    return best;
}

}  // namespace detail

inline Scorer train(const std::vector<Sample>& samples, const TrainConfig& cfg = {}) {
    std::size_t n_right = 0, n_wrong = 0;
    for (const auto& s : samples) (s.right ? n_right : n_wrong) += 1;
    if (n_right == 0 || n_wrong == 0) throw SingleClassCorpus();

    const std::size_t n = samples.size();
    std::vector<std::array<double, kFeatureCount>> x(n);
    std::vector<double> y(n), w(n);
    // upweight the rare incorrect class so the loss sees both sides equally
    double wrong_weight = double(n_right) / double(n_wrong);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = samples[i].fv.to_array();
        y[i] = samples[i].right ? 1.0 : 0.0;
        w[i] = samples[i].right ? 1.0 : wrong_weight;
    }

    Scorer out;
    out.seed_ = cfg.seed;
    double wsum = 0.0, wpos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wsum += w[i];
        wpos += w[i] * y[i];
    }
    double p0 = std::clamp(wpos / wsum, 1e-6, 1.0 - 1e-6);
    out.base_ = std::log(p0 / (1.0 - p0));

    std::vector<double> margin(n, out.base_), grad(n), hess(n);
    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            double p = detail::sigmoid(margin[i]);
            grad[i] = w[i] * (p - y[i]);
            hess[i] = w[i] * p * (1.0 - p);
        }

        detail::Tree tree;
        struct Pending {
            std::vector<std::size_t> members;
            int node;
            std::size_t depth;
        };
        tree.nodes.push_back({});
        std::vector<Pending> queue;
        {
            std::vector<std::size_t> all(n);
            for (std::size_t i = 0; i < n; ++i) all[i] = i;
            queue.push_back({std::move(all), 0, 0});
        }
        while (!queue.empty()) {
            Pending cur = std::move(queue.front());
            queue.erase(queue.begin());
            double g = 0.0, h = 0.0;
            for (std::size_t i : cur.members) {
                g += grad[i];
                h += hess[i];
            }
            detail::SplitResult sp;
            if (cur.depth < cfg.max_depth && cur.members.size() >= 2)
                sp = detail::best_split(cur.members, x, grad, hess, cfg.l2);
            if (sp.feature < 0) {
                tree.nodes[std::size_t(cur.node)].leaf =
                    detail::leaf_weight(g, h, cfg.l2, cfg.learning_rate);
                continue;
            }
            out.gains_[std::size_t(sp.feature)] += sp.gain;
            int li = int(tree.nodes.size());
            tree.nodes.push_back({});
            int ri = int(tree.nodes.size());
            tree.nodes.push_back({});
            tree.nodes[std::size_t(cur.node)].feature = sp.feature;
            tree.nodes[std::size_t(cur.node)].threshold = sp.threshold;
            tree.nodes[std::size_t(cur.node)].left = li;
            tree.nodes[std::size_t(cur.node)].right = ri;
            queue.push_back({std::move(sp.left), li, cur.depth + 1});
            queue.push_back({std::move(sp.right), ri, cur.depth + 1});
        }
        for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict(x[i]);
        out.trees_.push_back(std::move(tree));
    }
    return out;
}

/// Scores every sample and tallies the confusion: an assignment is flagged
/// when its score fails to clear one half.
inline Metrics evaluate(const Scorer& sc, const std::vector<Sample>& samples) {
    Metrics m;
    for (const auto& s : samples) {
        bool flagged = !(sc.score(s.fv) > 0.5);
        if (flagged && !s.right) m.tp += 1;
        else if (flagged && s.right) m.fp += 1;
        else if (!flagged && s.right) m.tn += 1;
        else m.fn += 1;
    }
    return m;
}

inline std::string format_samples_csv(const std::vector<Sample>& samples) {
    std::ostringstream os;
    os << "label";
    for (const char* n : FeatureVector::names()) os << ',' << n;
    os << '\n';
    os.precision(17);
    for (const auto& s : samples) {
        os << (s.right ? 1 : 0);
        for (double v : s.fv.to_array()) os << ',' << v;
        os << '\n';
    }
    return os.str();
}

inline std::vector<Sample> parse_samples_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty sample table");
    {
        std::ostringstream want;
        want << "label";
        for (const char* n : FeatureVector::names()) want << ',' << n;
        if (line != want.str()) throw std::runtime_error("unrecognized sample table header");
    }
    std::vector<Sample> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        if (!std::getline(row, cell, ',')) throw std::runtime_error("short sample row");
        Sample s;
        s.right = std::stoi(cell) != 0;
        std::array<double, kFeatureCount> vals{};
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            if (!std::getline(row, cell, ',')) throw std::runtime_error("short sample row");
            vals[i] = std::stod(cell);
        }
        s.fv = FeatureVector::from_array(vals);
        out.push_back(s);
    }
    return out;
}

inline std::string format_predictions_csv(
    const std::vector<std::pair<Ipv4, double>>& rows) {
    std::ostringstream os;
    os << "ip,score,predicted\n";
    char buf[32];
    for (const auto& [ip, score] : rows) {
        std::snprintf(buf, sizeof buf, "%.6f", score);
        os << format_ipv4(ip) << ',' << buf << ','
           << (score > 0.5 ? "right" : "wrong") << '\n';
    }
    return os.str();
}

}  // namespace cdmatch
