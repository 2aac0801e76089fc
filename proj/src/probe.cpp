#include "soma/probe.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace soma {
namespace probe {

using nlohmann::json;

void ProbeSplit::validate() const {
    if (c_rows.empty() || r_rows.empty())
        throw std::invalid_argument("probe split: C and R must be non-empty");
    std::set<int> c(c_rows.begin(), c_rows.end());
    for (int r : r_rows)
        if (c.count(r)) throw std::invalid_argument("probe split: C and R overlap");
    std::set<int> l = c;
    l.insert(r_rows.begin(), r_rows.end());
    for (int e : e_rows)
        if (l.count(e)) throw std::invalid_argument("probe split: E overlaps L");
}

int heaviside(double x) { return x > 0.0 ? 1 : 0; }

double fire_rate(const ActivationMatrix& m, const std::vector<int>& c_rows,
                 const std::vector<int>& r_rows, int neuron) {
    if (c_rows.empty() || r_rows.empty())
        throw std::domain_error("fire_rate: empty set");
    double fc = 0.0, fr = 0.0;
    for (int i : c_rows) fc += heaviside(m.at(i, neuron));
    for (int i : r_rows) fr += heaviside(m.at(i, neuron));
    return fc / static_cast<double>(c_rows.size()) - fr / static_cast<double>(r_rows.size());
}

double activation_score(const ActivationMatrix& m, const std::vector<int>& c_rows,
                        const std::vector<int>& r_rows, int neuron) {
    if (c_rows.empty() || r_rows.empty())
        throw std::domain_error("activation_score: empty set");
    double sc = 0.0, sr = 0.0;
    for (int i : c_rows) sc += m.at(i, neuron);
    for (int i : r_rows) sr += m.at(i, neuron);
    return 0.5 * sc / static_cast<double>(c_rows.size()) -
           0.5 * sr / static_cast<double>(r_rows.size());
}

double discernibility(double fire, double activation) { return 0.5 * (fire + activation); }

NeuronScoreTable score_all(const ActivationMatrix& m, const ProbeSplit& split) {
    split.validate();
    NeuronScoreTable table;
    table.rows.reserve(static_cast<std::size_t>(m.n_neurons));
    for (int n = 0; n < m.n_neurons; ++n) {
        NeuronScore s;
        s.neuron = n;
        s.fire = fire_rate(m, split.c_rows, split.r_rows, n);
        s.activation = activation_score(m, split.c_rows, split.r_rows, n);
        s.discernibility = discernibility(s.fire, s.activation);
        table.rows.push_back(s);
    }
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const NeuronScore& a, const NeuronScore& b) {
                         return a.discernibility > b.discernibility;
                     });
    return table;
}

std::vector<int> top_k(const NeuronScoreTable& table, int k) {
    if (k < 1 || k > static_cast<int>(table.rows.size()))
        throw std::invalid_argument("top_k: k out of range");
    std::vector<int> out;
    for (int i = 0; i < k; ++i) out.push_back(table.rows[static_cast<std::size_t>(i)].neuron);
    return out;
}

std::vector<ExplorationEntry> explore(const ActivationMatrix& m, const std::vector<int>& e_rows,
                                      const std::vector<int>& specialized) {
    if (specialized.empty())
        throw std::invalid_argument("explore: specialized set is empty");
    std::set<int> sset(specialized.begin(), specialized.end());
    std::vector<ExplorationEntry> out;
    out.reserve(e_rows.size());
    for (int row : e_rows) {
        ExplorationEntry e;
        e.row = row;
        double sum = 0.0;
        for (int n : specialized) sum += m.at(row, n);
        e.score = sum / static_cast<double>(specialized.size());
        // this image's |S| most-active neurons, ties by index
        std::vector<int> order(static_cast<std::size_t>(m.n_neurons));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&m, row](int a, int b) {
            return m.at(row, a) > m.at(row, b);
        });
        for (std::size_t i = 0; i < specialized.size(); ++i)
            if (sset.count(order[i])) ++e.overlap;
        out.push_back(e);
    }
    std::stable_sort(out.begin(), out.end(), [](const ExplorationEntry& a,
                                                const ExplorationEntry& b) {
        return a.score > b.score;
    });
    return out;
}

PermutationResult permutation_baseline(const ActivationMatrix& m, const ProbeSplit& split,
                                       int trials, SeededRng& rng) {
    if (trials < 1) throw std::invalid_argument("permutation_baseline: trials must be >= 1");
    split.validate();
    PermutationResult result;
    const auto observed = score_all(m, split);
    result.observed_max_d = observed.rows.front().discernibility;

    std::vector<int> pool = split.c_rows;
    pool.insert(pool.end(), split.r_rows.begin(), split.r_rows.end());
    const std::size_t nc = split.c_rows.size();
    int exceed = 0;
    for (int t = 0; t < trials; ++t) {
        std::vector<int> shuffled = pool;
        rng.shuffle(shuffled);
        ProbeSplit fake;
        fake.c_rows.assign(shuffled.begin(), shuffled.begin() + nc);
        fake.r_rows.assign(shuffled.begin() + nc, shuffled.end());
        const auto table = score_all(m, fake);
        const double mx = table.rows.front().discernibility;
        result.null_max_d.push_back(mx);
        if (mx >= result.observed_max_d) ++exceed;
    }
    result.p_value = static_cast<double>(1 + exceed) / static_cast<double>(trials + 1);
    return result;
}

std::string report_to_json(const DiscernibilityReport& report) {
    json scores = json::array();
    for (const auto& s : report.table.rows)
        scores.push_back({{"neuron", s.neuron},
                          {"F", s.fire},
                          {"A", s.activation},
                          {"D", s.discernibility}});
    json exploration = json::array();
    for (const auto& e : report.exploration)
        exploration.push_back({{"row", e.row}, {"score", e.score}, {"overlap", e.overlap}});
    json j = {{"characteristic", report.characteristic},
              {"scores", scores},
              {"top_neurons", report.top_neurons},
              {"exploration", exploration}};
    if (report.p_value >= 0.0) j["p_value"] = report.p_value;
    return j.dump(2);
}

void write_report_json(const std::string& path, const DiscernibilityReport& report) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("probe: cannot open " + path);
    f << report_to_json(report) << "\n";
}

void write_score_csv(const std::string& path, const NeuronScoreTable& table) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("probe: cannot open " + path);
    f << "neuron,F,A,D\n";
    for (const auto& s : table.rows)
        f << s.neuron << "," << s.fire << "," << s.activation << "," << s.discernibility << "\n";
}

}  // namespace probe
}  // namespace soma
