#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "soma/rng.hpp"

namespace soma {
namespace probe {

// rows x neurons matrix of penultimate-layer (tanh) activations.
struct ActivationMatrix {
    int n_images = 0;
    int n_neurons = 0;
    std::vector<double> a;       // row-major
    std::vector<int> image_ids;  // optional, one per row

    double at(int image, int neuron) const {
        return a[static_cast<std::size_t>(image) * n_neurons + neuron];
    }
    double& at(int image, int neuron) {
        return a[static_cast<std::size_t>(image) * n_neurons + neuron];
    }
};

// Localization set L = C (with the characteristic) + R (without); exploration
// set E is disjoint from L. Rows index into an ActivationMatrix.
struct ProbeSplit {
    std::vector<int> c_rows;
    std::vector<int> r_rows;
    std::vector<int> e_rows;
    std::string characteristic;

    void validate() const;
};

int heaviside(double x);  // 1 if x > 0, else 0

double fire_rate(const ActivationMatrix& m, const std::vector<int>& c_rows,
                 const std::vector<int>& r_rows, int neuron);

double activation_score(const ActivationMatrix& m, const std::vector<int>& c_rows,
                        const std::vector<int>& r_rows, int neuron);

double discernibility(double fire, double activation);

struct NeuronScore {
    int neuron = 0;
    double fire = 0.0;
    double activation = 0.0;
    double discernibility = 0.0;
};

struct NeuronScoreTable {
    std::vector<NeuronScore> rows;  // sorted descending by D, ties by neuron index
};

NeuronScoreTable score_all(const ActivationMatrix& m, const ProbeSplit& split);

std::vector<int> top_k(const NeuronScoreTable& table, int k = 10);

struct ExplorationEntry {
    int row = 0;        // row index into the matrix (member of E)
    double score = 0.0;  // mean activation over the specialized set
    int overlap = 0;     // |top-|S| most-active neurons of this image ∩ S|
};

// Images of E ranked descending by mean activation over the specialized
// neurons S.
std::vector<ExplorationEntry> explore(const ActivationMatrix& m, const std::vector<int>& e_rows,
                                      const std::vector<int>& specialized);

struct PermutationResult {
    double observed_max_d = 0.0;
    std::vector<double> null_max_d;  // one per trial
    double p_value = 0.0;            // (1 + #{null >= observed}) / (trials + 1)
};

PermutationResult permutation_baseline(const ActivationMatrix& m, const ProbeSplit& split,
                                       int trials, SeededRng& rng);

struct DiscernibilityReport {
    std::string characteristic;
    NeuronScoreTable table;
    std::vector<int> top_neurons;
    std::vector<ExplorationEntry> exploration;
    double p_value = -1.0;
};

std::string report_to_json(const DiscernibilityReport& report);
void write_report_json(const std::string& path, const DiscernibilityReport& report);
void write_score_csv(const std::string& path, const NeuronScoreTable& table);

}  // namespace probe
}  // namespace soma
