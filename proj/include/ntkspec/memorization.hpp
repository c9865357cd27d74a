#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ntkspec/linalg.hpp"
#include "ntkspec/network.hpp"

namespace ntkspec {

struct RankCertificate {
    std::vector<double> singular_values;  // descending, of the N x p Jacobian
    std::size_t rank = 0;
    double threshold = kRankThreshold;    // relative to the largest singular value
    bool in_rank_set = false;             // rank == N
};

RankCertificate certify_rank(const NetworkState& state, const Dataset& data);

struct MemorizationTask {
    Dataset data;
    std::vector<double> targets;  // Y, length N
    double epsilon = 1e-3;
    NetworkState base;            // theta_0
};

struct StepSample {
    double h = 0.0;
    double residual = 0.0;  // ||g_h - Y||_2
};

struct FitResult {
    RankCertificate certificate;
    std::vector<double> direction;   // minimum-norm theta~ with J(theta_0) theta~ = Y
    std::vector<StepSample> curve;   // h = 1e-1 .. 1e-8
    double residual = 0.0;
    double chosen_h = 0.0;
    bool success = false;            // residual < epsilon
};

// g_h(x) = [f_L(theta_0 + h theta~, x) - f_L(theta_0, x)] / h
double difference_quotient(const NetworkState& base, std::span<const double> direction, double h,
                           std::span<const double> x);

// Throws a Precondition error when theta_0 is rank deficient.
FitResult fit_targets(const MemorizationTask& task);

// Width-doubled network computing g_h exactly: block-diagonal hidden layers,
// last layer [W_L(theta_0 + h theta~) / h; -W_L(theta_0) / h].
NetworkState realize_as_network(const NetworkState& base, std::span<const double> direction,
                                double h);

}  // namespace ntkspec
