#pragma once

#include <cstddef>

namespace ntkspec {

struct CheckCount {
    std::size_t checked = 0;
    std::size_t violated = 0;

    void record(bool ok) {
        ++checked;
        if (!ok) ++violated;
    }
    void merge(const CheckCount& o) {
        checked += o.checked;
        violated += o.violated;
    }
    bool clean() const { return violated == 0; }
};

// Running tally of the matrix inequalities checked on computed instances.
struct InequalityAudit {
    CheckCount weyl;             // lambda_min(K) >= sum_k lambda_min(term_k)
    CheckCount schur;            // lambda_min(term_k) >= Schur bound
    CheckCount derivative_bound; // |Sigma_k entries| <= s (periodic) or 1 (relu)
    CheckCount gershgorin;       // bracket contains lambda_min
    CheckCount centred_psd;      // F F^T - (Ft Ft^T - L 1 1^T L / |mu|^2) >= 0
    CheckCount op_le_frobenius;  // ||A||_op <= ||A||_F
    CheckCount psd;              // kernel min eigenvalue >= -1e-8 lambda_max

    void merge(const InequalityAudit& o) {
        weyl.merge(o.weyl);
        schur.merge(o.schur);
        derivative_bound.merge(o.derivative_bound);
        gershgorin.merge(o.gershgorin);
        centred_psd.merge(o.centred_psd);
        op_le_frobenius.merge(o.op_le_frobenius);
        psd.merge(o.psd);
    }
    bool clean() const {
        return weyl.clean() && schur.clean() && derivative_bound.clean() && gershgorin.clean() &&
               centred_psd.clean() && op_le_frobenius.clean() && psd.clean();
    }
};

}  // namespace ntkspec
