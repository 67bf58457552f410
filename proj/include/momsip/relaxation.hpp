#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "momsip/conic.hpp"
#include "momsip/extraction.hpp"
#include "momsip/moment_matrices.hpp"
#include "momsip/problem.hpp"

namespace momsip {

/// Provenance of one PSD block inside a relaxation instance.
struct BlockInfo {
    int g_index = -1;      // 0 = the constant generator, 1..s = g_j; -1 for c_in
    int piece = -1;        // measure piece, -1 for c_in blocks
    int cin_index = -1;    // which X inequality, for c_in blocks
    int side = 0;
    int k_prime = 0, l_prime = 0;
};

/// The order-(k,l) moment relaxation as a conic problem, plus bookkeeping.
struct RelaxationInstance {
    int k = 0, l = 0;
    int n = 0;
    int num_vars = 0;
    ConicProblem conic;
    std::vector<BlockInfo> info;
};

inline int minimal_order(const SipProblem& p) {
    int k = std::max(1, (p.f.deg_x() + 1) / 2);
    for (const auto& gj : p.g) k = std::max(k, (gj.deg_x() + 1) / 2);
    for (const auto& c : p.c_in) k = std::max(k, (c.deg_x() + 1) / 2);
    for (const auto& c : p.c_eq) k = std::max(k, (c.deg_x() + 1) / 2);
    return k;
}

/// Assemble the order-k relaxation: one quantified block per (generator,
/// measure piece) with g_0 = 1 included, one localizing block per c_in,
/// localizing-vector equality rows per c_eq, and the w_0 = 1 row.
inline RelaxationInstance build_relaxation(const SipProblem& problem, int k, int l) {
    problem.validate();
    if (l < 1) throw OrderTooSmall("build_relaxation: l >= 1 required");
    const int n = problem.n;
    const int two_k = 2 * k;
    if (problem.f.deg_x() > two_k)
        throw OrderTooSmall("build_relaxation: objective degree exceeds 2k");

    RelaxationInstance inst;
    inst.k = k;
    inst.l = l;
    inst.n = n;
    inst.num_vars = static_cast<int>(monomial_count(n, two_k));

    ConicProblem& cp = inst.conic;
    cp.dim = inst.num_vars;
    cp.objective = Eigen::VectorXd::Zero(inst.num_vars);
    for (const auto& [key, coef] : problem.f.terms())
        cp.objective(static_cast<Eigen::Index>(mono_index(key.first, n))) += coef;

    const int ny = problem.m;
    for (std::size_t pi = 0; pi < problem.pieces.size(); ++pi) {
        const auto& piece = problem.pieces[pi];
        // g_0 = 1 block: Y_l (x) H^(k)
        {
            Polynomial one = Polynomial::constant(n, ny, 1.0);
            cp.blocks.push_back(quantified_block_affine(n, two_k, one, piece.measure, k, l));
            BlockInfo bi;
            bi.g_index = 0;
            bi.piece = static_cast<int>(pi);
            bi.side = cp.blocks.back().side;
            bi.k_prime = k;
            bi.l_prime = l;
            inst.info.push_back(bi);
        }
        for (std::size_t j = 0; j < problem.g.size(); ++j) {
            cp.blocks.push_back(
                quantified_block_affine(n, two_k, problem.g[j], piece.measure, k, l));
            BlockInfo bi;
            bi.g_index = static_cast<int>(j) + 1;
            bi.piece = static_cast<int>(pi);
            bi.side = cp.blocks.back().side;
            auto [kp, lp] = degree_offsets(problem.g[j], k, l);
            bi.k_prime = kp;
            bi.l_prime = lp;
            inst.info.push_back(bi);
        }
    }
    for (std::size_t ci = 0; ci < problem.c_in.size(); ++ci) {
        cp.blocks.push_back(localizing_block_affine(n, two_k, problem.c_in[ci], k));
        BlockInfo bi;
        bi.cin_index = static_cast<int>(ci);
        bi.side = cp.blocks.back().side;
        bi.k_prime = k - (problem.c_in[ci].deg_x() + 1) / 2;
        inst.info.push_back(bi);
    }

    // equality rows: localizing vectors of each c_eq, then w_0 = 1
    std::vector<Eigen::VectorXd> rows;
    for (const auto& c : problem.c_eq) {
        if (c.deg_x() > two_k) throw OrderTooSmall("build_relaxation: c_eq degree exceeds 2k");
        const auto basis = monomials_up_to(n, two_k - c.deg_x());
        for (const auto& u : basis) {
            Eigen::VectorXd row = Eigen::VectorXd::Zero(inst.num_vars);
            for (const auto& [key, coef] : c.terms())
                row(static_cast<Eigen::Index>(mono_index(u.plus(key.first), n))) += coef;
            rows.push_back(std::move(row));
        }
    }
    Eigen::VectorXd unit_row = Eigen::VectorXd::Zero(inst.num_vars);
    unit_row(0) = 1.0;
    rows.push_back(std::move(unit_row));

    cp.eq_A.resize(static_cast<Eigen::Index>(rows.size()), inst.num_vars);
    cp.eq_b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) cp.eq_A.row(static_cast<Eigen::Index>(r)) = rows[r];
    cp.eq_b(static_cast<Eigen::Index>(rows.size()) - 1) = 1.0;
    return inst;
}

/// Per-order result of the hierarchy.
struct SolveReport {
    int k = 0, l = 0;
    SolveStatus status = SolveStatus::NumericalFailure;
    double gamma = 0.0;
    std::optional<TruncatedSequence> w;
    Eigen::VectorXd xhat;
    std::vector<double> delta_per_g;
    double delta = std::numeric_limits<double>::infinity();
    std::optional<FlatnessVerdict> flatness;
    std::optional<AtomicMeasure> atoms;
    std::optional<AtomVerification> atom_check;
    std::vector<Eigen::MatrixXd> dual_blocks;  // kept when certificates are requested
    double solver_gap = 0.0;
    double solver_primal_residual = 0.0;
    double solver_dual_residual = 0.0;
    double seconds = 0.0;
    std::string message;
};

struct HierarchyOptions {
    int k_min = -1;            // -1: smallest buildable order
    int k_max = -1;            // -1: k_min + 2
    int l = -1;                // -1: l = k
    double tol = 1e-7;
    double rank_tol = 1e-6;
    std::uint64_t seed = 12345;
    int delta_budget = 20000;
    bool extract = true;
    bool keep_duals = false;
    bool verbose = false;
    int max_iter = 250;
};

/// Run the hierarchy for k in the requested range. Solver failures at one
/// order are recorded and the sweep continues.
inline std::vector<SolveReport> run_hierarchy(const SipProblem& problem,
                                              const HierarchyOptions& opts = {}) {
    problem.validate();
    const int k0 = opts.k_min > 0 ? opts.k_min : minimal_order(problem);
    const int k1 = opts.k_max >= k0 ? opts.k_max : k0 + 2;

    std::vector<SolveReport> reports;
    for (int k = k0; k <= k1; ++k) {
        SolveReport rep;
        rep.k = k;
        rep.l = opts.l > 0 ? opts.l : k;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            auto inst = build_relaxation(problem, k, rep.l);
            SdpOptions so;
            so.tol = opts.tol;
            so.verbose = opts.verbose;
            so.max_iter = opts.max_iter;
            auto sol = sdp_solve(inst.conic, so);
            rep.status = sol.status;
            rep.gamma = sol.objective;
            rep.solver_gap = sol.gap;
            rep.solver_primal_residual = sol.primal_residual;
            rep.solver_dual_residual = sol.dual_residual;
            rep.message = sol.message;
            if (opts.keep_duals) rep.dual_blocks = sol.dual_blocks;

            if (sol.status == SolveStatus::Optimal || sol.status == SolveStatus::NearOptimal) {
                TruncatedSequence w(problem.n, 2 * k, sol.w);
                rep.w = w;
                rep.xhat = Eigen::VectorXd(problem.n);
                for (int i = 0; i < problem.n; ++i)
                    rep.xhat(i) = w.at(ExponentVector::unit(problem.n, i));
                if (!problem.g.empty()) {
                    auto fg = feasibility_gap(rep.xhat, problem, opts.delta_budget);
                    rep.delta_per_g = fg.per_constraint;
                    rep.delta = fg.delta;
                }
                // flatness: the strict window needs k - d_g >= 1; when the
                // constraint degree closes the window entirely we still test
                // rank stabilization at gap k-1 and rely on direct atom
                // verification, as the truncated-moment theory suggests
                const int d_g = problem.flatness_gap();
                const int gap = std::min(d_g, k - 1);
                if (opts.extract && gap >= 1) {
                    auto verdict = flatness_check(w, gap, opts.rank_tol);
                    verdict.d_g = d_g;
                    rep.flatness = verdict;
                    if (verdict.flat) {
                        try {
                            auto atoms = extract_atoms(w, verdict.r, opts.seed);
                            rep.atom_check = verify_atoms_in_K(atoms.atoms, problem.g,
                                                               problem.pieces, opts.delta_budget);
                            rep.atoms = std::move(atoms);
                        } catch (const ExtractionFailure& e) {
                            rep.message += std::string(rep.message.empty() ? "" : "; ") +
                                           "extraction: " + e.what();
                        }
                    }
                }
            }
        } catch (const OrderTooSmall& e) {
            rep.status = SolveStatus::NumericalFailure;
            rep.message = std::string("order too small: ") + e.what();
        } catch (const CapabilityError& e) {
            rep.status = SolveStatus::NumericalFailure;
            rep.message = std::string("measure capability: ") + e.what();
        }
        rep.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        reports.push_back(std::move(rep));
    }
    return reports;
}

}  // namespace momsip
