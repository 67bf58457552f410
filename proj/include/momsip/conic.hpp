#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "momsip/moment_matrices.hpp"

namespace momsip {

enum class SolveStatus { Optimal, NearOptimal, Infeasible, Unbounded, NumericalFailure };

inline const char* status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::NearOptimal: return "near-optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::NumericalFailure: return "numerical-failure";
    }
    return "?";
}

/// Linear objective in w subject to affine PSD blocks and equality rows:
///   minimize c^T w   s.t.   F_{t,0} + sum_i w_i F_{t,i} >= 0,   A w = b.
struct ConicProblem {
    int dim = 0;
    Eigen::VectorXd objective;
    std::vector<AffineBlock> blocks;
    Eigen::MatrixXd eq_A;  // R x dim (R may be 0)
    Eigen::VectorXd eq_b;
};

struct ConicSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    Eigen::VectorXd w;
    double objective = 0.0;
    double dual_objective = 0.0;
    std::vector<Eigen::MatrixXd> dual_blocks;  // Gram-side multipliers S_t
    Eigen::VectorXd eq_duals;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;  // relative duality gap
    int iterations = 0;
    std::string message;
};

struct SdpOptions {
    double tol = 1e-7;
    double near_tol = 1e-4;          // residual level still reported as near-optimal
    int max_iter = 250;
    int kkt_row_threshold = 50;      // equality rows above this keep the KKT form
    bool prescale = true;
    double infeas_threshold = 1e-8;  // improving-ray detection
    bool verbose = false;
};

namespace detail {

inline double sparse_dot(const Eigen::SparseMatrix<double>& A, const Eigen::MatrixXd& B) {
    double acc = 0.0;
    for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
            acc += it.value() * B(it.row(), it.col());
    return acc;
}

inline Eigen::MatrixXd sparse_to_dense_sym(const Eigen::SparseMatrix<double>& A, int side) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(side, side);
    for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
            D(it.row(), it.col()) += it.value();
    return 0.5 * (D + D.transpose());
}

// Largest step alpha keeping M + alpha*DM in the PSD cone, given M = L L^T.
inline double max_step(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& DM) {
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd T = L.triangularView<Eigen::Lower>().solve(DM);
    Eigen::MatrixXd J = L.triangularView<Eigen::Lower>().solve(T.transpose());
    J = 0.5 * (J + J.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin >= -1e-13) return std::numeric_limits<double>::infinity();
    return -1.0 / lmin;
}

struct BlockWork {
    int side = 0;
    std::vector<int> vars;                       // w indices present in this block
    std::vector<Eigen::SparseMatrix<double>> F;  // scaled coefficients, aligned w/ vars
    Eigen::MatrixXd F0;                          // scaled constant part
    Eigen::VectorXd d;                           // prescale diagonal
    double fnorm_scale = 1.0;
    // Kronecker fast path: block = Y (x) Hankel(w)
    bool kron = false;
    Eigen::MatrixXd Y;       // scaled y-side factor
    int nx = 0;
    Eigen::MatrixXi bin;     // (a,b) -> w index with a+b = alpha
    // iteration state
    Eigen::MatrixXd X, S, G, G0p, Winv, Xinv, RC;
    Eigen::LLT<Eigen::MatrixXd> lltX, lltS;

    void eval(const Eigen::VectorXd& w) {
        G = F0;
        for (std::size_t q = 0; q < vars.size(); ++q) G += w(vars[q]) * Eigen::MatrixXd(F[q]);
        G = 0.5 * (G + G.transpose()).eval();
    }
};

}  // namespace detail

/// Primal-dual path-following interior-point solve with Nesterov-Todd
/// scaling on dense blocks. Deterministic: identical inputs give identical
/// output. Equality rows are eliminated onto a nullspace basis when their
/// count is small, otherwise kept in a regularized normal system.
inline ConicSolution sdp_solve(const ConicProblem& prob, const SdpOptions& opts = {}) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    ConicSolution sol;
    const int M = prob.dim;
    const VectorXd& c = prob.objective;
    if (c.size() != M) throw std::invalid_argument("sdp_solve: objective dimension mismatch");
    const int R = static_cast<int>(prob.eq_A.rows());
    if (R > 0 && prob.eq_A.cols() != M)
        throw std::invalid_argument("sdp_solve: equality row dimension mismatch");
    for (const auto& blk : prob.blocks)
        if (static_cast<int>(blk.F.size()) != M)
            throw std::invalid_argument("sdp_solve: block coefficient count mismatch");

    // ---- scaled block workspaces ----------------------------------------
    std::vector<detail::BlockWork> bw;
    bw.reserve(prob.blocks.size());
    for (const auto& blk : prob.blocks) {
        detail::BlockWork W;
        W.side = blk.side;
        MatrixXd F0d = detail::sparse_to_dense_sym(blk.F0, blk.side);

        W.d = VectorXd::Ones(blk.side);
        const bool kron_able = blk.kron_structured && blk.side >= 64;
        if (opts.prescale) {
            if (kron_able) {
                // scale the y factor only, so the Kronecker shape survives
                const int nys = blk.side / blk.kron_nx;
                for (int cy = 0; cy < nys; ++cy) {
                    const double dy =
                        1.0 / std::sqrt(std::max(std::abs(blk.kron_Y(cy, cy)), 1e-8));
                    for (int ax = 0; ax < blk.kron_nx; ++ax) W.d(cy * blk.kron_nx + ax) = dy;
                }
            } else {
                VectorXd mx = F0d.diagonal().cwiseAbs();
                for (int ai = 0; ai < M; ++ai) {
                    const auto& Fs = blk.F[static_cast<std::size_t>(ai)];
                    if (Fs.nonZeros() == 0) continue;
                    for (int k = 0; k < Fs.outerSize(); ++k)
                        for (Eigen::SparseMatrix<double>::InnerIterator it(Fs, k); it; ++it)
                            if (it.row() == it.col())
                                mx(it.row()) = std::max(mx(it.row()), std::abs(it.value()));
                }
                for (int i = 0; i < blk.side; ++i)
                    W.d(i) = 1.0 / std::sqrt(std::max(mx(i), 1e-8));
            }
        }
        W.F0 = W.d.asDiagonal() * F0d * W.d.asDiagonal();

        for (int ai = 0; ai < M; ++ai) {
            const auto& Fs = blk.F[static_cast<std::size_t>(ai)];
            if (Fs.nonZeros() == 0) continue;
            std::vector<Eigen::Triplet<double>> trips;
            trips.reserve(static_cast<std::size_t>(Fs.nonZeros()));
            for (int k = 0; k < Fs.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator it(Fs, k); it; ++it)
                    trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                       it.value() * W.d(it.row()) * W.d(it.col()));
            Eigen::SparseMatrix<double> scaled(blk.side, blk.side);
            scaled.setFromTriplets(trips.begin(), trips.end());
            Eigen::SparseMatrix<double> sym =
                0.5 * (scaled + Eigen::SparseMatrix<double>(scaled.transpose()));
            W.vars.push_back(ai);
            W.F.push_back(std::move(sym));
            W.fnorm_scale = std::max(W.fnorm_scale, W.F.back().norm());
        }

        if (kron_able) {
            W.kron = true;
            W.nx = blk.kron_nx;
            const int nys = blk.side / blk.kron_nx;
            VectorXd dy(nys);
            for (int cy = 0; cy < nys; ++cy) dy(cy) = W.d(cy * blk.kron_nx);
            W.Y = dy.asDiagonal() * blk.kron_Y * dy.asDiagonal();
            W.bin = Eigen::MatrixXi::Constant(W.nx, W.nx, -1);
            for (int ai = 0; ai < M; ++ai)
                for (const auto& [a, b] : blk.kron_pairs[static_cast<std::size_t>(ai)])
                    W.bin(a, b) = ai;
        }
        bw.push_back(std::move(W));
        sol.dual_blocks.emplace_back();
    }

    // constant blocks (no variable entries): direct eigenvalue check
    for (auto& W : bw) {
        if (!W.vars.empty()) continue;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(W.F0, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-9 * (1.0 + W.F0.norm())) {
            sol.status = SolveStatus::Infeasible;
            sol.message = "constant block is not positive semidefinite";
            sol.w = VectorXd::Zero(M);
            return sol;
        }
    }

    // ---- equality rows ----------------------------------------------------
    const bool kkt_mode = R > opts.kkt_row_threshold;
    VectorXd w_p = VectorXd::Zero(M);
    MatrixXd N;
    if (!kkt_mode) {
        if (R > 0) {
            Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(prob.eq_A);
            w_p = cod.solve(prob.eq_b);
            if ((prob.eq_A * w_p - prob.eq_b).norm() > 1e-8 * (1.0 + prob.eq_b.norm())) {
                sol.status = SolveStatus::Infeasible;
                sol.message = "equality rows are inconsistent";
                sol.w = w_p;
                return sol;
            }
            Eigen::FullPivLU<MatrixXd> lu(prob.eq_A);
            N = lu.dimensionOfKernel() > 0 ? MatrixXd(lu.kernel()) : MatrixXd::Zero(M, 0);
        } else {
            N = MatrixXd::Identity(M, M);
        }
    }
    const int Mr = kkt_mode ? M : static_cast<int>(N.cols());

    if (!kkt_mode && Mr == 0) {  // fully pinned by equality rows
        bool ok = true;
        for (auto& W : bw) {
            W.eval(w_p);
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(W.G, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -1e-8 * (1.0 + W.G.norm())) ok = false;
        }
        sol.status = ok ? SolveStatus::Optimal : SolveStatus::Infeasible;
        sol.w = w_p;
        sol.objective = c.dot(w_p);
        sol.message = "variable fully determined by equality rows";
        for (std::size_t t = 0; t < bw.size(); ++t)
            sol.dual_blocks[t] = MatrixXd::Zero(bw[t].side, bw[t].side);
        return sol;
    }

    double total_side = 0.0;
    for (auto& W : bw) total_side += W.side;
    if (total_side == 0.0) {  // no PSD blocks at all
        VectorXd cr = kkt_mode ? c : VectorXd(N.transpose() * c);
        sol.w = w_p;
        sol.objective = c.dot(w_p);
        sol.status = cr.norm() > 1e-12 ? SolveStatus::Unbounded : SolveStatus::Optimal;
        return sol;
    }

    // ---- starting point ----------------------------------------------------
    VectorXd w = w_p;
    if (kkt_mode) {
        Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(prob.eq_A);
        w = R > 0 ? VectorXd(cod.solve(prob.eq_b)) : VectorXd::Zero(M);
    }
    VectorXd mu_eq = VectorXd::Zero(R);

    const double cnorm = std::max(1.0, c.lpNorm<Eigen::Infinity>());
    for (auto& W : bw) {
        W.eval(w);
        W.G0p = W.G;  // G at the particular solution; the reduced constant part
        const double xi = std::max({10.0, std::sqrt(static_cast<double>(W.side)), 1.5 * W.G.norm()});
        const double eta = std::max(
            {10.0, std::sqrt(static_cast<double>(W.side)), cnorm / std::max(1.0, W.fnorm_scale)});
        W.X = xi * MatrixXd::Identity(W.side, W.side);
        W.S = eta * MatrixXd::Identity(W.side, W.side);
    }

    const double scale0 = [&] {
        double s = 1.0;
        for (auto& W : bw) s = std::max(s, W.G0p.norm());
        return s;
    }();

    double best_err = std::numeric_limits<double>::infinity();
    int stall = 0;
    double pinf = 1, dinf = 1, relgap = 1, pobj = 0, dobj = 0;
    bool finished = false;
    int iter = 0;

    // trailing iterates for improving-ray extraction by differencing
    std::vector<MatrixXd> S_prev;
    VectorXd v_prev, w_prev, mu_prev;
    double snorm_prev = 0.0;

    for (; iter < opts.max_iter && !finished; ++iter) {
        for (auto& W : bw) W.eval(w);

        VectorXd v = VectorXd::Zero(M);  // sum_t <F_{t,i}, S_t>
        for (auto& W : bw)
            for (std::size_t q = 0; q < W.vars.size(); ++q)
                v(W.vars[q]) += detail::sparse_dot(W.F[q], W.S);

        VectorXd rd_full = c - v;
        if (kkt_mode && R > 0) rd_full -= prob.eq_A.transpose() * mu_eq;
        VectorXd rp = (kkt_mode && R > 0) ? VectorXd(prob.eq_b - prob.eq_A * w) : VectorXd();

        double gap_abs = 0.0;
        pinf = 0.0;
        for (auto& W : bw) {
            gap_abs += W.X.cwiseProduct(W.S).sum();
            pinf = std::max(pinf, (W.G - W.X).norm() / (1.0 + W.G.norm()));
        }
        if (kkt_mode && R > 0)
            pinf = std::max(pinf, rp.lpNorm<Eigen::Infinity>() / (1.0 + prob.eq_b.norm()));
        const VectorXd rd_proj = kkt_mode ? rd_full : VectorXd(N.transpose() * rd_full);
        const double cproj_norm =
            1.0 + (kkt_mode ? c : VectorXd(N.transpose() * c)).lpNorm<Eigen::Infinity>();
        dinf = rd_proj.lpNorm<Eigen::Infinity>() / cproj_norm;
        pobj = c.dot(w);
        dobj = pobj;
        for (auto& W : bw) dobj -= W.G.cwiseProduct(W.S).sum();
        if (kkt_mode && R > 0) dobj += rp.dot(mu_eq);
        relgap = gap_abs / (1.0 + std::abs(pobj) + std::abs(dobj));

        if (opts.verbose)
            std::fprintf(stderr, "it %3d  pobj %+.8e dobj %+.8e gap %.2e pinf %.2e dinf %.2e\n",
                         iter, pobj, dobj, relgap, pinf, dinf);

        if (pinf <= opts.tol && dinf <= opts.tol && relgap <= opts.tol) {
            sol.status = SolveStatus::Optimal;
            finished = true;
            break;
        }

        double snorm = mu_eq.norm();
        for (auto& W : bw) snorm += W.S.norm();

        const double err = std::max({pinf, dinf, relgap});
        const bool diverging = snorm > 1.02 * snorm_prev && snorm > 1e3;
        if (err < 0.95 * best_err) {
            best_err = std::min(best_err, err);
            stall = 0;
        } else if (diverging || (w - w_p).norm() > 1e6) {
            stall = 0;  // a developing improving ray is progress
        } else if (++stall > 25) {
            break;
        }

        // improving-ray tests on differenced iterates (differencing cancels
        // the bounded component, leaving the ray direction)
        if (iter > 0 && !S_prev.empty()) {
            // dual side: candidate ray dS = S - S_prev certifies primal
            // (moment-form) infeasibility
            double dsn = (mu_eq - mu_prev).norm();
            for (std::size_t t = 0; t < bw.size(); ++t) dsn += (bw[t].S - S_prev[t]).norm();
            if (dsn > 1e2 && snorm > 1e3) {
                // project the difference onto the PSD cone to obtain a valid
                // Farkas candidate, then verify it from scratch
                std::vector<MatrixXd> D(bw.size());
                double dnorm = 0.0;
                for (std::size_t t = 0; t < bw.size(); ++t) {
                    Eigen::SelfAdjointEigenSolver<MatrixXd> es(bw[t].S - S_prev[t]);
                    D[t] = es.eigenvectors() *
                           es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                           es.eigenvectors().transpose();
                    dnorm += D[t].norm();
                }
                VectorXd vD = VectorXd::Zero(M);
                for (std::size_t t = 0; t < bw.size(); ++t)
                    for (std::size_t q = 0; q < bw[t].vars.size(); ++q)
                        vD(bw[t].vars[q]) += detail::sparse_dot(bw[t].F[q], D[t]);
                VectorXd hom = vD;
                if (kkt_mode && R > 0) hom += prob.eq_A.transpose() * (mu_eq - mu_prev);
                const VectorXd homp = kkt_mode ? hom : VectorXd(N.transpose() * hom);
                double gain = 0.0;
                if (kkt_mode) {
                    if (R > 0) gain = prob.eq_b.dot(mu_eq - mu_prev);
                    for (std::size_t t = 0; t < bw.size(); ++t)
                        gain -= bw[t].F0.cwiseProduct(D[t]).sum();
                } else {
                    for (std::size_t t = 0; t < bw.size(); ++t)
                        gain -= bw[t].G0p.cwiseProduct(D[t]).sum();
                }
#ifdef MOMSIP_RAY_DEBUG
                std::fprintf(stderr,
                             "ray dbg: dsn %.3e snorm %.3e dnorm %.3e gain %.3e hom %.3e\n",
                             dsn, snorm, dnorm, gain, homp.lpNorm<Eigen::Infinity>());
#endif
                if (dnorm > 0 && gain > 1e-6 * dnorm * scale0 &&
                    homp.lpNorm<Eigen::Infinity>() <=
                        opts.infeas_threshold * std::max(gain, dnorm * scale0)) {
                    sol.status = SolveStatus::Infeasible;
                    sol.message = "dual improving ray found";
                    finished = true;
                    break;
                }
            }
            // primal side: candidate ray dw = w - w_prev certifies
            // unboundedness
            const VectorXd dwv = w - w_prev;
            const double dwn = dwv.norm();
            if (dwn > 1e2 && (w - w_p).norm() > 1e3 && c.dot(dwv) < 0) {
                const VectorXd dir = dwv / dwn;
                bool psd_dir = true;
                for (auto& W : bw) {
                    MatrixXd H = MatrixXd::Zero(W.side, W.side);
                    for (std::size_t q = 0; q < W.vars.size(); ++q)
                        H += dir(W.vars[q]) * MatrixXd(W.F[q]);
                    Eigen::SelfAdjointEigenSolver<MatrixXd> es(H, Eigen::EigenvaluesOnly);
                    if (es.eigenvalues().minCoeff() < -1e-6 * (1 + H.norm())) psd_dir = false;
                }
                const bool rows_ok =
                    R == 0 ||
                    (prob.eq_A * dir).lpNorm<Eigen::Infinity>() < opts.infeas_threshold;
                if (psd_dir && rows_ok && c.dot(dir) < -opts.infeas_threshold) {
                    sol.status = SolveStatus::Unbounded;
                    sol.message = "primal improving ray found";
                    finished = true;
                    break;
                }
            }
        }
        S_prev.clear();
        for (auto& W : bw) S_prev.push_back(W.S);
        v_prev = v;
        w_prev = w;
        mu_prev = mu_eq;
        snorm_prev = snorm;

        const double mu = gap_abs / total_side;

        // Nesterov-Todd scaling point per block: Winv with W S W = X
        bool algebra_ok = true;
        for (auto& W : bw) {
            W.lltX.compute(W.X);
            if (W.lltX.info() != Eigen::Success) {
                Eigen::SelfAdjointEigenSolver<MatrixXd> es(W.X, Eigen::EigenvaluesOnly);
                W.X += std::max(1e-12, -1.5 * es.eigenvalues().minCoeff()) *
                       MatrixXd::Identity(W.side, W.side);
                W.lltX.compute(W.X);
            }
            W.lltS.compute(W.S);
            if (W.lltX.info() != Eigen::Success || W.lltS.info() != Eigen::Success) {
                algebra_ok = false;
                break;
            }
            const MatrixXd Lx = W.lltX.matrixL();
            MatrixXd M1 = Lx.transpose() * W.S * Lx;
            M1 = 0.5 * (M1 + M1.transpose()).eval();
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(M1);
            const VectorXd lam = es.eigenvalues().cwiseMax(1e-300);
            MatrixXd P = Lx.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
            W.Winv = P * lam.cwiseSqrt().asDiagonal() * P.transpose();
            W.Winv = 0.5 * (W.Winv + W.Winv.transpose()).eval();
            W.Xinv = P * P.transpose();
            W.Xinv = 0.5 * (W.Xinv + W.Xinv.transpose()).eval();
        }
        if (!algebra_ok) break;

        // Schur matrix B(i,j) = sum_t tr(F_i Winv F_j Winv)
        MatrixXd Btilde = MatrixXd::Zero(M, M);
        for (auto& W : bw) {
            if (W.kron) {
                const int nys = W.side / W.nx;
                MatrixXd T(W.side, W.side);  // (Y (x) I) * Winv
                for (int cy = 0; cy < nys; ++cy) {
                    MatrixXd acc = MatrixXd::Zero(W.nx, W.side);
                    for (int e = 0; e < nys; ++e) {
                        const double yv = W.Y(cy, e);
                        if (yv == 0.0) continue;
                        acc += yv * W.Winv.middleRows(e * W.nx, W.nx);
                    }
                    T.middleRows(cy * W.nx, W.nx) = acc;
                }
                for (int cy = 0; cy < nys; ++cy)
                    for (int dy = 0; dy < nys; ++dy) {
                        const MatrixXd P = T.block(cy * W.nx, dy * W.nx, W.nx, W.nx);
                        const MatrixXd Q = T.block(dy * W.nx, cy * W.nx, W.nx, W.nx);
                        for (int a = 0; a < W.nx; ++a)
                            for (int b = 0; b < W.nx; ++b) {
                                const int row = W.bin(a, b);
                                for (int ap = 0; ap < W.nx; ++ap) {
                                    const double pv = P(b, ap);
                                    if (pv == 0.0) continue;
                                    for (int bp = 0; bp < W.nx; ++bp)
                                        Btilde(row, W.bin(ap, bp)) += pv * Q(bp, a);
                                }
                            }
                    }
            } else {
                for (std::size_t qi = 0; qi < W.vars.size(); ++qi) {
                    const MatrixXd T = W.F[qi] * W.Winv;
                    const MatrixXd U = W.Winv * T;
                    for (std::size_t qj = 0; qj <= qi; ++qj) {
                        const double val = detail::sparse_dot(W.F[qj], U);
                        Btilde(W.vars[qi], W.vars[qj]) += val;
                        if (qi != qj) Btilde(W.vars[qj], W.vars[qi]) += val;
                    }
                }
            }
        }

        Eigen::LLT<MatrixXd> llt_reduced;
        MatrixXd Bq;
        MatrixXd Z2;             // B^-1 A^T (KKT mode)
        Eigen::LDLT<MatrixXd> ldlt_rows;
        bool factor_ok = false;
        if (!kkt_mode) {
            Bq = N.transpose() * Btilde * N;
            double jitter = 1e-13 * (1.0 + Bq.trace() / std::max(1, Mr));
            for (int tries = 0; tries < 8 && !factor_ok; ++tries) {
                llt_reduced.compute(Bq + jitter * MatrixXd::Identity(Mr, Mr));
                factor_ok = llt_reduced.info() == Eigen::Success;
                jitter *= 100.0;
            }
        } else {
            Bq = Btilde;
            double jitter = 1e-13 * (1.0 + Bq.trace() / std::max(1, M));
            for (int tries = 0; tries < 8 && !factor_ok; ++tries) {
                llt_reduced.compute(Bq + jitter * MatrixXd::Identity(M, M));
                factor_ok = llt_reduced.info() == Eigen::Success;
                jitter *= 100.0;
            }
            if (factor_ok && R > 0) {
                Z2 = llt_reduced.solve(prob.eq_A.transpose());
                MatrixXd SA = prob.eq_A * Z2;
                const double ridge = 1e-12 * (1.0 + SA.trace() / std::max(1, R));
                ldlt_rows.compute(SA + ridge * MatrixXd::Identity(R, R));
                factor_ok = ldlt_rows.info() == Eigen::Success;
            }
        }
        if (!factor_ok) break;

        // rhs for a target nu; RC_t = nu X^-1 - S - Winv (G - X) Winv
        auto build_rhs = [&](double nu) -> VectorXd {
            VectorXd h = -rd_full;
            for (auto& W : bw) {
                MatrixXd T = W.Winv * (W.G - W.X) * W.Winv;
                W.RC = nu * W.Xinv - W.S - 0.5 * (T + T.transpose());
                for (std::size_t q = 0; q < W.vars.size(); ++q)
                    h(W.vars[q]) += detail::sparse_dot(W.F[q], W.RC);
            }
            return h;
        };

        auto solve_dir = [&](const VectorXd& h, VectorXd& dw, VectorXd& dmu) {
            if (!kkt_mode) {
                const VectorXd rq = N.transpose() * h;
                VectorXd dq = llt_reduced.solve(rq);
                dq += llt_reduced.solve(rq - Bq * dq);  // one refinement pass
                dw = N * dq;
                dmu = VectorXd();
            } else if (R > 0) {
                // [[B, -A^T],[A, 0]] [dw; dmu] = [h; rp] via the Schur
                // complement A B^-1 A^T
                const VectorXd z1 = llt_reduced.solve(h);
                dmu = ldlt_rows.solve(rp - prob.eq_A * z1);
                dw = z1 + Z2 * dmu;
            } else {
                dw = llt_reduced.solve(h);
                dw += llt_reduced.solve(h - Bq * dw);
                dmu = VectorXd();
            }
        };

        // directions for a target nu (RC must match the rhs build)
        auto block_dirs = [&](const VectorXd& dw, double nu, std::vector<MatrixXd>& dX,
                              std::vector<MatrixXd>& dS, double& amax_x, double& amax_s) {
            dX.resize(bw.size());
            dS.resize(bw.size());
            amax_x = amax_s = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < bw.size(); ++t) {
                auto& W = bw[t];
                MatrixXd dXt = W.G - W.X;
                for (std::size_t q = 0; q < W.vars.size(); ++q)
                    dXt += dw(W.vars[q]) * MatrixXd(W.F[q]);
                dXt = 0.5 * (dXt + dXt.transpose()).eval();
                MatrixXd T = W.Winv * dXt * W.Winv;
                MatrixXd dSt = nu * W.Xinv - W.S - 0.5 * (T + T.transpose());
                dSt = 0.5 * (dSt + dSt.transpose()).eval();
                amax_x = std::min(amax_x, detail::max_step(W.lltX, dXt));
                amax_s = std::min(amax_s, detail::max_step(W.lltS, dSt));
                dX[t] = std::move(dXt);
                dS[t] = std::move(dSt);
            }
        };

        // predictor
        VectorXd dw_aff, dmu_aff;
        solve_dir(build_rhs(0.0), dw_aff, dmu_aff);
        std::vector<MatrixXd> dXa, dSa;
        double axa, asa;
        block_dirs(dw_aff, 0.0, dXa, dSa, axa, asa);
        axa = std::min(axa, 1.0);
        asa = std::min(asa, 1.0);
        double gap_aff = 0.0;
        for (std::size_t t = 0; t < bw.size(); ++t)
            gap_aff += (bw[t].X + axa * dXa[t]).cwiseProduct(bw[t].S + asa * dSa[t]).sum();
        gap_aff = std::max(gap_aff, 0.0);
        double sigma = std::pow(gap_aff / std::max(gap_abs, 1e-300), 3.0);
        sigma = std::min(0.99, std::max(1e-8, sigma));

        // corrector
        VectorXd dw, dmu;
        solve_dir(build_rhs(sigma * mu), dw, dmu);
        std::vector<MatrixXd> dX, dS;
        double ax, as;
        block_dirs(dw, sigma * mu, dX, dS, ax, as);
        const double tau = 0.9 + 0.09 * std::min(1.0, std::min(ax, as));
        ax = std::min(1.0, tau * ax);
        as = std::min(1.0, tau * as);

        w += ax * dw;
        if (kkt_mode && R > 0) mu_eq += as * dmu;
        for (std::size_t t = 0; t < bw.size(); ++t) {
            bw[t].X += ax * dX[t];
            bw[t].S += as * dS[t];
            bw[t].X = 0.5 * (bw[t].X + bw[t].X.transpose()).eval();
            bw[t].S = 0.5 * (bw[t].S + bw[t].S.transpose()).eval();
        }
    }

    if (sol.status != SolveStatus::Infeasible && sol.status != SolveStatus::Unbounded &&
        !(finished && sol.status == SolveStatus::Optimal)) {
        if (pinf <= opts.tol && dinf <= opts.tol && relgap <= opts.tol)
            sol.status = SolveStatus::Optimal;
        else if (pinf <= opts.near_tol && dinf <= opts.near_tol && relgap <= opts.near_tol)
            sol.status = SolveStatus::NearOptimal;
        else {
            sol.status = SolveStatus::NumericalFailure;
            if (sol.message.empty())
                sol.message = "iteration limit or stall before reaching tolerance";
        }
    }
    sol.w = w;
    sol.objective = c.dot(w);
    sol.dual_objective = dobj;
    sol.primal_residual = pinf;
    sol.dual_residual = dinf;
    sol.gap = relgap;
    sol.iterations = iter;

    // dual blocks mapped back to the unscaled geometry: S_orig = D S D
    for (std::size_t t = 0; t < bw.size(); ++t) {
        const auto& W = bw[t];
        if (W.S.size() == 0) {
            sol.dual_blocks[t] = MatrixXd::Zero(W.side, W.side);
            continue;
        }
        sol.dual_blocks[t] = W.d.asDiagonal() * W.S * W.d.asDiagonal();
    }

    // equality-row duals from stationarity, in original coordinates
    if (R > 0) {
        VectorXd v = VectorXd::Zero(M);
        for (std::size_t t = 0; t < prob.blocks.size(); ++t) {
            const auto& blk = prob.blocks[t];
            for (int ai = 0; ai < M; ++ai) {
                const auto& Fs = blk.F[static_cast<std::size_t>(ai)];
                if (Fs.nonZeros() == 0) continue;
                v(ai) += detail::sparse_dot(Fs, sol.dual_blocks[t]);
            }
        }
        sol.eq_duals = prob.eq_A.transpose().colPivHouseholderQr().solve(c - v);
    }
    return sol;
}

/// Sparse SDPA-style text dump (field mapping documented in the README;
/// equality rows become paired diagonal entries in a final diagonal block).
inline void write_sdpa(const ConicProblem& prob, std::ostream& os) {
    const int M = prob.dim;
    const int R = static_cast<int>(prob.eq_A.rows());
    const int nblocks = static_cast<int>(prob.blocks.size()) + (R > 0 ? 1 : 0);
    os << M << " = mDIM\n" << nblocks << " = nBLOCK\n";
    for (std::size_t t = 0; t < prob.blocks.size(); ++t) {
        os << prob.blocks[t].side;
        if (t + 1 < prob.blocks.size() || R > 0) os << " ";
    }
    if (R > 0) os << -2 * R;
    os << " = bLOCKsTRUCT\n";
    os.precision(17);
    for (int i = 0; i < M; ++i) os << prob.objective(i) << (i + 1 < M ? " " : "");
    os << "\n";
    auto emit = [&os](int mat, int blk, int i, int j, double v) {
        if (v == 0.0) return;
        os << mat << " " << blk << " " << i + 1 << " " << j + 1 << " " << v << "\n";
    };
    for (std::size_t t = 0; t < prob.blocks.size(); ++t) {
        const auto& B = prob.blocks[t];
        // SDPA convention: X = sum_i x_i F_i - F0 >= 0, so the constant part
        // flips sign relative to ours.
        Eigen::MatrixXd F0 = detail::sparse_to_dense_sym(B.F0, B.side);
        for (int i = 0; i < B.side; ++i)
            for (int j = i; j < B.side; ++j) emit(0, static_cast<int>(t) + 1, i, j, -F0(i, j));
        for (int ai = 0; ai < M; ++ai) {
            const auto& Fs = B.F[static_cast<std::size_t>(ai)];
            if (Fs.nonZeros() == 0) continue;
            Eigen::MatrixXd Fd = detail::sparse_to_dense_sym(Fs, B.side);
            for (int i = 0; i < B.side; ++i)
                for (int j = i; j < B.side; ++j)
                    emit(ai + 1, static_cast<int>(t) + 1, i, j, Fd(i, j));
        }
    }
    if (R > 0) {
        const int blk = static_cast<int>(prob.blocks.size()) + 1;
        for (int r = 0; r < R; ++r) {
            emit(0, blk, 2 * r, 2 * r, prob.eq_b(r));
            emit(0, blk, 2 * r + 1, 2 * r + 1, -prob.eq_b(r));
            for (int i = 0; i < M; ++i) {
                emit(i + 1, blk, 2 * r, 2 * r, prob.eq_A(r, i));
                emit(i + 1, blk, 2 * r + 1, 2 * r + 1, -prob.eq_A(r, i));
            }
        }
    }
}

}  // namespace momsip
