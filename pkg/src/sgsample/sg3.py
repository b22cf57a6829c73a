"""Side-3 variant verification suite.

The two eigenvalue relations connecting consecutive levels differ between
the vertex graphs and the cell graphs, unlike on the halved gasket where
both families share one quadratic relation.  This module evaluates both
relations, verifies the cell-graph one against dense solves on the first
two levels, and runs the negative checks: the 3 +/- sqrt(2) vertex-graph
eigenfunctions do not average to cell-graph eigenfunctions, and no
graph-structured operator other than a scalar multiple of the identity has
all six lowest averaged eigenfunctions as eigenvectors.

The boundary convention on the vertex graph is calibrated, not assumed:
the generalized corner-measure-1/2 problem and the plain problem are both
solved, and whichever spectrum contains 3 +/- sqrt(2) is adopted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decimation import average_down
from .errors import ContractViolation, PoleAtDenominator
from .graphs import LaplacianOperator, build_xi, build_zeta, dense_spectrum

POLE_TOL = 1e-12
SQRT2 = math.sqrt(2.0)


def zeta_relation(lam_next: float) -> float:
    """Coarse eigenvalue below ``lam_next`` on the vertex graphs."""
    den = 3.0 * lam_next - 14.0
    if abs(den) <= POLE_TOL:
        raise PoleAtDenominator(f"vertex-graph relation has a pole at {lam_next}")
    return (
        3.0 * (lam_next - 5.0) * (lam_next - 4.0) * (lam_next - 3.0) * lam_next / den
    )


def xi_relation(lam_next: float) -> float:
    """Coarse eigenvalue below ``lam_next`` on the cell graphs."""
    den = lam_next - 6.0
    if abs(den) <= POLE_TOL:
        raise PoleAtDenominator(f"cell-graph relation has a pole at {lam_next}")
    return (
        (lam_next**2 - 9.0 * lam_next + 19.0) * (lam_next - 4.0) * lam_next / den
    )


# ---------------------------------------------------------------------------
# boundary-convention calibration
# ---------------------------------------------------------------------------


def _zeta1_spectrum(convention: str):
    graph = build_zeta(1)
    op = LaplacianOperator(graph, convention)
    return dense_spectrum(op)


def calibrate_zeta_convention(tol: float = 1e-9):
    """Pick the level-1 vertex-graph convention that produces 3 +/- sqrt(2).

    Returns (convention, report).  The stated eigenvalues are themselves the
    oracle; failing both candidates is a calibration error.
    """
    report = {}
    for convention in ("neumann", "plain"):
        w, _ = _zeta1_spectrum(convention)
        has = all(
            np.min(np.abs(w - target)) <= tol
            for target in (3.0 - SQRT2, 3.0 + SQRT2)
        )
        report[convention] = {"spectrum": w.tolist(), "contains_3pm_sqrt2": has}
    for convention in ("neumann", "plain"):
        if report[convention]["contains_3pm_sqrt2"]:
            return convention, report
    raise ContractViolation(
        "neither boundary convention reproduces the 3 +/- sqrt(2) eigenvalues"
    )


def zeta_neumann_eigenpairs():
    """Calibrated level-1 vertex-graph eigenpairs, ascending."""
    convention, report = calibrate_zeta_convention()
    w, v = _zeta1_spectrum(convention)
    return w, v, convention, report


# ---------------------------------------------------------------------------
# cell-graph decimation verification
# ---------------------------------------------------------------------------


@dataclass
class RelationReport:
    """Per-eigenpair outcome of averaging level-2 pairs down to level 1."""

    records: list = field(default_factory=list)
    verdict: str = "PASS"
    summary: str = ""


def verify_xi_decimation(residual_tol: float = 1e-8, survive_tol: float = 1e-8):
    """Check the printed cell-graph relation on every surviving level-2 pair.

    A level-2 eigenpair survives when its six-children average is nonzero;
    the average must then be a level-1 eigenfunction with the eigenvalue the
    relation predicts.  Pairs averaging to zero are reported as born.
    """
    xi1, xi2 = build_xi(1), build_xi(2)
    op1 = LaplacianOperator(xi1, "plain")
    w2, v2 = dense_spectrum(LaplacianOperator(xi2, "plain"))
    report = RelationReport()
    failures = 0
    for k in range(len(w2)):
        lam2 = float(w2[k])
        u = v2[:, k]
        ubar = average_down(u, xi2, xi1)
        norm = float(np.max(np.abs(ubar)))
        rec = {"lam_fine": lam2, "avg_norm": norm, "survived": norm > survive_tol}
        if rec["survived"]:
            try:
                predicted = xi_relation(lam2)
            except PoleAtDenominator:
                predicted = None
            rec["lam_coarse"] = predicted
            lu = op1.apply(ubar)
            rec["empirical_lam"] = float(ubar @ lu / (ubar @ ubar))
            if predicted is None:
                rec["residual"] = float("inf")
            else:
                rec["residual"] = float(np.max(np.abs(lu - predicted * ubar)) / norm)
            if rec["residual"] > residual_tol:
                failures += 1
                rec["note"] = "relation mismatch; empirical eigenvalue recorded"
        else:
            rec["lam_coarse"] = None
            rec["residual"] = None
        report.records.append(rec)
    survivors = sum(1 for r in report.records if r["survived"])
    report.verdict = "PASS" if failures == 0 else "FAIL"
    report.summary = (
        f"{survivors} of {len(report.records)} level-2 pairs survive averaging; "
        f"{failures} violate the printed relation"
    )
    return report


# ---------------------------------------------------------------------------
# negative results
# ---------------------------------------------------------------------------


def _averaged_images():
    """Six lowest calibrated eigenpairs and their cell-average images."""
    w, v, convention, _ = zeta_neumann_eigenpairs()
    zeta1 = build_zeta(1)
    c2c = zeta1.cells_corners
    images = []
    for k in range(6):
        u = v[:, k]
        images.append((u[c2c[:, 0]] + u[c2c[:, 1]] + u[c2c[:, 2]]) / 3.0)
    return w[:6], images, convention


def negative_result_check(tol_eigen: float = 1e-10, tol_reject: float = 1e-2):
    """Rayleigh residuals of the six lowest averaged eigenfunctions.

    The constant averages to the constant (an exact eigenfunction); the
    3 +/- sqrt(2) images must fail to be eigenfunctions by a wide margin.
    """
    lams, images, convention = _averaged_images()
    op1 = LaplacianOperator(build_xi(1), "plain")
    dense = op1.matrix.toarray()
    records = []
    for k, (lam, v) in enumerate(zip(lams, images)):
        nrm2 = float(v @ v)
        lv = dense @ v
        rayleigh = float(v @ lv / nrm2) if nrm2 > 0 else float("nan")
        residual = (
            float(np.linalg.norm(lv - rayleigh * v) / math.sqrt(nrm2))
            if nrm2 > 0
            else float("nan")
        )
        records.append(
            {
                "index": k,
                "zeta_eigenvalue": float(lam),
                "is_3pm_sqrt2": bool(
                    min(abs(lam - (3 - SQRT2)), abs(lam - (3 + SQRT2))) <= 1e-9
                ),
                "rayleigh": rayleigh,
                "residual": residual,
                "image_norm": math.sqrt(nrm2),
            }
        )
    ok = all(
        (r["residual"] > tol_reject) == r["is_3pm_sqrt2"]
        or (not r["is_3pm_sqrt2"])
        for r in records
    ) and all(r["residual"] > tol_reject for r in records if r["is_3pm_sqrt2"])
    return {
        "convention": convention,
        "records": records,
        "rejected_3pm_sqrt2": all(
            r["residual"] > tol_reject for r in records if r["is_3pm_sqrt2"]
        ),
        "constant_ok": records[0]["residual"] <= tol_eigen
        and abs(records[0]["rayleigh"]) <= tol_eigen,
        "ok": ok,
    }


# ---------------------------------------------------------------------------
# operator fitting
# ---------------------------------------------------------------------------


def _eigen_groups_exact(lams, tol=1e-9):
    groups = []
    for k, lam in enumerate(lams):
        if groups and abs(lam - lams[groups[-1][-1]]) <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def _entry_mask(kind: str, edges, n=6):
    mask = np.zeros((n, n), dtype=bool)
    np.fill_diagonal(mask, True)
    if kind == "unconstrained":
        mask[:] = True
    elif kind == "graph":
        for a, b in edges:
            mask[a, b] = True
            mask[b, a] = True
    else:
        raise ValueError(kind)
    return mask


def fit_laplacian_identity(null_tol: float = 1e-9):
    """Solve for operators under which the six averaged images are eigenvectors.

    The eigenvector requirement is linearized jointly in the operator entries
    and one free eigenvalue per coincident-eigenvalue group, giving a
    homogeneous system whose nullspace is the solution space.  Within the
    graph-structured entry pattern the space must be exactly the scalar
    multiples of the identity.  The report also records how badly the true
    cell-graph Laplacian violates the targeted equations, per eigenpair.
    """
    lams, images, convention = _averaged_images()
    images = [v / np.linalg.norm(v) for v in images]
    groups = _eigen_groups_exact([float(x) for x in lams])
    group_of = {}
    for g, members in enumerate(groups):
        for k in members:
            group_of[k] = g
    n = 6
    edges = build_xi(1).edges
    report = {
        "convention": convention,
        "zeta_eigenvalues": [float(x) for x in lams],
        "groups": [[int(k) for k in g] for g in groups],
        "classes": {},
    }
    for kind in ("unconstrained", "graph"):
        mask = _entry_mask(kind, edges)
        entries = np.argwhere(mask)
        n_entries = len(entries)
        n_unknown = n_entries + len(groups)
        rows = []
        for k, v in enumerate(images):
            g = group_of[k]
            for i in range(n):
                row = np.zeros(n_unknown)
                for e, (a, b) in enumerate(entries):
                    if a == i:
                        row[e] = v[b]
                row[n_entries + g] = -v[i]
                rows.append(row)
        a_mat = np.asarray(rows)
        _, svals, vh = np.linalg.svd(a_mat)
        rank = int(np.sum(svals > null_tol * svals[0]))
        null_dim = n_unknown - rank
        null_basis = vh[rank:]
        info = {"null_dim": null_dim, "n_entries": n_entries}
        if null_dim >= 1:
            # is the nullspace exactly the scalar-identity family?
            mats = []
            for vec in null_basis:
                mat = np.zeros((n, n))
                for e, (a, b) in enumerate(entries):
                    mat[a, b] = vec[e]
                mats.append(mat)
            if null_dim == 1:
                mat = mats[0]
                scale = np.trace(mat) / n
                is_identity = bool(
                    np.max(np.abs(mat - scale * np.eye(n))) <= 1e-8 * max(1.0, abs(scale))
                )
                info["scalar_identity_only"] = is_identity
            else:
                info["scalar_identity_only"] = False
        else:
            info["scalar_identity_only"] = False
        report["classes"][kind] = info
    # negative control: the true cell-graph Laplacian against the targeted
    # eigen-equations L v_k = lam_k v_k
    dense = LaplacianOperator(build_xi(1), "plain").matrix.toarray()
    controls = []
    for k, v in enumerate(images):
        controls.append(float(np.linalg.norm(dense @ v - float(lams[k]) * v)))
    report["true_laplacian_residuals"] = controls
    report["ok"] = report["classes"]["graph"]["scalar_identity_only"]
    return report
