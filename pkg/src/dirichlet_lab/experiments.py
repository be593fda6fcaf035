"""Experiment runners behind the command line.

Each runner takes the resolved parameter dict and returns ``(body, status,
tables)``: a JSON-ready body, one of pass / fail / inconclusive, and
optional long-form CSV tables keyed by file stem.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import free_field as ff
from . import hermite_wick as hw
from . import presets
from .apriori_checks import (
    check_coercivity,
    check_identity_p4,
    check_rate_inequality,
    check_gradient_energy_identity,
    check_gradient_energy_bound,
    check_gradient_bound,
    check_energy_estimate,
    check_l4_estimate,
)
from .cylinder import from_name
from .dirichlet_form import markov_suite
from .duhamel import LADDER_PRESETS, convergence_study, default_datum, ladder_preset, lp_uniqueness_interval
from .oracles import mehler
from .p_phi2 import (
    WickSpec,
    check_ibp,
    check_drift_conditions,
    gaussian_ibp_reduction,
    sample_nu,
)
from .parabolic_solver import ConfigurationError, Grid, compute_c_plus, solve_cauchy
from .rigged_space import RiggedBasis

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

COMMON = {"seed": 7, "budget_factor": 2.0, "threads": 0}

DEFAULTS = {
    "gradient-bound": {"d": 2, "R": 6.0, "points": 241, "drift": "ou", "datum": "bump-offset",
                       "times": "0.25,0.5,1.0", "basis": "power:1", "mehler_tol": 1e-3},
    "energy-estimate": {"dims": "1,2", "drifts": "zero,ou,rotation", "measure": "gaussian", "R": 6.0,
                        "points_1d": 241, "points_2d": 121, "T": 1.0, "snapshots": 16, "datum": "bump-offset",
                        "basis": "power:1"},
    "l4-estimate": {"d": 2, "drift": "ou", "measure": "gaussian", "R": 6.0, "points": 241, "T": 1.0,
                    "snapshots": 16, "datum": "bump-offset", "basis": "power:1", "C_ref": 0.0,
                    "refinement_tol": 0.02},
    "identity-suite": {"dims": "1,2", "drifts": "zero,ou,rotation", "measure": "gaussian", "R": 6.0,
                    "points_1d": 241, "points_2d": 241, "T": 1.0, "snapshots": 16, "datum": "bump-offset",
                    "identity_drift": "ou+rotation", "identity_points": 241, "identity_times": "0.25,0.5",
                    "identity_ratio_lo": 3.0, "identity_ratio_hi": 5.0, "basis": "power:1"},
    "coercivity-scan": {"d": 2, "deltas": "zero,ou,anti-ou", "measure": "gaussian", "R": 6.0, "points": 121},
    "duhamel-l2": {"ladder": "linear-gaussian", "t": 1.0, "R": 6.0, "points_1d": 241, "points_2d": 121,
                   "snapshots": 32},
    "duhamel-l1": {"ladder": "linear-gaussian", "t": 1.0, "R": 6.0, "points_1d": 241, "points_2d": 121,
                   "snapshots": 32},
    "covariance": {"K": 16, "samples": 100000, "L1": 1.0, "L2": 1.0, "sigma": 4.0, "composites": 3},
    "wick-moments": {"samples": 1000000, "c": 1.5, "nmax": 5, "mean_nmax": 6, "exact_nmax": 20, "sigma": 4.0},
    "ibp": {"K": 16, "samples": 100000, "coefficients": "0,0,0,0,0.1", "alpha_idx": 1.0, "delta_idx": 1.0,
            "functions": "x1,bump1,x1^2,cos1,x1*x2,one", "directions": "1,2", "sigma": 4.0,
            "ess_floor": 0.2, "strict": True, "gaussian_powers": "1;2;3;1,1;2,1;1,1,1"},
    "drift-conditions": {"K": 16, "samples": 100000, "coefficients": "0,0,0,0,0.1", "alpha_idx": 1.0,
                            "delta_idx": 1.0, "ms": "2,4,8,16", "refine": True, "sigma": 4.0,
                            "ess_floor": 0.2},
    "markov-suite": {"dims": "1,2", "drifts": "ou", "R": 6.0, "points_1d": 241, "points_2d": 121, "T": 1.0,
                     "tol": 1e-6},
    "lp-interval": {"eps0": 1.0},
}

EXPERIMENTS = tuple(DEFAULTS)


def aggregate(statuses) -> str:
    statuses = list(statuses)
    if FAIL in statuses:
        return FAIL
    if INCONCLUSIVE in statuses:
        return INCONCLUSIVE
    return PASS


def _flag(ok: bool) -> str:
    return PASS if ok else FAIL


def _floats(text) -> list:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> list:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _names(text) -> list:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _basis(text, d):
    try:
        return RiggedBasis.parse(str(text), d)
    except ValueError as exc:
        raise ConfigurationError(f"basis: {exc}") from exc


def _coarse_points(points: int) -> int:
    if (points - 1) % 2:
        raise ConfigurationError(f"points={points} must be odd so the 2h grid nests")
    return (points - 1) // 2 + 1


def _pair(b, datum, T, d, R, points, times=None, snapshots=16):
    fine = solve_cauchy(b, datum, T, Grid(d, R, points), times=times, n_snapshots=snapshots, check_support=False)
    coarse = solve_cauchy(b, datum, T, Grid(d, R, _coarse_points(points)), times=times, n_snapshots=snapshots,
                          check_support=False)
    return fine, coarse


def _grid_cases(p):
    for d in _ints(p["dims"]):
        for name in _names(p["drifts"]):
            if name in ("rotation", "ou+rotation") and d != 2:
                continue
            yield d, name, p["points_1d"] if d == 1 else p["points_2d"]


# ---------------------------------------------------------------------------
# grid experiments
# ---------------------------------------------------------------------------


def run_gradient_bound(p):
    d = p["d"]
    b = presets.drift(p["drift"], d)
    f = presets.initial_datum(p["datum"], d)
    basis = _basis(p["basis"], d)
    times = _floats(p["times"])
    fine, coarse = _pair(b, f, max(times), d, p["R"], p["points"], times=times)
    c_plus = compute_c_plus(b, fine.grid, basis)
    rep = check_gradient_bound(fine, b, f, basis, c_plus, coarse=coarse, budget_factor=p["budget_factor"])
    body = {"report": rep.as_dict(), "c_plus": c_plus, "boundary_ratio": fine.boundary_ratio,
            "boundary_flag": fine.boundary_flag, "upwind_fraction": fine.upwind_fraction}
    ok = rep.passed
    if p["drift"] == "ou":
        X = fine.grid.mesh
        inner = fine.grid.inner_box_mask()
        errs = []
        for t in times:
            ref = mehler(f, t, X)
            k = fine.index(t)
            errs.append(float(np.max(np.abs(fine.u[k] - ref)[inner]) / np.max(np.abs(ref[inner]))))
        body["mehler"] = {"times": times, "relative_sup_error": errs, "tol": p["mehler_tol"]}
        ok = ok and max(errs) <= p["mehler_tol"]
    return body, _flag(ok), {}


def run_energy_estimate(p):
    rows, statuses = [], []
    for d, name, points in _grid_cases(p):
        nu = presets.measure(p["measure"], d)
        b = presets.drift(name, d)
        f = presets.initial_datum(p["datum"], d)
        basis = _basis(p["basis"], d)
        fine, coarse = _pair(b, f, p["T"], d, p["R"], points, snapshots=p["snapshots"])
        c_plus = compute_c_plus(b, fine.grid, basis)
        rep = check_energy_estimate(fine, b, f, nu, basis, c_plus, coarse=coarse, budget_factor=p["budget_factor"])
        rows.append({"d": d, "drift": name, "report": rep.as_dict()})
        statuses.append(_flag(rep.passed))
    return {"cases": rows}, aggregate(statuses), {}


def run_l4_estimate(p):
    d = p["d"]
    nu = presets.measure(p["measure"], d)
    b = presets.drift(p["drift"], d)
    f = presets.initial_datum(p["datum"], d)
    basis = _basis(p["basis"], d)
    eps0, c_eps0, coercivity = check_coercivity(nu.delta, nu)
    fine, coarse = _pair(b, f, p["T"], d, p["R"], p["points"], snapshots=p["snapshots"])
    c_plus = compute_c_plus(b, fine.grid, basis)
    C_ref = p["C_ref"] if p["C_ref"] > 0 else None
    rep = check_l4_estimate(fine, b, f, nu, basis, p["T"], eps0, c_eps0, c_plus, C_ref, coarse=coarse,
                      budget_factor=p["budget_factor"])
    change = rep.terms["lhs_refinement_change"]
    ok = bool(np.all(np.isfinite(rep.lhs))) and change <= p["refinement_tol"] and (C_ref is None or rep.passed)
    body = {"report": rep.as_dict(), "coercivity": {"eps0": eps0, "c": c_eps0}, "empirical_C": rep.terms["empirical_C"],
            "lhs_final": float(rep.lhs[-1]), "refinement_change": change, "refinement_tol": p["refinement_tol"]}
    return body, _flag(ok), {}


def run_identity_suite(p):
    rows, statuses = [], []
    for d, name, points in _grid_cases(p):
        nu = presets.measure(p["measure"], d)
        b = presets.drift(name, d)
        f = presets.initial_datum(p["datum"], d)
        fine, coarse = _pair(b, f, p["T"], d, p["R"], points, snapshots=p["snapshots"])
        l1 = check_rate_inequality(fine, b, nu, coarse=coarse, budget_factor=p["budget_factor"])
        l3 = check_gradient_energy_bound(fine, b, f, nu, coarse=coarse, budget_factor=p["budget_factor"])
        rows.append({"d": d, "drift": name, "rate_inequality": l1.as_dict(), "gradient_energy_bound": l3.as_dict()})
        statuses += [_flag(l1.passed), _flag(l3.passed)]
    # the differentiated identity, for the drift that matches the measure
    equalities = []
    for d in _ints(p["dims"]):
        nu = presets.measure(p["measure"], d)
        b = presets.matching_drift(nu)
        f = presets.initial_datum(p["datum"], d)
        points = p["points_1d"] if d == 1 else p["points_2d"]
        fine, coarse = _pair(b, f, p["T"], d, p["R"], points, snapshots=p["snapshots"])
        rep = check_gradient_energy_identity(fine, b, nu, coarse=coarse, budget_factor=p["budget_factor"])
        equalities.append({"d": d, "report": rep.as_dict()})
        statuses.append(_flag(rep.passed))
    # p = 4 identity on three nested grids
    b = presets.drift(p["identity_drift"], 2)
    f = presets.initial_datum(p["datum"], 2)
    basis = _basis(p["basis"], 2)
    times = _floats(p["identity_times"])
    n_f = p["identity_points"]
    n_c = _coarse_points(n_f)
    sols = {n: solve_cauchy(b, f, max(times), Grid(2, p["R"], n), times=times, check_support=False)
            for n in (n_f, n_c, _coarse_points(n_c))}
    ident = check_identity_p4(sols[n_f], basis, times, coarse=sols[n_c], budget_factor=p["budget_factor"])
    ident_c = check_identity_p4(sols[n_c], basis, times, coarse=sols[_coarse_points(n_c)],
                                budget_factor=p["budget_factor"])
    ratio = ident.terms["refinement_ratio"]
    ratio_ok = bool(np.all((ratio >= p["identity_ratio_lo"]) & (ratio <= p["identity_ratio_hi"])))
    statuses += [_flag(ident.passed), _flag(ratio_ok)]
    body = {
        "inequalities": rows,
        "gradient_energy_identity": equalities,
        "identity_p4": {"fine": ident.as_dict(), "coarse": ident_c.as_dict(), "ratio_in_range": ratio_ok,
                        "ratio_range": [p["identity_ratio_lo"], p["identity_ratio_hi"]]},
    }
    return body, aggregate(statuses), {}


def run_coercivity_scan(p):
    d = p["d"]
    nu = presets.measure(p["measure"], d)
    grid = Grid(d, p["R"], p["points"])
    rows = []
    for name in _names(p["deltas"]):
        eps0, c, rep = check_coercivity(presets.drift(name, d), nu, grid=grid)
        lo, hi = lp_uniqueness_interval(eps0)
        rows.append({"delta": name, "eps0": eps0, "c": c, "report": rep, "lp_interval": [lo, hi]})
    return {"rows": rows, "necessary_condition_only": True}, PASS, {}


def _duhamel(p, norm):
    names = LADDER_PRESETS if p["ladder"] == "all" else _names(p["ladder"])
    out, statuses, tables = [], [], {}
    for name in names:
        try:
            ladder = ladder_preset(name)
        except KeyError as exc:
            raise ConfigurationError(f"ladder: {exc.args[0]}") from exc
        points = p["points_1d"] if ladder.ambient_dim == 1 else p["points_2d"]
        res = convergence_study(ladder, default_datum(ladder), p["t"], R=p["R"], points=points,
                                n_snapshots=p["snapshots"], budget_factor=p["budget_factor"])
        reps = [r for r in res.reports if r.norm == norm]
        mono = res.monotone_in_m(norm)
        bounds = all(r.passed for r in reps)
        exact = [r for r in reps if r.terms["alpha_err_norm"] == 0.0 and r.terms["delta_err_norm"] == 0.0]
        exact_ok = all(r.lhs <= r.budget for r in exact)
        out.append({"ladder": name, "description": ladder.description, "rows": [r.as_dict() for r in reps],
                    "monotone_in_m": {str(k): v for k, v in mono.items()}, "bounds_hold": bounds,
                    "exact_rungs_within_budget": exact_ok})
        statuses.append(_flag(bounds and all(mono.values()) and exact_ok))
        tables[f"{name}_{norm}"] = [r.row() for r in reps]
    return {"norm": norm, "t": p["t"], "ladders": out}, aggregate(statuses), tables


def run_duhamel_l2(p):
    return _duhamel(p, "L2")


def run_duhamel_l1(p):
    return _duhamel(p, "L1")


# ---------------------------------------------------------------------------
# Monte Carlo experiments
# ---------------------------------------------------------------------------


def run_covariance(p):
    domain = ff.RectangleDomain(p["L1"], p["L2"])
    modes = ff.build_modes(domain, p["K"])
    lam = ff.eigenvalues(modes)
    z = ff.sample_coefficients(modes, p["samples"], p["seed"])
    n = z.shape[0]
    sig = p["sigma"]
    per_mode = []
    for j in range(len(modes)):
        sq = z[:, j] ** 2
        var, se = float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n))
        mean, mse = float(z[:, j].mean()), float(z[:, j].std(ddof=1) / math.sqrt(n))
        per_mode.append({"mode": [modes[j].m, modes[j].n], "eigenvalue": float(lam[j]), "variance": var,
                         "stderr": se, "target": float(1 / lam[j]), "within": abs(var - 1 / lam[j]) <= sig * se,
                         "mean": mean, "mean_stderr": mse, "mean_within": abs(mean) <= sig * mse})
    rng = np.random.default_rng(np.random.SeedSequence([p["seed"], 1]))
    ls = [np.eye(len(modes))[0] + np.eye(len(modes))[1 % len(modes)]]
    ls[0] = ls[0] / np.linalg.norm(ls[0])
    for _ in range(p["composites"]):
        v = rng.standard_normal(len(modes))
        ls.append(v / np.linalg.norm(v))
    composites = []
    for l in ls:
        sq = (z @ l) ** 2
        target = float(ff.h_alpha_norm(l, modes, -1.0) ** 2)
        est, se = float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n))
        composites.append({"l": l.tolist(), "second_moment": est, "stderr": se, "target": target,
                           "within": abs(est - target) <= sig * se})
    ok = all(r["within"] and r["mean_within"] for r in per_mode) and all(r["within"] for r in composites)
    body = {"K": p["K"], "samples": n, "seed": p["seed"], "sigma": sig, "per_mode": per_mode,
            "composites": composites}
    table = [{"j": j + 1, "m": r["mode"][0], "n": r["mode"][1], "variance": r["variance"], "stderr": r["stderr"],
              "target": r["target"]} for j, r in enumerate(per_mode)]
    return body, _flag(ok), {"covariance": table}


def run_wick_moments(p):
    exact = []
    for n in range(p["exact_nmax"] + 1):
        a = hw.hermite_coefficients(n)
        b = hw.hermite_coefficients_recurrence(n)
        exact.append([Fraction(x) for x in a] == [Fraction(x) for x in b])
    c = p["c"]
    rng = np.random.default_rng(np.random.SeedSequence(p["seed"]))
    g = rng.standard_normal(p["samples"]) * math.sqrt(c)
    nmax = max(p["nmax"], p["mean_nmax"])
    W = hw.wick_powers(g, c, nmax)
    N = g.size
    sig = p["sigma"]
    means = []
    for n in range(1, p["mean_nmax"] + 1):
        m, se = float(W[n].mean()), float(W[n].std(ddof=1) / math.sqrt(N))
        means.append({"n": n, "mean": m, "stderr": se, "within": abs(m) <= sig * se})
    ortho = []
    for n in range(p["nmax"] + 1):
        for m in range(p["nmax"] + 1):
            prod = W[n] * W[m]
            est = float(prod.mean())
            se = float(prod.std(ddof=1) / math.sqrt(N))
            target = float(math.factorial(n) * c**n) if n == m else 0.0
            ok = abs(est - target) <= sig * se if se > 0 else abs(est - target) <= 1e-12 * max(1.0, target)
            ortho.append({"n": n, "m": m, "estimate": est, "stderr": se, "target": target, "within": ok})
    status = _flag(all(exact) and all(r["within"] for r in means) and all(r["within"] for r in ortho))
    body = {"recurrence_exact": {"nmax": p["exact_nmax"], "all_equal": all(exact)}, "c": c, "samples": N,
            "seed": p["seed"], "mean_zero": means, "orthogonality": ortho}
    return body, status, {}


def _spec(p, K):
    coeffs = tuple(_floats(p["coefficients"]))
    try:
        return WickSpec(coeffs, K, p["alpha_idx"], p["delta_idx"], strict=p["strict"] if "strict" in p else True)
    except ValueError as exc:
        raise ConfigurationError(f"coefficients: {exc}") from exc


def run_ibp(p):
    K = p["K"]
    modes = ff.build_modes(ff.RectangleDomain(), K)
    spec = _spec(p, K)
    ss = sample_nu(spec, modes, p["samples"], p["seed"], p["ess_floor"])
    rows, statuses = [], []
    for name in _names(p["functions"]):
        try:
            f = from_name(name)
        except KeyError as exc:
            raise ConfigurationError(f"functions: {exc.args[0]}") from exc
        for j in _ints(p["directions"]):
            r = check_ibp(spec, modes, f, j, ss, p["sigma"])
            rows.append(r)
            statuses.append(r["status"])
    free = WickSpec.free(K, p["alpha_idx"], p["delta_idx"])
    reductions = []
    for group in str(p["gaussian_powers"]).split(";"):
        powers = _ints(group)
        red = gaussian_ibp_reduction(free, modes, powers)
        ok = all(abs(a - b) <= 1e-12 * max(1.0, abs(a)) for a, b in red["pairs"])
        reductions.append(dict(red, exact=ok))
        statuses.append(_flag(ok))
    ess_ok = ss.ess >= p["ess_floor"] * ss.count
    if not ess_ok:
        statuses.append(INCONCLUSIVE)
    body = {"spec": {"coefficients": list(spec.coefficients), "K": K, "alpha_idx": spec.alpha_idx,
                     "delta_idx": spec.delta_idx}, "samples": ss.count, "seed": p["seed"], "ess": ss.ess,
            "ess_fraction": ss.ess / ss.count, "warnings": ss.warnings, "checks": rows,
            "gaussian_reduction": reductions}
    return body, aggregate(statuses), {}


def run_drift_conditions(p):
    K = p["K"]
    modes = ff.build_modes(ff.RectangleDomain(), K)
    spec = _spec(p, K)
    ss = sample_nu(spec, modes, p["samples"], p["seed"], p["ess_floor"])
    refined = None
    if p["refine"]:
        modes2 = ff.build_modes(ff.RectangleDomain(), 2 * K)
        spec2 = _spec(p, 2 * K)
        # an independent stream so the two estimates have uncorrelated errors
        ss2 = sample_nu(spec2, modes2, p["samples"], p["seed"] + 1, p["ess_floor"])
        refined = (modes2, ss2, spec2)
    ms = [m for m in _ints(p["ms"]) if m <= K]
    rep = check_drift_conditions(spec, modes, ss, ms, refined, p["sigma"])
    rep["seed"] = p["seed"]
    rep["warnings"] = ss.warnings
    return rep, rep["status"], {}


def run_markov_suite(p):
    rows, statuses = [], []
    for d, name, points in _grid_cases(p):
        rep = markov_suite(presets.drift(name, d), Grid(d, p["R"], points), p["T"], p["tol"])
        rows.append(rep)
        statuses.append(rep["status"])
    return {"cases": rows}, aggregate(statuses), {}


def run_lp_interval(p):
    try:
        lo, hi = lp_uniqueness_interval(p["eps0"])
    except ValueError as exc:
        raise ConfigurationError(f"eps0: {exc}") from exc
    return {"p_lo": lo, "p_hi": hi}, PASS, {}


RUNNERS = {
    "gradient-bound": run_gradient_bound,
    "energy-estimate": run_energy_estimate,
    "l4-estimate": run_l4_estimate,
    "identity-suite": run_identity_suite,
    "coercivity-scan": run_coercivity_scan,
    "duhamel-l2": run_duhamel_l2,
    "duhamel-l1": run_duhamel_l1,
    "covariance": run_covariance,
    "wick-moments": run_wick_moments,
    "ibp": run_ibp,
    "drift-conditions": run_drift_conditions,
    "markov-suite": run_markov_suite,
    "lp-interval": run_lp_interval,
}
