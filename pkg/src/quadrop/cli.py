"""Command-line front end.

``quadrop <analyze|mehler|evolve|control|verify> --config <path> [--out <dir>]
[--format json,csv[,dat][,png]] [--seed <u64>]``

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage,
configuration or numerical errors.  Failures print a JSON object with a
``reason`` field on stderr.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .controllability import (
    ThickSet,
    fit_cost_constant,
    lowmode_basis,
    lowpass_project,
    lr_control,
    thick_check,
)
from .errors import FocalTime, QuadropError, SchemaError
from .mehler import (
    coercivity_exponent,
    gaussian_moment,
    mehler_form,
    validity_window,
    weighted_gaussian_norm,
)
from .semigroup import (
    FunctionState,
    evolve_hermite,
    evolve_mehler,
    gaussian_state,
    grid_axis,
    hermite_matrix,
    measure_smoothing,
    smoothing_exponent_fit,
    supported_orders,
)
from .symbol_core import (
    GOUSpec,
    _chain_kernel,
    build_symbol,
    diffusive_decomposition,
    gou_symbol,
    hamilton_flow_vanishing,
    hamilton_map,
    kalman_rank,
    kfp_symbol,
    psd_sqrt,
    singular_space,
)

COMMANDS = ("analyze", "mehler", "evolve", "control", "verify")
FORMATS = ("json", "csv", "dat", "png")

_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_vector = {"type": "array", "items": {"type": "number"}}
_times = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


CONFIG_SCHEMA = _obj(
    {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 1, "maximum": 3},
        "mode": {"enum": ["gou", "symbol", "kfp"]},
        "Q": _matrix,
        "R": _matrix,
        "B": _matrix,
        "re": _matrix,
        "im": _matrix,
        "a": {"type": "number"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output": {"type": "string"},
        "discretization": _obj(
            {
                "N": {"type": "integer", "minimum": 4, "maximum": 64},
                "L": {"type": "number", "exclusiveMinimum": 0},
                "M": {"type": "integer", "minimum": 8, "maximum": 512},
            }
        ),
        "tolerances": _obj(
            {
                "rank_tol": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "rel_err": {"type": "number", "exclusiveMinimum": 0},
                "slack": {"type": "number", "minimum": 0},
                "backend": {"type": "number", "exclusiveMinimum": 0},
            }
        ),
        "times": _obj({"mehler": _times, "smoothing": _times, "verify": _times}),
        "smoothing": _obj(
            {
                "max_order": {"type": "integer", "minimum": 0, "maximum": 6},
                "N": {"type": "integer", "minimum": 4, "maximum": 64},
                "N_ref": {"type": "integer", "minimum": 4, "maximum": 64},
            }
        ),
        "omega": _obj(
            {
                "cell": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "boxes": {"type": "array", "items": {"type": "array", "items": _vector, "minItems": 2, "maxItems": 2}},
                "carve": {"type": "array", "items": {"type": "array", "items": _vector, "minItems": 2, "maxItems": 2}},
                "halfspaces": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                           "minItems": 2, "maxItems": 2}},
                "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
            required=("cell", "boxes"),
        ),
        "control": _obj(
            {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "T_costs": _times,
                "L": {"type": "number", "exclusiveMinimum": 0},
                "M": {"type": "integer", "minimum": 8, "maximum": 512},
                "stages": {"type": "integer", "minimum": 1, "maximum": 12},
                "nodes": {"type": "integer", "minimum": 4, "maximum": 128},
                "cap_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "target_ratio": {"type": "number", "exclusiveMinimum": 0},
                "center": _vector,
                "width": {"type": "number", "exclusiveMinimum": 0},
            }
        ),
    },
    required=("n", "mode", "seed"),
)


@dataclass
class RunConfig:
    """Validated configuration with defaults filled."""

    raw: dict
    n: int
    mode: str
    q: object
    seed: int
    gou: GOUSpec | None
    discretization: dict
    tolerances: dict
    times: dict
    smoothing: dict
    omega: ThickSet | None
    control: dict
    output: str | None

    @property
    def hash(self):
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class Report:
    command: str
    config_hash: str
    checks: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    messages: list = field(default_factory=list)

    @property
    def passed(self):
        return all(self.checks.values())


def _as_array(x, path):
    a = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SchemaError("must be a square matrix", path)
    if not np.all(np.isfinite(a)):
        raise SchemaError("entries must be finite", path)
    return a


def _check_psd(A, path):
    if not np.allclose(A, A.T, atol=1e-12):
        raise SchemaError("must be symmetric", path)
    if np.linalg.eigvalsh((A + A.T) / 2).min() < -1e-12 * max(1.0, np.abs(A).max()):
        raise SchemaError("must be positive semidefinite", path)


def parse_config(source):
    """Parse and validate a run configuration.

    Parameters
    ----------
    source : str or Path or dict
        A file path, inline JSON text or an already decoded mapping.

    Raises
    ------
    FileNotFoundError
        If ``source`` names a missing file.
    SchemaError
        With the offending field path.
    """
    if isinstance(source, dict):
        raw = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            path = Path(text)
            if not path.is_file():
                raise FileNotFoundError(f"config file not found: {text}")
            text = path.read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", f"line {exc.lineno}") from None
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(exc.message, "/".join(str(p) for p in exc.absolute_path) or "$") from None

    n, mode = raw["n"], raw["mode"]
    gou = None
    if mode == "gou":
        for key in ("Q", "R", "B"):
            if key not in raw:
                raise SchemaError("required in gou mode", key)
        Q, R, B = (_as_array(raw[k], k) for k in ("Q", "R", "B"))
        for key, A in (("Q", Q), ("R", R), ("B", B)):
            if A.shape != (n, n):
                raise SchemaError(f"must be {n} x {n}", key)
        _check_psd(Q, "Q")
        _check_psd(R, "R")
        gou = GOUSpec(Q=Q, R=R, B=B)
        q = gou_symbol(gou)[0]
    elif mode == "symbol":
        for key in ("re", "im"):
            if key not in raw:
                raise SchemaError("required in symbol mode", key)
        re, im = _as_array(raw["re"], "re"), _as_array(raw["im"], "im")
        for key, A in (("re", re), ("im", im)):
            if A.shape != (2 * n, 2 * n):
                raise SchemaError(f"must be {2 * n} x {2 * n}", key)
        _check_psd((re + re.T) / 2, "re")
        q = build_symbol(re + 1j * im)
    else:
        if n % 2:
            raise SchemaError("kfp mode needs an even dimension (positions and velocities)", "n")
        q = kfp_symbol(n // 2, float(raw.get("a", 0.0)))

    two_d = n >= 2
    disc = {"N": 40 if two_d else 48, "L": 10.0 if two_d else 12.0, "M": 64 if two_d else 256}
    disc.update(raw.get("discretization", {}))
    tol = {"rank_tol": None, "rel_err": 0.1, "slack": 0.2, "backend": 1e-4}
    tol.update(raw.get("tolerances", {}))
    times = {"mehler": [0.1, 0.5, 1.0], "smoothing": list(np.geomspace(0.02, 1.0, 8)),
             "verify": [0.1, 0.25, 0.5]}
    times.update(raw.get("times", {}))
    sm = {"max_order": 4, "N": 16 if two_d else 48, "N_ref": 20 if two_d else 64}
    sm.update(raw.get("smoothing", {}))
    omega = None
    if "omega" in raw:
        o = raw["omega"]
        if len(o["cell"]) != n:
            raise SchemaError(f"must have {n} entries", "omega/cell")
        try:
            omega = ThickSet(cell=tuple(o["cell"]), boxes=tuple(tuple(b) for b in o["boxes"]),
                             carve=tuple(tuple(b) for b in o.get("carve", [])),
                             halfspaces=tuple((int(a), float(b)) for a, b in o.get("halfspaces", [])),
                             gamma=o.get("gamma"))
        except ValueError as exc:
            raise SchemaError(str(exc), "omega") from None
    ctl = {"T": 1.0, "T_costs": [0.5, 1.0, 2.0], "L": 6.0 if two_d else 12.0, "M": 24 if two_d else 256,
           "stages": 6, "nodes": 32, "cap_fraction": 0.5, "target_ratio": 5e-2,
           "center": [0.3] + [-0.2] * (n - 1), "width": 1.0}
    ctl.update(raw.get("control", {}))
    if len(ctl["center"]) != n:
        raise SchemaError(f"must have {n} entries", "control/center")
    return RunConfig(raw=raw, n=n, mode=mode, q=q, seed=int(raw["seed"]), gou=gou,
                     discretization=disc, tolerances=tol, times=times, smoothing=sm,
                     omega=omega, control=ctl, output=raw.get("output"))


# --- commands -----------------------------------------------------------------------


def _hypotheses(cfg, an):
    hyp = {
        "smoothing_estimate": bool(an.index_sets is not None and an.imF_kernel_inclusion),
        "null_controllability": bool(an.diffusive and an.imF_kernel_inclusion),
    }
    if cfg.gou is not None:
        Q, R, B, n = cfg.gou.Q, cfg.gou.R, cfg.gou.B, cfg.n
        kx = _chain_kernel(R, B, n)
        kxi = _chain_kernel(Q, B.T, n)
        basis = np.zeros((2 * n, kx.shape[1] + kxi.shape[1]))
        basis[:n, : kx.shape[1]] = kx
        basis[n:, kx.shape[1]:] = kxi
        idx, _ = diffusive_decomposition(basis, n, an.rank_tol)
        in_ker = (np.linalg.norm(B @ kx) <= 1e-10 * max(1.0, np.abs(B).max())
                  and np.linalg.norm(B.T @ kxi) <= 1e-10 * max(1.0, np.abs(B).max()))
        kalman, _ = kalman_rank(B, psd_sqrt(Q))
        idx_x, _ = diffusive_decomposition(np.vstack([kx, np.zeros((n, kx.shape[1]))]), n, an.rank_tol)
        hyp["gou_smoothing"] = bool(idx is not None and in_ker)
        hyp["gou_null_controllability"] = bool(kalman and idx_x is not None
                                               and np.linalg.norm(B @ kx) <= 1e-10 * max(1.0, np.abs(B).max()))
        hyp["kalman_rank"] = bool(kalman)
    return hyp


def _analyze(cfg):
    F = hamilton_map(cfg.q)
    an = singular_space(F, cfg.tolerances["rank_tol"])
    rep = Report("analyze", cfg.hash)
    hyp = _hypotheses(cfg, an)
    rep.values.update(
        dim_S=an.dim_S, k0=an.k0,
        I=list(an.index_sets.I) if an.index_sets else None,
        J=list(an.index_sets.J) if an.index_sets else None,
        diffusive=an.diffusive, imF_kernel_inclusion=an.imF_kernel_inclusion,
        partial_dims=list(an.partial_dims), rank_tol=an.rank_tol, hypotheses=hyp,
    )
    if an.index_sets is None:
        rep.messages.append("singular space is not coordinate aligned; smoothing hypotheses unverified")
    if hyp["null_controllability"]:
        rep.messages.append("null-controllability hypotheses satisfied: diffusive and S inside Ker(Im F)")
    else:
        rep.messages.append("null-controllability hypotheses not satisfied")
    if hyp["smoothing_estimate"]:
        rep.messages.append("smoothing-estimate hypotheses satisfied")
    rows = [[j, d] for j, d in enumerate(an.partial_dims)]
    rep.tables["partial_dims"] = (["j", "dim"], rows)
    rep.checks["analysis_complete"] = True
    return rep


def _mehler(cfg):
    F = hamilton_map(cfg.q)
    an = singular_space(F, cfg.tolerances["rank_tol"])
    rep = Report("mehler", cfg.hash)
    m = 2 * cfg.n
    header = ["t", "norm_re", "norm_im"] + [f"{p}{i}{j}" for p in ("re", "im") for i in range(m) for j in range(m)]
    rows, focal = [], []
    for t in cfg.times["mehler"]:
        try:
            ms = mehler_form(F, t)
        except FocalTime:
            focal.append(t)
            continue
        A = ms.form
        rows.append([t, ms.norm_factor.real, ms.norm_factor.imag] + list(A.real.ravel()) + list(A.imag.ravel()))
    rep.tables["mehler_form"] = (header, rows)
    rep.values["focal_times_skipped"] = focal
    rep.values["validity_window"] = validity_window(F)
    if 0 < an.dim_S < m or an.dim_S == 0:
        fit = coercivity_exponent(F, an, seed=cfg.seed)
        rep.values.update(coercivity_exponent=fit.exponent, coercivity_c=fit.c, expected_exponent=fit.expected)
        rep.tables["coercivity"] = (["t", "min_re_qt", "bound"],
                                    [[t, v, fit.c * t**fit.expected] for t, v in zip(fit.t, fit.min_re)])
        rep.checks["coercivity"] = fit.passed
    return rep


def _evolve(cfg):
    F = hamilton_map(cfg.q)
    an = singular_space(F, cfg.tolerances["rank_tol"])
    rep = Report("evolve", cfg.hash)
    if an.index_sets is None:
        rep.messages.append("index sets absent; smoothing rates not defined")
        rep.checks["index_sets"] = False
        return rep
    hyp = _hypotheses(cfg, an)
    if not hyp["smoothing_estimate"]:
        rep.messages.append("smoothing hypotheses not satisfied; rates measured as an experiment")
    sm = cfg.smoothing
    orders = supported_orders(cfg.n, an.index_sets.I, an.index_sets.J, sm["max_order"])
    series = measure_smoothing(cfg.q, an.k0, orders, cfg.times["smoothing"], N=sm["N"],
                               N_ref=sm["N_ref"], seed=cfg.seed)
    sr = smoothing_exponent_fit(series, cfg.tolerances["rel_err"], cfg.tolerances["slack"])
    rep.values["C"] = sr.C
    rep.values["exponents"] = {_key(k): v for k, v in sr.exponents.items()}
    rep.values["predicted_exponents"] = {_key(k): v for k, v in sr.predicted_exponents.items()}
    for alpha, beta in orders:
        rep.tables[f"smoothing_{_key((alpha, beta))}"] = (["t", "seminorm", "bound"], sr.table(alpha, beta))
    rep.checks["smoothing_rates"] = sr.passed
    return rep


def _key(k):
    alpha, beta = k
    return "a" + "".join(map(str, alpha)) + "_b" + "".join(map(str, beta))


def _control(cfg):
    rep = Report("control", cfg.hash)
    if cfg.omega is None:
        raise SchemaError("required for control", "omega")
    thick, dens = thick_check(cfg.omega, cfg.omega.gamma, cfg.omega.cell)
    rep.values["thick_density"] = dens
    rep.checks["thick"] = thick
    if not thick:
        rep.messages.append("thickness check failed")
        return rep
    F = hamilton_map(cfg.q)
    an = singular_space(F, cfg.tolerances["rank_tol"])
    if not (an.diffusive and an.imF_kernel_inclusion):
        rep.messages.append("null-controllability hypotheses not satisfied; running as an experiment")
    c = cfg.control
    f0 = gaussian_state("grid", cfg.n, center=c["center"], width=c["width"], L=c["L"], M=c["M"])
    Ts = sorted(set(float(T) for T in c["T_costs"]) | {float(c["T"])})
    results = {T: lr_control(F, cfg.omega, T, f0, nodes=c["nodes"], cap_fraction=c["cap_fraction"],
                             stages=c["stages"]) for T in Ts}
    main = results[float(c["T"])]
    costs = [results[T].cost for T in Ts]
    fitted = fit_cost_constant(Ts, costs, an.k0)
    rep.values.update(final_ratio=main.final_ratio, cost=main.cost, fitted_C=fitted, T=float(c["T"]),
                      k0=an.k0, stages=len(main.stages), note=main.note,
                      costs={f"{T:g}": cst for T, cst in zip(Ts, costs)},
                      ratios={f"{T:g}": results[T].final_ratio for T in Ts})
    rep.checks["support_exact"] = main.support_defect == 0.0
    rep.checks["final_ratio"] = main.final_ratio <= c["target_ratio"]
    rep.checks["cost_envelope"] = bool(np.isfinite(fitted) and fitted > 1)
    mask = cfg.omega.grid_mask(c["L"], c["M"]).reshape(-1)
    ax = grid_axis(c["L"], c["M"])
    mesh = np.meshgrid(*([ax] * cfg.n), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)[mask]
    rows = []
    for t, u in zip(main.times, main.controls):
        for p, val in zip(pts, u[mask]):
            rows.append([t, *p, val.real, val.imag])
    xs = [f"x{j + 1}" for j in range(cfg.n)]
    rep.tables["control"] = (["t", *xs, "u_re", "u_im"], rows)
    rep.tables["stages"] = (["k", "tau", "sigma", "residual", "cost", "quad_error", "norm"],
                            [[d["k"], d["tau"], d["sigma"], d["residual"], d["cost"], d["quad_error"], d["norm"]]
                             for d in main.stages])
    rep.tables["costs"] = (["t", "cost", "ratio"], [[T, results[T].cost, results[T].final_ratio] for T in Ts])
    return rep


def _verify(cfg):
    rep = Report("verify", cfg.hash)
    q = cfg.q
    F = hamilton_map(q)
    an = singular_space(F, cfg.tolerances["rank_tol"])
    rep.checks["hamilton_skew"] = F.skew_defect() <= 1e-12 * max(1.0, np.abs(F.F).max())
    rep.checks["partial_dims_monotone"] = all(a >= b for a, b in zip(an.partial_dims, an.partial_dims[1:]))
    S = an.basis_S
    rep.checks["S_in_ker_ReF"] = bool(S.shape[1] == 0 or np.linalg.norm(F.re @ S) <= 1e-9 * max(1.0, np.abs(F.re).max()))
    rep.checks["flow_vanishes_on_S"] = all(hamilton_flow_vanishing(q, S[:, j]) for j in range(S.shape[1]))
    m = 2 * cfg.n
    if an.dim_S < m:
        fit = coercivity_exponent(F, an, seed=cfg.seed)
        rep.values["coercivity_exponent"] = fit.exponent
        rep.checks["coercivity"] = fit.passed
    p = np.arange(21)
    exact = np.array([gaussian_moment(k) for k in p])
    rec = np.empty(21)
    rec[0] = np.sqrt(np.pi)
    for k in range(20):
        rec[k + 1] = 0.5 * (2 * k + 1) * rec[k]
    rep.checks["gaussian_moments"] = bool(np.all(np.abs(exact - rec) <= 1e-12 * rec))
    wn = weighted_gaussian_norm(3, 0.5)
    rep.checks["gaussian_weighted_bound"] = bool(wn.norm <= wn.bound)
    if cfg.n <= 2:
        d = cfg.discretization
        op = hermite_matrix(q, d["N"])
        center = [0.3] * cfg.n
        ug = gaussian_state("grid", cfg.n, center=center, width=1.0, L=d["L"], M=d["M"])
        uh = gaussian_state("hermite", cfg.n, center=center, width=1.0, N=d["N"])
        errs, norms = [], [ug.norm()]
        for t in cfg.times["verify"]:
            a = evolve_mehler(F, t, ug, check=False)
            b = evolve_hermite(op, t, uh).to_grid(d["L"], d["M"])
            errs.append(float(np.linalg.norm(a.data - b.data) / np.linalg.norm(b.data)))
            norms.append(a.norm())
        rep.values["backend_errors"] = errs
        rep.checks["backend_equivalence"] = max(errs) <= cfg.tolerances["backend"]
        rep.checks["contraction"] = all(y <= x * (1 + 1e-10) for x, y in zip(norms, norms[1:]))
        t1, t2 = cfg.times["verify"][0], cfg.times["verify"][-1]
        ab = evolve_mehler(F, t2, evolve_mehler(F, t1, ug, check=False), check=False)
        direct = evolve_mehler(F, t1 + t2, ug, check=False)
        rep.checks["semigroup_law"] = bool(np.linalg.norm(ab.data - direct.data)
                                           <= 1e-8 * np.linalg.norm(direct.data))
        rep.tables["backend"] = (["t", "rel_err"], [[t, e] for t, e in zip(cfg.times["verify"], errs)])
        # pi_k self-adjointness on seeded random grid states
        rng = np.random.default_rng(cfg.seed)
        Lg, Mg = (6.0, 24) if cfg.n == 2 else (12.0, 64)
        shape = (Mg,) * cfg.n
        u = FunctionState("grid", rng.standard_normal(shape) + 1j * rng.standard_normal(shape), cfg.n, L=Lg, M=Mg)
        v = FunctionState("grid", rng.standard_normal(shape) + 1j * rng.standard_normal(shape), cfg.n, L=Lg, M=Mg)
        lhs = lowpass_project(u, 2.0).inner(v)
        rhs = u.inner(lowpass_project(v, 2.0))
        rep.checks["projection_self_adjoint"] = bool(abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs)))
        B = lowmode_basis(cfg.n, Lg, Mg, 2.0)
        rep.checks["lowmode_orthonormal"] = bool(np.allclose(B.conj().T @ B, np.eye(B.shape[1]), atol=1e-10))
    if cfg.omega is not None:
        thick, dens = thick_check(cfg.omega, cfg.omega.gamma, cfg.omega.cell)
        rep.values["omega_worst_density"] = dens
        rep.checks["omega_thick"] = thick
    return rep


_DISPATCH = {"analyze": _analyze, "mehler": _mehler, "evolve": _evolve, "control": _control, "verify": _verify}


def run_command(cmd, cfg):
    """Run one command on a validated config and return its Report."""
    if cmd not in _DISPATCH:
        raise SchemaError(f"unknown command {cmd!r}", "command")
    return _DISPATCH[cmd](cfg)


# --- output ---------------------------------------------------------------------------


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def emit_report(report, out_dir, formats=("json", "csv")):
    """Write the report files and return their paths.

    JSON and CSV output is byte-stable for fixed inputs.  ``dat`` writes
    two-column whitespace-separated plot data (first column against each
    other column); ``png`` renders figures with the Agg backend.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        summary = {"command": report.command, "config_hash": report.config_hash, "passed": report.passed,
                   "checks": report.checks, "messages": report.messages, "version": __version__}
        summary.update(report.values)
        path = out / "summary.json"
        path.write_text(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")
        written.append(path)
    if "csv" in formats:
        for name, (header, rows) in sorted(report.tables.items()):
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(x) for x in r])
            path = out / f"{name}.csv"
            path.write_text(buf.getvalue())
            written.append(path)
    if "dat" in formats:
        for name, (header, rows) in sorted(report.tables.items()):
            if not rows or name == "control":
                continue
            arr = np.asarray(rows, dtype=float)
            for j, col in enumerate(header[1:], start=1):
                path = out / f"{name}_{col}.dat"
                lines = [f"# {header[0]} {col}"] + [f"{_fmt(a)} {_fmt(b)}" for a, b in arr[:, [0, j]]]
                path.write_text("\n".join(lines) + "\n")
                written.append(path)
    if "png" in formats:
        from .plotting import render_tables

        written += render_tables(report, out)
    return written


# --- entry point ------------------------------------------------------------------------


def _fail(reason, code, **extra):
    print(json.dumps({"reason": reason, "exit_code": code, **extra}, sort_keys=True), file=sys.stderr)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="quadrop", description="Quadratic-operator semigroup toolkit.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="path to a JSON config (or inline JSON)")
    p.add_argument("--out", default=None, help="output directory (default: config 'output' or ./quadrop-out)")
    p.add_argument("--format", default="json,csv", help="comma list from json,csv,dat,png")
    p.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        return _fail(f"unknown format(s): {', '.join(bad)}", 2)
    threads = os.environ.get("QUADROP_THREADS")
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise SchemaError("must be an unsigned 64-bit integer", "seed")
            cfg = parse_config({**cfg.raw, "seed": args.seed})
        limit = threadpool_limits(limits=max(1, int(threads))) if threads else nullcontext()
        with limit:
            report = run_command(args.command, cfg)
        out = args.out or cfg.output or "quadrop-out"
        emit_report(report, out, formats)
    except FileNotFoundError as exc:
        return _fail(str(exc), 2)
    except SchemaError as exc:
        return _fail(str(exc), 2, path=exc.path)
    except (QuadropError, ValueError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}", 2)
    except OSError as exc:
        return _fail(f"IoError: {exc}", 2)
    if not report.passed:
        failed = sorted(k for k, v in report.checks.items() if not v)
        return _fail("; ".join(report.messages) or "check failure", 1, failed=failed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
