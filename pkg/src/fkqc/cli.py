"""Command-line driver writing CSV/JSON traces of adaptive runs.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .adapt import AdaptConfig, AdaptResult, initial_mesh, run
from .assembly import assemble_system, discretize, solve
from .estimator import dislocation_goal, estimate
from .fk_model import ModelParams, Partition, assemble_quadratic
from .mesh import partial_refine
from .oracle import build_reference

log = logging.getLogger(__name__)

EXIT_OK, EXIT_IO, EXIT_NOT_CONVERGED = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    k0: float = 0.1
    k1: float = 2.0
    k2: float = 1.0
    a0: float = 1.0
    M: int = 2053
    atomistic_lo: int = -1
    atomistic_hi: int = 2
    bc_l1: Optional[float] = None
    bc_l2: Optional[float] = None
    bc_r2: Optional[float] = None
    bc_r1: Optional[float] = None
    tau_gl: float = 1e-5
    tau_fac: float = 10.0
    lam: float = 2
    max_iterations: int = 100
    oracle: bool = True
    out: str = "out"
    formats: tuple = ("csv", "json")

    def __post_init__(self):
        self.params()
        self.partition()
        self.adapt_config()
        bad = set(self.formats) - {"csv", "json"}
        if bad:
            raise ValueError(f"unknown output formats {sorted(bad)}")

    def params(self) -> ModelParams:
        return ModelParams(self.k0, self.k1, self.k2, self.a0, self.M)

    def partition(self) -> Partition:
        part = Partition(self.M, (self.atomistic_lo, self.atomistic_hi))
        initial_mesh(part)
        return part

    def adapt_config(self) -> AdaptConfig:
        return AdaptConfig(self.tau_gl, self.tau_fac, self.lam, self.max_iterations)

    def bc(self) -> tuple:
        M = self.M
        defaults = (-M, -M + 1, M - 1, M)
        given = (self.bc_l1, self.bc_l2, self.bc_r2, self.bc_r1)
        return tuple(float(d if g is None else g) for g, d in zip(given, defaults))

    def echo(self) -> dict:
        d = asdict(self)
        d["lambda"] = _fmt_lambda(d.pop("lam"))
        d["formats"] = list(self.formats)
        d["bc"] = list(self.bc())
        del d["out"]  # outputs must not depend on where they are written
        return d


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def parse_lambda(text) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "∞"):
        return math.inf
    v = float(t)
    if v != int(v):
        raise ValueError(f"lambda must be an integer or inf, got {text!r}")
    return int(v)


def _fmt_lambda(lam) -> str:
    return "inf" if lam == math.inf else str(int(lam))


_PARSERS = {
    "k0": float, "k1": float, "k2": float, "a0": float, "M": int,
    "atomistic_lo": int, "atomistic_hi": int,
    "bc_l1": float, "bc_l2": float, "bc_r2": float, "bc_r1": float,
    "tau_gl": float, "tau_fac": float, "lambda": parse_lambda,
    "max_iterations": int, "oracle": _parse_bool, "out": str,
    "formats": lambda s: tuple(f.strip() for f in s.split(",") if f.strip()),
}
_FIELD = {"lambda": "lam"}


def parse_config(text: str, overrides: Optional[dict] = None) -> RunConfig:
    """Parse ``key = value`` lines into a validated :class:`RunConfig`.

    ``overrides`` (already typed, keyed like the file) win over file values.
    """
    values, where = {}, {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {n}: duplicate key {key!r} (first set on line {where[key]})")
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {n}: bad value for {key!r}: {exc}") from None
        where[key] = n
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
            where[key] = "command line"
    kwargs = {_FIELD.get(k, k): v for k, v in values.items()}
    try:
        return RunConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        culprits = [f"{k} (line {where[k]})" if isinstance(where[k], int) else f"{k} ({where[k]})"
                    for k in where
                    if re.search(rf"\b{k}\b", msg) or (k.startswith("atomistic") and "atomistic" in msg)]
        hint = f" [{', '.join(culprits)}]" if culprits else ""
        raise ConfigError(f"invalid configuration: {msg}{hint}") from None


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _setup(cfg: RunConfig):
    params, part = cfg.params(), cfg.partition()
    goal = dislocation_goal(params.M)
    ref = build_reference(params, part, cfg.bc(), goal) if cfg.oracle else None
    return params, part, goal, ref


def trace_rows(result: AdaptResult):
    for r in result.records:
        exact = None if r.exact_error is None else abs(r.exact_error)
        yield [r.iteration, r.dof, r.min_nu, r.max_nu, _num(r.eta), _num(r.sum_eta_qc), _num(exact)]


def mesh_rows(record):
    mesh = record.mesh
    N = mesh.N
    nu, eta_qc = mesh.nu, record.report.eta_qc
    # one row per repatom; the last one opens no interval
    for pos, ell in enumerate(mesh.repatoms):
        if pos < nu.size:
            yield [pos - N + 1, ell, int(nu[pos]), _num(eta_qc[pos])]
        else:
            yield [pos - N + 1, ell, "", ""]


def cmd_run(cfg: RunConfig) -> int:
    params, part, goal, ref = _setup(cfg)
    result = run(params, part, initial_mesh(part), goal, cfg.adapt_config(), cfg.bc(), ref)
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "csv" in cfg.formats:
            _write_csv(out / "trace.csv",
                       ["iteration", "dof", "min_nu", "max_nu", "eta", "sum_eta_qc", "exact_error"],
                       trace_rows(result))
            for rec in result.records:
                _write_csv(out / f"mesh_{rec.iteration}.csv", ["j", "ell_j", "nu_j", "eta_qc_j"],
                           mesh_rows(rec))
        if "json" in cfg.formats:
            last = result.records[-1]
            summary = {
                "converged": result.converged,
                "iterations": result.iterations,
                "final_dof": last.dof,
                "final_eta": last.eta,
                "final_exact_error": None if last.exact_error is None else abs(last.exact_error),
                "config": cfg.echo(),
            }
            (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                              encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_efficiency(cfg: RunConfig, tolerances: Sequence[float], lambdas: Sequence[float]) -> int:
    """Estimator efficiency on the meshes reached at each tolerance, plus Λ sweeps.

    Mesh ``k`` is where the configured loop first meets ``tolerances[k]``.
    Every Λ in ``lambdas`` is then evaluated on each mesh, and a full
    adaptive run per Λ is recorded for the mesh-efficiency table.
    """
    if not tolerances or not lambdas:
        raise ConfigError("need at least one tolerance and one lambda")
    params, part, goal, ref = _setup(cfg)
    bc = cfg.bc()
    quad = assemble_quadratic(params, part)
    tightest = min(tolerances)

    # meshes are the stopping meshes of the configured loop at each tolerance
    base = run(params, part, initial_mesh(part), goal,
               replace(cfg.adapt_config(), tau_gl=tightest), bc, ref)
    meshes, reached = [], True
    for tol in tolerances:
        hit = next((r for r in base.records if abs(r.eta) <= tol), None)
        if hit is None:
            reached = False
            log.warning("tolerance %g not reached within %d iterations", tol, cfg.max_iterations)
            hit = base.records[-1]
        meshes.append(hit)

    system_ac = ref.system_ac if ref else assemble_system("ac", quad, discretize("ac", params, bc))
    eff_rows = []
    for mesh_id, rec in enumerate(meshes, 1):
        y_qc = solve(assemble_system("qc", quad, discretize("qc", params, bc, rec.mesh)))
        exact = abs(ref.coarsening_error(y_qc.positions, atol=1e-14)) if ref else None
        for lam in lambdas:
            rep = estimate(partial_refine(rec.mesh, lam), quad, goal, system_ac, y_qc.positions, bc)
            ratio_eta = abs(rep.eta) / exact if exact else None
            ratio_sum = rep.sum_eta_qc / exact if exact else None
            eff_rows.append([mesh_id, _fmt_lambda(lam), _num(rep.eta), _num(rep.sum_eta_qc),
                             _num(exact), _num(ratio_eta), _num(ratio_sum)])

    # the sweeps run to the tighter of the config tolerance and the listed ones
    sweep_tol = min(tightest, cfg.tau_gl)
    sweep_rows = []
    for lam in lambdas:
        res = run(params, part, initial_mesh(part), goal,
                  replace(cfg.adapt_config(), tau_gl=sweep_tol, lam=lam), bc, ref)
        for r in res.records:
            exact = None if r.exact_error is None else abs(r.exact_error)
            sweep_rows.append([_fmt_lambda(lam), r.iteration, r.dof, r.min_nu, r.max_nu,
                               _num(exact), _num(r.eta), _num(r.sum_eta_qc)])

    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "efficiency.csv",
                   ["mesh_id", "lambda", "eta", "sum_eta_qc", "exact_error", "ratio_eta", "ratio_sum"],
                   eff_rows)
        _write_csv(out / "mesh_efficiency.csv",
                   ["lambda", "iteration", "dof", "min_nu", "max_nu", "exact_error", "eta", "sum_eta_qc"],
                   sweep_rows)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if reached else EXIT_NOT_CONVERGED


def _float_list(text: str) -> list:
    return [float(t) for t in text.split(",") if t.strip()]


def _lambda_list(text: str) -> list:
    return [parse_lambda(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fkqc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the adaptive loop and write trace/mesh/summary files")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--tau-gl", type=float)
    p_run.add_argument("--lambda", dest="lam", type=parse_lambda)
    p_run.add_argument("--oracle", choices=("on", "off"))
    p_run.add_argument("--out")

    p_eff = sub.add_parser("efficiency", help="estimator efficiency tables")
    p_eff.add_argument("--config", required=True, type=Path)
    p_eff.add_argument("--tolerances", required=True, type=_float_list)
    p_eff.add_argument("--lambdas", required=True, type=_lambda_list)
    p_eff.add_argument("--out")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    overrides = {"out": args.out}
    if args.command == "run":
        overrides.update({"tau_gl": args.tau_gl, "lambda": args.lam,
                          "oracle": None if args.oracle is None else args.oracle == "on"})
    try:
        cfg = parse_config(text, overrides)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_efficiency(cfg, args.tolerances, args.lambdas)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
