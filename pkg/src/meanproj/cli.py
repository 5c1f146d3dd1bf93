"""Command-line front end: ``meanproj {sample,mean,variance,identities,discrete} [config.json]``.

Exit status: 0 success, 1 a verification failed (identities / discrete),
2 invalid or unreadable configuration, 3 numerical degeneracy or I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dpp_sampler, estimator, function_space
from .errors import DegeneracyError, MeanProjError
from .minor_identities import fuzz_identities

log = logging.getLogger("meanproj")

MODES = ("sample", "mean", "variance", "identities", "discrete")
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
# execution-only settings; left out of reports so they cannot change report bytes
_NOT_REPORTED = ("out", "workers")
DISCRETE_TOLERANCE = 1e-10


class ConfigError(ValueError):
    pass


def _default_space():
    return {"kind": "interval", "a": -1.0, "b": 1.0, "weight": "lebesgue", "quadrature": 128}


@dataclass
class ExperimentConfig:
    mode: str
    space: dict = field(default_factory=_default_space)
    basis: dict = field(default_factory=lambda: {"family": "legendre", "n": 3})
    functions: list = field(default_factory=list)
    m: int | None = None
    replicates: int = 1000
    seed: int = 0
    out: str | None = None
    workers: int = 1
    trials: int = 500
    max_n: int = 6
    kernel: dict | None = None

    @classmethod
    def from_dict(cls, data: dict, mode: str | None = None) -> "ExperimentConfig":
        data = dict(data)
        if mode is not None:
            data["mode"] = mode
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "mode" not in data:
            raise ConfigError("config has no mode")
        return cls(**data)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        for name in ("replicates", "seed", "workers", "trials", "max_n"):
            if not isinstance(getattr(self, name), int) or isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be an integer")
        if self.replicates < 1 or self.workers < 1 or self.trials < 0 or self.max_n < 1:
            raise ConfigError("replicates, workers and max_n must be positive, trials non-negative")
        if self.mode in ("mean", "variance"):
            if not self.functions:
                raise ConfigError(f"mode {self.mode} needs at least one test function")
            if self.m is not None and self.m != len(self.functions):
                raise ConfigError(f"m={self.m} but {len(self.functions)} functions given")
            if self.replicates < 2:
                raise ConfigError("need at least 2 replicates")


# --- building objects from the config ----------------------------------------


def build_space(spec: dict) -> function_space.GroundSpace:
    spec = dict(spec)
    kind = spec.pop("kind", "interval")
    return function_space.make_ground_space(kind, **spec)


def build_function(spec: dict, basis: function_space.OrthonormalBasis | None = None) -> function_space.FunctionHandle:
    name = spec.get("name")
    if name == "monomial":
        k = spec.get("k")
        if not isinstance(k, int) or k < 0:
            raise ConfigError("monomial needs a non-negative integer k")
        return function_space.monomial(k)
    if name == "exp":
        return function_space.exponential()
    if name == "runge":
        return function_space.runge()
    if name == "basis":
        if basis is None:
            raise ConfigError("basis coefficients need a basis")
        coefficients = spec.get("coefficients", [])
        if len(coefficients) != basis.n:
            raise ConfigError(f"basis function needs {basis.n} coefficients")
        return basis.combination(coefficients, "basis" + json.dumps(coefficients))
    raise ConfigError(f"unknown function {spec!r}")


def build_basis(space, spec: dict) -> function_space.OrthonormalBasis:
    spec = dict(spec)
    family = spec.get("family", "legendre")
    n = spec.get("n")
    if not isinstance(n, int):
        raise ConfigError("basis needs an integer n")
    seeds = None
    if family == "gram_schmidt_custom":
        seeds = [build_function(s) for s in spec.get("seeds", [])]
    return function_space.orthonormal_basis(space, n, family, seeds)


def build_kernel(spec: dict | None, seed: int) -> dpp_sampler.KernelMatrix:
    if not spec:
        raise ConfigError("discrete mode needs a kernel spec")
    if "vectors" in spec:
        return dpp_sampler.projection_kernel(np.asarray(spec["vectors"], dtype=float))
    if "random" in spec:
        d, n = spec["random"].get("d"), spec["random"].get("n")
        if not (isinstance(d, int) and isinstance(n, int) and 1 <= n <= d):
            raise ConfigError("random kernel needs integers 1 <= n <= d")
        rng = dpp_sampler.RngStream(seed).generator()
        return dpp_sampler.projection_kernel(rng.standard_normal((d, n)))
    raise ConfigError("kernel spec needs 'vectors' or 'random'")


# --- report emission ---------------------------------------------------------


def _format_float(x: float) -> str:
    s = format(x, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def dumps(obj) -> str:
    """JSON text with fixed key order and 17-significant-digit floats; non-finite floats become null."""
    if obj is None or (isinstance(obj, float) and not math.isfinite(obj)):
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, (str, Fraction)):
        return json.dumps(str(obj))
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return _format_float(float(x)) if math.isfinite(x) else ""
    return "" if x is None else str(x)


def emit_report(report: dict, fmt: str, path) -> None:
    """Write ``report`` as JSON (the whole dict) or CSV (its ``table`` entry: header + rows)."""
    path = Path(path)
    if fmt == "json":
        body = {k: v for k, v in report.items() if k != "table"}
        text = dumps(body) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in report["table"]:
            writer.writerow([_csv_cell(x) for x in row])
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.write_text(text, encoding="utf-8")


# --- modes -------------------------------------------------------------------


def _index_label(I) -> str:
    return " ".join(str(i) for i in I)


def _run_sample(cfg, space, basis, lines):
    kernel, _ = dpp_sampler.discretize(space, basis)
    samples = []
    table = [["replicate"] + [f"x_{i}" for i in range(1, basis.n + 1)] + ["log_density"]]
    bs = estimator.BLOCK_SIZE
    for b, start in enumerate(range(0, cfg.replicates, bs)):
        size = min(bs, cfg.replicates - start)
        gen = dpp_sampler.RngStream(cfg.seed, stream=b).generator()
        points, _ = dpp_sampler.sample_points(basis, size, gen, kernel)
        for r, pts in enumerate(points, start=start):
            ld = dpp_sampler.log_density(basis, dpp_sampler.PointConfiguration(tuple(pts)))
            rec = {"replicate": r, "points": pts.tolist(), "log_density": ld}
            if not math.isfinite(ld):
                rec["degenerate"] = True
            samples.append(rec)
            lines.append(dumps(rec))
            table.append([r, *pts.tolist(), ld])
    return {"samples": samples, "table": table}


def _run_mean(cfg, space, basis, fs, lines):
    rep = estimator.estimate_mean_minors(basis, fs, cfg.replicates, cfg.seed, workers=cfg.workers)
    table = [["I", "mean", "variance", "stderr", "target", "z"]]
    minors = []
    for e in rep.estimates:
        minors.append({"I": list(e.index_set), "mean": e.mean, "variance": e.variance,
                       "stderr": e.stderr, "target": e.target, "z": e.z})
        table.append([_index_label(e.index_set), e.mean, e.variance, e.stderr, e.target, e.z])
    return {"n": rep.n, "m": rep.m, "replicates": rep.replicates, "seed": rep.seed,
            "redraws": rep.redraws, "max_abs_z": rep.max_abs_z, "minors": minors, "table": table}


def _run_variance(cfg, space, basis, fs, lines):
    rep = estimator.variance_report(basis, fs, cfg.replicates, cfg.seed, workers=cfg.workers)
    table = [["k", "binomial", "pi_k_norm_sq", "contribution", "empirical", "empirical_stderr"]]
    grades = []
    for g in rep.contributions:
        grades.append({"k": g.k, "binomial": g.binomial, "pi_k_norm_sq": g.norm_sq, "contribution": g.contribution})
        table.append([g.k, g.binomial, g.norm_sq, g.contribution, None, None])
    table.append(["total", None, None, rep.closed_form, rep.empirical, rep.empirical_stderr])
    return {
        "n": rep.n, "m": rep.m, "replicates": rep.replicates, "seed": rep.seed, "redraws": rep.redraws,
        "closed_form": rep.closed_form, "empirical": rep.empirical, "empirical_stderr": rep.empirical_stderr,
        "within_tolerance": rep.within(),
        "grades": grades,
        "second_moments": [{"I": list(I), "value": v} for I, v in rep.second_moments],
        "table": table,
    }


def _run_identities(cfg, lines):
    reports = fuzz_identities(cfg.seed, cfg.trials, cfg.max_n)
    table = [["identity", "instance", "left", "right", "holds", "redraws"]]
    records = []
    for r in reports:
        rec = r.to_dict()
        records.append(rec)
        lines.append(dumps(rec))
        table.append([r.identity, r.instance, str(r.left), str(r.right), r.holds, r.redraws])
    failures = sum(not r.holds for r in reports)
    return {"trials": cfg.trials, "max_n": cfg.max_n, "seed": cfg.seed, "failures": failures,
            "reports": records, "table": table}, failures == 0


def _run_discrete(cfg, lines):
    K = build_kernel(cfg.kernel, cfg.seed)
    if cfg.m is not None and not 1 <= cfg.m <= K.rank:
        raise ConfigError(f"m={cfg.m} outside [1, {K.rank}]")
    rep = estimator.verify_discrete_theorem(K, cfg.m)
    table = [["m", "max_deviation"]] + [[o, dev] for o, dev in rep.by_order.items()]
    ok = rep.max_deviation <= DISCRETE_TOLERANCE
    return {"d": rep.d, "n": rep.n, "subsets": rep.subsets, "max_deviation": rep.max_deviation,
            "max_projection_error": rep.max_projection_error, "passed": ok,
            "orders": [{"m": o, "max_deviation": dev} for o, dev in rep.by_order.items()],
            "table": table}, ok


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Validate, execute and write ``<out>/report.json`` and ``<out>/report.csv``; returns the exit status."""
    stdout = stdout or sys.stdout
    try:
        cfg.validate()
        space = basis = None
        fs = []
        if cfg.mode in ("sample", "mean", "variance"):
            space = build_space(cfg.space)
            basis = build_basis(space, cfg.basis)
            fs = [build_function(s, basis) for s in cfg.functions]
            if len(fs) > basis.n:
                raise ConfigError(f"m={len(fs)} exceeds n={basis.n}")
        if cfg.mode == "discrete":
            build_kernel(cfg.kernel, cfg.seed)
    except (ConfigError, MeanProjError, KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    lines: list = []
    ok = True
    try:
        if cfg.mode == "sample":
            body = _run_sample(cfg, space, basis, lines)
        elif cfg.mode == "mean":
            body = _run_mean(cfg, space, basis, fs, lines)
        elif cfg.mode == "variance":
            body = _run_variance(cfg, space, basis, fs, lines)
        elif cfg.mode == "identities":
            body, ok = _run_identities(cfg, lines)
        else:
            body, ok = _run_discrete(cfg, lines)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegeneracyError, MeanProjError, ArithmeticError) as exc:
        print(f"error: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    echoed = {k: v for k, v in cfg.to_dict().items() if k not in _NOT_REPORTED}
    report = {"mode": cfg.mode, "config": echoed, **body}
    for line in lines:
        print(line, file=stdout)
    if cfg.out is not None:
        try:
            out = Path(cfg.out)
            out.mkdir(parents=True, exist_ok=True)
            emit_report(report, "json", out / "report.json")
            emit_report(report, "csv", out / "report.csv")
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    elif not lines:
        print(dumps({k: v for k, v in report.items() if k != "table"}), file=stdout)
    return EXIT_OK if ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="meanproj", description=__doc__.splitlines()[0])
    p.add_argument("mode", choices=MODES)
    p.add_argument("config", nargs="?", help="JSON experiment config (optional for identities)")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--out", help="output directory for report.json / report.csv")
    p.add_argument("--workers", type=int)
    p.add_argument("--trials", type=int, help="identities mode: number of fuzz trials")
    p.add_argument("--max-n", dest="max_n", type=int, help="identities mode: largest matrix size")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(data, dict):
            print("error: config must be a JSON object", file=sys.stderr)
            return EXIT_CONFIG
    for name in ("seed", "replicates", "out", "workers", "trials", "max_n"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    try:
        cfg = ExperimentConfig.from_dict(data, mode=args.mode)
    except (ConfigError, TypeError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.debug("running %s with %s", cfg.mode, cfg.to_dict())
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
