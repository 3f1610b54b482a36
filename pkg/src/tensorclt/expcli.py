"""Command line front end: ``tensorclt sweep|selftest|bound|report``.

Config files are INI with sections ``[measure]``, ``[grid]`` and ``[run]``::

    [measure]
    family = gaussian

    [grid]
    n = 3
    d = 50, 200, 800
    p = 2
    kind = principal
    weights = homogeneous        # or: explicit / toeplitz
    alpha = 1, 2                 # explicit weights, tiled to length d
    symbol = 1, 0.4              # toeplitz symbol; weights = eigenvalues of Sigma_s

    [run]
    estimators = gaussian_moment_proxy
    replicas = 2000
    seed = 0
    workers = 1

Every (cell, estimator) pair gets its own seed,

    hash64(seed, n, d, p, weights_hash, estimator_id)

where ``hash64`` is 64-bit FNV-1a over the six values packed as
little-endian u64 and ``weights_hash`` is FNV-1a of the canonical weights
string.  Records are written in grid order (n, then d, then p, then
estimator) whatever the number of workers.

Exit codes: 0 ok, 1 config error, 2 runtime error, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import re
import struct
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics
from .measures import FAMILIES, MeasureSpec, UnsupportedFamilyError, abs_moment, toeplitz_matrix
from .symtensor import KINDS, EmptySpaceError, TensorSpace
from .transport import opnorm_eighth_moment, transport_for
from .wishart import WishartConfig, covariance_model, wishart_sample, whiten

ESTIMATOR_IDS = {
    "gaussian_moment_proxy": 0,
    "exact_assignment_w2": 1,
    "entropic_w2": 2,
    "stein_certificate": 3,
}
CSV_HEADER = ["n", "d", "p", "kind", "weights", "estimator", "value", "stderr", "bound", "seconds", "seed"]
WEIGHT_MODES = ("homogeneous", "explicit", "toeplitz")
EXACT_SLICE = 6  # coordinates used by the assignment-based estimators
EXACT_POINTS = 2000

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def cell_seed(seed: int, n: int, d: int, p: int, weights_hash: int, estimator_id: int) -> int:
    return fnv1a64(struct.pack("<6Q", seed & MASK64, n, d, p, weights_hash & MASK64, estimator_id))


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


class ConfigError(ValueError):
    def __init__(self, msg, line=None, col=None):
        self.line, self.col = line, col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + msg)


@dataclass(frozen=True)
class ExperimentConfig:
    measure: dict
    n: tuple
    d: tuple
    p: tuple
    kind: str = "principal"
    weights: str = "homogeneous"
    alpha: tuple = ()
    symbol: tuple = ()
    estimators: tuple = ("gaussian_moment_proxy",)
    replicas: int = 2000
    seed: int = 0
    workers: int = 1
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def weights_label(self) -> str:
        """Canonical weights string; hashed into every cell seed."""
        if self.weights == "explicit":
            return "explicit:" + ",".join(repr(a) for a in self.alpha)
        if self.weights == "toeplitz":
            return "toeplitz:" + ",".join(repr(s) for s in self.symbol)
        return "homogeneous"

    @property
    def weights_hash(self) -> int:
        return fnv1a64(self.weights_label.encode())

    def weights_for(self, d: int):
        if self.weights == "explicit":
            reps = -(-d // len(self.alpha))
            return tuple((list(self.alpha) * reps)[:d])
        if self.weights == "toeplitz":
            return tuple(float(a) for a in np.linalg.eigvalsh(toeplitz_matrix(self.symbol, d)))
        return None

    def spec(self, n: int) -> MeasureSpec:
        return MeasureSpec.from_block({**self.measure, "n": n})


def _locate(text: str, section: str, key: str):
    """1-based (line, column) of ``key``'s value inside ``[section]``."""
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            continue
        m = re.match(r"\s*([^=:\s]+)\s*[=:]\s*", raw)
        if current == section and m and m.group(1).lower() == key:
            return lineno, m.end() + 1
    return None, None


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), 1 if hasattr(exc, "lineno") else None)
    for sec in ("measure", "grid"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing [{sec}] section")

    def get(sec, key, conv, default=None):
        if not cp.has_option(sec, key):
            if default is None:
                raise ConfigError(f"[{sec}] needs '{key}'")
            return default
        raw = cp.get(sec, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            line, col = _locate(text, sec, key)
            raise ConfigError(f"bad value for {sec}.{key}: {raw!r} ({exc})", line, col)

    def fail(sec, key, msg):
        line, col = _locate(text, sec, key)
        raise ConfigError(msg, line, col)

    measure = dict(cp.items("measure"))
    if measure.get("family") not in FAMILIES:
        fail("measure", "family", f"unknown family {measure.get('family')!r}")
    measure.pop("n", None)
    try:
        MeasureSpec.from_block({**measure, "n": 2})
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad [measure] block: {exc}")

    n = get("grid", "n", _ints)
    d = get("grid", "d", _ints)
    p = get("grid", "p", _ints)
    for key, vals in (("n", n), ("d", d), ("p", p)):
        if not vals:
            fail("grid", key, f"grid.{key} is empty")
        if min(vals) < 1:
            fail("grid", key, f"grid.{key} must be positive")
    kind = get("grid", "kind", str.strip, "principal")
    if kind not in KINDS:
        fail("grid", "kind", f"unknown kind {kind!r}")
    weights = get("grid", "weights", str.strip, "homogeneous")
    if weights not in WEIGHT_MODES:
        fail("grid", "weights", f"unknown weights mode {weights!r}")
    alpha = get("grid", "alpha", _floats, ()) if weights == "explicit" else ()
    symbol = get("grid", "symbol", _floats, ()) if weights == "toeplitz" else ()
    if weights == "explicit" and (not alpha or min(alpha) <= 0):
        fail("grid", "alpha", "explicit weights need a nonempty list of positive alpha")
    if weights == "toeplitz":
        if not symbol:
            fail("grid", "symbol", "toeplitz weights need a symbol")
        try:
            for dd in d:
                toeplitz_matrix(symbol, dd)
        except ValueError as exc:
            fail("grid", "symbol", str(exc))

    has_run = cp.has_section("run")
    rget = (lambda key, conv, default: get("run", key, conv, default)) if has_run else (lambda key, conv, default: default)
    estimators = rget("estimators", lambda s: tuple(t.strip() for t in s.split(",") if t.strip()), ("gaussian_moment_proxy",))
    for e in estimators:
        if e not in ESTIMATOR_IDS:
            fail("run", "estimators", f"unknown estimator {e!r}")
    if not estimators:
        fail("run", "estimators", "no estimators given")
    replicas = rget("replicas", int, 2000)
    if replicas < 100:
        fail("run", "replicas", "replicas must be >= 100")
    seed = rget("seed", int, 0)
    if seed < 0:
        fail("run", "seed", "seed must be >= 0")
    workers = rget("workers", int, 1)
    if workers < 1:
        fail("run", "workers", "workers must be >= 1")
    extra = {k: v for k, v in cp.items("selftest")} if cp.has_section("selftest") else {}
    return ExperimentConfig(measure, n, d, p, kind, weights, alpha, symbol, estimators, replicas, seed, workers, extra)


def serialize_config(cfg: ExperimentConfig) -> str:
    def join(vals):
        return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in vals)

    lines = ["[measure]"]
    lines += [f"{k} = {v}" for k, v in cfg.measure.items()]
    lines += ["", "[grid]", f"n = {join(cfg.n)}", f"d = {join(cfg.d)}", f"p = {join(cfg.p)}", f"kind = {cfg.kind}"]
    lines.append(f"weights = {cfg.weights}")
    if cfg.alpha:
        lines.append(f"alpha = {join(cfg.alpha)}")
    if cfg.symbol:
        lines.append(f"symbol = {join(cfg.symbol)}")
    lines += ["", "[run]", f"estimators = {', '.join(cfg.estimators)}", f"replicas = {cfg.replicas}"]
    lines += [f"seed = {cfg.seed}", f"workers = {cfg.workers}"]
    if cfg.extra:
        lines += ["", "[selftest]"] + [f"{k} = {v}" for k, v in cfg.extra.items()]
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    return parse_config(text)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Task:
    measure: tuple
    n: int
    d: int
    p: int
    kind: str
    weights: tuple | None
    weights_label: str
    estimator: str
    replicas: int
    seed: int
    bound_seed: int
    timings: bool


def _weights_column(cfg: ExperimentConfig) -> str:
    return "homogeneous" if cfg.weights == "homogeneous" else f"{cfg.weights}:{cfg.weights_hash:016x}"


def build_tasks(cfg: ExperimentConfig, timings: bool = False) -> list[Task]:
    tasks = []
    wh = cfg.weights_hash
    for n in cfg.n:
        for d in cfg.d:
            w = cfg.weights_for(d)
            for p in cfg.p:
                bseed = cell_seed(cfg.seed, n, d, p, wh, 255)
                for est in cfg.estimators:
                    s = cell_seed(cfg.seed, n, d, p, wh, ESTIMATOR_IDS[est])
                    tasks.append(
                        Task(tuple(cfg.measure.items()), n, d, p, cfg.kind, w, _weights_column(cfg), est, cfg.replicas, s, bseed, timings)
                    )
    return tasks


def cell_bound(spec: MeasureSpec, wcfg: WishartConfig, opnorm_A: float, seed: int) -> float:
    """Bound column: ``|A|`` from the covariance model, exact or Monte Carlo moments."""
    p = wcfg.p
    if p == 1:
        m8 = 1.0
    else:
        m = 8 * (p - 1)
        try:
            m8 = abs_moment(spec, m).value if m <= 24 else None
        except (ValueError, UnsupportedFamilyError):
            m8 = None
        if m8 is None:
            from .measures import sample

            x = sample(spec, 100_000, seed)
            m8 = float(np.mean(np.sum(x * x, axis=1) ** (m // 2)))
    d8 = opnorm_eighth_moment(transport_for(spec), mc_n=10_000, seed=seed).eighth_moment
    inputs = metrics.BoundInputs(spec.n, wcfg.d, p, opnorm_A, m8, d8, None if wcfg.homogeneous else wcfg.weights)
    return metrics.theorem_bound(inputs)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return repr(float(v))


def run_task(task: Task) -> dict:
    t0 = time.perf_counter()
    rec = {
        "n": task.n,
        "d": task.d,
        "p": task.p,
        "kind": task.kind,
        "weights": task.weights_label,
        "estimator": task.estimator,
        "value": "skipped",
        "stderr": "",
        "bound": "",
        "seconds": "0",
        "seed": task.seed,
    }
    spec = MeasureSpec.from_block({**dict(task.measure), "n": task.n})
    try:
        wcfg = WishartConfig(spec, task.p, task.d, task.kind, task.weights)
    except EmptySpaceError:
        return rec
    model = covariance_model(wcfg, seed=task.bound_seed)
    value, stderr = _estimate(task, spec, wcfg, model)
    rec["value"] = _fmt(value)
    rec["stderr"] = _fmt(stderr)
    rec["bound"] = _fmt(cell_bound(spec, wcfg, model.opnorm_A, task.bound_seed))
    if task.timings:
        rec["seconds"] = f"{time.perf_counter() - t0:.3f}"
    return rec


def _estimate(task: Task, spec, wcfg, model):
    est = task.estimator
    if est == "stein_certificate":
        from .stein import OUQuadrature, build_kernel, discrepancy_upper_estimate

        kf = build_kernel(transport_for(spec), wcfg.space, wcfg.kind, OUQuadrature(16, 16))
        r = discrepancy_upper_estimate(kf, model.whitener, mc_n=task.replicas, seed=task.seed)
        ratio = wcfg.weight_ratio
        return max(r.value, 0.0) * ratio, r.stderr * ratio
    W = whiten(wishart_sample(wcfg, task.replicas, task.seed), model)
    if est == "gaussian_moment_proxy":
        return metrics.gaussian_proxy_w2(W).value, None
    m = min(task.replicas, EXACT_POINTS)
    a = W[:m, :EXACT_SLICE]
    ref = np.random.default_rng([task.seed, 1]).standard_normal(a.shape)
    if est == "exact_assignment_w2":
        return metrics.exact_w2(a, ref).value, None
    r = metrics.entropic_w2(a, ref)
    return r.value, r.gap


def run_sweep(cfg: ExperimentConfig, workers: int | None = None, timings: bool = False) -> list[dict]:
    tasks = build_tasks(cfg, timings)
    workers = cfg.workers if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_task, tasks, chunksize=1))


def format_records(records, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: r[k] for k in CSV_HEADER})
        return buf.getvalue()
    if fmt == "json":
        rows = [{k: _json_value(k, r[k]) for k in CSV_HEADER} for r in records]
        return json.dumps(rows, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def _json_value(key, v):
    if key in ("n", "d", "p", "seed"):
        return int(v)
    if key in ("value", "stderr", "bound", "seconds"):
        if v in ("", None):
            return None
        if v == "skipped":
            return v
        return float(v)
    return v


def _text_value(key, v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if key in ("value", "stderr", "bound"):
        return _fmt(v)
    if key == "seconds":
        return "0" if v == 0 else f"{v:.3f}"
    return str(v)


def parse_records(text: str) -> list[dict]:
    """Read a CSV or JSON result file back into string-valued records."""
    s = text.lstrip()
    if not s:
        raise ValueError("empty result file")
    if s[0] == "[":
        rows = json.loads(s)
        out = []
        for r in rows:
            if set(r) != set(CSV_HEADER):
                raise ValueError(f"record has fields {sorted(r)}")
            out.append({k: _text_value(k, r[k]) for k in CSV_HEADER})
        return out
    reader = csv.DictReader(io.StringIO(s))
    if reader.fieldnames != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return [dict(r) for r in reader]


def slopes_report(records) -> str:
    groups = {}
    for r in records:
        if r["value"] in ("", "skipped"):
            continue
        v = float(r["value"])
        if v > 0:
            groups.setdefault((r["estimator"], r["p"], r["kind"], r["weights"]), []).append((int(r["n"]), int(r["d"]), v))
    lines = []
    for (est, p, kind, w), rows in sorted(groups.items()):
        try:
            fit = metrics.threshold_slope(rows, squared=True)
        except ValueError:
            continue
        for n, s in fit.by_n.items():
            lines.append(f"{est} p={p} kind={kind} weights={w} n={n} slope_vs_d={s:.3f}")
        for d, s in fit.by_d.items():
            lines.append(f"{est} p={p} kind={kind} weights={w} d={d} slope_vs_n={s:.3f}")
    if not lines:
        raise ValueError("no series with at least 3 distinct d or n")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    stderr: float
    passed: bool


def stein_selftest(spec: MeasureSpec, ps=(1, 2), mc_n: int = 20_000, seed: int = 0, bias: float = 0.0, K: int = 8) -> list[CheckResult]:
    """Stein identity, kernel moment identity and contraction checks for ``spec``."""
    from .stein import OUQuadrature, build_kernel, kernel_moment_check, contraction_check, stein_identity_check

    tmap = transport_for(spec)
    out = []
    for p in ps:
        try:
            kf = build_kernel(tmap, TensorSpace(spec.n, p), "principal", OUQuadrature(16, K))
        except EmptySpaceError:
            continue
        kf = kf.with_bias(bias) if bias else kf
        s = kf.sample(mc_n, seed)
        for fam in ("linear", "quadratic"):
            r = stein_identity_check(kf, fam, sample=s, seed=seed)
            out.append(CheckResult(f"identity p={p} f={fam}", r.residual, r.stderr, r.passed()))
        m = kernel_moment_check(kf, sample=s)
        out.append(CheckResult(f"moment p={p}", m.max_abs_diff, m.stderr, m.passed()))
    if tmap.lipschitz is not None:
        r = contraction_check(tmap.contractive(), min(mc_n, 10_000), seed, OUQuadrature(16, K), bias)
        out.append(CheckResult("contraction |tau|_op <= 1", r.max_opnorm - 1.0, r.inner_stderr, r.passed()))
    return out


def _selftest_table(results) -> str:
    lines = [f"{'check':32s} {'residual':>12s} {'stderr':>12s}  status"]
    for r in results:
        lines.append(f"{r.name:32s} {r.residual:12.4e} {r.stderr:12.4e}  {'pass' if r.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tensorclt", description="Wishart tensor CLT experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run a configured grid of experiment cells")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", help="result file (default: stdout)")
    sw.add_argument("--workers", type=int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--format", choices=("csv", "json"), default="csv")
    sw.add_argument("--timings", action="store_true", help="fill the seconds column (output no longer reproducible)")

    st = sub.add_parser("selftest", help="Stein identity self checks")
    st.add_argument("--config", help="config whose [measure] block is tested (default gaussian)")
    st.add_argument("--family", choices=FAMILIES)
    st.add_argument("--n", type=int, default=3)
    st.add_argument("--mc-n", type=int, default=20_000)
    st.add_argument("--seed", type=int)
    st.add_argument("--out")
    st.add_argument("--inject-bias", type=float, default=0.0, help=argparse.SUPPRESS)

    bd = sub.add_parser("bound", help="evaluate the discrepancy bound")
    bd.add_argument("--n", type=int, required=True)
    bd.add_argument("--d", type=int, required=True)
    bd.add_argument("--p", type=int, required=True)
    bd.add_argument("--opnorm-a", type=float, default=1.0)
    bd.add_argument("--m8", type=float, help="E|X|^(8(p-1)); computed from --family if omitted")
    bd.add_argument("--d8", type=float, help="E|Dphi(G)|_op^8; computed from --family if omitted")
    bd.add_argument("--family", choices=FAMILIES)
    bd.add_argument("--weights", help="comma-separated positive weights of length d")
    bd.add_argument("--seed", type=int, default=0)

    rp = sub.add_parser("report", help="re-emit or summarise a result file")
    rp.add_argument("results")
    rp.add_argument("--format", choices=("csv", "json", "slopes"), default="csv")
    rp.add_argument("--out")
    return ap


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be >= 0")
        cfg = replace(cfg, seed=args.seed)
    records = run_sweep(cfg, args.workers, args.timings)
    _emit(format_records(records, args.format), args.out)
    if args.out:
        print(args.out)
    return EXIT_OK


def _cmd_selftest(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.config:
        cfg = load_config(args.config)
        spec = cfg.spec(cfg.n[0])
        seed = cfg.seed if args.seed is None else args.seed
    else:
        spec = MeasureSpec(args.family or "gaussian", args.n)
    results = stein_selftest(spec, mc_n=args.mc_n, seed=seed, bias=args.inject_bias)
    text = f"selftest {spec.family} n={spec.n}\n" + _selftest_table(results)
    failed = [r.name for r in results if not r.passed]
    if failed:
        text += "failed: " + "; ".join(failed) + "\n"
    _emit(text, args.out)
    return EXIT_SELFTEST if failed else EXIT_OK


def _cmd_bound(args) -> int:
    m8, d8 = args.m8, args.d8
    if m8 is None or d8 is None:
        if args.family is None:
            raise ConfigError("give --m8 and --d8, or --family to compute them")
        spec = MeasureSpec(args.family, args.n)
        if m8 is None:
            m8 = 1.0 if args.p == 1 else abs_moment(spec, 8 * (args.p - 1)).value
        if d8 is None:
            d8 = opnorm_eighth_moment(transport_for(spec), seed=args.seed).eighth_moment
    weights = _floats(args.weights) if args.weights else None
    try:
        inputs = metrics.BoundInputs(args.n, args.d, args.p, args.opnorm_a, m8, d8, weights)
    except ValueError as exc:
        raise ConfigError(str(exc))
    print(repr(metrics.theorem_bound(inputs)))
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        records = parse_records(Path(args.results).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"malformed result file: {exc}")
    if args.format == "slopes":
        text = slopes_report(records)
    else:
        text = format_records(records, args.format)
    _emit(text, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"sweep": _cmd_sweep, "selftest": _cmd_selftest, "bound": _cmd_bound, "report": _cmd_report}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure inside a run maps to one exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
