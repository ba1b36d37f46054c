"""``fuzcal`` command line: verify, converge, dynamics, quantize.

Exit codes: 0 pass, 1 usage or configuration error, 2 check failure,
3 numerical or resource error.
"""

import argparse
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .calogero_continuum import (
    FieldConfig,
    coupling_from_a,
    offdiagonal_residual,
    trace_power_integral,
    trace_residual,
)
from .calogero_finite import (
    commutator_identity_residual,
    fundamental_relation_residual,
    fuzzy_rewritten_residual,
    involutivity_residual,
    r_commutator_identities_residual,
    random_phase_point,
)
from .convergence import FIRST_ORDER, SECOND_ORDER, ConvergenceTable
from .dynamics import conservation_report, integrate, two_body_oracle_error
from .errors import (
    ConfigurationError,
    FuzcalError,
    NearCollisionError,
    NumericalError,
    ParseError,
    ResourceLimitError,
)
from .fuzzy_sphere import (
    Polynomial,
    correspondence_residuals,
    full_delta_pairing_residual,
    fuzzy_norm,
    fuzzy_sphere_relation_residual,
    parse_function,
    pairing_identity_check,
    quantize,
    sigma_preset,
    vortex_factorization_residual,
)
from .tensor import MAX_TENSOR_N

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULT_TOLERANCES = {
    "fuzzy-sphere-relation": 1e-12,
    "vortex-factorization": 1e-12,
    "pairing-full": 1e-13,
    "pairing-diagonal": 1e-13,
    "commutator-identity": 1e-13,
    "fundamental-relation": 1e-11,
    "r-commutator-1": 1e-12,
    "r-commutator-2": 1e-12,
    "r-fuzzy-rewrite-1": 1e-12,
    "r-fuzzy-rewrite-2": 1e-12,
    "involutivity": 1e-9,
    "drift": 1e-8,
    "oracle": 1e-6,
}

EXPERIMENTS = ("trace-power", "offdiag-fourier", "product-order", "commutator-order", "trace-order")


@dataclass
class RunConfig:
    command: str
    sizes: list = field(default_factory=list)
    seed: int = 0
    c: float = 1.0
    a: float = None
    profile: str = "cubic"
    momentum: str = "zero"
    m: list = field(default_factory=lambda: [2])
    band: list = field(default_factory=lambda: [1])
    experiment: str = "trace-power"
    function: str = None
    n: int = 8
    t_end: float = 10.0
    dt: float = 0.01
    method: str = "rk4-adaptive"
    oracle: bool = False
    points: int = 10
    tolerances: dict = field(default_factory=dict)
    out: str = None
    format: str = "json"

    def tolerance(self, name):
        return self.tolerances.get(name, DEFAULT_TOLERANCES.get(name))

    def echo(self):
        d = asdict(self)
        d.pop("out")
        d["tolerances"] = {**DEFAULT_TOLERANCES, **self.tolerances}
        return d


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(x):
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if not any(ch in text for ch in ".en"):
        text += ".0"
    return text


def dumps(obj, indent=0):
    """JSON with every float written to 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _envelope(cfg, **payload):
    return {"tool": "fuzcal", "version": __version__, "command": cfg.command, "seed": cfg.seed,
            "config": cfg.echo(), **payload}


def _csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt_float(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return buf.getvalue()


def _sidecar(path):
    return None if path in (None, "-") else path + ".summary.json"


# ---------------------------------------------------------------------------
# commands


def _check(name, n, residual, tol):
    return {"name": name, "n": n, "residual": float(residual), "tolerance": tol, "pass": bool(residual <= tol)}


def _verify_size(cfg, n):
    tol = cfg.tolerance
    checks = [
        _check("fuzzy-sphere-relation", n, fuzzy_sphere_relation_residual(n), tol("fuzzy-sphere-relation")),
        _check("vortex-factorization", n, vortex_factorization_residual(n), tol("vortex-factorization")),
    ]
    full, diag = pairing_identity_check(sigma_preset("linear"), n)
    full_x1 = full_delta_pairing_residual(quantize(Polynomial.coordinate(1), n))
    checks.append(_check("pairing-full", n, max(full, full_x1), tol("pairing-full")))
    checks.append(_check("pairing-diagonal", n, diag, tol("pairing-diagonal")))

    rng = np.random.default_rng([cfg.seed, n])
    pts = [random_phase_point(n, rng, cfg.c) for _ in range(cfg.points)]
    worst = dict.fromkeys(
        ["commutator-identity", "fundamental-relation", "r-commutator-1", "r-commutator-2",
         "r-fuzzy-rewrite-1", "r-fuzzy-rewrite-2", "involutivity"], 0.0)
    for pt in pts:
        worst["commutator-identity"] = max(worst["commutator-identity"], commutator_identity_residual(pt))
        if n <= MAX_TENSOR_N:
            worst["fundamental-relation"] = max(worst["fundamental-relation"], fundamental_relation_residual(pt))
            r1, r2 = r_commutator_identities_residual(pt)
            f1, f2 = fuzzy_rewritten_residual(pt)
            for key, val in (("r-commutator-1", r1), ("r-commutator-2", r2), ("r-fuzzy-rewrite-1", f1), ("r-fuzzy-rewrite-2", f2)):
                worst[key] = max(worst[key], val)
        for mm in range(1, 7):
            for kk in range(mm + 1, 7):
                worst["involutivity"] = max(worst["involutivity"], involutivity_residual(pt, mm, kk))
    for key, val in worst.items():
        if n > MAX_TENSOR_N and key.startswith(("fundamental", "r-")):
            continue
        checks.append(_check(key, n, val, tol(key)))
    return checks


def _map_sorted(fn, keys):
    with ThreadPoolExecutor(max_workers=4) as pool:
        results = dict(zip(keys, pool.map(fn, keys)))
    return [results[k] for k in sorted(keys)]


def cmd_verify(cfg):
    if not cfg.sizes:
        cfg.sizes = [2, 4, 8]
    checks = [c for group in _map_sorted(lambda n: _verify_size(cfg, n), cfg.sizes) for c in group]
    ok = all(c["pass"] for c in checks)
    if cfg.format == "csv":
        rows = [(c["name"], c["n"], c["residual"], c["tolerance"], "true" if c["pass"] else "false") for c in checks]
        _write(cfg.out, _csv(["name", "n", "residual", "tolerance", "pass"], rows))
        side = _sidecar(cfg.out)
        if side:
            _write(side, dumps(_envelope(cfg, passed=ok)) + "\n")
    else:
        _write(cfg.out, dumps(_envelope(cfg, checks=checks, passed=ok)) + "\n")
    return EXIT_OK if ok else EXIT_FAIL


def _split_functions(cfg):
    spec = cfg.function or "x1;x2"
    parts = [s for s in spec.split(";")]
    if len(parts) == 1:
        parts.append(parts[0])
    if len(parts) != 2:
        raise ConfigurationError(f"correspondence experiments take 'F' or 'F;G', got {spec!r}")
    f, g = (parse_function(p) for p in parts)
    if not (isinstance(f, Polynomial) and isinstance(g, Polynomial)):
        raise ConfigurationError("correspondence experiments need polynomial functions")
    return f, g


def _converge_tasks(cfg):
    """List of (label, window, residual_fn(n))."""
    exp = cfg.experiment
    if exp == "trace-power":
        field_cfg = _field_config(cfg)
        tasks = []
        for m in cfg.m:
            target = trace_power_integral(field_cfg, m)
            tasks.append((f"trace-power[m={m},profile={cfg.profile}]", FIRST_ORDER,
                          lambda n, m=m, t=target: trace_residual(field_cfg, m, n, t)))
        return tasks
    if exp == "offdiag-fourier":
        field_cfg = _field_config(cfg)
        return [(f"offdiag-fourier[k={k},profile={cfg.profile}]", FIRST_ORDER,
                 lambda n, k=k: offdiagonal_residual(field_cfg, k, n)) for k in cfg.band]
    f, g = _split_functions(cfg)
    index = {"product-order": 0, "commutator-order": 1, "trace-order": 2}[exp]
    window = SECOND_ORDER if exp == "commutator-order" else FIRST_ORDER
    return [(exp, window, lambda n: correspondence_residuals(f, g, n)[index])]


def _field_config(cfg):
    c = coupling_from_a(cfg.a) if cfg.a is not None else cfg.c
    if cfg.profile.startswith("poly:"):
        try:
            coeffs = [float(x) for x in cfg.profile[5:].split(",")]
        except ValueError:
            raise ConfigurationError(f"bad inline profile {cfg.profile!r}") from None
        return FieldConfig.polynomial(coeffs, c, cfg.momentum)
    return FieldConfig.preset(cfg.profile, c, cfg.momentum)


def cmd_converge(cfg):
    if not cfg.sizes:
        cfg.sizes = [32, 64, 128, 256, 512]
    if len(cfg.sizes) < 3:
        raise ConfigurationError(f"slope fitting needs at least 3 sizes, got {len(cfg.sizes)}")
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {cfg.experiment!r}; choose from {list(EXPERIMENTS)}")
    tasks = _converge_tasks(cfg)
    keys = [(ti, n) for ti in range(len(tasks)) for n in sorted(cfg.sizes)]
    values = _map_sorted(lambda key: float(tasks[key[0]][2](key[1])), keys)
    results = dict(zip(sorted(keys), values))
    tables = [ConvergenceTable(label, sorted(cfg.sizes), [results[(ti, n)] for n in sorted(cfg.sizes)], window)
              for ti, (label, window, _) in enumerate(tasks)]
    ok = all(t.passed for t in tables)
    summary = [t.summary() for t in tables]
    rows = [row for t in tables for row in t.rows()]
    if cfg.format == "csv":
        _write(cfg.out, _csv(["experiment", "n", "residual"], rows))
        side = _sidecar(cfg.out)
        if side:
            _write(side, dumps(_envelope(cfg, summary=summary, passed=ok)) + "\n")
    else:
        data = [{"experiment": e, "n": n, "residual": r} for e, n, r in rows]
        _write(cfg.out, dumps(_envelope(cfg, rows=data, summary=summary, passed=ok)) + "\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_dynamics(cfg):
    c = coupling_from_a(cfg.a) if cfg.a is not None else cfg.c
    if cfg.oracle and cfg.n != 2:
        raise ConfigurationError("--oracle needs --n 2")
    rng = np.random.default_rng([cfg.seed, cfg.n])
    pt0 = random_phase_point(cfg.n, rng, c)
    try:
        traj = integrate(pt0, cfg.t_end, cfg.dt, method=cfg.method)
    except NearCollisionError as exc:
        report = _envelope(cfg, error=str(exc), time=exc.time, passed=False)
        _write(_sidecar(cfg.out) if cfg.format == "csv" else cfg.out, dumps(report) + "\n")
        return EXIT_FAIL
    cons = conservation_report(traj)
    drift_tol = cfg.tolerance("drift")
    payload = {"conservation": cons.as_dict(), "drift_tolerance": drift_tol}
    ok = cons.max_drift <= drift_tol
    if cfg.oracle:
        err = two_body_oracle_error(traj)
        payload["oracle_error"] = err
        payload["oracle_tolerance"] = cfg.tolerance("oracle")
        ok = ok and err <= cfg.tolerance("oracle")
    payload["passed"] = ok
    if cfg.format == "csv":
        buf = io.StringIO()
        traj.write_csv(buf)
        _write(cfg.out, buf.getvalue())
        side = _sidecar(cfg.out)
        if side:
            _write(side, dumps(_envelope(cfg, **payload)) + "\n")
    else:
        _write(cfg.out, dumps(_envelope(cfg, **payload)) + "\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_quantize(cfg):
    if cfg.function is None:
        raise ConfigurationError("quantize needs --function")
    func = parse_function(cfg.function)
    mat = quantize(func, cfg.n)
    if cfg.format == "csv":
        rows = [(i, j, float(mat[i, j].real), float(mat[i, j].imag)) for i in range(cfg.n) for j in range(cfg.n)]
        _write(cfg.out, _csv(["row", "col", "re", "im"], rows))
        side = _sidecar(cfg.out)
        if side:
            _write(side, dumps(_envelope(cfg, n=cfg.n, function=cfg.function, norm=fuzzy_norm(mat))) + "\n")
    else:
        matrix = [[[float(z.real), float(z.imag)] for z in row] for row in mat]
        _write(cfg.out, dumps(_envelope(cfg, n=cfg.n, function=cfg.function, norm=fuzzy_norm(mat), matrix=matrix)) + "\n")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "converge": cmd_converge, "dynamics": cmd_dynamics, "quantize": cmd_quantize}


# ---------------------------------------------------------------------------
# argument and config parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def parse_sizes(text):
    """'2,4,8' or 'a..b' (a, 2a, 4a, ... up to b)."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split(".."))
            if lo < 1 or hi < lo:
                raise ValueError
            out = []
            while lo <= hi:
                out.append(lo)
                lo *= 2
            return out
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse size list {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse integer list {text!r}") from None


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise ConfigurationError(f"seed {value} outside the unsigned 64-bit range")
    return value


def _bool(text):
    if str(text).lower() in ("1", "true", "yes", "on"):
        return True
    if str(text).lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"expected a number, got {text!r}") from None


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise ConfigurationError(f"expected an integer, got {text!r}") from None


_CONVERTERS = {
    "sizes": parse_sizes, "seed": _seed, "c": _float, "a": _float, "profile": str, "momentum": str,
    "m": _int_list, "band": _int_list, "experiment": str, "function": str, "n": _int,
    "t_end": _float, "dt": _float, "method": str, "oracle": _bool, "points": _int, "out": str, "format": str,
}


def read_config_file(path):
    """Flat key=value file; '#' starts a comment; tol.<name>=value sets a tolerance."""
    values, tolerances = {}, {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key.startswith("tol."):
            tolerances[key[4:].replace("_", "-")] = _float(value)
        elif key in _CONVERTERS:
            values[key] = _CONVERTERS[key](value)
        else:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
    return values, tolerances


def build_parser():
    parser = _Parser(prog="fuzcal", description="Fuzzy-sphere Calogero verification lab.")
    parser.add_argument("--version", action="version", version=f"fuzcal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--sizes")
        p.add_argument("--seed")
        p.add_argument("--c")
        p.add_argument("--a")
        p.add_argument("--profile")
        p.add_argument("--momentum")
        p.add_argument("--m")
        p.add_argument("--band")
        p.add_argument("--experiment")
        p.add_argument("--function")
        p.add_argument("--n")
        p.add_argument("--t-end", dest="t_end")
        p.add_argument("--dt")
        p.add_argument("--method", choices=["rk4", "rk4-adaptive"])
        p.add_argument("--oracle", action="store_const", const="true")
        p.add_argument("--points")
        p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
        p.add_argument("--out")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--config")
    return parser


def config_from_args(args):
    values, tolerances = ({}, {}) if args.config is None else read_config_file(args.config)
    for key, conv in _CONVERTERS.items():
        raw = getattr(args, key, None)
        if raw is not None:
            values[key] = conv(raw)
    for item in args.tol:
        if "=" not in item:
            raise ConfigurationError(f"--tol expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        tolerances[k.strip()] = _float(v)
    cfg = RunConfig(command=args.command, **values)
    cfg.tolerances = tolerances
    unknown = set(tolerances) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigurationError(f"unknown tolerance names {sorted(unknown)}")
    if cfg.command == "dynamics" and "format" not in values:
        cfg.format = "csv" if cfg.out else "json"
    bad = [s for s in cfg.sizes if s < 2]
    if bad:
        raise ConfigurationError(f"sizes must be >= 2, got {bad}")
    if cfg.n < 2:
        raise ConfigurationError(f"n must be >= 2, got {cfg.n}")
    if cfg.points < 1:
        raise ConfigurationError("points must be >= 1")
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (ConfigurationError, ParseError) as exc:
        sys.stderr.write(f"fuzcal: error: {exc}\n")
        return EXIT_USAGE
    except (NumericalError, ResourceLimitError) as exc:
        sys.stderr.write(f"fuzcal: numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except FuzcalError as exc:
        sys.stderr.write(f"fuzcal: error: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
