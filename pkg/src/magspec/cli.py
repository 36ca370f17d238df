"""Command-line front end: ``magspec spectrum | cheeger | verify | sweep``.

Settings come from built-in defaults, then an optional ``key = value``
config file, then flags; later sources win.  Every output embeds the fully
resolved configuration.  Exit codes: 0 success, 1 usage or config error,
2 solver failure, 3 a checked estimate was violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import analysis, bounds, cheeger, geometry, magnetic
from . import operator as opmod
from .eigensolve import DEFAULT_SEED, DENSE_THRESHOLD, EigensolverError, degenerate_groups, smallest_k

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VIOLATED = 0, 1, 2, 3

THEOREMS = ("1.1", "1.2", "1.3", "2.5", "5.q", "6.2", "shigekawa", "bochner", "heat")

# key -> (type, default); None defaults are filled per model kind
SCHEMA = {
    "model": (str, "circle"),
    "L": (float, 2 * math.pi),
    "n": (int, 512),
    "L1": (float, 2 * math.pi),
    "L2": (float, 2 * math.pi),
    "n1": (int, 32),
    "n2": (int, 32),
    "sub": (int, 4),
    "potential": (str, None),
    "potential_file": (str, None),
    "A": (float, 0.0),
    "B": (float, 0.0),
    "m": (int, 0),
    "s": (float, 0.0),
    "k": (int, 6),
    "ks": (str, "1"),
    "tol": (float, 1e-9),
    "seed": (int, DEFAULT_SEED),
    "dense_threshold": (int, DENSE_THRESHOLD),
    "method": (str, "auto"),
    "format": (str, "json"),
    "output": (str, None),
    "theorem": (str, None),
    "t_grid": (str, None),
    "samples": (int, 32),
    "tol_rel": (float, bounds.TOL_REL),
    "subset": (str, None),
    "param": (str, "A"),
    "from": (float, 0.0),
    "to": (float, 1.0),
    "steps": (int, 64),
    "checks": (str, "auto"),
    "jobs": (int, 1),
    "gnuplot": (str, None),
    "export_off": (str, None),
    "export_mtx": (str, None),
    "export_potential": (str, None),
    "export_eigvecs": (str, None),
    "export_partition": (str, None),
    "no_timestamp": (bool, False),
}

CHOICES = {
    "model": ("circle", "torus", "sphere"),
    "potential": ("zero", "constant", "flux", "axial", "file"),
    "method": ("auto", "dense", "lanczos"),
    "format": ("json", "csv"),
    "theorem": THEOREMS,
    "param": ("A", "B", "s", "m"),
}


class ConfigError(ValueError):
    pass


def _convert(key, raw):
    typ = SCHEMA[key][0]
    try:
        if typ is bool:
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is float:
            return _parse_float(raw)
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def _parse_float(raw):
    if isinstance(raw, (int, float)):
        return float(raw)
    text = str(raw).strip()
    # allow simple multiples of pi such as "2*pi" or "pi/4"
    if "pi" in text:
        expr = text.replace("pi", repr(math.pi))
        if not set(expr) <= set("0123456789.+-*/e() "):
            raise ValueError(raw)
        return float(eval(expr, {"__builtins__": {}}, {}))  # noqa: S307
    return float(text)


def read_config_file(path) -> dict:
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _convert(key, val)
    return out


def resolve_config(command, file_values, flag_values) -> dict:
    cfg = {k: d for k, (_, d) in SCHEMA.items()}
    cfg.update(file_values)
    cfg.update({k: v for k, v in flag_values.items() if v is not None})
    cfg["command"] = command
    for key, allowed in CHOICES.items():
        if cfg.get(key) is not None and cfg[key] not in allowed:
            raise ConfigError(f"{key} must be one of {', '.join(allowed)}; got {cfg[key]!r}")
    if cfg["potential"] is None:
        cfg["potential"] = {"circle": "constant", "sphere": "axial"}.get(cfg["model"], "flux" if cfg["m"] else "constant")
    if cfg["potential_file"] and cfg["potential"] != "file":
        cfg["potential"] = "file"
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg["k"] < 1:
        raise ConfigError("k must be >= 1")
    parse_ks(cfg)
    return cfg


def parse_ks(cfg):
    try:
        ks = sorted({int(x) for x in str(cfg["ks"]).split(",") if x.strip()})
    except ValueError:
        raise ConfigError(f"ks must be a comma list of integers, got {cfg['ks']!r}") from None
    if not ks or ks[0] < 1:
        raise ConfigError("ks must hold positive integers")
    return ks


def parse_t_grid(cfg, K):
    if cfg["t_grid"] is None:
        return None
    try:
        return [_parse_float(x) for x in str(cfg["t_grid"]).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad t grid {cfg['t_grid']!r}") from None


def build_model(cfg):
    try:
        if cfg["model"] == "circle":
            M = geometry.circle_grid(cfg["L"], cfg["n"])
        elif cfg["model"] == "torus":
            M = geometry.torus_grid(cfg["L1"], cfg["L2"], cfg["n1"], cfg["n2"])
        else:
            M = geometry.icosphere(cfg["sub"])
    except geometry.GeometryError as exc:
        raise ConfigError(str(exc)) from None
    kind = cfg["potential"]
    try:
        if kind == "zero":
            P = magnetic.zero_potential(M)
        elif kind == "file":
            with open(cfg["potential_file"]) as fh:
                P = magnetic.MagneticPotential.from_json(fh.read(), M)
        elif kind == "constant" and M.kind == "circle":
            P = magnetic.circle_constant(M, cfg["A"])
        elif kind == "constant" and M.kind == "torus":
            P = magnetic.torus_constant(M, cfg["A"], cfg["B"])
        elif kind == "flux":
            P = magnetic.torus_uniform_flux(M, cfg["m"])
        elif kind == "axial":
            P = magnetic.sphere_axial(M, cfg["s"])
        else:
            raise ConfigError(f"potential {kind!r} is not available on a {M.kind} model")
    except (magnetic.HostMismatch, OSError, KeyError, json.JSONDecodeError, TypeError) as exc:
        raise ConfigError(f"cannot build potential: {exc}") from None
    return M, P


def solve(cfg, op, k):
    return smallest_k(op, min(k, op.size), cfg["tol"], seed=cfg["seed"],
                      dense_threshold=cfg["dense_threshold"], method=cfg["method"])


def _exports(cfg, M, P, op=None, S=None):
    if cfg["export_off"]:
        M.write_off(cfg["export_off"])
    if cfg["export_potential"]:
        with open(cfg["export_potential"], "w") as fh:
            fh.write(P.to_json())
    if cfg["export_mtx"] and op is not None:
        op.write_matrix_market(cfg["export_mtx"])
    if cfg["export_eigvecs"] and S is not None:
        S.write_eigenvectors(cfg["export_eigvecs"])


def _envelope(cfg, result):
    out = {"config": {k: cfg[k] for k in sorted(cfg)}}
    if not cfg["no_timestamp"]:
        out["timestamp"] = datetime.now(timezone.utc).isoformat()
    out["result"] = result
    return out


def _emit(cfg, text):
    if cfg["output"]:
        with open(cfg["output"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _config_comment(cfg):
    lines = [f"# {k} = {cfg[k]}" for k in sorted(cfg)]
    if not cfg["no_timestamp"]:
        lines.append(f"# timestamp = {datetime.now(timezone.utc).isoformat()}")
    return "\n".join(lines) + "\n"


def model_info(M, P):
    return {"model": M.describe(), "potential": P.descriptor, "N": M.n_vertices,
            "dsup": magnetic.d_alpha_sup_norm(M, P), "K": M.ricci_lower_bound, "dimension": M.dimension}


def cmd_spectrum(cfg):
    M, P = build_model(cfg)
    op = opmod.assemble(M, P)
    S = solve(cfg, op, cfg["k"])
    _exports(cfg, M, P, op, S)
    if cfg["format"] == "csv":
        buf = io.StringIO()
        buf.write(_config_comment(cfg))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "residual"])
        for i, (lam, r) in enumerate(zip(S.eigenvalues, S.residuals), 1):
            w.writerow([i, repr(float(lam)), repr(float(r))])
        _emit(cfg, buf.getvalue())
    else:
        res = {**model_info(M, P), **S.to_dict(), "degenerate_groups": degenerate_groups(S)}
        _emit(cfg, _json_text(_envelope(cfg, res)))
    return EXIT_OK


def _parse_subset(text, N):
    idx = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            idx.extend(range(int(a), int(b) + 1))
        else:
            idx.append(int(part))
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= N:
        raise ConfigError(f"subset {text!r} is empty or out of range for {N} vertices")
    return idx


def cheeger_reports(cfg, M, P, S, ks):
    reps = {}
    for k in ks:
        if k == 1:
            reps[k] = cheeger.estimate_h1(M, P, S, seed=cfg["seed"])
        else:
            reps[k] = cheeger.estimate_hk(M, P, S, k, seed=cfg["seed"])
    return reps


def cmd_cheeger(cfg):
    M, P = build_model(cfg)
    ks = parse_ks(cfg)
    op = opmod.assemble(M, P)
    S = solve(cfg, op, max(ks))
    _exports(cfg, M, P, op, S)
    reps = cheeger_reports(cfg, M, P, S, ks)
    res = {**model_info(M, P), "eigenvalues": S.eigenvalues.tolist(),
           "full_set": cheeger._evaluate(M, P, cheeger.subset(M, np.arange(M.n_vertices)))}
    res["full_set"].pop("indices")
    if cfg["subset"]:
        ev = cheeger._evaluate(M, P, cheeger.subset(M, _parse_subset(cfg["subset"], M.n_vertices)),
                               provenance="user", seed=cfg["seed"])
        ev.pop("indices")
        res["subset"] = ev
    res["reports"] = [r.to_dict() for r in reps.values()]
    if cfg["export_partition"]:
        reps[max(ks)].write_partition_csv(cfg["export_partition"])
    _emit(cfg, _json_text(_envelope(cfg, res)))
    return EXIT_OK


def run_checks(cfg, theorem, M, P, S=None, reps=None):
    """Reports (as dicts) for one theorem id on a built model."""
    info = model_info(M, P)
    K, dsup, n = info["K"], info["dsup"], info["dimension"]
    desc = M.describe()
    ks = parse_ks(cfg)
    tol_rel = cfg["tol_rel"]
    if theorem in ("1.1", "5.q"):
        if theorem == "1.1":
            return [bounds.check_lichnerowicz(S, K, dsup, n, tol_rel, model=desc).to_dict()]
        return [bounds.check_quadratic_inequality(S, K, dsup, n, tol_rel, model=desc).to_dict()]
    if theorem == "shigekawa":
        return [bounds.check_shigekawa(S, magnetic.is_gauge_trivial(M, P), model=desc).to_dict()]
    if theorem == "1.2":
        t = parse_t_grid(cfg, K)
        return [bounds.check_buser_k(S, reps[k], K, k, t, dsup=dsup, model=desc).to_dict() for k in ks]
    if theorem == "1.3":
        return [bounds.check_buser1(S, reps[1], K, dsup=dsup, tol_rel=tol_rel, model=desc).to_dict()]
    if theorem == "6.2":
        return [bounds.check_higher_buser(S, reps[k], K, k, dsup=dsup, tol_rel=tol_rel, model=desc).to_dict()
                for k in ks]
    if theorem == "2.5":
        out = [bounds.check_cheeger_inequality(S, reps[1], tol_rel, model=desc).to_dict()]
        out += [bounds.report_higher_cheeger(S, reps[k], k, model=desc).to_dict() for k in ks if k > 1]
        return out
    raise ConfigError(f"unknown theorem {theorem!r}")


def _bochner(cfg, M, P):
    if not M.is_structured:
        raise ConfigError("the Bochner check needs a circle or torus model")
    base = dict(cfg)

    def make(scale):
        c = dict(base)
        for key in ("n", "n1", "n2"):
            c[key] = base[key] * scale
        Mi, Pi = build_model(c)
        if c["potential"] == "flux":
            X = solve(c, opmod.assemble(Mi, Pi), max(1, abs(c["m"]))).eigenvectors
            f = X @ X[0].conj()
        else:
            f = None
        return Mi, Pi, f

    rows = []
    prev = None
    for scale in (1, 2):
        Mi, Pi, f = make(scale)
        r = analysis.verify_integrated_bochner(Mi, Pi, f, seed=cfg["seed"])
        order = None if prev is None else math.log2(abs(prev) / abs(r.residual))
        rows.append({**r.to_dict(), "order": order})
        prev = r.residual
    order = rows[-1]["order"]
    ok = 1.5 <= order <= 2.5
    return {"theorem": "Bochner-integrated", "rows": rows, "order": order,
            "verdict": bounds.HOLDS if ok else bounds.VIOLATED,
            "tolerances": {"order_band": [1.5, 2.5]}, "model_descriptor": M.describe()}


def _heat(cfg, M, P):
    if not M.is_structured:
        raise ConfigError("the heat check needs a circle or torus model")
    if M.n_vertices > analysis.HEAT_MAX_N:
        raise ConfigError(f"the heat check is dense-only; use at most {analysis.HEAT_MAX_N} vertices")
    K = M.ricci_lower_bound
    t = parse_t_grid(cfg, K) or [0.1, 1.0, 10.0]
    hc = analysis.verify_heat_lemma(opmod.assemble(M, P), opmod.assemble(M, magnetic.zero_potential(M)),
                                    K, t, cfg["samples"], seed=cfg["seed"])
    d = hc.to_dict()
    d.update(theorem="Heat-lemma", verdict=bounds.HOLDS if hc.holds else bounds.VIOLATED)
    return d


def cmd_verify(cfg):
    th = cfg["theorem"]
    if th is None:
        raise ConfigError("verify needs --theorem")
    M, P = build_model(cfg)
    if th == "bochner":
        reports = [_bochner(cfg, M, P)]
    elif th == "heat":
        reports = [_heat(cfg, M, P)]
    else:
        ks = parse_ks(cfg)
        need = max(ks + [2 if th == "1.1" else 1])
        op = opmod.assemble(M, P)
        S = solve(cfg, op, need)
        _exports(cfg, M, P, op, S)
        reps = None
        if th in ("1.2", "1.3", "2.5", "6.2"):
            if th in ("1.3", "2.5"):
                ks = sorted(set(ks) | {1})
            reps = cheeger_reports(cfg, M, P, S, ks)
            if th in ("1.3", "2.5"):
                cfg = {**cfg, "ks": ",".join(map(str, ks))}
        reports = run_checks(cfg, th, M, P, S, reps)
    res = {**model_info(M, P), "reports": reports}
    _emit(cfg, _json_text(_envelope(cfg, res)))
    return EXIT_VIOLATED if any(r["verdict"] == bounds.VIOLATED for r in reports) else EXIT_OK


def _default_checks(M, P):
    if M.ricci_lower_bound > 0:
        return ["1.1", "5.q"]
    return ["1.2", "1.3", "6.2", "2.5"]


def sweep_point(cfg, index, value):
    """Solve, estimate and check at one parameter value; returns a CSV row dict."""
    c = dict(cfg)
    c[cfg["param"]] = int(round(value)) if cfg["param"] == "m" else value
    M, P = build_model(c)
    ks = parse_ks(c)
    op = opmod.assemble(M, P)
    S = solve(c, op, max(c["k"], max(ks), 2))
    checks = _default_checks(M, P) if c["checks"] == "auto" else [x.strip() for x in c["checks"].split(",")]
    reps = None
    if any(x in ("1.2", "1.3", "2.5", "6.2") for x in checks):
        reps = cheeger_reports(c, M, P, S, sorted(set(ks) | {1}))
    row = {"index": index, c["param"]: value}
    for i, lam in enumerate(S.eigenvalues, 1):
        row[f"lambda_{i}"] = float(lam)
    for k, r in (reps or {}).items():
        row[f"h_hat_{k}"] = r.value
    for th in checks:
        for rep in run_checks(c, th, M, P, S, reps):
            key = rep["theorem"] + (f"[k={rep['inputs']['k']}]" if "k" in rep["inputs"] else "")
            row[key] = rep["verdict"]
    return row


def _sweep_worker(args):
    cfg, index, value = args
    try:
        return sweep_point(cfg, index, value), None
    except EigensolverError as exc:
        return {"index": index, cfg["param"]: value}, str(exc)


def gnuplot_script(csv_path, param, columns):
    cols = [c for c in columns if c.startswith("lambda_") or c.startswith("h_hat_")]
    plots = ", ".join(f"'{csv_path}' using 2:{columns.index(c) + 1} with linespoints title '{c}'" for c in cols)
    return ("set datafile separator ','\nset key outside\n"
            f"set xlabel '{param}'\nplot {plots}\n")


def cmd_sweep(cfg):
    if cfg["steps"] < 1:
        raise ConfigError("steps must be >= 1")
    values = np.linspace(cfg["from"], cfg["to"], cfg["steps"]) if cfg["steps"] > 1 else np.array([cfg["from"]])
    build_model(cfg)  # surface config errors before spawning workers
    tasks = [(cfg, i, float(v)) for i, v in enumerate(values)]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            results = list(pool.map(_sweep_worker, tasks))
    else:
        results = [_sweep_worker(t) for t in tasks]
    results.sort(key=lambda r: r[0]["index"])
    failures = [err for _, err in results if err]
    rows = [r for r, _ in results]
    columns = []
    for r in rows:
        columns += [c for c in r if c not in columns]
    buf = io.StringIO()
    buf.write(_config_comment(cfg))
    w = csv.DictWriter(buf, fieldnames=columns, restval="", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    _emit(cfg, buf.getvalue())
    if cfg["gnuplot"]:
        with open(cfg["gnuplot"], "w") as fh:
            fh.write(gnuplot_script(cfg["output"] or "sweep.csv", cfg["param"], columns))
    if failures:
        sys.stderr.write(f"magspec: solver failed at {len(failures)} sweep point(s): {failures[0]}\n")
        return EXIT_SOLVER
    verdicts = [v for r in rows for v in r.values() if isinstance(v, str)]
    return EXIT_VIOLATED if bounds.VIOLATED in verdicts else EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "cheeger": cmd_cheeger, "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and solver")
    g.add_argument("--config", help="file of 'key = value' lines; flags override it")
    for key, (typ, _) in SCHEMA.items():
        if key == "no_timestamp":
            continue
        flag = "--" + key.replace("_", "-")
        kw = {"dest": key, "default": None}
        if key in CHOICES:
            kw["choices"] = CHOICES[key]
        kw["type"] = str if typ is float else typ
        if key == "from":
            flag = "--from"
        g.add_argument(flag, **kw)
    g.add_argument("--no-timestamp", dest="no_timestamp", action="store_const", const=True, default=None,
                   help="omit the timestamp so identical runs give identical bytes")
    p = argparse.ArgumentParser(prog="magspec", description="Magnetic Laplacian spectra, Cheeger "
                                "constants and eigenvalue-estimate checks on circle, torus and sphere models.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="smallest eigenpairs")
    sub.add_parser("cheeger", parents=[common], help="frustration and Cheeger upper bounds")
    sub.add_parser("verify", parents=[common], help="check one estimate; exit 3 if violated")
    sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        flags = {k: (_convert(k, v) if v is not None else None) for k, v in flags.items()}
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(args.command, file_values, flags)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"magspec: {exc}\n")
        return EXIT_CONFIG
    except EigensolverError as exc:
        sys.stderr.write(f"magspec: solver failure: {exc}\n")
        return EXIT_SOLVER
    except ValueError as exc:
        sys.stderr.write(f"magspec: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
