"""Command-line experiment runner.

Usage::

    nhgeom [run] EXPERIMENT [--config FILE] [--out-dir DIR] [--threads N]
           [--model NAME] [--set KEY=VALUE ...] [--plot]

``EXPERIMENT`` is one of ``adiabatic``, ``wannier``, ``tdpt``,
``extract-metric`` and ``qgt-scan``.  The optional config file holds
``key = value`` lines (``#`` starts a comment); ``--model`` and ``--set``
override it.  Every artifact is listed in ``manifest.txt`` as
``path,sha256,rows`` below a header carrying the config hash.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, NHGeomError
from .models import BUILTIN_MODELS, builtin_model

EXPERIMENTS = ("adiabatic", "wannier", "tdpt", "extract-metric", "qgt-scan")
COMMON = {"model", "plot"}


def _num(text: str) -> float:
    s = text.strip().lower().replace(" ", "")
    if s.endswith("pi"):
        head = s[:-2].rstrip("*")
        return (float(head) if head not in ("", "+") else 1.0 if head != "-" else -1.0) * np.pi
    return float(s)


def _pos(text: str) -> float:
    v = _num(text)
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _posint(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise ValueError("must be a positive integer")
    return v


def _cplx(text: str) -> complex:
    return complex(text.strip().replace(" ", "").replace("i", "j"))


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _matrix(text: str) -> np.ndarray:
    rows = [[_cplx(v) for v in r.split(",")] for r in text.split(";")]
    M = np.array(rows, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix 'a,b;c,d'")
    return M


def _vector(text: str) -> np.ndarray:
    return np.array([_cplx(v) for v in text.split(",")], dtype=complex)


def _floats(text: str) -> tuple:
    return tuple(_num(v) for v in text.split(","))


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


SCHEMAS: dict[str, dict[str, tuple[Callable, object]]] = {
    "adiabatic": {
        "model": (_choice("hf1", "hf2"), "hf1"),
        "half_width": (_pos, 8.0),
        "points": (_posint, 1024),
        "dt": (_pos, 1e-4),
        "T": (_pos, 2 * np.pi),
        "center": (_num, -2.0),
        "sigma": (_pos, 0.5),
        "mass": (_pos, 1.0),
        "save_every": (_posint, 1000),
        "source": (_choice("analytic", "qgt"), "analytic"),
        "plot": (_bool, False),
    },
    "wannier": {
        "model": (_choice("mathieu"), "mathieu"),
        "v_plus": (_cplx, 0.3),
        "v_minus": (_cplx, 0.1),
        "mass": (_pos, 1.0),
        "nk": (_posint, 64),
        "g_max": (_posint, 16),
        "bands": (_posint, 1),
        "plot": (_bool, False),
    },
    "tdpt": {
        "model": (_choice("lin-resp"), "lin-resp"),
        "epsilon": (_pos, 0.02),
        "omega": (_pos, 2.2),
        "T": (_pos, 40.0),
        "dt": (_pos, 0.005),
        "save_every": (_posint, 10),
        "h0": (_matrix, None),
        "h1": (_matrix, None),
        "psi0": (_vector, None),
        "plot": (_bool, False),
    },
    "extract-metric": {
        "model": (_choice("hxy"), "hxy"),
        "grid": (_posint, 21),
        "x_range": (_floats, (-1.0, 1.0)),
        "y_range": (_floats, (-1.0, 1.0)),
        "epsilon": (_pos, 0.02),
        "omega": (_pos, 2.2),
        "t_a": (_pos, 24.0),
        "per_period": (_posint, 400),
        "normalise": (_bool, True),
        "fd_step": (_pos, 1e-4),
        "plot": (_bool, False),
    },
    "qgt-scan": {
        "model": (_choice("hf1", "hf2", "hxy", "lin-resp"), "hf1"),
        "band": (int, 0),
        "flavor": (_choice("LR", "RL", "RR", "LL"), "LR"),
        "fd_step": (_pos, 1e-4),
        "base": (_floats, None),
        "axis": (int, 0),
        "start": (_num, -4.0),
        "stop": (_num, 4.0),
        "num": (_posint, 81),
        "plot": (_bool, False),
    },
}


@dataclass
class Artifact:
    name: str
    text: str
    rows: int


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def resolve_config(experiment: str, raw: dict[str, str]) -> dict:
    """Validate raw string values against the experiment's schema."""
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    raw = dict(raw)
    kind = raw.pop("experiment", experiment)
    if kind != experiment:
        raise ConfigError(f"config is for {kind!r}, not {experiment!r}")
    schema = SCHEMAS[experiment]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {experiment}: {', '.join(unknown)}")
    cfg = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                cfg[key] = parse(raw[key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw[key]!r} ({exc})") from None
        else:
            cfg[key] = default
    if "model" in raw and raw["model"] not in BUILTIN_MODELS:
        raise ConfigError(f"unknown model {raw['model']!r}")
    return cfg


def config_hash(experiment: str, cfg: dict) -> str:
    lines = [f"experiment={experiment}"]
    for k in sorted(cfg):
        if k == "plot":
            continue
        v = cfg[k]
        if isinstance(v, np.ndarray):
            v = ",".join(repr(complex(z)) for z in v.ravel())
        lines.append(f"{k}={v!r}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def _csv(header, rows) -> tuple[str, int]:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    n = 0
    for r in rows:
        buf.write(",".join(v if isinstance(v, str) else f"{v:.12e}" for v in r) + "\n")
        n += 1
    return buf.getvalue(), n


# --------------------------------------------------------------------------
# experiments (pure: return artifacts, write nothing)

def _run_adiabatic(cfg, threads) -> list[Artifact]:
    from . import adiabatic as ad
    from .models import fast_system

    sysm = fast_system(cfg["model"], mass=cfg["mass"])
    try:
        grid = ad.SpatialGrid(cfg["half_width"], cfg["points"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dt = cfg["dt"]
    T = round(cfg["T"] / dt) * dt
    full0, eff0 = ad.initial_state(sysm, grid, cfg["center"], cfg["sigma"])
    jobs = [
        lambda: ad.evolve_full(sysm, full0, dt, T, cfg["save_every"]),
        lambda: ad.evolve_effective(sysm, eff0, dt, T, cfg["save_every"], source=cfg["source"]),
    ]
    with ThreadPoolExecutor(max_workers=max(1, min(2, threads))) as pool:
        full, eff = [f.result() for f in [pool.submit(j) for j in jobs]]
    proj = ad.project_trajectory(full, sysm)
    mf, me = ad.moment_series(proj), ad.moment_series(eff)
    rows = []
    for i, t in enumerate(eff.times):
        l2 = ad.relative_l2(proj.states[i], eff.states[i])
        rows.append((t, mf.norm[i], mf.mean[i], mf.var[i], mf.skew[i], me.norm[i], me.mean[i], me.var[i], me.skew[i], l2))
    text, n = _csv(
        ["t", "norm_full", "mean_full", "var_full", "skew_full", "norm_eff", "mean_eff", "var_eff", "skew_eff", "rel_l2"], rows
    )
    return [Artifact(f"adiabatic_{cfg['model']}_moments.csv", text, n)]


def _run_wannier(cfg, threads) -> list[Artifact]:
    from . import wannier as wn
    from .models import mathieu_model

    model = mathieu_model(cfg["v_plus"], cfg["v_minus"], cfg["mass"])
    bundle = wn.smooth_gauge(wn.bloch_bundle(model, cfg["nk"], cfg["g_max"], n_bands=max(2, cfg["bands"])))
    arts, summary = [], []
    for n in range(cfg["bands"]):
        w = wn.wannier_state(bundle, n, 0.0)
        rows = [(x, r.real, r.imag, l.real, l.imag) for x, r, l in zip(w.x, w.right, w.left)]
        text, cnt = _csv(["x", "re_w_right", "im_w_right", "re_w_left", "im_w_left"], rows)
        arts.append(Artifact(f"wannier_band{n}.csv", text, cnt))
        sp = wn.wannier_spread(bundle, n)
        summary.append((str(n), wn.wannier_center(bundle, n), sp.spread, sp.metric_bound))
    text, cnt = _csv(["band", "center", "spread", "metric_bound"], summary)
    arts.append(Artifact("wannier_summary.csv", text, cnt))
    return arts


def _run_tdpt(cfg, threads) -> list[Artifact]:
    from . import models, response
    from .biortho import decompose

    H0 = cfg["h0"] if cfg["h0"] is not None else models.lin_resp_h0()
    H1 = cfg["h1"] if cfg["h1"] is not None else models.lin_resp_h1()
    if H0.shape != H1.shape:
        raise ConfigError("h0 and h1 must have the same shape")
    sysd = decompose(H0)
    psi = cfg["psi0"] if cfg["psi0"] is not None else (models.lin_resp_initial() if cfg["h0"] is None else sysd.R(0))
    if psi.shape != (H0.shape[0],):
        raise ConfigError("psi0 has the wrong length")
    psi = psi / np.linalg.norm(psi)
    dt = cfg["dt"]
    T = round(cfg["T"] / dt) * dt
    eps, om = cfg["epsilon"], cfg["omega"]
    tr = response.evolve_driven(H0, H1, response.cosine_envelope(om), eps, psi, dt, T, cfg["save_every"])
    n_num = response.occupation(sysd, tr.states, 1)
    n_per = response.first_order_occupation(H0, H1, 1, tr.times, eps, om)
    text, n = _csv(["t", "n1_num", "n1_per", "delta"], zip(tr.times, n_num, n_per, n_num - n_per))
    return [Artifact("tdpt_occupation.csv", text, n)]


def _run_extract(cfg, threads) -> list[Artifact]:
    from . import qgt, response

    H = builtin_model("hxy")
    (x0, x1), (y0, y1) = cfg["x_range"], cfg["y_range"]
    xs = np.linspace(x0, x1, cfg["grid"])
    ys = np.linspace(y0, y1, cfg["grid"])
    h = cfg["fd_step"]

    def exact(lam):
        return qgt.qgt_tensor(H, lam, 0, "RR", h, richardson=True).metric

    kw = dict(epsilon=cfg["epsilon"], omega=cfg["omega"], t_a=cfg["t_a"], per_period=cfg["per_period"], normalise=cfg["normalise"])
    chunks = [ys[i::max(1, threads)] for i in range(max(1, threads))]
    chunks = [c for c in chunks if len(c)]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda c: response.metric_sweep(H, xs, c, exact, **kw), chunks))
    rows = sorted((r for p in parts for r in p), key=lambda r: (r.y, r.x))
    text, n = _csv(
        ["x", "y", "g_xx_meas", "g_yy_meas", "g_xy_meas", "g_xx_exact", "g_yy_exact", "g_xy_exact", "K0"],
        [(r.x, r.y, *r.measured, *r.exact, r.petermann) for r in rows],
    )
    return [Artifact("extract_metric_sweep.csv", text, n)]


def _run_qgt_scan(cfg, threads) -> list[Artifact]:
    from . import qgt

    obj = builtin_model(cfg["model"])
    H = obj.param if cfg["model"] in ("hf1", "hf2") else obj
    base = np.zeros(H.param_dim) if cfg["base"] is None else np.array(cfg["base"], dtype=float)
    if base.shape != (H.param_dim,):
        raise ConfigError(f"base needs {H.param_dim} component(s)")
    if not 0 <= cfg["axis"] < H.param_dim:
        raise ConfigError("axis out of range")
    if not 0 <= cfg["band"] < H.matrix_dim:
        raise ConfigError("band out of range")
    d = H.param_dim
    header = ["s"]
    header += [f"{p}_A{j}" for j in range(d) for p in ("re", "im")]
    header += [f"{p}_g{i}{j}" for i in range(d) for j in range(d) for p in ("re", "im")]
    header += [f"{p}_F{i}{j}" for i in range(d) for j in range(d) for p in ("re", "im")]
    rows = []
    for s in np.linspace(cfg["start"], cfg["stop"], cfg["num"]):
        lam = base.copy()
        lam[cfg["axis"]] = s
        res = qgt.qgt_tensor(H, lam, cfg["band"], cfg["flavor"], cfg["fd_step"])
        row = [s]
        for z in (*res.connection, *res.metric.ravel(), *res.curvature.ravel()):
            row += [z.real, z.imag]
        rows.append(row)
    text, n = _csv(header, rows)
    return [Artifact(f"qgt_scan_{cfg['model']}_{cfg['flavor']}.csv", text, n)]


RUNNERS = {
    "adiabatic": _run_adiabatic,
    "wannier": _run_wannier,
    "tdpt": _run_tdpt,
    "extract-metric": _run_extract,
    "qgt-scan": _run_qgt_scan,
}


def _plot(out_dir: str, artifact: Artifact) -> str | None:
    """Best-effort line plot of every numeric column against the first."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        data = np.genfromtxt(io.StringIO(artifact.text), delimiter=",", names=True)
        names = data.dtype.names
        fig, ax = plt.subplots(figsize=(6, 4))
        for name in names[1:]:
            ax.plot(data[names[0]], data[name], label=name)
        ax.set_xlabel(names[0])
        ax.legend(fontsize=6)
        path = os.path.join(out_dir, artifact.name.rsplit(".", 1)[0] + ".png")
        fig.savefig(path, dpi=100)
        plt.close(fig)
        return path
    except Exception:  # plotting never decides the exit code
        return None


def _write(out_dir: str, experiment: str, cfg: dict, arts: list[Artifact]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    lines = [f"# config_sha256={config_hash(experiment, cfg)}"]
    for a in arts:
        path = os.path.join(out_dir, a.name)
        data = a.text.encode()
        with open(path, "wb") as fh:
            fh.write(data)
        lines.append(f"{a.name},{hashlib.sha256(data).hexdigest()},{a.rows}")
    if cfg.get("plot"):
        for a in arts:
            _plot(out_dir, a)
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nhgeom", description="Non-Hermitian quantum geometry experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out-dir", default="nhgeom_out", help="directory for CSV output (default: %(default)s)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent jobs")
    p.add_argument("--model", help=f"built-in model ({', '.join(BUILTIN_MODELS)})")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value")
    p.add_argument("--plot", action="store_true", help="also render PNG plots (best effort)")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "run":
        argv = argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        raw: dict[str, str] = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    raw.update(parse_config_text(fh.read()))
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        if args.model:
            raw["model"] = args.model
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        if args.plot:
            raw["plot"] = "true"
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = resolve_config(args.experiment, raw)
        arts = RUNNERS[args.experiment](cfg, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NHGeomError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    _write(args.out_dir, args.experiment, cfg, arts)
    for a in arts:
        print(os.path.join(args.out_dir, a.name))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
