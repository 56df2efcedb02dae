"""Experiment orchestration: configs, solver dispatch, model IO, metrics.

Configs are flat key-value text files with section headers (INI syntax),
documented in the README: a ``[data]`` section with the view file paths, a
``[model]`` section with the solver and its parameters, an optional
``[knoi]`` section for the stochastic trainer, and a ``[run]`` section with
the master seed and output directory.

Every random choice in an experiment draws from a stream derived from the
master seed by a fixed offset (``SEED_STREAMS``): random Fourier maps for
each view, landmark selection for each view, the median-trick row samples
for each view, and the stochastic trainer (which further splits its stream
into initialization and minibatch-order substreams). Re-running a training
manifest therefore reproduces every metric bit-for-bit; only wall-clock
timings differ.

A trained model is a directory of binary matrices plus a ``model.txt``
metadata file carrying the solver parameters and a SHA-256 fingerprint of
the matrix files; loading verifies the fingerprint so projections refuse
tampered or mismatched artifacts.
"""

from __future__ import annotations

import configparser
import hashlib
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .data import ViewPair, detect_format, read_matrix, write_matrix
from .dual_kcca import DEFAULT_MAX_N, DualKccaSolution, solve_kcca_dual
from .features import NystromMap, RffMap, blocked_feature_projection, nystrom_fit, rff_fit
from .kernels import RbfKernel, median_heuristic
from .knoi import KnoiConfig, KnoiModel, ProgressRecord, format_progress, knoi_train
from .linear_cca import CcaSolution, canonical_correlations, covariances, solve_cca, total_canonical_correlation

SOLVERS = ("cca", "kcca-exact", "fkcca", "nkcca", "knoi")

SEED_STREAMS = {
    "rff_x": 0,
    "rff_y": 1,
    "landmarks_x": 2,
    "landmarks_y": 3,
    "median_x": 4,
    "median_y": 5,
    "knoi": 6,
}

METRICS_HEADER = "method,M,L,train_corr,test_corr,seconds"
BENCH_HEADER = "method,M,corr,minutes"

_MISSING = object()


def subseed(master, stream: str) -> int:
    """Derive the fixed per-purpose sub-seed from a master seed."""
    ss = np.random.SeedSequence([int(master), SEED_STREAMS[stream]])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class ExperimentConfig:
    solver: str
    l: int
    train_x: str
    train_y: str
    test_x: Optional[str] = None
    test_y: Optional[str] = None
    m: int = 0
    rx: float = 1e-4
    ry: float = 1e-4
    bandwidth_x: object = "median"
    bandwidth_y: object = "median"
    median_samples: int = 4000
    dual_cap: int = DEFAULT_MAX_N
    seed: int = 0
    out: str = "run"
    knoi_b: int = 2500
    knoi_rho: float = 0.0
    knoi_eta: float = 0.01
    knoi_mu: float = 0.995
    knoi_weight_decay: float = 1e-5
    knoi_init_std: float = 0.1
    knoi_epochs: int = 1
    knoi_b0: Optional[int] = None

    def validate(self) -> None:
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; choose one of {', '.join(SOLVERS)}")
        if self.l < 1:
            raise ValueError(f"l must be >= 1, got {self.l}")
        if self.solver in ("fkcca", "nkcca", "knoi") and self.m < 1:
            raise ValueError(f"solver {self.solver!r} needs a feature count m >= 1, got {self.m}")
        for label, path in (("train_x", self.train_x), ("train_y", self.train_y),
                            ("test_x", self.test_x), ("test_y", self.test_y)):
            if path is not None and not Path(path).is_file():
                raise ValueError(f"{label} file does not exist: {path}")
        if (self.test_x is None) != (self.test_y is None):
            raise ValueError("test_x and test_y must be given together")
        for label, bw in (("bandwidth_x", self.bandwidth_x), ("bandwidth_y", self.bandwidth_y)):
            if not (bw == "median" or (isinstance(bw, float) and bw > 0)):
                raise ValueError(f"{label} must be a positive number or 'median', got {bw!r}")


def load_config(path, seed_override=None, out_override=None) -> ExperimentConfig:
    """Parse an experiment config file and apply CLI overrides."""
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"config file does not exist: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.read(path)
    base = path.parent

    def resolve(p):
        return str((base / p).resolve()) if p is not None else None

    def get(section, key, conv=str, default=_MISSING):
        if cp.has_option(section, key):
            return conv(cp.get(section, key))
        if default is _MISSING:
            raise ValueError(f"{path}: missing required key {key!r} in section [{section}]")
        return default

    def bandwidth(section, key):
        raw = get(section, key, str, "median")
        return "median" if raw == "median" else float(raw)

    cfg = ExperimentConfig(
        solver=get("model", "solver"),
        l=get("model", "l", int),
        train_x=resolve(get("data", "train_x")),
        train_y=resolve(get("data", "train_y")),
        test_x=resolve(get("data", "test_x", str, None)),
        test_y=resolve(get("data", "test_y", str, None)),
        m=get("model", "m", int, 0),
        rx=get("model", "rx", float, 1e-4),
        ry=get("model", "ry", float, 1e-4),
        bandwidth_x=bandwidth("model", "bandwidth_x"),
        bandwidth_y=bandwidth("model", "bandwidth_y"),
        median_samples=get("model", "median_samples", int, 4000),
        dual_cap=get("model", "dual_cap", int, DEFAULT_MAX_N),
        seed=get("run", "seed", int, 0),
        out=get("run", "out", str, "run"),
        knoi_b=get("knoi", "b", int, 2500),
        knoi_rho=get("knoi", "rho", float, 0.0),
        knoi_eta=get("knoi", "eta", float, 0.01),
        knoi_mu=get("knoi", "mu", float, 0.995),
        knoi_weight_decay=get("knoi", "weight_decay", float, 1e-5),
        knoi_init_std=get("knoi", "init_std", float, 0.1),
        knoi_epochs=get("knoi", "epochs", int, 1),
        knoi_b0=get("knoi", "b0", int, None),
    )
    if seed_override is not None:
        cfg.seed = int(seed_override)
    if out_override is not None:
        cfg.out = str(out_override)
    cfg.validate()
    return cfg


def write_manifest(cfg: ExperimentConfig, path) -> None:
    """Write the fully resolved config; re-running it reproduces all metrics."""
    cp = configparser.ConfigParser(interpolation=None)
    cp["data"] = {"train_x": cfg.train_x, "train_y": cfg.train_y}
    if cfg.test_x is not None:
        cp["data"]["test_x"] = cfg.test_x
        cp["data"]["test_y"] = cfg.test_y
    cp["model"] = {
        "solver": cfg.solver,
        "l": str(cfg.l),
        "m": str(cfg.m),
        "rx": repr(cfg.rx),
        "ry": repr(cfg.ry),
        "bandwidth_x": _bw_str(cfg.bandwidth_x),
        "bandwidth_y": _bw_str(cfg.bandwidth_y),
        "median_samples": str(cfg.median_samples),
        "dual_cap": str(cfg.dual_cap),
    }
    if cfg.solver == "knoi":
        cp["knoi"] = {
            "b": str(cfg.knoi_b),
            "rho": repr(cfg.knoi_rho),
            "eta": repr(cfg.knoi_eta),
            "mu": repr(cfg.knoi_mu),
            "weight_decay": repr(cfg.knoi_weight_decay),
            "init_std": repr(cfg.knoi_init_std),
            "epochs": str(cfg.knoi_epochs),
        }
        if cfg.knoi_b0 is not None:
            cp["knoi"]["b0"] = str(cfg.knoi_b0)
    cp["run"] = {"seed": str(cfg.seed), "out": cfg.out}
    with open(path, "w") as fh:
        cp.write(fh)


def _bw_str(bw) -> str:
    return bw if bw == "median" else repr(float(bw))


@dataclass(frozen=True)
class FeatureCcaModel:
    """Per-view feature maps plus an exact linear CCA solved on the features."""

    map_x: object
    map_y: object
    sol: CcaSolution

    def project(self, view: str, queries) -> np.ndarray:
        if view == "x":
            fmap, w, mean = self.map_x, self.sol.u, self.sol.mean_x
        elif view == "y":
            fmap, w, mean = self.map_y, self.sol.v, self.sol.mean_y
        else:
            raise ValueError(f"view must be 'x' or 'y', got {view!r}")
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim != 2 or queries.shape[1] != fmap.dim_in:
            raise ValueError(f"queries must be 2-d with {fmap.dim_in} columns, got shape {queries.shape}")
        return blocked_feature_projection(fmap, queries, w) - mean @ w


def run_train(cfg: ExperimentConfig) -> dict:
    """Fit the configured solver, write the model directory, return metrics."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    pair = ViewPair(_read_auto(cfg.train_x), _read_auto(cfg.train_y))
    test_pair = None
    if cfg.test_x is not None:
        test_pair = ViewPair(_read_auto(cfg.test_x), _read_auto(cfg.test_y))

    records: list[ProgressRecord] = []
    t0 = time.perf_counter()
    model, extra_meta = _fit(cfg, pair, test_pair, records)
    seconds = time.perf_counter() - t0

    train_corr = total_canonical_correlation(model.project("x", pair.x), model.project("y", pair.y))
    test_corr = None
    if test_pair is not None:
        test_corr = total_canonical_correlation(
            model.project("x", test_pair.x), model.project("y", test_pair.y)
        )

    save_model(out, model, extra_meta)
    write_manifest(cfg, out / "manifest.txt")
    metrics = {
        "method": cfg.solver,
        "m": cfg.m if cfg.solver in ("fkcca", "nkcca", "knoi") else None,
        "l": cfg.l,
        "train_corr": train_corr,
        "test_corr": test_corr,
        "seconds": seconds,
    }
    _write_metrics(out / "metrics.csv", metrics)
    if records:
        _write_learning_curve(out, records)
    return metrics


def run_eval(model_dir, test_x_path, test_y_path) -> dict:
    """Project two held-out view files through a saved model and score them."""
    model, meta = load_model(model_dir)
    qx = _read_auto(test_x_path)
    qy = _read_auto(test_y_path)
    if qx.shape[0] != qy.shape[0]:
        raise ValueError(f"test views must pair up, got {qx.shape[0]} and {qy.shape[0]} rows")
    sigma = canonical_correlations(model.project("x", qx), model.project("y", qy))
    return {
        "method": meta["solver"],
        "l": int(meta["l"]),
        "total": float(sigma.sum()),
        "per_component": sigma,
    }


@dataclass(frozen=True)
class BenchRow:
    method: str
    m: Optional[int]
    corr: Optional[float]
    minutes: Optional[float]
    error: Optional[str] = None


def run_bench(config_paths, out_dir, seed_override=None) -> list[BenchRow]:
    """Run each config sequentially; failures become failed table rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for path in config_paths:
        name = Path(path).stem
        try:
            cfg = load_config(path, seed_override=seed_override, out_override=str(out_dir / name))
            metrics = run_train(cfg)
            corr = metrics["test_corr"] if metrics["test_corr"] is not None else metrics["train_corr"]
            rows.append(BenchRow(metrics["method"], metrics["m"], corr, metrics["seconds"] / 60.0))
        except Exception as exc:  # noqa: BLE001 - failed runs become table rows
            rows.append(BenchRow(name, None, None, None, error=str(exc)))
    (out_dir / "table.txt").write_text(format_bench_table(rows))
    (out_dir / "table.csv").write_text(bench_csv(rows))
    return rows


def format_bench_table(rows) -> str:
    """Aligned text table: method, rank M, total canonical correlation, minutes."""
    header = f"{'method':<12}{'M':>8}{'canon. corr.':>16}{'minutes':>10}"
    lines = [header, "-" * len(header)]
    for r in rows:
        m = str(r.m) if r.m else "-"
        corr = "failed" if r.corr is None else f"{r.corr:.4f}"
        mins = "-" if r.minutes is None else f"{r.minutes:.2f}"
        lines.append(f"{r.method:<12}{m:>8}{corr:>16}{mins:>10}")
    return "\n".join(lines) + "\n"


def bench_csv(rows) -> str:
    lines = [BENCH_HEADER]
    for r in rows:
        m = str(r.m) if r.m else ""
        corr = "failed" if r.corr is None else f"{r.corr:.17g}"
        mins = "" if r.minutes is None else f"{r.minutes:.3f}"
        lines.append(f"{r.method},{m},{corr},{mins}")
    return "\n".join(lines) + "\n"


def _fit(cfg: ExperimentConfig, pair: ViewPair, test_pair, records):
    dx = pair.x.shape[1]
    dy = pair.y.shape[1]
    extra = {}
    if cfg.solver == "cca":
        sol = solve_cca(covariances(pair.x, pair.y, rx=cfg.rx, ry=cfg.ry, center=True), cfg.l)
        return sol, extra

    sx = _resolve_bandwidth(cfg.bandwidth_x, pair.x, cfg.median_samples, subseed(cfg.seed, "median_x"))
    sy = _resolve_bandwidth(cfg.bandwidth_y, pair.y, cfg.median_samples, subseed(cfg.seed, "median_y"))
    extra["bandwidth_x"] = sx
    extra["bandwidth_y"] = sy

    if cfg.solver == "kcca-exact":
        sol = solve_kcca_dual(
            pair, RbfKernel(sx), RbfKernel(sy), cfg.rx, cfg.ry, cfg.l, max_n=cfg.dual_cap
        )
        return sol, extra

    if cfg.solver in ("fkcca", "knoi"):
        map_x = rff_fit(dx, cfg.m, sx, subseed(cfg.seed, "rff_x"))
        map_y = rff_fit(dy, cfg.m, sy, subseed(cfg.seed, "rff_y"))
    else:  # nkcca
        if cfg.m > pair.n:
            raise ValueError(f"nkcca needs m <= N landmarks, got m={cfg.m}, N={pair.n}")
        lx = pair.x[np.random.default_rng(subseed(cfg.seed, "landmarks_x")).choice(pair.n, cfg.m, replace=False)]
        ly = pair.y[np.random.default_rng(subseed(cfg.seed, "landmarks_y")).choice(pair.n, cfg.m, replace=False)]
        map_x = nystrom_fit(lx, RbfKernel(sx))
        map_y = nystrom_fit(ly, RbfKernel(sy))

    if cfg.solver == "knoi":
        kcfg = KnoiConfig(
            l=cfg.l,
            b=cfg.knoi_b,
            rho=cfg.knoi_rho,
            eta=cfg.knoi_eta,
            mu=cfg.knoi_mu,
            weight_decay=cfg.knoi_weight_decay,
            init_std=cfg.knoi_init_std,
            epochs=cfg.knoi_epochs,
            seed=subseed(cfg.seed, "knoi"),
            b0=cfg.knoi_b0,
        )
        model = knoi_train(pair, (map_x, map_y), kcfg, progress=records.append, holdout=test_pair)
        return model, extra

    phi_x = map_x.transform(pair.x)
    phi_y = map_y.transform(pair.y)
    if cfg.l > min(map_x.dim_out, map_y.dim_out):
        raise ValueError(
            f"l={cfg.l} exceeds the feature rank min({map_x.dim_out}, {map_y.dim_out})"
        )
    sol = solve_cca(covariances(phi_x, phi_y, rx=cfg.rx, ry=cfg.ry, center=True), cfg.l)
    return FeatureCcaModel(map_x, map_y, sol), extra


def _resolve_bandwidth(spec, mat, n_samples, seed) -> float:
    if spec == "median":
        return median_heuristic(mat, n_samples=n_samples, seed=seed)
    return float(spec)


def _read_auto(path) -> np.ndarray:
    return read_matrix(path, detect_format(path))


def _write_metrics(path, metrics: dict) -> None:
    m = "" if metrics["m"] is None else str(metrics["m"])
    test = "" if metrics["test_corr"] is None else f"{metrics['test_corr']:.17g}"
    row = (
        f"{metrics['method']},{m},{metrics['l']},"
        f"{metrics['train_corr']:.17g},{test},{metrics['seconds']:.3f}"
    )
    Path(path).write_text(METRICS_HEADER + "\n" + row + "\n")


def _write_learning_curve(out: Path, records) -> None:
    has_test = any(r.test_corr is not None for r in records)
    header = "samples_seen,train_corr" + (",test_corr" if has_test else "")
    lines = [header]
    for r in records:
        line = f"{r.samples_seen},{r.train_corr:.17g}"
        if has_test:
            line += f",{r.test_corr:.17g}" if r.test_corr is not None else ","
        lines.append(line)
    (out / "learning_curve.csv").write_text("\n".join(lines) + "\n")
    (out / "progress.log").write_text("".join(format_progress(r) + "\n" for r in records))


# ---------------------------------------------------------------------------
# Model directory IO


def save_model(out_dir, model, extra_meta: Optional[dict] = None) -> None:
    """Write a model as binary matrices plus fingerprinted metadata."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = dict(extra_meta or {})
    arrays = {}

    if isinstance(model, CcaSolution):
        meta.update(solver="cca", l=model.l, rx=model.rx, ry=model.ry)
        arrays.update(u=model.u, v=model.v, sigma=model.sigma[None, :],
                      mean_x=model.mean_x[None, :], mean_y=model.mean_y[None, :])
    elif isinstance(model, DualKccaSolution):
        meta.update(
            solver="kcca-exact", l=model.l, rx=model.rx, ry=model.ry,
            bandwidth_x=model.kernel_x.s, bandwidth_y=model.kernel_y.s,
            center_gram=model.center_gram,
        )
        arrays.update(a=model.a, b=model.b, sigma=model.sigma[None, :],
                      train_x=model.train_x, train_y=model.train_y)
        if model.center_gram:
            meta.update(kx_grand=model.kx_grand, ky_grand=model.ky_grand)
            arrays.update(kx_colmean=model.kx_colmean[None, :], ky_colmean=model.ky_colmean[None, :])
    elif isinstance(model, FeatureCcaModel):
        solver = "fkcca" if isinstance(model.map_x, RffMap) else "nkcca"
        meta.update(solver=solver, l=model.sol.l, rx=model.sol.rx, ry=model.sol.ry)
        arrays.update(u=model.sol.u, v=model.sol.v, sigma=model.sol.sigma[None, :],
                      mean_fx=model.sol.mean_x[None, :], mean_fy=model.sol.mean_y[None, :])
        _save_maps(meta, arrays, model.map_x, model.map_y)
    elif isinstance(model, KnoiModel):
        meta.update(solver="knoi", l=model.l)
        arrays.update(u=model.u, v=model.v, wx=model.wx, wy=model.wy,
                      sigma=model.sigma[None, :],
                      mean_px=model.mean_px[None, :], mean_py=model.mean_py[None, :])
        _save_maps(meta, arrays, model.map_x, model.map_y)
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")

    for name, arr in arrays.items():
        write_matrix(np.asarray(arr, dtype=np.float64), out / f"{name}.bin", "binary")
    meta["fingerprint"] = _fingerprint(out)
    cp = configparser.ConfigParser(interpolation=None)
    cp["model"] = {k: _meta_str(v) for k, v in meta.items()}
    with open(out / "model.txt", "w") as fh:
        cp.write(fh)


def load_model(model_dir):
    """Load a model directory, verifying its fingerprint. Returns (model, meta)."""
    out = Path(model_dir)
    meta_path = out / "model.txt"
    if not meta_path.is_file():
        raise ValueError(f"{out}: not a model directory (missing model.txt)")
    cp = configparser.ConfigParser(interpolation=None)
    cp.read(meta_path)
    meta = dict(cp["model"])
    actual = _fingerprint(out)
    if actual != meta.get("fingerprint"):
        raise ValueError(
            f"{out}: fingerprint mismatch (model files were modified or replaced); refusing to project"
        )

    def arr(name):
        return read_matrix(out / f"{name}.bin", "binary")

    def vec(name):
        return arr(name).ravel()

    solver = meta["solver"]
    if solver == "cca":
        model = CcaSolution(u=arr("u"), v=arr("v"), sigma=vec("sigma"),
                            mean_x=vec("mean_x"), mean_y=vec("mean_y"),
                            rx=float(meta["rx"]), ry=float(meta["ry"]))
    elif solver == "kcca-exact":
        center = meta.get("center_gram", "False") == "True"
        model = DualKccaSolution(
            a=arr("a"), b=arr("b"), train_x=arr("train_x"), train_y=arr("train_y"),
            kernel_x=RbfKernel(float(meta["bandwidth_x"])),
            kernel_y=RbfKernel(float(meta["bandwidth_y"])),
            rx=float(meta["rx"]), ry=float(meta["ry"]), sigma=vec("sigma"),
            center_gram=center,
            kx_colmean=vec("kx_colmean") if center else None,
            kx_grand=float(meta.get("kx_grand", 0.0)),
            ky_colmean=vec("ky_colmean") if center else None,
            ky_grand=float(meta.get("ky_grand", 0.0)),
        )
    elif solver in ("fkcca", "nkcca"):
        map_x, map_y = _load_maps(meta, arr)
        sol = CcaSolution(u=arr("u"), v=arr("v"), sigma=vec("sigma"),
                          mean_x=vec("mean_fx"), mean_y=vec("mean_fy"),
                          rx=float(meta["rx"]), ry=float(meta["ry"]))
        model = FeatureCcaModel(map_x, map_y, sol)
    elif solver == "knoi":
        map_x, map_y = _load_maps(meta, arr)
        model = KnoiModel(map_x=map_x, map_y=map_y, u=arr("u"), v=arr("v"),
                          wx=arr("wx"), wy=arr("wy"),
                          mean_px=vec("mean_px"), mean_py=vec("mean_py"), sigma=vec("sigma"))
    else:
        raise ValueError(f"{out}: unknown solver {solver!r} in model.txt")
    return model, meta


def _save_maps(meta: dict, arrays: dict, map_x, map_y) -> None:
    if isinstance(map_x, RffMap):
        # Regeneration contract: the map is stored as its parameters only.
        meta.update(map_type="rff", m=map_x.m, dim_x=map_x.d, dim_y=map_y.d,
                    bandwidth_x=map_x.s, bandwidth_y=map_y.s,
                    rff_seed_x=map_x.seed, rff_seed_y=map_y.seed)
    else:
        meta.update(map_type="nystrom", m=map_x.landmarks.shape[0],
                    bandwidth_x=map_x.kernel.s, bandwidth_y=map_y.kernel.s,
                    floor_x=map_x.floor, floor_y=map_y.floor)
        arrays.update(landmarks_x=map_x.landmarks, eigvecs_x=map_x.r_tilde,
                      lam_isqrt_x=map_x.lambda_inv_sqrt[None, :],
                      landmarks_y=map_y.landmarks, eigvecs_y=map_y.r_tilde,
                      lam_isqrt_y=map_y.lambda_inv_sqrt[None, :])


def _load_maps(meta: dict, arr):
    if meta["map_type"] == "rff":
        map_x = rff_fit(int(meta["dim_x"]), int(meta["m"]), float(meta["bandwidth_x"]), int(meta["rff_seed_x"]))
        map_y = rff_fit(int(meta["dim_y"]), int(meta["m"]), float(meta["bandwidth_y"]), int(meta["rff_seed_y"]))
        return map_x, map_y
    maps = []
    for side in ("x", "y"):
        lam = arr(f"lam_isqrt_{side}").ravel()
        lam.setflags(write=False)
        maps.append(NystromMap(
            landmarks=arr(f"landmarks_{side}"),
            kernel=RbfKernel(float(meta[f"bandwidth_{side}"])),
            r_tilde=arr(f"eigvecs_{side}"),
            lambda_inv_sqrt=lam,
            floor=float(meta[f"floor_{side}"]),
            kept=int(lam.shape[0]),
        ))
    return maps[0], maps[1]


def _fingerprint(model_dir: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(Path(model_dir).glob("*.bin")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def _meta_str(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
