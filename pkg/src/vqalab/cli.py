"""Experiment harness: YAML/JSON configs in, CSV tables and a JSON manifest out."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml

from . import fidelity as fid
from . import plateau, qml
from .ansatz import BLOCK_KINDS, build_checkerboard, build_lattice2d, build_rank1, build_tree
from .models import ModelSpec, exact_ground, sector_ground
from .pauli import PauliString, PauliSum
from .simulator import MAX_DENSITY_QUBITS, NoiseModel, ghz_circuit, ghz_state
from .vqe import OptimizerConfig, VqeProblem, aavqe_sweep, best_of_two, optimize

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3
MAX_STATE_QUBITS = 16
OUT_DIR_ENV = "VQALAB_OUT_DIR"

EXPERIMENTS = {
    "vqe": "optimize one model at one or more ansatz depths; energy trace and final errors",
    "sweep": "AAVQE sweeps up and down a coupling grid for several ansatze",
    "plateau": "empirical gradient variances per parameter with the analytic lower bound",
    "tpe": "distance of two-qubit block ensembles from a Haar 2-design",
    "classify": "train the majority-vote classifier on VQE solutions",
    "confusion": "learning by confusion over trial transition points",
    "fidelity": "GHZ fidelity from parity oscillations, MQC and telescope bounds",
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config handling


def load_config(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def config_hash(cfg: dict) -> str:
    """Stable under key reordering."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _grid_values(g: dict) -> list[float]:
    if "values" in g:
        return [float(v) for v in g["values"]]
    return [float(v) for v in np.round(np.linspace(g["start"], g["stop"], int(g["num"])), 12)]


def validate(cfg: dict) -> list[str]:
    """Schema and capacity violations; empty when the config can run."""
    out = []
    kind = cfg.get("experiment")
    if kind not in EXPERIMENTS:
        out.append(f"experiment must be one of {sorted(EXPERIMENTS)}")
    if "seed" not in cfg:
        out.append("seed is mandatory")
    elif not isinstance(cfg["seed"], int):
        out.append("seed must be an integer")
    model = cfg.get("model")
    if kind in ("vqe", "sweep", "classify", "confusion") or (kind == "plateau" and "terms" not in cfg):
        if not isinstance(model, dict):
            out.append("model section is required")
        else:
            try:
                spec = ModelSpec(model.get("family", ""), int(model.get("n", 0)), dict(model.get("couplings", {})), model.get("boundary", "ring"))
                if spec.n > MAX_STATE_QUBITS:
                    out.append(f"n = {spec.n} exceeds the statevector capacity of {MAX_STATE_QUBITS} qubits")
            except (ValueError, TypeError) as exc:
                out.append(f"model: {exc}")
    if kind in ("vqe", "sweep", "plateau", "classify", "confusion"):
        specs = cfg.get("ansatze", [cfg.get("ansatz")]) if kind == "sweep" else [cfg.get("ansatz")]
        for a in specs:
            if not isinstance(a, dict):
                out.append("ansatz section is required")
                continue
            if a.get("kind", "checkerboard") not in ("checkerboard", "rank1", "tree", "lattice2d"):
                out.append(f"unknown ansatz kind {a.get('kind')!r}")
            if a.get("block", "Entangler") not in BLOCK_KINDS:
                out.append(f"unknown block kind {a.get('block')!r}")
    if kind in ("sweep", "classify", "confusion"):
        g = cfg.get("grid")
        if not isinstance(g, dict) or "key" not in g or not ("values" in g or {"start", "stop", "num"} <= set(g)):
            out.append("grid needs key and either values or start/stop/num")
    if "optimizer" in cfg:
        try:
            OptimizerConfig(**cfg["optimizer"])
        except (TypeError, ValueError) as exc:
            out.append(f"optimizer: {exc}")
    if kind == "tpe":
        for f in cfg.get("families", []):
            if f not in plateau.TPE_FAMILIES:
                out.append(f"unknown family {f!r}")
    if kind == "fidelity":
        n = int(cfg.get("n", 0))
        if n < 2:
            out.append("fidelity needs n >= 2")
        if n > MAX_DENSITY_QUBITS:
            out.append(f"n = {n} exceeds the density-matrix capacity of {MAX_DENSITY_QUBITS} qubits")
        for m in cfg.get("methods", []):
            if m not in ("parity", "mqc", "telescope"):
                out.append(f"unknown fidelity method {m!r}")
    return out


# ---------------------------------------------------------------- output helpers


def fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list[Any]]

    def render(self, chash: str) -> str:
        lines = [",".join(self.header + ["config_hash"])]
        lines += [",".join([fmt(v) for v in r] + [chash]) for r in self.rows]
        return "\n".join(lines) + "\n"


def sub_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- builders


def build_model(m: dict) -> ModelSpec:
    return ModelSpec(m["family"], int(m["n"]), dict(m.get("couplings", {})), m.get("boundary", "ring"))


def build_ansatz(a: dict, n: int, layers: int | None = None):
    kind = a.get("kind", "checkerboard")
    block = a.get("block", "Entangler")
    if kind == "checkerboard":
        return build_checkerboard(n, int(layers if layers is not None else a.get("layers", 1)), block, a.get("boundary", "ring"))
    if kind == "rank1":
        return build_rank1(n)
    if kind == "tree":
        return build_tree(n, block)
    return build_lattice2d(3, 3, int(layers if layers is not None else a.get("layers", 4)), block)


def _layer_list(a: dict) -> list[int]:
    v = a.get("layers", 1)
    return [int(x) for x in v] if isinstance(v, list) else [int(v)]


def _optimizer(cfg: dict, seed: int) -> OptimizerConfig:
    return OptimizerConfig(**{**cfg.get("optimizer", {}), "seed": seed})


def _exact(spec: ModelSpec, h: PauliSum) -> float | None:
    if h.n > 12:
        return None
    if spec.family == "hubbard":
        return sector_ground(h, int(spec.couplings.get("filling", spec.n // 2))).energy
    return exact_ground(h).energy


def _initial_state(cfg: dict, spec: ModelSpec) -> str | None:
    init = cfg.get("initial_state")
    if init == "half_filling":
        m = int(spec.couplings.get("filling", spec.n // 2))
        return ("10" * m + "0" * spec.n)[: spec.n]
    return init


def _terms(spec: list, n: int) -> PauliSum:
    return PauliSum(n, {PauliString.from_label(label): float(c) for c, label in spec})


# ---------------------------------------------------------------- experiments


def run_vqe(cfg: dict, threads: int) -> list[Table]:
    spec = build_model(cfg["model"])
    h = spec.hamiltonian()
    exact = _exact(spec, h)
    init = _initial_state(cfg, spec)
    restarts = int(cfg.get("restarts", 1))
    jobs = [(layers, r) for layers in _layer_list(cfg["ansatz"]) for r in range(restarts)]

    def job(item):
        layers, r = item
        layout, circ = build_ansatz(cfg["ansatz"], spec.n, layers)
        return optimize(VqeProblem(h, circ, layout, init), _optimizer(cfg, cfg["seed"] + r))

    results = _pmap(job, jobs, threads)
    trace = Table("trace", ["layers", "restart", "iter", "energy", "grad_norm", "wall_ms"], [])
    final = Table("result", ["layers", "best_restart", "energy", "exact", "error"], [])
    best: dict[int, tuple[int, float]] = {}
    for (layers, r), res in zip(jobs, results):
        for row in res.trace:
            trace.rows.append([layers, r, row.iteration, row.energy, row.grad_norm, ""])
        if layers not in best or res.energy < best[layers][1]:
            best[layers] = (r, res.energy)
    for layers, (r, e) in best.items():
        final.rows.append([layers, r, e, exact, None if exact is None else e - exact])
    return [trace, final]


def run_sweep(cfg: dict, threads: int) -> list[Table]:
    spec = build_model(cfg["model"])
    key = cfg["grid"]["key"]
    grid = _grid_values(cfg["grid"])
    init = _initial_state(cfg, spec)
    directions = cfg.get("directions", ["up", "down"])
    ansatze = cfg.get("ansatze", [cfg.get("ansatz")])
    jobs = [(i, d) for i in range(len(ansatze)) for d in directions]

    def job(item):
        i, d = item
        a = ansatze[i]
        _, circ = build_ansatz(a, spec.n)
        return aavqe_sweep(grid, lambda v: spec.with_value(key, v).hamiltonian(), circ, _optimizer(cfg, cfg["seed"]), d,
                           initial_state=init, restarts=int(cfg.get("restarts", 1)), with_exact=spec.n <= 10)

    sweeps = dict(zip(jobs, _pmap(job, jobs, threads)))
    table = Table("sweep", ["ansatz", "grid_value", "direction", "energy", "exact", "error", "overlap"], [])
    for i, a in enumerate(ansatze):
        name = a.get("name", f"{a.get('kind', 'checkerboard')}{a.get('layers', '')}")
        runs = [sweeps[(i, d)] for d in directions]
        if len(runs) == 2:
            runs.append(best_of_two(*runs))
        for label, pts in zip(list(directions) + ["best"], runs):
            for p in pts:
                table.rows.append([name, p.value, label, p.energy, p.exact, p.error, p.overlap])
    return [table]


def run_plateau(cfg: dict, threads: int) -> list[Table]:
    if "terms" in cfg:
        n = int(cfg["n"])
        h = _terms(cfg["terms"], n)
        spec = None
    else:
        spec = build_model(cfg["model"])
        h = spec.hamiltonian()
        n = spec.n
    a = cfg["ansatz"]
    samples = int(cfg.get("samples", 200))
    method = cfg.get("gradient", "adjoint")
    scale = float(cfg.get("generator_scale", 0.5))
    init = _initial_state(cfg, spec) if spec is not None else cfg.get("initial_state")
    layer_list = _layer_list(a)

    def job(item):
        idx, layers = item
        layout, circ = build_ansatz(a, n, layers)
        est = plateau.empirical_variances(VqeProblem(h, circ, layout, init), samples, sub_seed(cfg["seed"], idx), method,
                                          int(cfg.get("bootstrap", 200)))
        return layout, est

    results = _pmap(job, list(enumerate(layer_list)), threads)
    table = Table("variance", ["layers", "block_id", "layer", "slot", "variance", "se", "bootstrap_se", "bound"], [])
    for layers, (layout, est) in zip(layer_list, results):
        pauli_blocks = all(BLOCK_KINDS[b.kind].arity == 2 for b in layout.blocks)
        for b in layout.blocks:
            bound = plateau.variance_lower_bound(layout, h, b.block_id, scale) if pauli_blocks else None
            for s in b.slots:
                boot = None if est.bootstrap_se is None else est.bootstrap_se[s]
                table.rows.append([layers, b.block_id, b.layer, s, est.variance[s], est.se[s], boot, bound])
    return [table]


def run_tpe(cfg: dict, threads: int) -> list[Table]:
    fams = cfg.get("families", list(plateau.TPE_FAMILIES))
    samples = int(cfg.get("samples", 100_000))
    t = int(cfg.get("t", 2))
    ests = _pmap(lambda item: plateau.tpe_distance(item[1], t, samples, sub_seed(cfg["seed"], item[0])), list(enumerate(fams)), threads)
    rows = [[e.family, e.t, e.samples, e.lam1, e.lam2, e.lam_inf, e.se1, e.se2, e.se_inf] for e in ests]
    return [Table("tpe", ["family", "t", "samples", "lambda1", "lambda2", "lambda_inf", "se1", "se2", "se_inf"], rows)]


def _classifier_data(cfg: dict):
    spec = build_model(cfg["model"])
    key = cfg["grid"]["key"]
    grid = _grid_values(cfg["grid"])
    layout, circ = build_ansatz(cfg["ansatz"], spec.n)
    data = qml.sweep_dataset(grid, lambda v: spec.with_value(key, v).hamiltonian(), circ, _optimizer(cfg, cfg["seed"]),
                             float(cfg.get("threshold", 1.0)), int(cfg.get("restarts", 1)))
    return spec, layout, circ, data


def _train_config(cfg: dict, seed: int) -> qml.TrainConfig:
    t = cfg.get("training", {})
    return qml.TrainConfig(int(t.get("epochs", 300)), float(t.get("a", 1.0)), float(t.get("c", 0.5)), seed)


def run_classify(cfg: dict, threads: int) -> list[Table]:
    spec, layout, circ, data = _classifier_data(cfg)
    train, test = qml.split(data, float(cfg.get("train_share", 0.7)), cfg["seed"])
    copies = int(cfg.get("augment_copies", 0))
    if copies:
        train = qml.augment_dataset(layout, train, copies, sub_seed(cfg["seed"], 1))
    layers = int(cfg.get("classifier_layers", 4))
    seeds = [sub_seed(cfg["seed"], 100 + k) % (1 << 31) for k in range(int(cfg.get("train_seeds", 3)))]
    tc = _train_config(cfg, seeds[0])
    res = qml.train_best_of(circ, layers, train, seeds, tc)
    preds = Table("predictions", ["grid_value", "label", "probability", "split"], [])
    for part, rows in (("train", train[: len(train) // (copies + 1)] if copies else train), ("test", test)):
        for d in rows:
            preds.rows.append([d.meta, d.label, qml.predict(res.model, d), part])
    acc = Table("accuracy", ["train_accuracy", "test_accuracy", "final_loss"],
                [[res.train_accuracy, qml.accuracy(res.model, test), res.losses[-1]]])
    loss = Table("loss", ["epoch", "log_loss"], [[i + 1, v] for i, v in enumerate(res.losses)])
    dataset = Table("dataset", ["grid_value", "label", "params"],
                    [[d.meta, d.label, " ".join(f"{x:.12g}" for x in d.prep)] for d in data])
    return [dataset, preds, acc, loss]


def run_confusion(cfg: dict, threads: int) -> list[Table]:
    spec, layout, circ, data = _classifier_data(cfg)
    thresholds = [float(v) for v in cfg["thresholds"]]
    layers = int(cfg.get("classifier_layers", 4))
    tc = _train_config(cfg, cfg["seed"])

    def job(t):
        return qml.confusion_scan(circ, data, [t], layers, tc, float(cfg.get("train_share", 0.7)), cfg["seed"])[0]

    pts = _pmap(job, thresholds, threads)
    return [Table("confusion", ["threshold", "train_accuracy", "test_accuracy"],
                  [[p.threshold, p.train_accuracy, p.test_accuracy] for p in pts])]


def run_fidelity(cfg: dict, threads: int) -> list[Table]:
    n = int(cfg["n"])
    shots = int(cfg.get("shots", 4096))
    boots = int(cfg.get("bootstrap", 100))
    methods = cfg.get("methods", ["parity", "mqc", "telescope"])
    h = fid.telescope(ghz_circuit(n))
    sources = []
    for a in cfg.get("alphas", []):
        sources.append(("global", float(a), None))
    for nm in cfg.get("noise", []):
        sources.append(("local", None, NoiseModel(float(nm.get("p1", 0)), float(nm.get("p2", 0)))))

    def job(item):
        idx, (kind, alpha, noise) = item
        dm = fid.global_family(n, alpha) if kind == "global" else fid.noisy_ghz(n, noise)
        exact = dm.fidelity(ghz_state(n))
        seed = sub_seed(cfg["seed"], idx) % (1 << 31)
        rows = []
        p1 = None if noise is None else noise.p1
        p2 = None if noise is None else noise.p2
        for m in methods:
            if m == "telescope":
                est = fid.measure_telescope_energy(dm, h, shots, seed)
                gap, top = fid.telescope_gap_and_max(h)
                b = fid.stability_bounds(max(est.energy, 0.0), gap, top)
                rows.append([kind, alpha, p1, p2, m, shots, None, b.lower, b.upper, est.se, exact, seed])
            else:
                fn = fid.parity_oscillations if m == "parity" else fid.mqc
                est = fn(dm, shots, seed, boots=boots)
                rows.append([kind, alpha, p1, p2, m, shots, est.fidelity, None, None, est.se, exact, seed])
        return rows

    out = _pmap(job, list(enumerate(sources)), threads)
    header = ["source", "alpha", "p1", "p2", "method", "shots", "estimate", "lower", "upper", "se", "exact", "seed"]
    return [Table("fidelity", header, [r for rows in out for r in rows])]


RUNNERS = {
    "vqe": run_vqe,
    "sweep": run_sweep,
    "plateau": run_plateau,
    "tpe": run_tpe,
    "classify": run_classify,
    "confusion": run_confusion,
    "fidelity": run_fidelity,
}


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def execute(cfg: dict, out_dir: Path, threads: int = 1) -> dict:
    """Run a validated config, write tables and the manifest, return the manifest."""
    chash = config_hash(cfg)
    start = time.perf_counter()
    tables = RUNNERS[cfg["experiment"]](cfg, threads)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for t in tables:
        text = t.render(chash)
        path = out_dir / f"{t.name}.csv"
        path.write_text(text)
        files.append({"file": path.name, "rows": len(t.rows), "sha256": hashlib.sha256(text.encode()).hexdigest()})
    manifest = {
        "experiment": cfg["experiment"],
        "config_hash": chash,
        "artifact_version": _version(),
        "wall_time_s": round(time.perf_counter() - start, 3),
        "outputs": files,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vqalab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", default=None)
    r.add_argument("--threads", type=int, default=1)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("--config", required=True)
    sub.add_parser("list-experiments", help="show the available experiment kinds")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-experiments":
        for name, desc in EXPERIMENTS.items():
            print(f"{name}\t{desc}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    problems = validate(cfg)
    if args.command == "validate":
        for msg in problems:
            print(msg)
        return EXIT_INVALID if problems else EXIT_OK
    if problems:
        for msg in problems:
            print(f"invalid config: {msg}", file=sys.stderr)
        return EXIT_INVALID
    out_dir = Path(os.environ.get(OUT_DIR_ENV) or args.out_dir or cfg.get("out_dir", "results"))
    try:
        manifest = execute(cfg, out_dir, max(1, args.threads))
    except Exception as exc:  # noqa: BLE001 - report any failure as a runtime error
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(manifest, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
