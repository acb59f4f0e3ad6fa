"""Declarative experiment runner: seeded ensembles with CSV/JSON outputs.

Every experiment is described by a JSON config with a mandatory master seed;
all randomness is derived from (seed, trial index) streams, so outputs are
byte-identical across runs and worker counts.  Workers receive contiguous
index ranges and results are merged in index order before any reduction.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import build_hardware_efficient, build_random_ansatz, uniform_angles
from .haar import mc_commutator_trace, mc_second_moment
from .kernels import (
    Observable,
    SupervisedProblem,
    gradient,
    qntk,
    random_pauli_sum,
    supervised_kernel,
)
from .linalg import PauliString, RngStream, kahan_sum, pauli_matrix, zero_state
from .theory import delta_k, gamma, kbar_exact, kbar_leading, kernel_eigenvalues
from .training import (
    TrainingConfig,
    TrainingDivergenceError,
    fit_decay_rate,
    gd_optimize,
    gd_supervised,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CHECK_FAILED = 2
EXIT_ALL_DIVERGED = 3

KINDS = ("qntk-stats", "train", "train-supervised", "eigen-scan", "haar-check", "decay-fit")

# stream lanes under the master seed
_LANE_OBSERVABLE = 0
_LANE_SHARED_ANSATZ = 1
_LANE_TRIALS = 2
_LANE_LABELS = 3


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending key."""


_COMMON_KEYS = {"kind", "seed", "threads", "out"}
_ALLOWED_KEYS = {
    "qntk-stats": _COMMON_KEYS
    | {"qubits", "layers", "samples", "observable", "resample", "exclude_identity", "ansatz"},
    "train": _COMMON_KEYS
    | {
        "qubits",
        "layers",
        "eta",
        "steps",
        "trials",
        "observable",
        "resample",
        "exclude_identity",
        "ansatz",
        "burn_in",
        "floor",
    },
    "train-supervised": _COMMON_KEYS
    | {
        "qubits",
        "layers",
        "eta",
        "steps",
        "trials",
        "observable",
        "train_size",
        "resample",
        "exclude_identity",
        "ansatz",
        "burn_in",
        "floor",
    },
    "eigen-scan": _COMMON_KEYS
    | {"qubits", "layers", "trials", "observable", "train_sizes", "exclude_identity"},
    "haar-check": _COMMON_KEYS | {"qubits", "samples", "observable"},
    "decay-fit": _COMMON_KEYS | {"input", "burn_in", "floor"},
}

_DEFAULTS = {
    "threads": 1,
    "resample": "instance",
    "exclude_identity": True,
    "ansatz": "random-haar",
    "burn_in": 0,
    "floor": 1e-12,
}


def _fail(key: str, message: str):
    raise ConfigError(f"config key '{key}': {message}")


def _require(cfg: dict, key: str):
    if key not in cfg:
        _fail(key, "is required")
    return cfg[key]


def _as_int(cfg: dict, key: str, minimum: int | None = None) -> int:
    value = _require(cfg, key)
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(key, f"must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(key, f"must be >= {minimum}, got {value}")
    return value


def _as_number(cfg: dict, key: str, positive: bool = False) -> float:
    value = _require(cfg, key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(key, f"must be a number, got {value!r}")
    if positive and value <= 0:
        _fail(key, f"must be positive, got {value}")
    return float(value)


def _validate_observable(spec, key="observable") -> dict:
    if not isinstance(spec, dict) or "kind" not in spec:
        _fail(key, "must be an object with a 'kind' field")
    kind = spec["kind"]
    if kind == "pauli-sum":
        allowed = {"kind", "terms", "target"}
        terms = spec.get("terms")
        if not isinstance(terms, list) or not terms:
            _fail(f"{key}.terms", "must be a non-empty list of [coefficient, letters] pairs")
        for i, term in enumerate(terms):
            if (
                not isinstance(term, list)
                or len(term) != 2
                or not isinstance(term[0], (int, float))
                or not isinstance(term[1], str)
            ):
                _fail(f"{key}.terms[{i}]", "must be a [coefficient, letters] pair")
            try:
                PauliString(term[1])
            except ValueError as exc:
                _fail(f"{key}.terms[{i}]", str(exc))
        lengths = {len(t[1]) for t in terms}
        if len(lengths) != 1:
            _fail(f"{key}.terms", "all Pauli strings must act on the same qubit count")
    elif kind == "random-pauli-sum":
        allowed = {"kind", "num_terms", "coeff_low", "coeff_high", "target"}
        num_terms = spec.get("num_terms", 10)
        if not isinstance(num_terms, int) or num_terms < 1:
            _fail(f"{key}.num_terms", "must be a positive integer")
        low = spec.get("coeff_low", 0.0)
        high = spec.get("coeff_high", 1.0)
        if not isinstance(low, (int, float)) or not isinstance(high, (int, float)) or high <= low:
            _fail(f"{key}.coeff_low/coeff_high", "must be numbers with coeff_high > coeff_low")
    else:
        _fail(f"{key}.kind", f"must be 'pauli-sum' or 'random-pauli-sum', got {kind!r}")
    unknown = set(spec) - allowed
    if unknown:
        _fail(f"{key}.{sorted(unknown)[0]}", "unknown key")
    target = spec.get("target", 0.0)
    if not isinstance(target, (int, float)):
        _fail(f"{key}.target", "must be a number")
    normalized = dict(spec)
    normalized["target"] = float(target)
    if kind == "random-pauli-sum":
        normalized.setdefault("num_terms", 10)
        normalized["coeff_low"] = float(normalized.get("coeff_low", 0.0))
        normalized["coeff_high"] = float(normalized.get("coeff_high", 1.0))
    return normalized


def validate_config(raw: dict, kind: str | None = None) -> dict:
    """Normalize and validate a raw config dict; unknown keys are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = dict(raw)
    if kind is not None:
        if "kind" in cfg and cfg["kind"] != kind:
            _fail("kind", f"is {cfg['kind']!r} but the subcommand requested {kind!r}")
        cfg["kind"] = kind
    if cfg.get("kind") not in KINDS:
        _fail("kind", f"must be one of {KINDS}")
    kind = cfg["kind"]
    unknown = set(cfg) - _ALLOWED_KEYS[kind]
    if unknown:
        _fail(sorted(unknown)[0], f"unknown key for kind '{kind}'")
    out = {"kind": kind, "seed": _as_int(cfg, "seed", minimum=0)}
    out["threads"] = cfg.get("threads", _DEFAULTS["threads"])
    if not isinstance(out["threads"], int) or out["threads"] < 1:
        _fail("threads", "must be a positive integer")
    if "out" in cfg:
        if not isinstance(cfg["out"], str):
            _fail("out", "must be a path string")
        out["out"] = cfg["out"]

    if kind == "decay-fit":
        path = _require(cfg, "input")
        if not isinstance(path, str):
            _fail("input", "must be a path string")
        out["input"] = path
        out["burn_in"] = cfg.get("burn_in", _DEFAULTS["burn_in"])
        out["floor"] = cfg.get("floor", _DEFAULTS["floor"])
        return out

    out["qubits"] = _require(cfg, "qubits")
    if kind == "haar-check":
        qubits = out["qubits"]
        if isinstance(qubits, int):
            qubits = [qubits]
        if not isinstance(qubits, list) or not all(isinstance(q, int) and q >= 1 for q in qubits):
            _fail("qubits", "must be a positive integer or list of them")
        out["qubits"] = qubits
        out["samples"] = _as_int(cfg, "samples", minimum=1)
        out["observable"] = _validate_observable(
            cfg.get("observable", {"kind": "random-pauli-sum", "num_terms": 10})
        )
        return out

    if not isinstance(out["qubits"], int) or out["qubits"] < 1:
        _fail("qubits", "must be a positive integer")
    out["observable"] = _validate_observable(_require(cfg, "observable"))

    if kind == "qntk-stats":
        layers = _require(cfg, "layers")
        if isinstance(layers, int):
            layers = [layers]
        if not isinstance(layers, list) or not all(isinstance(v, int) and v >= 0 for v in layers):
            _fail("layers", "must be a non-negative integer or list of them")
        out["layers"] = layers
        out["samples"] = _as_int(cfg, "samples", minimum=1)
    else:
        out["layers"] = _as_int(cfg, "layers", minimum=0)

    if kind in ("train", "train-supervised"):
        out["eta"] = _as_number(cfg, "eta", positive=True)
        out["steps"] = _as_int(cfg, "steps", minimum=1)
        out["trials"] = _as_int(cfg, "trials", minimum=1)
        out["burn_in"] = cfg.get("burn_in", _DEFAULTS["burn_in"])
        out["floor"] = cfg.get("floor", _DEFAULTS["floor"])
        if not isinstance(out["burn_in"], int) or out["burn_in"] < 0:
            _fail("burn_in", "must be a non-negative integer")
        if not isinstance(out["floor"], (int, float)) or out["floor"] < 0:
            _fail("floor", "must be a non-negative number")
    if kind == "train-supervised":
        out["train_size"] = _as_int(cfg, "train_size", minimum=1)
        if out["train_size"] > (1 << out["qubits"]):
            _fail("train_size", "exceeds the Hilbert dimension (basis features are orthogonal)")
    if kind == "eigen-scan":
        out["trials"] = _as_int(cfg, "trials", minimum=1)
        sizes = _require(cfg, "train_sizes")
        if isinstance(sizes, int):
            sizes = [sizes]
        dim = 1 << out["qubits"]
        if (
            not isinstance(sizes, list)
            or not sizes
            or not all(isinstance(v, int) for v in sizes)
            or not all(2 <= v <= dim for v in sizes)
        ):
            _fail("train_sizes", f"must be integers within [2, {dim}]")
        out["train_sizes"] = sizes

    if kind in ("qntk-stats", "train", "train-supervised"):
        resample = cfg.get("resample", _DEFAULTS["resample"])
        if resample not in ("instance", "angle"):
            _fail("resample", "must be 'instance' or 'angle'")
        out["resample"] = resample
        out["exclude_identity"] = cfg.get("exclude_identity", _DEFAULTS["exclude_identity"])
        if not isinstance(out["exclude_identity"], bool):
            _fail("exclude_identity", "must be a boolean")
        ansatz = cfg.get("ansatz", _DEFAULTS["ansatz"])
        if ansatz not in ("random-haar", "hardware-efficient-cphase", "hardware-efficient-cnot"):
            _fail("ansatz", f"unknown ansatz family {ansatz!r}")
        out["ansatz"] = ansatz
    if kind == "eigen-scan":
        out["exclude_identity"] = cfg.get("exclude_identity", _DEFAULTS["exclude_identity"])
        if not isinstance(out["exclude_identity"], bool):
            _fail("exclude_identity", "must be a boolean")
    return out


def load_config(path: str | Path, kind: str | None = None) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return validate_config(raw, kind=kind)


def experiment_identity(cfg: dict) -> dict:
    """The experiment-defining subset of a config.

    Output path and worker count are execution parameters: they must not
    change a single output byte, so they are excluded from the identity and
    from the hash embedded in every output file.
    """
    return {k: v for k, v in cfg.items() if k not in ("out", "threads")}


def config_hash(cfg: dict) -> str:
    canon = json.dumps(experiment_identity(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def realize_observable(cfg: dict) -> Observable:
    spec = cfg["observable"]
    if spec["kind"] == "pauli-sum":
        terms = tuple((float(c), PauliString(s)) for c, s in spec["terms"])
        return Observable(terms, target=spec["target"])
    n = cfg["qubits"] if isinstance(cfg["qubits"], int) else max(cfg["qubits"])
    return random_pauli_sum(
        n,
        spec["num_terms"],
        RngStream(cfg["seed"], (_LANE_OBSERVABLE,)),
        coeff_low=spec["coeff_low"],
        coeff_high=spec["coeff_high"],
        target=spec["target"],
    )


def _build_ansatz(cfg: dict, n: int, layers: int, rng: RngStream):
    family = cfg.get("ansatz", "random-haar")
    if family == "random-haar":
        return build_random_ansatz(n, layers, rng, exclude_identity=cfg["exclude_identity"])
    variant = "cphase-ladder" if family.endswith("cphase") else "cnot-su2"
    return build_hardware_efficient(n, layers, variant, rng)


# ---------------------------------------------------------------------------
# output plumbing


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows, cfg_digest: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# config_sha256={cfg_digest} tool_version={__version__}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else None
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    return obj


def write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_sanitize(obj), sort_keys=True, indent=2) + "\n")


def _map_indexed(worker, payload: dict, count: int, threads: int):
    """Evaluate worker(payload, index) for every index, in index order.

    With threads > 1 the index range is chunked across processes; results are
    merged by index so the reduction order (and hence the output bytes) never
    depends on the worker count.
    """
    if threads <= 1 or count <= 1:
        return [worker(payload, k) for k in range(count)]
    chunk = (count + threads - 1) // threads
    ranges = [(lo, min(lo + chunk, count)) for lo in range(0, count, chunk)]
    results = [None] * count
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_range, worker, payload, lo, hi) for lo, hi in ranges]
        for (lo, hi), fut in zip(ranges, futures):
            for offset, value in enumerate(fut.result()):
                results[lo + offset] = value
    return results


def _run_range(worker, payload, lo, hi):
    return [worker(payload, k) for k in range(lo, hi)]


# ---------------------------------------------------------------------------
# qntk-stats


def _qntk_sample(payload: dict, index: int) -> float:
    cfg = payload["cfg"]
    n = cfg["qubits"]
    layers = payload["layers"]
    obs = Observable.from_dict(payload["observable"])
    trial = RngStream(cfg["seed"], (_LANE_TRIALS, payload["layer_index"], index))
    if cfg["resample"] == "instance":
        ansatz = _build_ansatz(cfg, n, layers, trial)
    else:
        ansatz = _build_ansatz(
            cfg, n, layers, RngStream(cfg["seed"], (_LANE_SHARED_ANSATZ, payload["layer_index"]))
        )
    theta = uniform_angles(ansatz.num_layers, trial.substream(0))
    return qntk(gradient(ansatz, theta, obs, zero_state(n)))


def run_qntk_stats(cfg: dict, out_dir: Path) -> int:
    digest = config_hash(cfg)
    obs = realize_observable(cfg)
    n = cfg["qubits"]
    dim = 1 << n
    tr_o = obs.trace_power(1)
    tr_o2 = obs.trace_power(2)
    tr_o4 = obs.trace_power(4)
    summary_rows = []
    for li, layers in enumerate(cfg["layers"]):
        payload = {
            "cfg": cfg,
            "layers": layers,
            "layer_index": li,
            "observable": obs.as_dict(),
        }
        values = _map_indexed(_qntk_sample, payload, cfg["samples"], cfg["threads"])
        values = np.asarray(values)
        mean = kahan_sum(values) / len(values)
        std = float(np.sqrt(kahan_sum((values - mean) ** 2) / (len(values) - 1))) if len(values) > 1 else 0.0
        k_exact = kbar_exact(dim, layers, tr_o2, tr_o)
        k_lead = kbar_leading(dim, layers, tr_o2)
        dk = delta_k(dim, layers, tr_o2, tr_o4)
        summary_rows.append(
            [
                layers,
                mean,
                std,
                k_exact,
                k_lead,
                dk,
                std / mean if mean != 0 else 0.0,
                dk / k_exact if k_exact != 0 else 0.0,
            ]
        )
        write_csv(
            out_dir / "trials" / f"trial_{li}.csv",
            ["sample", "kernel"],
            [[s, v] for s, v in enumerate(values)],
            digest,
        )
    write_csv(
        out_dir / "summary.csv",
        [
            "layers",
            "kernel_mean",
            "kernel_std",
            "kbar_exact",
            "kbar_leading",
            "delta_k_pred",
            "ratio_empirical",
            "ratio_theory",
        ],
        summary_rows,
        digest,
    )
    write_json(out_dir / "observable.json", obs.as_dict())
    report = {"kind": cfg["kind"], "config_sha256": digest, "rows": len(summary_rows)}
    if len(cfg["layers"]) >= 2 and all(v > 0 for v in cfg["layers"]):
        logl = np.log(cfg["layers"])
        emp = np.array([r[6] for r in summary_rows])
        if np.all(emp > 0):
            report["ratio_slope_empirical"] = float(np.polyfit(logl, np.log(emp), 1)[0])
        theo = np.array([r[7] for r in summary_rows])
        if np.all(theo > 0):
            report["ratio_slope_theory"] = float(np.polyfit(logl, np.log(theo), 1)[0])
    write_json(out_dir / "report.json", report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def _train_trial(payload: dict, index: int) -> dict:
    cfg = payload["cfg"]
    n = cfg["qubits"]
    obs = Observable.from_dict(payload["observable"])
    trial = RngStream(cfg["seed"], (_LANE_TRIALS, index))
    if cfg["resample"] == "instance":
        ansatz = _build_ansatz(cfg, n, cfg["layers"], trial)
    else:
        ansatz = _build_ansatz(cfg, n, cfg["layers"], RngStream(cfg["seed"], (_LANE_SHARED_ANSATZ,)))
    theta0 = uniform_angles(ansatz.num_layers, trial.substream(0))
    tcfg = TrainingConfig(
        learning_rate=cfg["eta"], steps=cfg["steps"], seed=cfg["seed"], init_angles=theta0
    )
    try:
        traj = gd_optimize(ansatz, obs, zero_state(n), tcfg)
    except TrainingDivergenceError as exc:
        return {"diverged": True, "message": str(exc)}
    try:
        rate, r2 = fit_decay_rate(traj, burn_in=cfg["burn_in"], floor=cfg["floor"])
    except ValueError:
        rate, r2 = float("nan"), float("nan")
    return {
        "diverged": False,
        "errors": traj.errors,
        "kernels": traj.kernels,
        "gamma": rate,
        "r_squared": r2,
    }


def run_train(cfg: dict, out_dir: Path) -> int:
    digest = config_hash(cfg)
    obs = realize_observable(cfg)
    dim = 1 << cfg["qubits"]
    payload = {"cfg": cfg, "observable": obs.as_dict()}
    results = _map_indexed(_train_trial, payload, cfg["trials"], cfg["threads"])
    diverged = [k for k, r in enumerate(results) if r["diverged"]]
    live = [r for r in results if not r["diverged"]]
    for k, res in enumerate(results):
        if res["diverged"]:
            continue
        write_csv(
            out_dir / "trials" / f"trial_{k}.csv",
            ["step", "residual", "kernel"],
            [[t, e, kv] for t, (e, kv) in enumerate(zip(res["errors"], res["kernels"]))],
            digest,
        )
    rate_pred = gamma(dim, cfg["layers"], obs.trace_power(2), obs.trace_power(1), cfg["eta"])
    summary_rows = []
    if live:
        log_abs = np.stack([np.log(np.maximum(np.abs(r["errors"]), 1e-300)) for r in live])
        abs_err = np.stack([np.abs(r["errors"]) for r in live])
        mean_log = log_abs.mean(axis=0)
        log_mean = np.log(abs_err.mean(axis=0))
        for t in range(log_abs.shape[1]):
            summary_rows.append([t, mean_log[t], log_mean[t]])
    write_csv(
        out_dir / "summary.csv",
        ["step", "mean_log_abs_residual", "log_mean_abs_residual"],
        summary_rows,
        digest,
    )
    write_json(out_dir / "observable.json", obs.as_dict())
    gammas = [r["gamma"] for r in live]
    finite = [g for g in gammas if np.isfinite(g)]
    report = {
        "kind": cfg["kind"],
        "config_sha256": digest,
        "trials": cfg["trials"],
        "diverged_trials": diverged,
        "per_trial_gamma": gammas,
        "per_trial_r_squared": [r["r_squared"] for r in live],
        "gamma_mean": float(np.mean(finite)) if finite else None,
        "gamma_theory_leading": rate_pred.leading,
        "gamma_theory_exact": rate_pred.exact,
    }
    write_json(out_dir / "report.json", report)
    return EXIT_ALL_DIVERGED if len(diverged) == cfg["trials"] else EXIT_OK


# ---------------------------------------------------------------------------
# train-supervised


def _train_supervised_trial(payload: dict, index: int) -> dict:
    cfg = payload["cfg"]
    n = cfg["qubits"]
    obs = Observable.from_dict(payload["observable"])
    labels = np.asarray(payload["labels"], dtype=float)
    prob = SupervisedProblem.with_basis_features(n, labels, (obs,))
    trial = RngStream(cfg["seed"], (_LANE_TRIALS, index))
    if cfg["resample"] == "instance":
        ansatz = _build_ansatz(cfg, n, cfg["layers"], trial)
    else:
        ansatz = _build_ansatz(cfg, n, cfg["layers"], RngStream(cfg["seed"], (_LANE_SHARED_ANSATZ,)))
    theta0 = uniform_angles(ansatz.num_layers, trial.substream(0))
    tcfg = TrainingConfig(
        learning_rate=cfg["eta"], steps=cfg["steps"], seed=cfg["seed"], init_angles=theta0
    )
    try:
        traj = gd_supervised(ansatz, prob, tcfg)
    except TrainingDivergenceError as exc:
        return {"diverged": True, "message": str(exc)}
    return {"diverged": False, "losses": traj.errors, "kernels": traj.kernels}


def run_train_supervised(cfg: dict, out_dir: Path) -> int:
    digest = config_hash(cfg)
    obs = realize_observable(cfg)
    label_rng = RngStream(cfg["seed"], (_LANE_LABELS,))
    labels = 2.0 * label_rng.generator.integers(0, 2, size=cfg["train_size"]) - 1.0
    payload = {"cfg": cfg, "observable": obs.as_dict(), "labels": labels.tolist()}
    results = _map_indexed(_train_supervised_trial, payload, cfg["trials"], cfg["threads"])
    diverged = [k for k, r in enumerate(results) if r["diverged"]]
    live = [r for r in results if not r["diverged"]]
    for k, res in enumerate(results):
        if res["diverged"]:
            continue
        write_csv(
            out_dir / "trials" / f"trial_{k}.csv",
            ["step", "loss", "kernel_trace"],
            [[t, lv, kv] for t, (lv, kv) in enumerate(zip(res["losses"], res["kernels"]))],
            digest,
        )
    summary_rows = []
    if live:
        losses = np.stack([r["losses"] for r in live])
        mean_loss = losses.mean(axis=0)
        for t in range(losses.shape[1]):
            summary_rows.append([t, mean_loss[t], float(np.log(max(mean_loss[t], 1e-300)))])
    write_csv(
        out_dir / "summary.csv", ["step", "mean_loss", "log_mean_loss"], summary_rows, digest
    )
    write_json(out_dir / "observable.json", obs.as_dict())
    report = {
        "kind": cfg["kind"],
        "config_sha256": digest,
        "trials": cfg["trials"],
        "diverged_trials": diverged,
        "labels": labels.tolist(),
        "final_mean_loss": summary_rows[-1][1] if summary_rows else None,
        "initial_mean_loss": summary_rows[0][1] if summary_rows else None,
    }
    write_json(out_dir / "report.json", report)
    return EXIT_ALL_DIVERGED if len(diverged) == cfg["trials"] else EXIT_OK


# ---------------------------------------------------------------------------
# eigen-scan


def _eigen_trial(payload: dict, index: int) -> tuple[float, list[list[float]]]:
    cfg = payload["cfg"]
    n = cfg["qubits"]
    obs = Observable.from_dict(payload["observable"])
    size = payload["train_size"]
    trial = RngStream(cfg["seed"], (_LANE_TRIALS, payload["size_index"], index))
    ansatz = build_random_ansatz(n, cfg["layers"], trial, exclude_identity=cfg["exclude_identity"])
    theta = uniform_angles(cfg["layers"], trial.substream(0))
    prob = SupervisedProblem.with_basis_features(n, np.zeros(size), (obs,))
    kernel = supervised_kernel(ansatz, theta, prob)
    lowest = float(np.linalg.eigvalsh(kernel)[0])
    return lowest, kernel.tolist()


def run_eigen_scan(cfg: dict, out_dir: Path) -> int:
    digest = config_hash(cfg)
    obs = realize_observable(cfg)
    dim = 1 << cfg["qubits"]
    tr_o = obs.trace_power(1)
    tr_o2 = obs.trace_power(2)
    summary_rows = []
    for si, size in enumerate(cfg["train_sizes"]):
        payload = {
            "cfg": cfg,
            "observable": obs.as_dict(),
            "train_size": size,
            "size_index": si,
        }
        results = _map_indexed(_eigen_trial, payload, cfg["trials"], cfg["threads"])
        lowest_each = np.array([r[0] for r in results])
        mean_kernel = np.mean([np.asarray(r[1]) for r in results], axis=0)
        spectrum = kernel_eigenvalues(dim, cfg["layers"], size, tr_o2, tr_o)
        lowest_of_mean = float(np.linalg.eigvalsh(mean_kernel)[0])
        summary_rows.append(
            [
                size,
                lowest_of_mean,
                float(lowest_each.mean()),
                spectrum.lowest,
                spectrum.bulk,
            ]
        )
        write_csv(
            out_dir / "trials" / f"trial_{si}.csv",
            ["trial", "lowest_eigenvalue"],
            [[k, v] for k, v in enumerate(lowest_each)],
            digest,
        )
    write_csv(
        out_dir / "summary.csv",
        [
            "train_size",
            "lowest_of_mean_kernel",
            "mean_of_lowest",
            "lowest_theory",
            "bulk_theory",
        ],
        summary_rows,
        digest,
    )
    write_json(out_dir / "observable.json", obs.as_dict())
    write_json(
        out_dir / "report.json",
        {"kind": cfg["kind"], "config_sha256": digest, "rows": len(summary_rows)},
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# haar-check


def run_haar_check(cfg: dict, out_dir: Path) -> int:
    digest = config_hash(cfg)
    obs = realize_observable(cfg)
    checks = []
    for qi, n in enumerate(cfg["qubits"]):
        dim = 1 << n
        rng = RngStream(cfg["seed"], (_LANE_TRIALS, qi))
        obs_n = obs if obs.num_qubits == n else _restrict_observable(obs, n)
        obs_mat = np.asarray(obs_n.matrix)
        traceless = obs_mat - (np.trace(obs_mat) / dim) * np.eye(dim)
        psi = zero_state(n)
        second = mc_second_moment(dim, psi, traceless, cfg["samples"], rng.substream(0))
        checks.append({"name": f"second-moment-D{dim}", **second.as_dict()})
        x_mat = pauli_matrix(_first_nonidentity_pauli(n))
        comm = mc_commutator_trace(dim, x_mat, obs_mat, cfg["samples"], rng.substream(1))
        checks.append({"name": f"commutator-trace-D{dim}", **comm.as_dict()})
    all_pass = all(c["pass"] for c in checks)
    write_json(
        out_dir / "report.json",
        {
            "kind": cfg["kind"],
            "config_sha256": digest,
            "samples": cfg["samples"],
            "checks": checks,
            "all_pass": all_pass,
        },
    )
    write_csv(
        out_dir / "summary.csv",
        ["name", "mean", "std_error", "target", "z_score", "pass"],
        [[c["name"], c["mean"], c["std_error"], c["target"], c["z_score"], c["pass"]] for c in checks],
        digest,
    )
    write_json(out_dir / "observable.json", obs.as_dict())
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED


def _first_nonidentity_pauli(n: int) -> PauliString:
    return PauliString("Z" + "I" * (n - 1))


def _restrict_observable(obs: Observable, n: int) -> Observable:
    """Truncate or pad observable terms to n qubits (haar-check across dims)."""
    terms = []
    for coef, pauli in obs.terms:
        letters = pauli.letters[:n].ljust(n, "I")
        terms.append((coef, PauliString(letters)))
    return Observable(tuple(terms), target=obs.target)


# ---------------------------------------------------------------------------
# decay-fit


def run_decay_fit(cfg: dict, out_dir: Path) -> int:
    digest = config_hash(cfg)
    source = Path(cfg["input"])
    if source.is_dir():
        files = sorted(source.glob("trial_*.csv"))
    elif source.is_file():
        files = [source]
    else:
        raise ConfigError(f"config key 'input': path does not exist: {source}")
    if not files:
        raise ConfigError(f"config key 'input': no trial_*.csv files under {source}")
    rows = []
    fits = []
    for path in files:
        series = _read_residual_column(path)
        try:
            rate, r2 = fit_decay_rate(series, burn_in=cfg["burn_in"], floor=cfg["floor"])
        except ValueError as exc:
            rows.append([path.name, float("nan"), float("nan")])
            fits.append({"file": path.name, "error": str(exc)})
            continue
        rows.append([path.name, rate, r2])
        fits.append({"file": path.name, "gamma": rate, "r_squared": r2})
    write_csv(out_dir / "summary.csv", ["file", "gamma", "r_squared"], rows, digest)
    finite = [f["gamma"] for f in fits if "gamma" in f]
    write_json(
        out_dir / "report.json",
        {
            "kind": cfg["kind"],
            "config_sha256": digest,
            "fits": fits,
            "gamma_mean": float(np.mean(finite)) if finite else None,
        },
    )
    return EXIT_OK


def _read_residual_column(path: Path) -> np.ndarray:
    lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    for name in ("residual", "loss"):
        if name in header:
            col = header.index(name)
            break
    else:
        col = 1
    return np.array([float(ln.split(",")[col]) for ln in lines[1:]])


# ---------------------------------------------------------------------------
# dispatch


def run_experiment(cfg: dict, out_dir: str | Path) -> int:
    """Run a validated config, writing outputs under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "config.echo.json", experiment_identity(cfg))
    runner = {
        "qntk-stats": run_qntk_stats,
        "train": run_train,
        "train-supervised": run_train_supervised,
        "eigen-scan": run_eigen_scan,
        "haar-check": run_haar_check,
        "decay-fit": run_decay_fit,
    }[cfg["kind"]]
    return runner(cfg, out_dir)


__all__ = [
    "ConfigError",
    "EXIT_ALL_DIVERGED",
    "EXIT_CHECK_FAILED",
    "EXIT_CONFIG",
    "EXIT_OK",
    "KINDS",
    "config_hash",
    "experiment_identity",
    "load_config",
    "realize_observable",
    "run_experiment",
    "validate_config",
    "write_csv",
    "write_json",
]
