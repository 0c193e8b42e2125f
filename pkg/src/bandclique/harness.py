"""Benchmark harness: error metrics, experiment orchestration, reports.

An experiment compares band-selection strategies on one scene: it runs
each strategy's selection (timed), unmixes the scene a configured number
of repetitions (timed; synthetic scenes re-draw their noise per
repetition so the error statistics are meaningful), and aggregates one
result row per strategy. Outputs: a machine CSV with a fixed column
schema, an aligned text table, plot-ready two-column data, raw
per-repetition records, and a metadata sidecar keyed by the config hash.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import dataio
from .exceptions import InputError, ParameterError
from .kernels import GramMatrix, gram_matrix, gram_power
from .mixing import add_noise, random_endmembers, synth_scene
from .params import auto_params
from .selection import BandDictionary, ccbs, gcbs, gkkm_select
from .unmixing import unmix_scene

# Defaults for competitor tuning grids, applied per strategy when the
# config omits them; tuning runs on a held-out pixel slice.
DEFAULT_SIGMA_MULTIPLIERS = (0.5, 1.0, 2.0, 10.0, 20.0)
DEFAULT_LAMBDA_GRID = (2.0, 4.0, 6.0)
DEFAULT_TUNE_PIXELS = 200

RESULTS_COLUMNS = (
    "strategy", "M", "mu0", "sigma2", "Nb", "coherence",
    "rmse_mean", "rmse_std", "time_bs_s",
    "time_unmix_mean_s", "time_unmix_std_s",
)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def rmse_abundance(truth, est) -> float:
    """Root mean square abundance error, sqrt(sum ||a_n - a*_n||^2 / (N R))."""
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    est = np.atleast_2d(np.asarray(est, dtype=float))
    if truth.shape != est.shape:
        raise InputError(f"shape mismatch: {truth.shape} vs {est.shape}")
    diff = truth - est
    return float(np.sqrt(np.sum(diff * diff) / diff.size))


def rmse_vs_reference(ref_est, bs_est) -> float:
    """RMSE between two abundance estimates (reference vs reduced-band)."""
    return rmse_abundance(ref_est, bs_est)


def reconstruction_error(pixels, reconstructed) -> float:
    """RMSE over all reflectance entries of a scene reconstruction."""
    pixels = np.atleast_2d(np.asarray(pixels, dtype=float))
    reconstructed = np.atleast_2d(np.asarray(reconstructed, dtype=float))
    if pixels.shape != reconstructed.shape:
        raise InputError(f"shape mismatch: {pixels.shape} vs {reconstructed.shape}")
    diff = pixels - reconstructed
    return float(np.sqrt(np.sum(diff * diff) / diff.size))


def _mean_std(values):
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return mean, std


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_STRATEGY_NAMES = ("full", "gcbs", "ccbs", "gkkm")


@dataclass(frozen=True)
class StrategySpec:
    name: str
    target_size: int | None = None
    randomize: bool = False
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    sigma_multipliers: tuple | None = None
    m_grid: tuple | None = None
    restarts: int = 3
    tune_pixels: int = DEFAULT_TUNE_PIXELS

    @property
    def label(self) -> str:
        return f"{self.name} (r)" if self.randomize else self.name


@dataclass(frozen=True)
class SceneSpec:
    """Either synthesized from parameters or loaded from files."""

    prefix: str | None = None          # load_scene prefix
    endmembers_csv: str | None = None
    random_bands: int | None = None
    random_endmembers: int | None = None
    endmember_seed: int | None = None
    n_pixels: int | None = None
    model: str = "lmm"
    delta: float | None = None
    xi: float | None = None
    snr_db: float | None = None

    @property
    def from_files(self) -> bool:
        return self.prefix is not None


@dataclass(frozen=True)
class ExperimentConfig:
    scene: SceneSpec
    strategies: tuple
    mu_reg: float = 1e-2
    repetitions: int = 1
    seed: int = 0
    n_threads: int = 1
    raw: dict | None = None  # original JSON payload, for hashing


def _require(payload, key, path):
    if key not in payload:
        raise ParameterError(f"config field {path}.{key} is required")
    return payload[key]


def parse_config(payload: dict) -> ExperimentConfig:
    """Validate a config dict; errors carry the offending field path."""
    if not isinstance(payload, dict):
        raise ParameterError("config must be a JSON object")
    scene_raw = _require(payload, "scene", "$")
    if not isinstance(scene_raw, dict):
        raise ParameterError("config field $.scene must be an object")
    if "prefix" in scene_raw:
        scene = SceneSpec(prefix=str(scene_raw["prefix"]))
    else:
        model = scene_raw.get("model", "lmm")
        if model not in ("lmm", "gbm", "pnmm"):
            raise ParameterError(
                f"config field $.scene.model must be lmm/gbm/pnmm, got {model!r}"
            )
        n_pixels = _require(scene_raw, "pixels", "$.scene")
        if not isinstance(n_pixels, int) or n_pixels < 1:
            raise ParameterError("config field $.scene.pixels must be a positive integer")
        if "endmembers_csv" in scene_raw:
            scene = SceneSpec(
                endmembers_csv=str(scene_raw["endmembers_csv"]),
                n_pixels=n_pixels,
                model=model,
                delta=scene_raw.get("delta"),
                xi=scene_raw.get("xi"),
                snr_db=scene_raw.get("snr_db"),
            )
        elif "random_endmembers" in scene_raw:
            re_raw = scene_raw["random_endmembers"]
            if not isinstance(re_raw, dict) or "bands" not in re_raw \
                    or "endmembers" not in re_raw:
                raise ParameterError(
                    "config field $.scene.random_endmembers must be an object "
                    "with 'bands' and 'endmembers'"
                )
            scene = SceneSpec(
                random_bands=int(re_raw["bands"]),
                random_endmembers=int(re_raw["endmembers"]),
                endmember_seed=re_raw.get("seed"),
                n_pixels=n_pixels,
                model=model,
                delta=scene_raw.get("delta"),
                xi=scene_raw.get("xi"),
                snr_db=scene_raw.get("snr_db"),
            )
        else:
            raise ParameterError(
                "config field $.scene needs 'prefix', 'endmembers_csv', or "
                "'random_endmembers'"
            )
        if model == "gbm" and scene.delta is None:
            raise ParameterError("config field $.scene.delta is required for gbm")
        if model == "pnmm" and scene.xi is None:
            raise ParameterError("config field $.scene.xi is required for pnmm")

    strategies_raw = _require(payload, "strategies", "$")
    if not isinstance(strategies_raw, list) or not strategies_raw:
        raise ParameterError("config field $.strategies must be a non-empty list")
    strategies = []
    for i, entry in enumerate(strategies_raw):
        path = f"$.strategies[{i}]"
        if not isinstance(entry, dict):
            raise ParameterError(f"config field {path} must be an object")
        name = _require(entry, "name", path)
        if name not in _STRATEGY_NAMES:
            raise ParameterError(
                f"config field {path}.name must be one of {_STRATEGY_NAMES}, "
                f"got {name!r}"
            )
        spec_kwargs = {"name": name}
        if name in ("gcbs", "ccbs"):
            target = _require(entry, "M", path)
            if not isinstance(target, int) or target < 2:
                raise ParameterError(f"config field {path}.M must be an integer >= 2")
            spec_kwargs["target_size"] = target
            spec_kwargs["randomize"] = bool(entry.get("randomize", False))
        if name == "gkkm":
            spec_kwargs["lambda_grid"] = tuple(
                float(x) for x in entry.get("lambda_grid", DEFAULT_LAMBDA_GRID)
            )
            grid = entry.get("m_grid")
            if grid is not None:
                if (not isinstance(grid, list)) or len(grid) != 2:
                    raise ParameterError(
                        f"config field {path}.m_grid must be [low, high]"
                    )
                spec_kwargs["m_grid"] = (int(grid[0]), int(grid[1]))
            spec_kwargs["restarts"] = int(entry.get("restarts", 3))
        if name in ("gkkm", "full"):
            mults = entry.get("sigma_multipliers")
            if mults is not None:
                spec_kwargs["sigma_multipliers"] = tuple(float(x) for x in mults)
            elif name == "gkkm":
                spec_kwargs["sigma_multipliers"] = DEFAULT_SIGMA_MULTIPLIERS
            spec_kwargs["tune_pixels"] = int(
                entry.get("tune_pixels", DEFAULT_TUNE_PIXELS)
            )
        strategies.append(StrategySpec(**spec_kwargs))

    repetitions = payload.get("repetitions", 1)
    if not isinstance(repetitions, int) or repetitions < 1:
        raise ParameterError("config field $.repetitions must be an integer >= 1")
    return ExperimentConfig(
        scene=scene,
        strategies=tuple(strategies),
        mu_reg=float(payload.get("mu_reg", 1e-2)),
        repetitions=repetitions,
        seed=int(payload.get("seed", 0)),
        n_threads=int(payload.get("threads", 1)),
        raw=payload,
    )


def config_hash(config: ExperimentConfig) -> str:
    payload = config.raw if config.raw is not None else asdict(config)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Result rows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    strategy: str
    target_size: int | None
    mu0: float | None
    sigma2: float
    nb_mean: float
    nb_std: float
    coherence: float | None
    rmse_mean: float
    rmse_std: float
    time_bs_s: float
    time_unmix_mean_s: float
    time_unmix_std_s: float
    n_failures: int = 0


def _fmt_cell(value):
    if value is None:
        return ""
    return MACHINE_FLOAT_FMT % value if isinstance(value, float) else str(value)


MACHINE_FLOAT_FMT = dataio.MACHINE_FLOAT_FMT


def write_results_csv(rows, path):
    lines = [",".join(RESULTS_COLUMNS)]
    for row in rows:
        cells = (
            row.strategy,
            row.target_size,
            row.mu0,
            row.sigma2,
            row.nb_mean,
            row.coherence,
            row.rmse_mean,
            row.rmse_std,
            row.time_bs_s,
            row.time_unmix_mean_s,
            row.time_unmix_std_s,
        )
        lines.append(",".join(_fmt_cell(c) for c in cells))
    Path(path).write_text("\n".join(lines) + "\n")


def format_results_table(rows) -> str:
    """Aligned human-readable table, 4 decimal places."""
    header = ("Strategy", "RMSE +/- STD", "Av. Time (s)", "N_b", "mu")
    body = []
    for row in rows:
        total_time = row.time_bs_s + row.time_unmix_mean_s
        nb = (
            f"{row.nb_mean:.2f} +/- {row.nb_std:.2f}"
            if row.nb_std > 0
            else f"{int(round(row.nb_mean))}"
        )
        body.append((
            row.strategy,
            f"{row.rmse_mean:.4f} +/- {row.rmse_std:.4f}",
            f"{total_time:.4f}",
            nb,
            "-" if row.coherence is None else f"{row.coherence:.4f}",
        ))
    widths = [
        max(len(header[c]), *(len(r[c]) for r in body)) if body else len(header[c])
        for c in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(cell.ljust(w) for cell, w in zip(r, widths)) for r in body)
    return "\n".join(lines)


def write_plot_data(rows, path):
    """Two-column (N_b, RMSE) file for external plotting, sorted by N_b."""
    ordered = sorted(rows, key=lambda r: r.nb_mean)
    lines = ["# Nb rmse_mean"]
    lines.extend(
        f"{MACHINE_FLOAT_FMT % r.nb_mean} {MACHINE_FLOAT_FMT % r.rmse_mean}"
        for r in ordered
    )
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------------

def _load_scene_materials(config: ExperimentConfig):
    """Return (endmembers, truth, clean_or_fixed_pixels, per_rep_noise)."""
    spec = config.scene
    if spec.from_files:
        scene = dataio.load_scene(spec.prefix)
        return scene.endmembers, scene.abundances, scene.pixels, False
    if spec.endmembers_csv is not None:
        M = dataio.read_endmembers_csv(spec.endmembers_csv)
    else:
        em_seed = spec.endmember_seed
        if em_seed is None:
            em_seed = np.random.SeedSequence([config.seed, 4])
        M = random_endmembers(spec.random_bands, spec.random_endmembers, seed=em_seed)
    scene = synth_scene(
        M, spec.n_pixels, spec.model, delta=spec.delta, xi=spec.xi,
        snr_db=None, seed=np.random.SeedSequence([config.seed, 0]),
    )
    return M, scene.abundances, scene.pixels, spec.snr_db is not None


def _noisy_copy(clean_pixels, snr_db, seed_entropy):
    streams = np.random.SeedSequence(seed_entropy).spawn(clean_pixels.shape[0])
    out = np.empty_like(clean_pixels)
    for i, stream in enumerate(streams):
        out[i] = add_noise(clean_pixels[i], snr_db, np.random.default_rng(stream))
    return out


def _tune_sigma_multiplier(spec, candidates, make_dictionary,
                           pixels, truth, M, mu_reg, n_threads):
    """Pick the (multiplier[, extra]) pair minimizing slice RMSE."""
    n_tune = min(spec.tune_pixels, pixels.shape[0])
    slice_pixels = pixels[:n_tune]
    slice_truth = truth[:n_tune]
    best = None
    for candidate in candidates:
        dictionary, sigma2 = make_dictionary(candidate)
        result = unmix_scene(
            slice_pixels, M, dictionary=dictionary, mu_reg=mu_reg,
            sigma2=sigma2, n_threads=n_threads,
        )
        rmse = rmse_abundance(slice_truth, result.abundances())
        if best is None or rmse < best[0]:
            best = (rmse, candidate, dictionary, sigma2)
    return best[1], best[2], best[3]


def run_experiment(config: ExperimentConfig, progress=None):
    """Execute every strategy; returns (rows, raw per-repetition records).

    Deterministic given the config seed (timing values aside): scenes,
    noise draws, permutations and clustering restarts all derive from it.
    """
    M, truth, base_pixels, renoise = _load_scene_materials(config)
    K1 = gram_matrix(M, 1.0)
    base_setting = auto_params(K1, 30)

    rep_pixels = []
    for rep in range(config.repetitions):
        if renoise:
            rep_pixels.append(
                _noisy_copy(base_pixels, config.scene.snr_db, [config.seed, 1, rep])
            )
        else:
            rep_pixels.append(base_pixels)

    rows = []
    records = []
    for s_index, spec in enumerate(config.strategies):
        if progress:
            progress(f"strategy {spec.label}")
        row, recs = _run_strategy(
            spec, s_index, config, M, K1, base_setting, truth, rep_pixels
        )
        rows.append(row)
        records.extend(recs)
    return rows, records


def _run_strategy(spec, s_index, config, M, K1, base_setting, truth, rep_pixels):
    L = M.shape[0]
    reps = config.repetitions
    mu_reg = config.mu_reg
    n_threads = config.n_threads

    dictionaries = [None] * reps     # per-rep dictionary (None = full bands)
    bs_times = [0.0] * reps
    sigma2 = base_setting.sigma2
    mu0 = None
    target = spec.target_size

    if spec.name in ("gcbs", "ccbs"):
        mu0 = 1.0 / (target - 1)
        if spec.randomize:
            for rep in range(reps):
                rng = np.random.default_rng(
                    np.random.SeedSequence([config.seed, 2, s_index, rep])
                )
                perm = rng.permutation(L)
                start = time.perf_counter()
                dictionaries[rep] = _select_permuted(spec.name, K1, target, perm)
                bs_times[rep] = time.perf_counter() - start
        else:
            start = time.perf_counter()
            dictionary = (
                gcbs(K1, target) if spec.name == "gcbs" else ccbs(K1, target)
            )
            elapsed = time.perf_counter() - start
            dictionaries = [dictionary] * reps
            bs_times = [elapsed] * reps
        sigma2 = dictionaries[0].sigma2
    elif spec.name == "gkkm":
        grid = spec.m_grid if spec.m_grid is not None else (2, max(3, L // 5))
        candidates = [
            (lam, mult)
            for lam in spec.lambda_grid
            for mult in (spec.sigma_multipliers or (1.0,))
        ]

        def make_dictionary(candidate):
            lam, mult = candidate
            s2 = base_setting.sigma2 * mult**2
            Ks = gram_power(K1, s2)
            d = gkkm_select(
                Ks, lam, range(grid[0], grid[1] + 1), restarts=spec.restarts,
                seed=np.random.SeedSequence([config.seed, 3, s_index]),
            )
            return d, s2

        winner, _, _ = _tune_sigma_multiplier(
            spec, candidates, make_dictionary,
            rep_pixels[0], truth, M, mu_reg, n_threads,
        )
        # selection is deterministic, so re-running the winner both yields
        # the final dictionary and times a single clean selection pass
        start = time.perf_counter()
        dictionary, sigma2 = make_dictionary(winner)
        elapsed = time.perf_counter() - start
        dictionaries = [dictionary] * reps
        bs_times = [elapsed] * reps
    else:  # full
        if spec.sigma_multipliers:
            def make_full(mult):
                return None, base_setting.sigma2 * mult**2

            _, _, sigma2 = _tune_sigma_multiplier(
                spec, list(spec.sigma_multipliers),
                make_full, rep_pixels[0], truth, M, mu_reg, n_threads,
            )
        dictionaries = [None] * reps

    rmses, unmix_times, nbs, coherences, fail_counts = [], [], [], [], []
    records = []
    for rep in range(reps):
        dictionary = dictionaries[rep]
        result = unmix_scene(
            rep_pixels[rep], M, dictionary=dictionary, mu_reg=mu_reg,
            sigma2=sigma2 if dictionary is None else None,
            n_threads=n_threads,
        )
        rmse = rmse_abundance(truth, result.abundances())
        rmses.append(rmse)
        unmix_times.append(result.elapsed_seconds)
        nbs.append(dictionary.size if dictionary else L)
        coherences.append(dictionary.coherence if dictionary else np.nan)
        fail_counts.append(result.n_failures)
        records.append({
            "strategy": spec.label,
            "repetition": rep,
            "rmse": rmse,
            "time_bs_s": bs_times[rep],
            "time_unmix_s": result.elapsed_seconds,
            "Nb": nbs[-1],
            "coherence": None if dictionary is None else dictionary.coherence,
            "n_failures": result.n_failures,
        })

    rmse_mean, rmse_std = _mean_std(rmses)
    nb_mean, nb_std = _mean_std(nbs)
    tu_mean, tu_std = _mean_std(unmix_times)
    coh = None
    if spec.name != "full":
        coh = float(np.mean(coherences))
    row = ResultRow(
        strategy=spec.label,
        target_size=target,
        mu0=mu0,
        sigma2=float(sigma2),
        nb_mean=nb_mean,
        nb_std=nb_std,
        coherence=coh,
        rmse_mean=rmse_mean,
        rmse_std=rmse_std,
        time_bs_s=float(np.mean(bs_times)),
        time_unmix_mean_s=tu_mean,
        time_unmix_std_s=tu_std,
        n_failures=int(sum(fail_counts)),
    )
    return row, records


def _select_permuted(name, K1: GramMatrix, target, perm):
    """Run selection with bands relabeled by ``perm``; map indices back."""
    if name == "gcbs":
        return gcbs(K1, target, order=perm)
    V = K1.values[np.ix_(perm, perm)]
    Kp = GramMatrix(V, 1.0)
    selected = ccbs(Kp, target)
    original = tuple(sorted(int(perm[j]) for j in selected.indices))
    return BandDictionary(
        indices=original,
        n_bands=K1.n_bands,
        sigma2=selected.sigma2,
        mu0=selected.mu0,
        coherence=selected.coherence,
        strategy=selected.strategy,
        target_size=selected.target_size,
    )


def write_experiment_outputs(config, rows, records, out_prefix):
    """Write CSV, text table, plot data, raw records, and metadata."""
    out_prefix = str(out_prefix)
    write_results_csv(rows, out_prefix + "_results.csv")
    table = format_results_table(rows)
    Path(out_prefix + "_results.txt").write_text(table + "\n")
    write_plot_data(rows, out_prefix + "_nb_vs_rmse.dat")
    Path(out_prefix + "_raw.json").write_text(
        json.dumps(records, indent=2, sort_keys=True) + "\n"
    )
    meta = {
        "config_sha256": config_hash(config),
        "seed": config.seed,
        "columns": list(RESULTS_COLUMNS),
    }
    Path(out_prefix + "_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )
    return table
