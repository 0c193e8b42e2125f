"""CSV / JSON persistence for endmembers, scenes, and dictionaries.

Machine-readable floats are written with 17 significant digits so that
round-trips are exact. CSV numeric files may carry comment lines starting
with '#'.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import InputError
from .mixing import SyntheticScene
from .selection import BandDictionary

MACHINE_FLOAT_FMT = "%.17g"


def write_matrix_csv(path, matrix, header=None):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    np.savetxt(
        path, matrix, fmt=MACHINE_FLOAT_FMT, delimiter=",",
        header=header or "", comments="# ",
    )


def read_matrix_csv(path, name="matrix"):
    path = Path(path)
    if not path.exists():
        raise InputError(f"{name} file not found: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise InputError(f"could not parse {name} CSV {path}: {exc}") from None
    if data.size == 0:
        raise InputError(f"{name} CSV {path} is empty")
    return data


def write_endmembers_csv(path, M):
    M = np.asarray(M, dtype=float)
    write_matrix_csv(path, M, header=f"bands={M.shape[0]} endmembers={M.shape[1]}")


def read_endmembers_csv(path):
    return read_matrix_csv(path, name="endmembers")


# ---------------------------------------------------------------------------
# Scenes: <prefix>_pixels.csv, _abundances.csv, _endmembers.csv, _meta.json
# ---------------------------------------------------------------------------

def scene_paths(prefix):
    prefix = str(prefix)
    return {
        "pixels": Path(prefix + "_pixels.csv"),
        "abundances": Path(prefix + "_abundances.csv"),
        "endmembers": Path(prefix + "_endmembers.csv"),
        "meta": Path(prefix + "_meta.json"),
    }


def save_scene(scene: SyntheticScene, prefix):
    paths = scene_paths(prefix)
    write_matrix_csv(paths["pixels"], scene.pixels)
    write_matrix_csv(paths["abundances"], scene.abundances)
    write_endmembers_csv(paths["endmembers"], scene.endmembers)
    meta = {
        "model": scene.model,
        "delta": scene.delta,
        "xi": scene.xi,
        "snr_db": scene.snr_db,
        "seed": scene.seed,
        "L": scene.n_bands,
        "R": scene.n_endmembers,
        "N": scene.n_pixels,
    }
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return paths


def load_scene(prefix) -> SyntheticScene:
    paths = scene_paths(prefix)
    pixels = read_matrix_csv(paths["pixels"], "pixels")
    abundances = read_matrix_csv(paths["abundances"], "abundances")
    endmembers = read_endmembers_csv(paths["endmembers"])
    if not paths["meta"].exists():
        raise InputError(f"scene metadata not found: {paths['meta']}")
    meta = json.loads(paths["meta"].read_text())
    if pixels.shape[0] != abundances.shape[0]:
        raise InputError("pixels and abundances disagree on pixel count")
    if pixels.shape[1] != endmembers.shape[0]:
        raise InputError("pixels and endmembers disagree on band count")
    return SyntheticScene(
        pixels=pixels,
        abundances=abundances,
        endmembers=endmembers,
        model=meta.get("model", "lmm"),
        delta=meta.get("delta"),
        xi=meta.get("xi"),
        snr_db=meta.get("snr_db"),
        seed=meta.get("seed"),
    )


# ---------------------------------------------------------------------------
# Band dictionaries
# ---------------------------------------------------------------------------

def dictionary_to_dict(dictionary: BandDictionary) -> dict:
    return {
        "strategy": dictionary.strategy.lower(),
        "M": dictionary.target_size,
        "mu0": dictionary.mu0,
        "sigma2": dictionary.sigma2,
        "indices": list(dictionary.indices),
        "coherence": dictionary.coherence,
        "Nb": dictionary.size,
        "L": dictionary.n_bands,
    }


def dictionary_from_dict(payload: dict) -> BandDictionary:
    try:
        return BandDictionary(
            indices=tuple(int(i) for i in payload["indices"]),
            n_bands=int(payload["L"]),
            sigma2=float(payload["sigma2"]),
            mu0=None if payload.get("mu0") is None else float(payload["mu0"]),
            coherence=float(payload["coherence"]),
            strategy=str(payload["strategy"]).upper(),
            target_size=None if payload.get("M") is None else int(payload["M"]),
        )
    except KeyError as exc:
        raise InputError(f"dictionary JSON missing field {exc.args[0]!r}") from None


def save_dictionary(dictionary: BandDictionary, path):
    Path(path).write_text(
        json.dumps(dictionary_to_dict(dictionary), indent=2, sort_keys=True) + "\n"
    )


def load_dictionary(path) -> BandDictionary:
    path = Path(path)
    if not path.exists():
        raise InputError(f"dictionary file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"could not parse dictionary JSON {path}: {exc}") from None
    return dictionary_from_dict(payload)
